#pragma once

// Reference evaluator for checklist propagation, kept independent of the
// library: its own node type, integer confidences (numerator over a fixed
// denominator) and explicit pairwise tables folded left to right.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace testsupport {

enum class Tv { T = 0, F = 1, N = 2 };
enum class RefOp { Leaf, And, Or, Not };

struct RefNode {
  RefOp op = RefOp::Leaf;
  std::vector<RefNode> kids;
  int leaf_index = -1;
};

struct RefValue {
  Tv v;
  std::int64_t f;  // confidence numerator
  bool operator==(const RefValue&) const = default;
};

// How the pair's confidence is chosen.
enum class Pick { Left, Right, Min, Max };

struct Cell {
  Tv v;
  Pick pick;
};

// AND table, rows = left, cols = right, order T F N.
//   T AND T = T, min of the True confidences
//   F AND F = F, max of the False confidences
//   F AND x = F keeps the False side; T AND N = N keeps the N side
//   N AND N = N, min of the No-Information confidences
inline constexpr std::array<std::array<Cell, 3>, 3> kAndTable{{
    {{{Tv::T, Pick::Min}, {Tv::F, Pick::Right}, {Tv::N, Pick::Right}}},
    {{{Tv::F, Pick::Left}, {Tv::F, Pick::Max}, {Tv::F, Pick::Left}}},
    {{{Tv::N, Pick::Left}, {Tv::F, Pick::Right}, {Tv::N, Pick::Min}}},
}};

// OR table.
//   T OR T = T, max; F OR F = F, min; T OR x = T keeps the True side
//   F OR N = N keeps the N side; N OR N = N, min
inline constexpr std::array<std::array<Cell, 3>, 3> kOrTable{{
    {{{Tv::T, Pick::Max}, {Tv::T, Pick::Left}, {Tv::T, Pick::Left}}},
    {{{Tv::T, Pick::Right}, {Tv::F, Pick::Min}, {Tv::N, Pick::Right}}},
    {{{Tv::T, Pick::Right}, {Tv::N, Pick::Left}, {Tv::N, Pick::Min}}},
}};

inline RefValue combine(const std::array<std::array<Cell, 3>, 3>& table, RefValue a, RefValue b) {
  const Cell c = table[static_cast<int>(a.v)][static_cast<int>(b.v)];
  std::int64_t f = 0;
  switch (c.pick) {
    case Pick::Left: f = a.f; break;
    case Pick::Right: f = b.f; break;
    case Pick::Min: f = a.f < b.f ? a.f : b.f; break;
    case Pick::Max: f = a.f > b.f ? a.f : b.f; break;
  }
  return {c.v, f};
}

inline RefValue evaluate(const RefNode& n, const std::vector<RefValue>& leaf_values) {
  switch (n.op) {
    case RefOp::Leaf:
      return leaf_values.at(static_cast<std::size_t>(n.leaf_index));
    case RefOp::Not: {
      if (n.kids.size() != 1) throw std::logic_error("NOT arity");
      auto r = evaluate(n.kids[0], leaf_values);
      if (r.v == Tv::T) {
        r.v = Tv::F;
      } else if (r.v == Tv::F) {
        r.v = Tv::T;
      }
      return r;
    }
    case RefOp::And:
    case RefOp::Or: {
      const auto& table = n.op == RefOp::And ? kAndTable : kOrTable;
      auto acc = evaluate(n.kids.at(0), leaf_values);
      for (std::size_t i = 1; i < n.kids.size(); ++i) acc = combine(table, acc, evaluate(n.kids[i], leaf_values));
      return acc;
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace testsupport
