#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "priorauth/checklist.hpp"
#include "priorauth/judgment.hpp"
#include "priorauth/propagation.hpp"

namespace priorauth {

/// One labelled parent-propagation example.
struct SyntheticRecord {
  ChecklistNode subchecklist;
  LeafAssignment leaf_assignments;
  Scored oracle;
};

enum class SyntheticMode {
  /// `count` records, cycling through the sub-checklists with random
  /// judgments per leaf.
  Sampled,
  /// Every 3^L judgment permutation of every sub-checklist.
  Exhaustive,
};

struct SyntheticOptions {
  SyntheticMode mode = SyntheticMode::Sampled;
  std::size_t count = 450;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

// Tenths grid {0.1, ..., 1.0}.
inline Confidence grid_confidence(std::mt19937_64& rng) {
  return {static_cast<std::int64_t>(bounded(rng, 10) + 1), 10};
}

inline SyntheticRecord make_record(const ChecklistNode& sub, const std::vector<Judgment>& judgments,
                                   std::mt19937_64& rng) {
  SyntheticRecord rec;
  rec.subchecklist = sub;
  const auto ls = leaves(sub);
  for (std::size_t i = 0; i < ls.size(); ++i) {
    rec.leaf_assignments.emplace(ls[i]->id, Scored{judgments[i], grid_confidence(rng)});
  }
  rec.oracle = propagate_tree(sub, rec.leaf_assignments).scored();
  return rec;
}

}  // namespace detail

/// Every internal node of every guideline, as a standalone sub-checklist.
inline std::vector<ChecklistNode> extract_subchecklists(const std::vector<ChecklistNode>& guidelines) {
  std::vector<ChecklistNode> subs;
  for (const auto& g : guidelines) {
    for (const auto* n : internal_nodes(g)) subs.push_back(*n);
  }
  return subs;
}

/// Deterministic parent-judgment dataset. Oracle values come from the
/// propagation engine.
inline std::vector<SyntheticRecord> generate_synthetic(const std::vector<ChecklistNode>& guidelines,
                                                       const SyntheticOptions& opt) {
  const auto subs = extract_subchecklists(guidelines);
  std::vector<SyntheticRecord> out;
  if (subs.empty()) return out;
  std::mt19937_64 rng(opt.seed);

  if (opt.mode == SyntheticMode::Exhaustive) {
    for (const auto& sub : subs) {
      const auto n_leaves = leaves(sub).size();
      std::size_t total = 1;
      for (std::size_t i = 0; i < n_leaves; ++i) total *= 3;
      for (std::size_t code = 0; code < total; ++code) {
        std::vector<Judgment> js(n_leaves);
        auto c = code;
        for (auto& j : js) {
          j = kAllJudgments[c % 3];
          c /= 3;
        }
        out.push_back(detail::make_record(sub, js, rng));
      }
    }
    return out;
  }

  out.reserve(opt.count);
  for (std::size_t i = 0; i < opt.count; ++i) {
    const auto& sub = subs[i % subs.size()];
    std::vector<Judgment> js(leaves(sub).size());
    for (auto& j : js) j = kAllJudgments[detail::bounded(rng, 3)];
    out.push_back(detail::make_record(sub, js, rng));
  }
  return out;
}

inline nlohmann::json to_json(const SyntheticRecord& r) {
  nlohmann::json assignments = nlohmann::json::object();
  for (const auto& [id, s] : r.leaf_assignments) {
    assignments[id] = {{"judgment", std::string(to_string(s.judgment))}, {"confidence", s.confidence.str()}};
  }
  return {{"subchecklist", to_json(r.subchecklist)},
          {"leaf_assignments", assignments},
          {"oracle_judgment", std::string(to_string(r.oracle.judgment))},
          {"oracle_confidence", r.oracle.confidence.str()}};
}

inline SyntheticRecord synthetic_record_from_json(const nlohmann::json& j) {
  SyntheticRecord r;
  r.subchecklist = checklist_from_json(j.at("subchecklist"));
  for (const auto& [id, v] : j.at("leaf_assignments").items()) {
    auto jv = parse_judgment(v.at("judgment").get<std::string>());
    if (!jv) throw SchemaError("bad judgment for leaf '" + id + "'");
    r.leaf_assignments.emplace(id, Scored{*jv, Confidence::parse(v.at("confidence").get<std::string>())});
  }
  auto oj = parse_judgment(j.at("oracle_judgment").get<std::string>());
  if (!oj) throw SchemaError("bad oracle_judgment");
  r.oracle = {*oj, Confidence::parse(j.at("oracle_confidence").get<std::string>())};
  return r;
}

/// Line-delimited JSON, one record per line.
inline std::string to_jsonl(const std::vector<SyntheticRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

}  // namespace priorauth
