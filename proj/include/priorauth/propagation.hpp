#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "priorauth/checklist.hpp"
#include "priorauth/error.hpp"
#include "priorauth/judgment.hpp"

namespace priorauth {

/// Combines child results under one operator.
///
/// Judgment follows the three-valued rule table: AND is False if any child
/// is False, else NoInformation if any child is, else True; OR is the dual;
/// NOT swaps True/False and keeps NoInformation.
///
/// Confidence is selected from the children that share the result's class:
///   AND  True -> min,  False -> max,  NoInformation -> min
///   OR   True -> max,  False -> min,  NoInformation -> min
///   NOT  unchanged
inline Scored propagate_node(Operator op, std::span<const Scored> children) {
  if (children.empty()) throw EmptyChildren("operator " + std::string(to_string(op)) + " with no children");

  if (op == Operator::Not) {
    if (children.size() != 1) {
      throw ArityError("NOT takes exactly one child, got " + std::to_string(children.size()));
    }
    Scored r = children.front();
    if (r.judgment == Judgment::True) {
      r.judgment = Judgment::False;
    } else if (r.judgment == Judgment::False) {
      r.judgment = Judgment::True;
    }
    return r;
  }

  auto any = [&](Judgment j) {
    return std::any_of(children.begin(), children.end(), [j](const Scored& s) { return s.judgment == j; });
  };

  // The "dominant" value decides outright (False for AND, True for OR); the
  // "neutral" value is what every child must be for the other outcome.
  const Judgment dominant = op == Operator::And ? Judgment::False : Judgment::True;
  const Judgment neutral = op == Operator::And ? Judgment::True : Judgment::False;

  Judgment result = neutral;
  if (any(dominant)) {
    result = dominant;
  } else if (any(Judgment::NoInformation)) {
    result = Judgment::NoInformation;
  }

  // AND-False and OR-True take the strongest witness; all other cases take
  // the weakest link.
  const bool take_max = result == dominant;

  std::optional<Confidence> pick;
  for (const auto& c : children) {
    if (c.judgment != result) continue;
    if (!pick) {
      pick = c.confidence;
    } else {
      pick = take_max ? std::max(*pick, c.confidence) : std::min(*pick, c.confidence);
    }
  }
  return {result, *pick};
}

inline Scored propagate_node(Operator op, std::initializer_list<Scored> children) {
  return propagate_node(op, std::span<const Scored>(children.begin(), children.size()));
}

/// Result for one checklist node; mirrors the checklist tree.
struct NodeResult {
  std::string node_id;
  Judgment judgment = Judgment::NoInformation;
  Confidence confidence;
  std::vector<NodeResult> children;

  Scored scored() const { return {judgment, confidence}; }

  friend bool operator==(const NodeResult&, const NodeResult&) = default;
};

using LeafAssignment = std::map<std::string, Scored>;

namespace detail {

inline NodeResult propagate_rec(const ChecklistNode& node, const LeafAssignment& leaves_in,
                                std::size_t& used) {
  NodeResult r;
  r.node_id = node.id;
  if (node.is_leaf()) {
    auto it = leaves_in.find(node.id);
    if (it == leaves_in.end()) throw MissingLeafResult("no result for leaf '" + node.id + "'");
    ++used;
    r.judgment = it->second.judgment;
    r.confidence = it->second.confidence;
    return r;
  }
  std::vector<Scored> child_scores;
  child_scores.reserve(node.children.size());
  for (const auto& c : node.children) {
    r.children.push_back(propagate_rec(c, leaves_in, used));
    child_scores.push_back(r.children.back().scored());
  }
  auto s = propagate_node(*node.op, child_scores);
  r.judgment = s.judgment;
  r.confidence = s.confidence;
  return r;
}

}  // namespace detail

/// Bottom-up evaluation of the whole tree from leaf results.
inline NodeResult propagate_tree(const ChecklistNode& root, const LeafAssignment& leaf_results) {
  std::size_t used = 0;
  auto result = detail::propagate_rec(root, leaf_results, used);
  if (used != leaf_results.size()) {
    for (const auto& [id, _] : leaf_results) {
      const auto* n = find_node(root, id);
      if (n == nullptr || !n->is_leaf()) throw UnknownLeafId("'" + id + "' is not a leaf of this checklist");
    }
  }
  return result;
}

/// Replaces one leaf result and recomputes only that leaf's ancestors.
/// `previous` must be a complete result tree for `root`.
inline NodeResult repropagate(const ChecklistNode& root, NodeResult previous,
                              const std::string& leaf_id, Scored leaf_value) {
  auto path = path_to(root, leaf_id);
  if (path.empty() || !path.back()->is_leaf()) {
    throw UnknownLeafId("'" + leaf_id + "' is not a leaf of this checklist");
  }

  // Walk the result tree along the same child indices.
  std::vector<NodeResult*> chain{&previous};
  for (std::size_t depth = 1; depth < path.size(); ++depth) {
    const auto& siblings = path[depth - 1]->children;
    const auto idx = static_cast<std::size_t>(
        std::find_if(siblings.begin(), siblings.end(),
                     [&](const ChecklistNode& c) { return &c == path[depth]; }) -
        siblings.begin());
    chain.push_back(&chain.back()->children.at(idx));
  }

  chain.back()->judgment = leaf_value.judgment;
  chain.back()->confidence = leaf_value.confidence;
  for (std::size_t depth = path.size() - 1; depth-- > 0;) {
    std::vector<Scored> child_scores;
    for (const auto& c : chain[depth]->children) child_scores.push_back(c.scored());
    auto s = propagate_node(*path[depth]->op, child_scores);
    chain[depth]->judgment = s.judgment;
    chain[depth]->confidence = s.confidence;
  }
  return previous;
}

/// Leaf results stored in a result tree.
inline LeafAssignment leaf_assignment(const NodeResult& tree) {
  LeafAssignment out;
  std::function<void(const NodeResult&)> walk = [&](const NodeResult& n) {
    if (n.children.empty()) {
      out.emplace(n.node_id, n.scored());
      return;
    }
    for (const auto& c : n.children) walk(c);
  };
  walk(tree);
  return out;
}

inline const NodeResult* find_result(const NodeResult& tree, std::string_view id) {
  if (tree.node_id == id) return &tree;
  for (const auto& c : tree.children) {
    if (const auto* r = find_result(c, id)) return r;
  }
  return nullptr;
}

inline nlohmann::json to_json(const NodeResult& r) {
  nlohmann::json j;
  j["node_id"] = r.node_id;
  j["judgment"] = std::string(to_string(r.judgment));
  j["confidence"] = r.confidence.str();
  j["confidence_value"] = r.confidence.value();
  j["children"] = nlohmann::json::array();
  for (const auto& c : r.children) j["children"].push_back(to_json(c));
  return j;
}

inline NodeResult node_result_from_json(const nlohmann::json& j) {
  NodeResult r;
  r.node_id = j.at("node_id").get<std::string>();
  auto jv = parse_judgment(j.at("judgment").get<std::string>());
  if (!jv) throw SchemaError("bad judgment in node result '" + r.node_id + "'");
  r.judgment = *jv;
  r.confidence = Confidence::parse(j.at("confidence").get<std::string>());
  if (j.contains("children")) {
    for (const auto& c : j["children"]) r.children.push_back(node_result_from_json(c));
  }
  return r;
}

}  // namespace priorauth
