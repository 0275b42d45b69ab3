#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "priorauth/error.hpp"

namespace priorauth {

enum class Operator { And, Or, Not };

inline std::string_view to_string(Operator op) {
  switch (op) {
    case Operator::And: return "AND";
    case Operator::Or: return "OR";
    case Operator::Not: return "NOT";
  }
  return "AND";
}

inline std::optional<Operator> parse_operator(std::string_view s) {
  if (s == "AND" || s == "and" || s == "And") return Operator::And;
  if (s == "OR" || s == "or" || s == "Or") return Operator::Or;
  if (s == "NOT" || s == "not" || s == "Not") return Operator::Not;
  return std::nullopt;
}

/// One guideline statement. Internal nodes combine their children with a
/// single operator; leaves carry a testable criterion.
struct ChecklistNode {
  std::string id;
  std::string text;
  std::optional<Operator> op;
  std::vector<ChecklistNode> children;

  bool is_leaf() const { return children.empty(); }

  friend bool operator==(const ChecklistNode&, const ChecklistNode&) = default;
};

namespace detail {

inline void check_node_shape(const ChecklistNode& n, bool require_operator) {
  if (n.children.empty()) {
    if (n.op) {
      throw StructureError("node '" + n.id + "' has operator " +
                           std::string(to_string(*n.op)) + " but no children");
    }
    return;
  }
  if (!n.op) {
    if (require_operator) throw StructureError("internal node '" + n.id + "' has no operator");
    return;
  }
  if (*n.op == Operator::Not && n.children.size() != 1) {
    throw StructureError("NOT node '" + n.id + "' must have exactly one child, has " +
                         std::to_string(n.children.size()));
  }
  if (*n.op != Operator::Not && n.children.size() < 2) {
    throw StructureError(std::string(to_string(*n.op)) + " node '" + n.id +
                         "' needs at least two children");
  }
}

inline void validate_rec(const ChecklistNode& n, const ChecklistNode* parent, bool parent_is_root,
                         bool require_operator, std::unordered_set<std::string>& seen) {
  if (n.id.empty()) throw StructureError("node with empty id");
  if (!seen.insert(n.id).second) throw StructureError("duplicate node id '" + n.id + "'");
  if (parent != nullptr && !parent_is_root) {
    const auto& pid = parent->id;
    if (n.id.size() <= pid.size() + 1 || n.id.compare(0, pid.size(), pid) != 0 ||
        n.id[pid.size()] != '.') {
      throw StructureError("child id '" + n.id + "' does not extend parent id '" + pid + "'");
    }
  }
  check_node_shape(n, require_operator);
  for (const auto& c : n.children) {
    validate_rec(c, &n, parent == nullptr, require_operator, seen);
  }
}

inline ChecklistNode node_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path + ": node must be an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "id" && key != "text" && key != "operator" && key != "children") {
      throw SchemaError(path + ": unknown field '" + key + "'");
    }
  }
  ChecklistNode n;
  if (!j.contains("id") || !j["id"].is_string()) throw SchemaError(path + ": 'id' must be a string");
  n.id = j["id"].get<std::string>();
  if (!j.contains("text") || !j["text"].is_string()) {
    throw SchemaError(path + ": 'text' must be a string");
  }
  n.text = j["text"].get<std::string>();
  if (j.contains("operator") && !j["operator"].is_null()) {
    if (!j["operator"].is_string()) throw SchemaError(path + ": 'operator' must be a string");
    n.op = parse_operator(j["operator"].get<std::string>());
    if (!n.op) {
      throw SchemaError(path + ": unknown operator '" + j["operator"].get<std::string>() + "'");
    }
  }
  if (j.contains("children") && !j["children"].is_null()) {
    if (!j["children"].is_array()) throw SchemaError(path + ": 'children' must be an array");
    std::size_t i = 0;
    for (const auto& c : j["children"]) {
      n.children.push_back(node_from_json(c, path + ".children[" + std::to_string(i++) + "]"));
    }
  }
  return n;
}

}  // namespace detail

/// Checks every structural invariant. Throws StructureError.
inline void validate(const ChecklistNode& root) {
  std::unordered_set<std::string> seen;
  detail::validate_rec(root, nullptr, false, true, seen);
}

/// Parses a checklist tree from its JSON form and validates it.
inline ChecklistNode checklist_from_json(const nlohmann::json& doc) {
  auto root = detail::node_from_json(doc, "$");
  validate(root);
  return root;
}

inline ChecklistNode parse_checklist(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("checklist is not valid JSON: ") + e.what());
  }
  return checklist_from_json(doc);
}

/// Like parse_checklist, but internal nodes may omit their operator. Used
/// for guideline drafts whose operators are still to be extracted.
inline ChecklistNode parse_draft_checklist(const nlohmann::json& doc) {
  auto root = detail::node_from_json(doc, "$");
  std::unordered_set<std::string> seen;
  detail::validate_rec(root, nullptr, false, false, seen);
  return root;
}

inline nlohmann::json to_json(const ChecklistNode& n) {
  nlohmann::json j;
  j["id"] = n.id;
  j["text"] = n.text;
  if (n.op) j["operator"] = std::string(to_string(*n.op));
  if (!n.children.empty()) {
    j["children"] = nlohmann::json::array();
    for (const auto& c : n.children) j["children"].push_back(to_json(c));
  }
  return j;
}

/// Leaves in depth-first, left-to-right order.
inline std::vector<const ChecklistNode*> leaves(const ChecklistNode& root) {
  std::vector<const ChecklistNode*> out;
  std::function<void(const ChecklistNode&)> walk = [&](const ChecklistNode& n) {
    if (n.is_leaf()) {
      out.push_back(&n);
      return;
    }
    for (const auto& c : n.children) walk(c);
  };
  walk(root);
  return out;
}

inline std::vector<std::string> leaf_ids(const ChecklistNode& root) {
  std::vector<std::string> ids;
  for (const auto* l : leaves(root)) ids.push_back(l->id);
  return ids;
}

/// Path from the root to the node with `id`, inclusive; empty if absent.
inline std::vector<const ChecklistNode*> path_to(const ChecklistNode& root, std::string_view id) {
  std::vector<const ChecklistNode*> path;
  std::function<bool(const ChecklistNode&)> walk = [&](const ChecklistNode& n) {
    path.push_back(&n);
    if (n.id == id) return true;
    for (const auto& c : n.children) {
      if (walk(c)) return true;
    }
    path.pop_back();
    return false;
  };
  walk(root);
  return path;
}

inline const ChecklistNode* find_node(const ChecklistNode& root, std::string_view id) {
  auto p = path_to(root, id);
  return p.empty() ? nullptr : p.back();
}

/// Every internal node, post-order.
inline std::vector<const ChecklistNode*> internal_nodes(const ChecklistNode& root) {
  std::vector<const ChecklistNode*> out;
  std::function<void(const ChecklistNode&)> walk = [&](const ChecklistNode& n) {
    for (const auto& c : n.children) walk(c);
    if (!n.is_leaf()) out.push_back(&n);
  };
  walk(root);
  return out;
}

}  // namespace priorauth
