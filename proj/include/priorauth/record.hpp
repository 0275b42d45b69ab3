#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "priorauth/agents.hpp"
#include "priorauth/checklist.hpp"
#include "priorauth/error.hpp"
#include "priorauth/ingest.hpp"
#include "priorauth/judgment.hpp"
#include "priorauth/propagation.hpp"
#include "priorauth/retrieval.hpp"
#include "priorauth/text.hpp"

namespace priorauth {

/// Everything that parameterizes one adjudication run.
struct PipelineConfig {
  std::size_t k = kDefaultTopK;
  /// Prefix leaf queries with their ancestors' texts.
  bool ancestor_context = false;
  /// "lexical", "test" or an encoder URL.
  std::string encoder = "lexical";
  std::size_t encoder_dim = 384;
  AgentConfig agents;
  /// Records whose root confidence falls below this go to review.
  double review_threshold = 0.7;
  /// Leaves processed concurrently.
  std::size_t leaf_parallelism = 4;

  void validate() const {
    if (k < 1 || k > kMaxTopK) throw ConfigError("k must be in [1, " + std::to_string(kMaxTopK) + "]");
    if (encoder_dim < 1) throw ConfigError("encoder_dim must be positive");
    if (review_threshold < 0.0 || review_threshold > 1.0) throw ConfigError("threshold must be in [0, 1]");
    if (leaf_parallelism < 1) throw ConfigError("leaf_parallelism must be at least 1");
    agents.validate();
  }
};

inline nlohmann::json to_json(const PipelineConfig& c) {
  return {{"k", c.k},
          {"ancestor_context", c.ancestor_context},
          {"encoder", c.encoder},
          {"encoder_dim", c.encoder_dim},
          {"n_votes", c.agents.n_votes},
          {"strategy", std::string(to_string(c.agents.strategy))},
          {"temperature", c.agents.temperature},
          {"max_retries", c.agents.max_retries},
          {"client", c.agents.client},
          {"max_in_flight", c.agents.max_in_flight},
          {"threshold", c.review_threshold},
          {"leaf_parallelism", c.leaf_parallelism}};
}

/// Applies the keys present in `j` on top of `base`. Unknown keys are errors.
inline PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "k") {
        base.k = v.get<std::size_t>();
      } else if (key == "ancestor_context") {
        base.ancestor_context = v.get<bool>();
      } else if (key == "encoder") {
        base.encoder = v.get<std::string>();
      } else if (key == "encoder_dim") {
        base.encoder_dim = v.get<std::size_t>();
      } else if (key == "n_votes") {
        base.agents.n_votes = v.get<std::size_t>();
      } else if (key == "strategy") {
        auto s = parse_strategy(v.get<std::string>());
        if (!s) throw ConfigError("unknown strategy '" + v.get<std::string>() + "'");
        base.agents.strategy = *s;
      } else if (key == "temperature") {
        base.agents.temperature = v.get<double>();
      } else if (key == "max_retries") {
        base.agents.max_retries = v.get<std::size_t>();
      } else if (key == "client") {
        base.agents.client = v.get<std::string>();
      } else if (key == "max_in_flight") {
        base.agents.max_in_flight = v.get<std::size_t>();
      } else if (key == "threshold") {
        base.review_threshold = v.get<double>();
      } else if (key == "leaf_parallelism") {
        base.leaf_parallelism = v.get<std::size_t>();
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  base.validate();
  return base;
}

enum class RecordStatus { Pending, Completed, NeedsReview, Overridden, Failed };

inline std::string_view to_string(RecordStatus s) {
  switch (s) {
    case RecordStatus::Pending: return "Pending";
    case RecordStatus::Completed: return "Completed";
    case RecordStatus::NeedsReview: return "NeedsReview";
    case RecordStatus::Overridden: return "Overridden";
    case RecordStatus::Failed: return "Failed";
  }
  return "Pending";
}

inline std::optional<RecordStatus> parse_status(std::string_view s) {
  for (auto st : {RecordStatus::Pending, RecordStatus::Completed, RecordStatus::NeedsReview, RecordStatus::Overridden,
                  RecordStatus::Failed}) {
    if (s == to_string(st)) return st;
  }
  return std::nullopt;
}

/// UTC time as "YYYY-MM-DDTHH:MM:SSZ".
inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// One reviewer action on a record.
struct AuditEntry {
  std::string record_id;
  std::string action;  // "override" | "revert"
  std::string leaf_id;
  std::string reviewer;
  std::string note;
  std::string at;
  Scored old_value;
  Scored new_value;
  int old_y = 0;
  int new_y = 0;
  std::uint64_t version = 0;  // record version after the action

  friend bool operator==(const AuditEntry&, const AuditEntry&) = default;
};

inline nlohmann::json to_json(const Scored& s) {
  return {{"judgment", std::string(to_string(s.judgment))}, {"confidence", s.confidence.str()}};
}

inline Scored scored_from_json(const nlohmann::json& j) {
  auto jv = parse_judgment(j.at("judgment").get<std::string>());
  if (!jv) throw SchemaError("bad judgment");
  return {*jv, Confidence::parse(j.at("confidence").get<std::string>())};
}

inline nlohmann::json to_json(const AuditEntry& a) {
  return {{"record_id", a.record_id}, {"action", a.action}, {"leaf_id", a.leaf_id}, {"reviewer", a.reviewer},
          {"note", a.note},           {"at", a.at},         {"old", to_json(a.old_value)},
          {"new", to_json(a.new_value)}, {"old_y", a.old_y}, {"new_y", a.new_y}, {"version", a.version}};
}

inline AuditEntry audit_entry_from_json(const nlohmann::json& j) {
  AuditEntry a;
  a.record_id = j.at("record_id").get<std::string>();
  a.action = j.at("action").get<std::string>();
  a.leaf_id = j.at("leaf_id").get<std::string>();
  a.reviewer = j.at("reviewer").get<std::string>();
  a.note = j.value("note", std::string{});
  a.at = j.value("at", std::string{});
  a.old_value = scored_from_json(j.at("old"));
  a.new_value = scored_from_json(j.at("new"));
  a.old_y = j.at("old_y").get<int>();
  a.new_y = j.at("new_y").get<int>();
  a.version = j.at("version").get<std::uint64_t>();
  return a;
}

struct PipelineFailure {
  std::string stage;
  std::string message;
};

/// The persisted output of one adjudication: the decision Y, the node
/// tree, and per-leaf evidence, plus everything needed to replay it.
struct AdjudicationRecord {
  std::string id;
  std::string case_id;
  ChecklistNode checklist;
  std::vector<Document> documents;
  std::string documents_digest;
  PipelineConfig config;
  std::string client_id;
  std::string encoder_id;
  std::optional<NodeResult> tree;
  /// Current per-leaf results in checklist leaf order.
  std::vector<LeafResult> leaf_results;
  /// Machine results of leaves a reviewer has overridden, keyed by leaf id.
  std::map<std::string, LeafResult> original_leaf_results;
  std::optional<NecessityDecision> decision;
  RecordStatus status = RecordStatus::Pending;
  std::uint64_t version = 0;
  std::vector<AuditEntry> audit;
  std::optional<PipelineFailure> failure;
  std::string created_at;
  std::string updated_at;

  LeafResult* find_leaf(std::string_view leaf_id) {
    for (auto& l : leaf_results) {
      if (l.leaf_id == leaf_id) return &l;
    }
    return nullptr;
  }
  const LeafResult* find_leaf(std::string_view leaf_id) const {
    return const_cast<AdjudicationRecord*>(this)->find_leaf(leaf_id);
  }
};

/// Stable digest of a document set: FNV-1a over the canonical JSON of each
/// document in order.
inline std::string documents_digest(const std::vector<Document>& docs) {
  std::string canon;
  for (const auto& d : docs) canon += to_json(d).dump() + '\n';
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(fnv1a64(canon)));
  return buf;
}

/// Status implied by the threshold rule for a machine-produced tree.
inline RecordStatus threshold_status(const NecessityDecision& d, double threshold) {
  return d.root_confidence.value() < threshold ? RecordStatus::NeedsReview : RecordStatus::Completed;
}

inline nlohmann::json to_json(const AdjudicationRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["case_id"] = r.case_id;
  j["checklist"] = to_json(r.checklist);
  j["documents"] = nlohmann::json::array();
  for (const auto& d : r.documents) j["documents"].push_back(to_json(d));
  j["documents_digest"] = r.documents_digest;
  j["config"] = to_json(r.config);
  j["client_id"] = r.client_id;
  j["encoder_id"] = r.encoder_id;
  j["tree"] = r.tree ? to_json(*r.tree) : nlohmann::json(nullptr);
  j["leaf_results"] = nlohmann::json::array();
  for (const auto& l : r.leaf_results) j["leaf_results"].push_back(to_json(l));
  j["original_leaf_results"] = nlohmann::json::object();
  for (const auto& [id, l] : r.original_leaf_results) j["original_leaf_results"][id] = to_json(l);
  if (r.decision) {
    j["decision"] = {{"y", r.decision->y},
                     {"root_confidence", r.decision->root_confidence.str()},
                     {"root_confidence_value", r.decision->root_confidence.value()}};
  } else {
    j["decision"] = nullptr;
  }
  j["status"] = std::string(to_string(r.status));
  j["version"] = r.version;
  j["audit"] = nlohmann::json::array();
  for (const auto& a : r.audit) j["audit"].push_back(to_json(a));
  j["failure"] = r.failure ? nlohmann::json{{"stage", r.failure->stage}, {"message", r.failure->message}}
                           : nlohmann::json(nullptr);
  j["created_at"] = r.created_at;
  j["updated_at"] = r.updated_at;
  return j;
}

inline AdjudicationRecord record_from_json(const nlohmann::json& j) {
  AdjudicationRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.case_id = j.at("case_id").get<std::string>();
    r.checklist = checklist_from_json(j.at("checklist"));
    for (const auto& d : j.at("documents")) r.documents.push_back(document_from_json(d));
    r.documents_digest = j.at("documents_digest").get<std::string>();
    r.config = config_from_json(j.at("config"));
    r.client_id = j.value("client_id", std::string{});
    r.encoder_id = j.value("encoder_id", std::string{});
    if (!j.at("tree").is_null()) r.tree = node_result_from_json(j["tree"]);
    for (const auto& l : j.at("leaf_results")) r.leaf_results.push_back(leaf_result_from_json(l));
    for (const auto& [id, l] : j.at("original_leaf_results").items()) {
      r.original_leaf_results[id] = leaf_result_from_json(l);
    }
    if (!j.at("decision").is_null()) {
      r.decision = NecessityDecision{j["decision"].at("y").get<int>(),
                                     Confidence::parse(j["decision"].at("root_confidence").get<std::string>())};
    }
    auto st = parse_status(j.at("status").get<std::string>());
    if (!st) throw SchemaError("bad record status");
    r.status = *st;
    r.version = j.at("version").get<std::uint64_t>();
    for (const auto& a : j.at("audit")) r.audit.push_back(audit_entry_from_json(a));
    if (!j.at("failure").is_null()) {
      r.failure = PipelineFailure{j["failure"].at("stage").get<std::string>(),
                                  j["failure"].at("message").get<std::string>()};
    }
    r.created_at = j.value("created_at", std::string{});
    r.updated_at = j.value("updated_at", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad adjudication record: ") + e.what());
  }
  return r;
}

/// Leaf results as a propagation input.
inline LeafAssignment leaf_assignment(const AdjudicationRecord& r) {
  LeafAssignment a;
  for (const auto& l : r.leaf_results) a[l.leaf_id] = l.scored();
  return a;
}

/// True when re-propagating the stored leaf results reproduces the stored
/// tree and decision byte for byte.
inline bool replay_matches(const AdjudicationRecord& r) {
  if (!r.tree || !r.decision) return false;
  const auto tree = propagate_tree(r.checklist, leaf_assignment(r));
  const auto decision = make_decision(tree.scored());
  auto dump_decision = [](const NecessityDecision& d) {
    return nlohmann::json{{"y", d.y}, {"root_confidence", d.root_confidence.str()}}.dump();
  };
  return to_json(tree).dump() == to_json(*r.tree).dump() && dump_decision(decision) == dump_decision(*r.decision);
}

}  // namespace priorauth
