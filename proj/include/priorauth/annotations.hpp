#pragma once

#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "priorauth/error.hpp"
#include "priorauth/judgment.hpp"

namespace priorauth {

/// Gold label for one leaf of one note.
struct EvidenceAnnotation {
  std::string note_id;
  std::string leaf_id;
  Judgment gold_judgment = Judgment::NoInformation;
  /// Exact substrings of the note.
  std::vector<std::string> gold_evidence;

  friend bool operator==(const EvidenceAnnotation&, const EvidenceAnnotation&) = default;
};

inline nlohmann::json to_json(const EvidenceAnnotation& a) {
  return {{"note_id", a.note_id},
          {"leaf_id", a.leaf_id},
          {"gold_judgment", std::string(to_string(a.gold_judgment))},
          {"gold_evidence", a.gold_evidence}};
}

inline EvidenceAnnotation annotation_from_json(const nlohmann::json& j) {
  EvidenceAnnotation a;
  try {
    a.note_id = j.at("note_id").get<std::string>();
    a.leaf_id = j.at("leaf_id").get<std::string>();
    auto g = parse_judgment(j.at("gold_judgment").get<std::string>());
    if (!g) throw SchemaError("bad gold_judgment");
    a.gold_judgment = *g;
    a.gold_evidence = j.value("gold_evidence", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad annotation: ") + e.what());
  }
  return a;
}

/// Reads line-delimited annotations; blank lines are skipped.
inline std::vector<EvidenceAnnotation> parse_annotations(std::istream& in) {
  std::vector<EvidenceAnnotation> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw SchemaError("annotation line is not JSON: " + line.substr(0, 80));
    out.push_back(annotation_from_json(j));
  }
  return out;
}

inline std::vector<EvidenceAnnotation> load_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open fixtures " + path);
  return parse_annotations(in);
}

/// Annotations indexed by (note_id, leaf_id).
class GoldLabels {
 public:
  GoldLabels() = default;
  explicit GoldLabels(const std::vector<EvidenceAnnotation>& annotations) {
    for (const auto& a : annotations) add(a);
  }

  void add(const EvidenceAnnotation& a) { by_key_[{a.note_id, a.leaf_id}] = a; }

  const EvidenceAnnotation* find(const std::string& note_id, const std::string& leaf_id) const {
    auto it = by_key_.find({note_id, leaf_id});
    return it == by_key_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return by_key_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, EvidenceAnnotation> by_key_;
};

}  // namespace priorauth
