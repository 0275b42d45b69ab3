#pragma once

#include <map>
#include <string>
#include <vector>

#include "priorauth/annotations.hpp"
#include "priorauth/checklist.hpp"
#include "priorauth/io.hpp"
#include "support/paths.hpp"

namespace testsupport {

/// One fixture set under data/fixtures/<name>: notes, gold annotations and
/// the expected decision per note.
struct FixtureSet {
  priorauth::ChecklistNode checklist;
  std::vector<priorauth::Document> notes;
  std::vector<priorauth::EvidenceAnnotation> annotations;
  std::map<std::string, int> expected_y;
};

inline FixtureSet load_fixture_set(const std::string& name) {
  const auto dir = source_dir() / "data" / "fixtures" / name;
  FixtureSet f;
  f.checklist = priorauth::parse_checklist(read_file(checklist_dir() / "therapeutic_footwear.json"));
  f.annotations = priorauth::load_annotations((dir / "annotations.jsonl").string());
  const auto expected = priorauth::read_json_file(dir / "expected.json");
  for (const auto& [id, y] : expected.items()) {
    f.expected_y[id] = y.get<int>();
    f.notes.push_back(priorauth::load_document(dir / "notes" / (id + ".txt")));
  }
  return f;
}

}  // namespace testsupport
