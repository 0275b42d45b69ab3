#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "priorauth/ingest.hpp"
#include "support/paths.hpp"

using namespace priorauth;

namespace {

std::vector<std::string> texts(const std::vector<DocumentChunk>& cs) {
  std::vector<std::string> out;
  for (const auto& c : cs) out.push_back(c.text);
  return out;
}

std::string strip_ws(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  }
  return out;
}

}  // namespace

TEST(ChunkText, TwoSentences) {
  auto cs = chunk_text("n1", "Patient has diabetes. No ulcers noted.");
  EXPECT_EQ(texts(cs), (std::vector<std::string>{"Patient has diabetes.", "No ulcers noted."}));
  EXPECT_EQ(cs[0].chunk_id, "n1#s0000");
  EXPECT_EQ(cs[1].chunk_id, "n1#s0001");
  EXPECT_EQ(cs[1].kind, ChunkKind::Sentence);
}

TEST(ChunkText, AbbreviationGuard) {
  EXPECT_EQ(texts(chunk_text("n", "Dr. Smith saw pt.")), (std::vector<std::string>{"Dr. Smith saw pt."}));
}

TEST(ChunkText, EmptyInput) {
  EXPECT_THROW(chunk_text("n", ""), EmptyInput);
  EXPECT_THROW(chunk_text("n", " \n\t "), EmptyInput);
}

TEST(ChunkText, DecimalsDoNotSplit) {
  EXPECT_EQ(texts(chunk_text("n", "HbA1c 8.2 today. Next.")),
            (std::vector<std::string>{"HbA1c 8.2 today.", "Next."}));
}

TEST(ChunkText, UnterminatedTailIsAChunk) {
  EXPECT_EQ(texts(chunk_text("n", "Stable. No acute distress")),
            (std::vector<std::string>{"Stable.", "No acute distress"}));
}

TEST(ChunkText, HandLabeledFixture) {
  const auto note = testsupport::read_file(testsupport::data_dir() / "sentence_fixture_note.txt");
  const auto expected = nlohmann::json::parse(testsupport::read_file(testsupport::data_dir() /
                                                                     "sentence_fixture_expected.json"))
                            .get<std::vector<std::string>>();
  ASSERT_EQ(expected.size(), 50u);
  EXPECT_EQ(texts(chunk_text("fixture", note)), expected);
}

TEST(ChunkText, LongNoteChunkCount) {
  std::string note;
  for (int i = 0; i < 300; ++i) note += "Observation number " + std::to_string(i) + " was unremarkable. ";
  EXPECT_EQ(chunk_text("n", note).size(), 300u);
}

// Every chunk is an exact slice of the note at its recorded offset, and
// the chunks reassemble the note modulo whitespace.
TEST(ChunkTextProperty, SubstringAndReconstruction) {
  std::mt19937_64 rng(17);
  const std::vector<std::string> pieces{"Dr. ", "Smith ", "noted ", "8.5 ", "mg. ",  "ulcer", ". ", "? ",
                                        "! ",   "\n",    "\n\n",  "Plan:\n", "e.g. ", "vs. ", "foot ", "x"};
  for (int t = 0; t < 500; ++t) {
    std::string note = "Start ";
    const int len = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < len; ++i) note += pieces[rng() % pieces.size()];
    auto cs = chunk_text("p", note);
    std::string joined;
    for (const auto& c : cs) {
      ASSERT_EQ(note.substr(c.offset, c.text.size()), c.text);
      ASSERT_FALSE(c.text.empty());
      joined += c.text;
    }
    EXPECT_EQ(strip_ws(joined), strip_ws(note)) << note;
    EXPECT_EQ(cs, chunk_text("p", note));
  }
}

TEST(ChunkResources, SortedKeyFlattening) {
  auto cs = chunk_resources("b", nlohmann::json::parse(R"([{"status":"active","code":"E11.9"}])"));
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_EQ(cs[0].text, "code: E11.9\nstatus: active");
  EXPECT_EQ(cs[0].kind, ChunkKind::Resource);
  EXPECT_EQ(cs[0].chunk_id, "b#r0000");
}

TEST(ChunkResources, OnePerResource) {
  auto bundle = nlohmann::json::parse(R"([
    {"resourceType":"Observation","code":"4548-4","value":8.2},
    {"resourceType":"Observation","code":"2345-7","value":182},
    {"resourceType":"Observation","code":"8480-6","value":142,"unit":"mm[Hg]"}])");
  auto cs = chunk_resources("b", bundle);
  ASSERT_EQ(cs.size(), 3u);
  EXPECT_EQ(cs[2].text, "code: 8480-6\nresourceType: Observation\nunit: mm[Hg]\nvalue: 142");
}

TEST(ChunkResources, EmptyBundle) { EXPECT_TRUE(chunk_resources("b", nlohmann::json::array()).empty()); }

TEST(ChunkResources, Malformed) {
  EXPECT_THROW(chunk_resources("b", nlohmann::json::parse(R"({"a":1})")), MalformedResource);
  EXPECT_THROW(chunk_resources("b", nlohmann::json::parse(R"([1])")), MalformedResource);
  EXPECT_THROW(chunk_resources("b", nlohmann::json::parse(R"([{}])")), MalformedResource);
}

TEST(Ingest, MixedDocumentSet) {
  std::vector<Document> docs{{"note", ChunkKind::Sentence, "One. Two.", {}},
                             {"fhir", ChunkKind::Resource, "", nlohmann::json::parse(R"([{"k":"v"}])")}};
  auto cs = ingest(docs);
  ASSERT_EQ(cs.size(), 3u);
  EXPECT_EQ(cs[2].source_id, "fhir");
  EXPECT_THROW(ingest({}), EmptyInput);
}

TEST(Ingest, DocumentJson) {
  auto d = document_from_json(nlohmann::json::parse(R"({"id":"n1","text":"Hi."})"));
  EXPECT_EQ(d.kind, ChunkKind::Sentence);
  auto b = document_from_json(nlohmann::json::parse(R"({"id":"b1","resources":[]})"));
  EXPECT_EQ(b.kind, ChunkKind::Resource);
  EXPECT_THROW(document_from_json(nlohmann::json::parse(R"({"text":"x"})")), SchemaError);
}
