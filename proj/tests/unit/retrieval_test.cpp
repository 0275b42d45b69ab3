#include <gtest/gtest.h>

#include <random>
#include <set>

#include "priorauth/retrieval.hpp"

using namespace priorauth;

namespace {

// Computed by an independent Python implementation of the same
// FNV-1a / SplitMix64 / Box-Muller recipe (dim 8, seed 0).
const std::vector<std::pair<std::string, std::vector<double>>> kReferenceVectors{
    {"diabetes mellitus",
     {-0.27947354575234407, 0.34743649061548343, 0.3217760553492205, 0.45048400339508493, 0.12293484517711377,
      -0.2474269405824146, 0.5346673518445924, -0.3640116905941869}},
    {"History of previous foot ulceration of either foot;",
     {0.05487762898311571, -0.5990027376799464, -0.06299369267358473, 0.024153009969171624, -0.5772928829327326,
      -0.532746642458633, 0.039565046368015985, -0.12239747649384146}},
    {"poor circulation",
     {0.02141110647660541, -0.3997608190646911, 0.5631902847412105, 0.08333771684309085, 0.20624841084366854,
      -0.24490141770775614, 0.6332561841016721, -0.1098902821492949}},
};

std::vector<DocumentChunk> make_chunks(const std::vector<std::string>& texts) {
  std::vector<DocumentChunk> cs;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "d#s%04zu", i);
    cs.push_back({id, "d", texts[i], ChunkKind::Sentence, 0});
  }
  return cs;
}

// Encoder returning caller-chosen vectors, for tie and dimension cases.
class TableEncoder final : public Encoder {
 public:
  TableEncoder(std::size_t dim, std::map<std::string, std::vector<double>> table)
      : dim_(dim), table_(std::move(table)) {}
  std::size_t dim() const override { return dim_; }
  std::string name() const override { return "table"; }
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override {
    std::vector<EmbeddingVector> out;
    for (const auto& t : texts) out.push_back(EmbeddingVector::normalized(table_.at(t)));
    return out;
  }

 private:
  std::size_t dim_;
  std::map<std::string, std::vector<double>> table_;
};

}  // namespace

TEST(Embedding, ReferenceVectors) {
  HashEmbedder enc(8);
  for (const auto& [text, want] : kReferenceVectors) {
    auto v = embed(text, enc);
    ASSERT_EQ(v.dim(), 8u);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(v.values()[i], want[i], 1e-12) << text << " [" << i << "]";
  }
}

TEST(Embedding, DeterministicUnitNorm) {
  HashEmbedder enc;
  LexicalEmbedder lex;
  for (const std::string t : {"a", "type 2 diabetes", "??", "Foot deformity of either foot;"}) {
    auto a = embed(t, enc);
    EXPECT_EQ(a, embed(t, enc));
    EXPECT_NEAR(a.norm(), 1.0, 1e-6);
    EXPECT_NEAR(a.dot(embed(t, enc)), 1.0, 1e-12);
    EXPECT_NEAR(embed(t, lex).norm(), 1.0, 1e-6);
  }
}

TEST(Embedding, EmptyInputRejected) {
  HashEmbedder enc;
  EXPECT_THROW(embed("", enc), EmptyInput);
}

TEST(Embedding, LexicalOverlapScoresHigher) {
  LexicalEmbedder lex;
  auto q = embed("History of previous foot ulceration", lex);
  auto near = embed("Patient has a history of foot ulceration on the left.", lex);
  auto far = embed("Blood pressure was controlled with lisinopril.", lex);
  EXPECT_GT(q.dot(near), q.dot(far));
}

TEST(Retrieval, VerbatimChunksRankFirst) {
  HashEmbedder enc(64);
  const std::string item = "The beneficiary has diabetes mellitus; and";
  std::vector<std::string> texts;
  for (int i = 0; i < 60; ++i) texts.push_back("Unrelated sentence number " + std::to_string(i) + ".");
  texts[17] = item;
  texts[42] = item;
  ChunkIndex index(make_chunks(texts), enc);
  auto top = top_k(index, enc, item, 40);
  ASSERT_EQ(top.size(), 40u);
  EXPECT_EQ(top[0].chunk.chunk_id, "d#s0017");
  EXPECT_EQ(top[1].chunk.chunk_id, "d#s0042");
  EXPECT_NEAR(top[0].score, 1.0, 1e-12);
  EXPECT_NEAR(top[1].score, 1.0, 1e-12);
  for (std::size_t i = 1; i < top.size(); ++i) EXPECT_GE(top[i - 1].score, top[i].score);
}

TEST(Retrieval, KLargerThanIndex) {
  HashEmbedder enc(16);
  ChunkIndex index(make_chunks({"a.", "b.", "c."}), enc);
  EXPECT_EQ(top_k(index, enc, "q", 40).size(), 3u);
}

TEST(Retrieval, ThreeHundredChunksKeepForty) {
  HashEmbedder enc(32);
  std::vector<std::string> texts;
  for (int i = 0; i < 300; ++i) texts.push_back("Sentence " + std::to_string(i) + ".");
  ChunkIndex index(make_chunks(texts), enc);
  auto top = top_k(index, enc, "Foot deformity of either foot;", 40);
  EXPECT_EQ(top.size(), 40u);
  EXPECT_NEAR(1.0 - 40.0 / 300.0, 0.8667, 1e-4);
}

TEST(Retrieval, TiesBreakByChunkId) {
  TableEncoder enc(2, {{"q", {1, 0}}, {"x", {1, 1}}, {"y", {1, 1}}, {"z", {0, 1}}});
  auto chunks = make_chunks({"z", "y", "x", "y"});
  ChunkIndex index(chunks, enc);
  auto top = top_k(index, enc, "q", 4);
  std::vector<std::string> ids;
  for (const auto& s : top) ids.push_back(s.chunk.chunk_id);
  EXPECT_EQ(ids, (std::vector<std::string>{"d#s0001", "d#s0002", "d#s0003", "d#s0000"}));
}

TEST(Retrieval, Errors) {
  HashEmbedder enc(8);
  ChunkIndex empty({}, enc);
  EXPECT_THROW(top_k(empty, enc, "q", 3), EmptyIndex);
  ChunkIndex index(make_chunks({"a."}), enc);
  HashEmbedder other(16);
  EXPECT_THROW(index.top_k(embed("q", other), 1), DimensionMismatch);
  EXPECT_THROW(index.top_k(embed("q", enc), 0), Error);
}

TEST(Retrieval, AncestorContextQuery) {
  auto root = parse_checklist(R"({"id":"r","text":"Root.","operator":"OR","children":[
      {"id":"a","text":"Leaf A."},{"id":"b","text":"Leaf B."}]})");
  EXPECT_EQ(query_text(root, root.children[0], false), "Leaf A.");
  EXPECT_EQ(query_text(root, root.children[0], true), "Root. Leaf A.");
}

// top-k is a prefix of top-(k+1) for random indexes and queries.
TEST(RetrievalProperty, NestedTopK) {
  std::mt19937_64 rng(8);
  HashEmbedder enc(12);
  for (int q = 0; q < 300; ++q) {
    std::vector<std::string> texts;
    const int n = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) texts.push_back("t" + std::to_string(rng() % 25));  // duplicates force ties
    ChunkIndex index(make_chunks(texts), enc);
    auto query = embed("q" + std::to_string(q), enc);
    auto prev = index.top_k(query, 1);
    for (std::size_t k = 2; k <= static_cast<std::size_t>(n) + 1; ++k) {
      auto cur = index.top_k(query, k);
      ASSERT_EQ(cur.size(), std::min<std::size_t>(k, n));
      for (std::size_t i = 0; i < prev.size(); ++i) ASSERT_EQ(prev[i].chunk.chunk_id, cur[i].chunk.chunk_id);
      prev = std::move(cur);
    }
  }
}
