#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "priorauth/checklist.hpp"
#include "priorauth/concurrency.hpp"
#include "priorauth/embedding.hpp"
#include "priorauth/error.hpp"
#include "priorauth/ingest.hpp"

namespace priorauth {

inline constexpr std::size_t kDefaultTopK = 20;
inline constexpr std::size_t kMaxTopK = 50;

struct ScoredChunk {
  DocumentChunk chunk;
  double score = 0.0;
};

struct IndexOptions {
  std::size_t batch_size = 64;
  /// Concurrent embedding requests while building.
  std::size_t max_in_flight = 4;
};

/// Exact cosine-similarity index over one document set. Immutable after
/// construction, so concurrent queries are safe.
class ChunkIndex {
 public:
  ChunkIndex(std::vector<DocumentChunk> chunks, Encoder& encoder, const IndexOptions& opt = {})
      : chunks_(std::move(chunks)), dim_(encoder.dim()) {
    const std::size_t batch = std::max<std::size_t>(opt.batch_size, 1);
    const std::size_t n_batches = (chunks_.size() + batch - 1) / batch;
    auto parts = parallel_map(n_batches, opt.max_in_flight, [&](std::size_t b) {
      std::vector<std::string> texts;
      for (std::size_t i = b * batch; i < std::min(chunks_.size(), (b + 1) * batch); ++i) {
        if (chunks_[i].text.empty()) throw EmptyInput("chunk '" + chunks_[i].chunk_id + "' has empty text");
        texts.push_back(chunks_[i].text);
      }
      auto v = encoder.embed_batch(texts);
      if (v.size() != texts.size()) throw DimensionMismatch("encoder returned wrong batch size");
      return v;
    });
    for (auto& p : parts) {
      for (auto& v : p) {
        if (v.dim() != dim_) {
          throw DimensionMismatch("vector of dimension " + std::to_string(v.dim()) + " in index of dimension " +
                                  std::to_string(dim_));
        }
        vectors_.push_back(std::move(v));
      }
    }
  }

  std::size_t size() const { return chunks_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<DocumentChunk>& chunks() const { return chunks_; }
  const std::vector<EmbeddingVector>& vectors() const { return vectors_; }

  /// The min(k, size()) best chunks by descending cosine similarity; ties
  /// go to the smaller chunk_id.
  std::vector<ScoredChunk> top_k(const EmbeddingVector& query, std::size_t k) const {
    if (chunks_.empty()) throw EmptyIndex("index holds no chunks");
    if (k == 0) throw Error("k must be at least 1");
    if (query.dim() != dim_) {
      throw DimensionMismatch("query dimension " + std::to_string(query.dim()) + " vs index " +
                              std::to_string(dim_));
    }
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(chunks_.size());
    for (std::size_t i = 0; i < chunks_.size(); ++i) scored.emplace_back(query.dot(vectors_[i]), i);

    const auto n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                      [&](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return chunks_[a.second].chunk_id < chunks_[b.second].chunk_id;
                      });
    std::vector<ScoredChunk> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back({chunks_[scored[i].second], scored[i].first});
    return out;
  }

 private:
  std::vector<DocumentChunk> chunks_;
  std::vector<EmbeddingVector> vectors_;
  std::size_t dim_;
};

/// Text used to embed a checklist item: the leaf's own text, optionally
/// preceded by its ancestors' texts.
inline std::string query_text(const ChecklistNode& root, const ChecklistNode& leaf, bool with_ancestors) {
  if (!with_ancestors) return leaf.text;
  std::string q;
  for (const auto* n : path_to(root, leaf.id)) {
    if (!q.empty()) q += ' ';
    q += n->text;
  }
  return q;
}

/// Top-k candidates for one checklist item.
inline std::vector<ScoredChunk> top_k(const ChunkIndex& index, Encoder& encoder, const std::string& item_text,
                                      std::size_t k) {
  return index.top_k(embed(item_text, encoder), k);
}

inline nlohmann::json to_json(const ScoredChunk& s) {
  return {{"chunk_id", s.chunk.chunk_id}, {"score", s.score}};
}

}  // namespace priorauth
