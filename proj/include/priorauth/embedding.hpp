#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "priorauth/error.hpp"
#include "priorauth/text.hpp"

namespace priorauth {

/// Unit-L2-norm embedding.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  /// Normalizes `raw`; throws if it has zero length or zero norm.
  static EmbeddingVector normalized(std::vector<double> raw) {
    if (raw.empty()) throw DimensionMismatch("embedding has dimension 0");
    double sq = 0.0;
    for (double v : raw) sq += v * v;
    if (!(sq > 0.0) || !std::isfinite(sq)) throw Error("embedding has zero or non-finite norm");
    const double inv = 1.0 / std::sqrt(sq);
    for (double& v : raw) v *= inv;
    EmbeddingVector e;
    e.values_ = std::move(raw);
    return e;
  }

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }

  double dot(const EmbeddingVector& other) const {
    if (other.dim() != dim()) {
      throw DimensionMismatch("dimension " + std::to_string(other.dim()) + " vs " + std::to_string(dim()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) s += values_[i] * other.values_[i];
    return s;
  }

  double norm() const { return std::sqrt(dot(*this)); }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<double> values_;
};

/// Text encoder backend.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::string name() const = 0;
  /// One vector per input, in order. Inputs are non-empty.
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) = 0;
};

inline EmbeddingVector embed(const std::string& text, Encoder& encoder) {
  if (text.empty()) throw EmptyInput("cannot embed empty text");
  auto v = encoder.embed_batch(std::span<const std::string>(&text, 1));
  if (v.size() != 1 || v.front().dim() != encoder.dim()) {
    throw DimensionMismatch("encoder '" + encoder.name() + "' returned a malformed batch");
  }
  return std::move(v.front());
}

namespace detail {

// Standard-normal draws via Box-Muller over a SplitMix64 stream seeded by
// `state`, accumulated into `acc`.
inline void add_gaussian_stream(std::uint64_t state, std::span<double> acc, double weight = 1.0) {
  for (std::size_t i = 0; i < acc.size(); i += 2) {
    const double u1 = 1.0 - unit_uniform(splitmix64(state));  // (0, 1]
    const double u2 = unit_uniform(splitmix64(state));
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    acc[i] += weight * r * std::cos(theta);
    if (i + 1 < acc.size()) acc[i + 1] += weight * r * std::sin(theta);
  }
}

}  // namespace detail

/// Deterministic test embedder: each distinct string maps to a
/// pseudo-random unit vector seeded by FNV-1a(text) xor seed. Carries no
/// semantics; identical strings embed identically.
class HashEmbedder final : public Encoder {
 public:
  explicit HashEmbedder(std::size_t dim = 384, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {
    if (dim == 0) throw DimensionMismatch("embedder dimension must be positive");
  }

  std::size_t dim() const override { return dim_; }
  std::string name() const override { return "test"; }

  EmbeddingVector embed_one(std::string_view text) const {
    if (text.empty()) throw EmptyInput("cannot embed empty text");
    std::vector<double> raw(dim_, 0.0);
    detail::add_gaussian_stream(fnv1a64(text) ^ seed_, raw);
    return EmbeddingVector::normalized(std::move(raw));
  }

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Offline bag-of-words embedder: the normalized sum of per-token hash
/// vectors, so texts sharing content words land close together. Falls
/// back to the whole-string hash for texts without content tokens.
class LexicalEmbedder final : public Encoder {
 public:
  explicit LexicalEmbedder(std::size_t dim = 384, std::uint64_t seed = 0) : fallback_(dim, seed), seed_(seed) {}

  std::size_t dim() const override { return fallback_.dim(); }
  std::string name() const override { return "lexical"; }

  EmbeddingVector embed_one(std::string_view text) const {
    if (text.empty()) throw EmptyInput("cannot embed empty text");
    std::vector<double> raw(dim(), 0.0);
    bool any = false;
    for (const auto& tok : tokenize(text)) {
      if (is_stopword(tok)) continue;
      detail::add_gaussian_stream(fnv1a64(tok) ^ seed_, raw);
      any = true;
    }
    if (!any) return fallback_.embed_one(text);
    return EmbeddingVector::normalized(std::move(raw));
  }

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

 private:
  static bool is_stopword(const std::string& t) {
    static const std::unordered_set<std::string> kStop{
        "a",  "an", "and", "are", "as",  "at",   "be",   "by",  "for", "from", "has", "have", "in",
        "is", "it", "of",  "on",  "or",  "the",  "to",   "was", "were", "with", "his", "her", "their",
        "this", "that", "which", "who", "following", "either", "one", "more", "than", "any", "all"};
    return kStop.contains(t);
  }

  HashEmbedder fallback_;
  std::uint64_t seed_;
};

}  // namespace priorauth
