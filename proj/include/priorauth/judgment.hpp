#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "priorauth/error.hpp"

namespace priorauth {

/// Three-valued outcome of a checklist item.
///
/// The enumerator order is used for deterministic serialization and
/// histogram layout only; it carries no logical meaning.
enum class Judgment : std::uint8_t { True = 0, False = 1, NoInformation = 2 };

inline constexpr std::array<Judgment, 3> kAllJudgments{
    Judgment::True, Judgment::False, Judgment::NoInformation};

inline std::string_view to_string(Judgment j) {
  switch (j) {
    case Judgment::True: return "True";
    case Judgment::False: return "False";
    case Judgment::NoInformation: return "NoInformation";
  }
  return "NoInformation";
}

/// Accepts the canonical spelling plus the common "No Information" /
/// "no_information" variants emitted by models and annotators.
inline std::optional<Judgment> parse_judgment(std::string_view text) {
  std::string norm;
  for (char c : text) {
    if (c == ' ' || c == '_' || c == '-') continue;
    norm.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
  }
  if (norm == "true") return Judgment::True;
  if (norm == "false") return Judgment::False;
  if (norm == "noinformation" || norm == "noinfo") return Judgment::NoInformation;
  return std::nullopt;
}

inline std::ostream& operator<<(std::ostream& os, Judgment j) { return os << to_string(j); }

/// Exact rational confidence in [0, 1], kept in lowest terms.
///
/// Leaf confidences are vote fractions m/n and synthetic confidences are
/// tenths, so rationals keep propagation free of rounding.
class Confidence {
 public:
  constexpr Confidence() = default;

  Confidence(std::int64_t num, std::int64_t den) {
    if (den <= 0 || num < 0 || num > den) {
      throw Error("confidence must satisfy 0 <= num <= den, den > 0; got " +
                  std::to_string(num) + "/" + std::to_string(den));
    }
    const auto g = std::gcd(num, den);
    num_ = num / g;
    den_ = den / g;
  }

  static Confidence one() { return {1, 1}; }

  constexpr std::int64_t num() const { return num_; }
  constexpr std::int64_t den() const { return den_; }
  double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  friend bool operator==(const Confidence& a, const Confidence& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const Confidence& a, const Confidence& b) {
    return a.num_ * b.den_ <=> b.num_ * a.den_;
  }

  /// "m/n" in lowest terms; "0" and "1" for the endpoints.
  std::string str() const {
    if (num_ == 0) return "0";
    if (num_ == den_) return "1";
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

  /// Inverse of str(); also accepts unreduced fractions.
  static Confidence parse(std::string_view text) {
    auto to_int = [&](std::string_view s) -> std::int64_t {
      if (s.empty()) throw Error("bad confidence '" + std::string(text) + "'");
      std::int64_t v = 0;
      for (char c : s) {
        if (c < '0' || c > '9') throw Error("bad confidence '" + std::string(text) + "'");
        v = v * 10 + (c - '0');
      }
      return v;
    };
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) return {to_int(text), 1};
    return {to_int(text.substr(0, slash)), to_int(text.substr(slash + 1))};
  }

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

inline std::ostream& operator<<(std::ostream& os, const Confidence& c) { return os << c.str(); }

/// A judgment together with its confidence.
struct Scored {
  Judgment judgment = Judgment::NoInformation;
  Confidence confidence;

  friend bool operator==(const Scored&, const Scored&) = default;
};

/// Root-level medical-necessity outcome: 1 justified, -1 not justified,
/// 0 insufficient evidence.
struct NecessityDecision {
  int y = 0;
  Confidence root_confidence;

  friend bool operator==(const NecessityDecision&, const NecessityDecision&) = default;
};

inline int necessity_value(Judgment root) {
  switch (root) {
    case Judgment::True: return 1;
    case Judgment::False: return -1;
    case Judgment::NoInformation: return 0;
  }
  return 0;
}

inline NecessityDecision make_decision(const Scored& root) {
  return {necessity_value(root.judgment), root.confidence};
}

}  // namespace priorauth
