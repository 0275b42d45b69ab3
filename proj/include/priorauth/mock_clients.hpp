#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "priorauth/annotations.hpp"
#include "priorauth/completion.hpp"
#include "priorauth/text.hpp"

// Deterministic completion clients for tests and offline runs. They answer
// from the request's TaskContext in the same JSON reply format a real model
// is asked for, so replies still go through the agents' parsers.

namespace priorauth {

namespace detail {

inline std::string reply_verdict(std::string_view verdict) {
  return nlohmann::json{{"verdict", verdict}}.dump();
}

inline bool text_matches_evidence(const std::string& chunk, const std::string& evidence) {
  return chunk.find(evidence) != std::string::npos || evidence.find(chunk) != std::string::npos;
}

}  // namespace detail

/// Reads gold labels and always answers correctly.
class OracleClient : public CompletionClient {
 public:
  explicit OracleClient(GoldLabels labels) : labels_(std::move(labels)) {}

  std::string id() const override { return "mock:oracle"; }

  std::string complete(const CompletionRequest& req) override {
    const auto& ctx = req.context;
    const auto* gold = labels_.find(ctx.case_id, ctx.item_id);
    switch (ctx.task) {
      case AgentTask::ClassifyEvidence: {
        if (gold == nullptr || gold->gold_judgment == Judgment::NoInformation || ctx.candidates.empty()) {
          return detail::reply_verdict("Irrelevant");
        }
        const auto& text = ctx.candidates.front().text;
        for (const auto& e : gold->gold_evidence) {
          if (detail::text_matches_evidence(text, e)) {
            return detail::reply_verdict(gold->gold_judgment == Judgment::True ? "Supporting" : "Contradictory");
          }
        }
        return detail::reply_verdict("Irrelevant");
      }
      case AgentTask::JudgeLeaf: {
        nlohmann::json reply{{"judgment", "NoInformation"}, {"evidence", nlohmann::json::array()}};
        if (gold == nullptr) return reply.dump();
        reply["judgment"] = std::string(to_string(gold->gold_judgment));
        for (const auto& c : ctx.candidates) {
          for (const auto& e : gold->gold_evidence) {
            if (c.text.find(e) != std::string::npos) {
              reply["evidence"].push_back({{"chunk_id", c.chunk_id}, {"quote", e}});
            } else if (e.find(c.text) != std::string::npos) {
              reply["evidence"].push_back({{"chunk_id", c.chunk_id}});
            }
          }
        }
        return reply.dump();
      }
      case AgentTask::ExtractOperator:
        return R"({"operator": "ABSTAIN", "rationale": "oracle has no operator labels"})";
    }
    return "{}";
  }

 private:
  GoldLabels labels_;
};

/// Wraps the oracle: each jury run independently replaces the gold
/// judgment with one of the other two values with probability p. The draw
/// is a hash of (seed, case, leaf, run), so results do not depend on
/// scheduling order.
class NoiseClient : public CompletionClient {
 public:
  NoiseClient(GoldLabels labels, double p, std::uint64_t seed) : oracle_(std::move(labels)), p_(p), seed_(seed) {
    if (p < 0.0 || p > 1.0) throw Error("noise probability must be in [0, 1]");
  }

  std::string id() const override { return "mock:noise:" + std::to_string(p_); }

  std::string complete(const CompletionRequest& req) override {
    auto reply = oracle_.complete(req);
    if (req.context.task != AgentTask::JudgeLeaf) return reply;
    std::uint64_t state = seed_ ^ fnv1a64(req.context.case_id + '\x1f' + req.context.item_id) ^
                          (0x9e3779b97f4a7c15ULL * (req.context.run + 1));
    const double u = unit_uniform(splitmix64(state));
    if (u >= p_) return reply;
    auto j = nlohmann::json::parse(reply);
    const auto gold = *parse_judgment(j["judgment"].get<std::string>());
    const auto pick = splitmix64(state) & 1;
    Judgment wrong = gold;
    for (auto cand : kAllJudgments) {
      if (cand == gold) continue;
      wrong = cand;
      if (pick == 0) break;
    }
    j["judgment"] = std::string(to_string(wrong));
    j["evidence"] = nlohmann::json::array();
    return j.dump();
  }

 private:
  OracleClient oracle_;
  double p_;
  std::uint64_t seed_;
};

/// Jury always answers `judgment`; classification always Irrelevant.
class AlwaysClient : public CompletionClient {
 public:
  explicit AlwaysClient(Judgment judgment) : judgment_(judgment) {}

  std::string id() const override { return "mock:always:" + std::string(to_string(judgment_)); }

  std::string complete(const CompletionRequest& req) override {
    switch (req.context.task) {
      case AgentTask::ClassifyEvidence: return detail::reply_verdict("Irrelevant");
      case AgentTask::JudgeLeaf:
        return nlohmann::json{{"judgment", to_string(judgment_)}, {"evidence", nlohmann::json::array()}}.dump();
      case AgentTask::ExtractOperator: return R"({"operator": "ABSTAIN", "rationale": ""})";
    }
    return "{}";
  }

 private:
  Judgment judgment_;
};

/// Operator extraction from connective phrasing in the parent and child
/// statements. Abstains when no rule fires.
class PhraseRuleClient : public CompletionClient {
 public:
  std::string id() const override { return "mock:phrase"; }

  static std::optional<std::pair<std::string, std::string>> rule(const std::string& parent,
                                                                 const std::vector<std::string>& children) {
    auto lower = [](std::string s) {
      std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
      return s;
    };
    const auto p = lower(parent);
    auto has = [&](std::string_view needle) { return p.find(needle) != std::string::npos; };
    auto child_ends_with = [&](std::string_view suffix) {
      return std::any_of(children.begin(), children.end(), [&](const std::string& c) {
        auto t = lower(c);
        while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.pop_back();
        return t.size() >= suffix.size() && t.compare(t.size() - suffix.size(), suffix.size(), suffix) == 0;
      });
    };

    if (has("none of") || has("not the case") || has("absence of")) return std::pair{"NOT", "negated parent phrasing"};
    if (has("one or more of") || has("any of") || has("either of") || has("at least one")) {
      return std::pair{"OR", "parent asks for at least one child"};
    }
    if (has("all of") || has("each of") || has("both of")) return std::pair{"AND", "parent asks for every child"};
    if (child_ends_with("; or") || child_ends_with(", or")) return std::pair{"OR", "children joined by 'or'"};
    if (child_ends_with("; and") || child_ends_with(", and")) return std::pair{"AND", "children joined by 'and'"};
    return std::nullopt;
  }

  std::string complete(const CompletionRequest& req) override {
    if (req.context.task != AgentTask::ExtractOperator) {
      throw ClientError("phrase-rule mock only answers operator extraction");
    }
    auto r = rule(req.context.item_text, req.context.child_texts);
    if (!r) return R"({"operator": "ABSTAIN", "rationale": "no connective phrase found"})";
    return nlohmann::json{{"operator", r->first}, {"rationale", r->second}}.dump();
  }
};

/// Wraps another client and injects citations of chunk ids that were
/// never offered plus quotes that do not occur in the cited chunk.
class HallucinatingClient : public CompletionClient {
 public:
  explicit HallucinatingClient(std::unique_ptr<CompletionClient> inner) : inner_(std::move(inner)) {}

  std::string id() const override { return "mock:hallucinate(" + inner_->id() + ")"; }

  std::string complete(const CompletionRequest& req) override {
    auto reply = inner_->complete(req);
    if (req.context.task != AgentTask::JudgeLeaf) return reply;
    auto j = parse_reply_object(reply);
    if (!j.contains("evidence") || !j["evidence"].is_array()) j["evidence"] = nlohmann::json::array();
    j["evidence"].push_back({{"chunk_id", "ghost#s9999"}, {"quote", "fabricated finding"}});
    if (!req.context.candidates.empty()) {
      j["evidence"].push_back(
          {{"chunk_id", req.context.candidates.front().chunk_id}, {"quote", "text that is nowhere in the chunk"}});
    }
    return j.dump();
  }

 private:
  std::unique_ptr<CompletionClient> inner_;
};

/// Adapts a callable; handy for scripted replies in tests.
class FunctionClient : public CompletionClient {
 public:
  using Fn = std::function<std::string(const CompletionRequest&)>;
  explicit FunctionClient(Fn fn, std::string name = "mock:function") : fn_(std::move(fn)), name_(std::move(name)) {}

  std::string id() const override { return name_; }
  std::string complete(const CompletionRequest& req) override { return fn_(req); }

 private:
  Fn fn_;
  std::string name_;
};

}  // namespace priorauth
