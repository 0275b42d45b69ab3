#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "priorauth/checklist.hpp"
#include "priorauth/completion.hpp"
#include "priorauth/concurrency.hpp"
#include "priorauth/error.hpp"
#include "priorauth/judgment.hpp"
#include "priorauth/prompts.hpp"
#include "priorauth/retrieval.hpp"

namespace priorauth {

struct AgentConfig {
  std::size_t n_votes = 10;
  PromptStrategy strategy = PromptStrategy::ICL;
  double temperature = 0.7;
  /// Extra attempts after a failed or unparseable reply.
  std::size_t max_retries = 2;
  /// Client spec, e.g. "mock:oracle" or "http:http://host:port/complete".
  std::string client = "mock:oracle";
  /// Concurrent requests per agent call.
  std::size_t max_in_flight = 8;

  void validate() const {
    if (n_votes < 1) throw ConfigError("n_votes must be at least 1");
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be at least 1");
  }
};

enum class Verdict { Supporting, Contradictory, Irrelevant };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Supporting: return "Supporting";
    case Verdict::Contradictory: return "Contradictory";
    case Verdict::Irrelevant: return "Irrelevant";
  }
  return "Irrelevant";
}

inline std::optional<Verdict> parse_verdict(std::string_view s) {
  std::string low;
  for (char c : s) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (low == "supporting") return Verdict::Supporting;
  if (low == "contradictory") return Verdict::Contradictory;
  if (low == "irrelevant") return Verdict::Irrelevant;
  return std::nullopt;
}

struct EvidenceVerdict {
  std::string chunk_id;
  Verdict verdict = Verdict::Irrelevant;

  friend bool operator==(const EvidenceVerdict&, const EvidenceVerdict&) = default;
};

/// An evidence excerpt: `text` is an exact substring of chunk `chunk_id`.
struct Evidence {
  std::string chunk_id;
  std::string text;

  friend bool operator==(const Evidence&, const Evidence&) = default;
};

using VoteHistogram = std::array<std::size_t, 3>;  // indexed by Judgment

struct LeafResult {
  std::string leaf_id;
  Judgment judgment = Judgment::NoInformation;
  Confidence confidence = Confidence::one();
  std::vector<Evidence> evidence;
  VoteHistogram votes{};
  std::size_t runs = 0;
  /// Citations dropped because the id was not a candidate or the quote
  /// was not found in the cited chunk.
  std::size_t hallucinated_citations = 0;
  /// Runs whose reply could not be parsed; counted as NoInformation votes.
  std::size_t format_failures = 0;
  /// False when the winner did not hold a strict majority.
  bool strict_majority = true;
  /// Shannon entropy of the vote histogram, in bits.
  double vote_entropy = 0.0;
  /// Reviewer note when the result was set by a human.
  std::string reviewer_note;

  Scored scored() const { return {judgment, confidence}; }
};

/// Plurality winner of a vote histogram. Any tie for the top count
/// resolves to NoInformation; the confidence is top count / total.
inline Scored resolve_votes(const VoteHistogram& votes) {
  std::size_t total = 0;
  std::size_t top = 0;
  for (auto c : votes) {
    total += c;
    top = std::max(top, c);
  }
  if (total == 0) throw Error("no votes to resolve");
  std::size_t leaders = 0;
  Judgment winner = Judgment::NoInformation;
  for (auto j : kAllJudgments) {
    if (votes[static_cast<std::size_t>(j)] == top) {
      ++leaders;
      winner = j;
    }
  }
  if (leaders > 1) winner = Judgment::NoInformation;
  return {winner, Confidence(static_cast<std::int64_t>(top), static_cast<std::int64_t>(total))};
}

inline double histogram_entropy(const VoteHistogram& votes) {
  double total = 0;
  for (auto c : votes) total += static_cast<double>(c);
  double h = 0.0;
  for (auto c : votes) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h;
}

struct OperatorQuery {
  std::string id;
  std::string text;
  std::vector<std::string> child_texts;
};

struct OperatorAssignment {
  Operator op = Operator::And;
  std::string rationale;
};

namespace detail {

struct Citation {
  std::string chunk_id;
  std::optional<std::string> quote;
};

struct JuryRun {
  Judgment judgment = Judgment::NoInformation;
  std::vector<Citation> citations;
  bool format_failure = false;
};

inline std::string render_candidates(const std::vector<ScoredChunk>& candidates,
                                     const std::vector<EvidenceVerdict>* verdicts) {
  std::string out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out += "[" + candidates[i].chunk.chunk_id + "]";
    if (verdicts != nullptr) out += " (" + std::string(to_string((*verdicts)[i].verdict)) + ")";
    out += " " + candidates[i].chunk.text + "\n";
  }
  return out;
}

inline JuryRun parse_jury_reply(const std::string& reply) {
  const auto j = parse_reply_object(reply);
  if (!j.contains("judgment") || !j["judgment"].is_string()) throw FormatError("reply lacks 'judgment'");
  auto judgment = parse_judgment(j["judgment"].get<std::string>());
  if (!judgment) throw FormatError("unknown judgment '" + j["judgment"].get<std::string>() + "'");
  JuryRun run{*judgment, {}, false};
  if (j.contains("evidence") && !j["evidence"].is_null()) {
    if (!j["evidence"].is_array()) throw FormatError("'evidence' must be an array");
    for (const auto& e : j["evidence"]) {
      if (e.is_string()) {
        run.citations.push_back({e.get<std::string>(), std::nullopt});
      } else if (e.is_object() && e.contains("chunk_id") && e["chunk_id"].is_string()) {
        Citation c{e["chunk_id"].get<std::string>(), std::nullopt};
        if (e.contains("quote") && e["quote"].is_string() && !e["quote"].get<std::string>().empty()) {
          c.quote = e["quote"].get<std::string>();
        }
        run.citations.push_back(std::move(c));
      } else {
        throw FormatError("malformed evidence entry");
      }
    }
  }
  return run;
}

}  // namespace detail

/// Runs the evidence-classification, jury and operator-extraction agents
/// against one completion client.
class AgentRunner {
 public:
  AgentRunner(CompletionClient& client, AgentConfig cfg, PromptLibrary prompts = PromptLibrary::builtin(),
              RequestLimiter* limiter = nullptr)
      : client_(client), cfg_(std::move(cfg)), prompts_(std::move(prompts)), limiter_(limiter) {
    cfg_.validate();
  }

  const AgentConfig& config() const { return cfg_; }

  /// One verdict per candidate, in candidate order. Unparseable replies
  /// degrade to Irrelevant after the retries run out.
  std::vector<EvidenceVerdict> classify_evidence(const ChecklistNode& leaf, const std::vector<ScoredChunk>& candidates,
                                                 const std::string& case_id = {}) {
    if (candidates.empty()) throw Error("classify_evidence needs at least one candidate");
    return parallel_map(candidates.size(), cfg_.max_in_flight, [&](std::size_t i) {
      const auto& chunk = candidates[i].chunk;
      CompletionRequest req;
      req.prompt = prompts_.render(AgentTask::ClassifyEvidence, cfg_.strategy,
                                   {{"checklist_item", leaf.text}, {"chunks", chunk.text}});
      req.sampling.temperature = cfg_.temperature;
      req.context = {AgentTask::ClassifyEvidence, case_id, leaf.id, leaf.text, {{chunk.chunk_id, chunk.text, ""}},
                     {}, 0, 0};
      auto verdict = call<Verdict>(req, [](const std::string& reply) {
        const auto j = parse_reply_object(reply);
        if (!j.contains("verdict") || !j["verdict"].is_string()) throw FormatError("reply lacks 'verdict'");
        auto v = parse_verdict(j["verdict"].get<std::string>());
        if (!v) throw FormatError("unknown verdict '" + j["verdict"].get<std::string>() + "'");
        return *v;
      });
      if (!verdict) {
        spdlog::warn("leaf {}: unparseable verdict for chunk {}, using Irrelevant", leaf.id, chunk.chunk_id);
      }
      return EvidenceVerdict{chunk.chunk_id, verdict.value_or(Verdict::Irrelevant)};
    });
  }

  /// Runs the jury n_votes times and reduces the runs to one result.
  LeafResult judge_leaf(const ChecklistNode& leaf, const std::vector<ScoredChunk>& candidates,
                        const std::vector<EvidenceVerdict>& verdicts, const std::string& case_id = {}) {
    if (verdicts.size() != candidates.size()) throw Error("verdicts are not aligned with candidates");
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (verdicts[i].chunk_id != candidates[i].chunk.chunk_id) {
        throw Error("verdict " + std::to_string(i) + " is for a different chunk");
      }
    }

    std::string summary;
    std::array<std::size_t, 3> counts{};
    for (const auto& v : verdicts) ++counts[static_cast<std::size_t>(v.verdict)];
    summary = "Supporting: " + std::to_string(counts[0]) + ", Contradictory: " + std::to_string(counts[1]) +
              ", Irrelevant: " + std::to_string(counts[2]);
    const auto prompt = prompts_.render(AgentTask::JudgeLeaf, cfg_.strategy,
                                        {{"checklist_item", leaf.text},
                                         {"chunks", detail::render_candidates(candidates, &verdicts)},
                                         {"verdicts", summary}});
    std::vector<CandidateView> views;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      views.push_back({candidates[i].chunk.chunk_id, candidates[i].chunk.text,
                       std::string(to_string(verdicts[i].verdict))});
    }

    auto runs = parallel_map(cfg_.n_votes, cfg_.max_in_flight, [&](std::size_t run) {
      CompletionRequest req;
      req.prompt = prompt;
      req.sampling.temperature = cfg_.temperature;
      req.sampling.seed = run;
      req.context = {AgentTask::JudgeLeaf, case_id, leaf.id, leaf.text, views, {}, run, 0};
      auto parsed = call<detail::JuryRun>(req, detail::parse_jury_reply);
      if (!parsed) {
        spdlog::warn("leaf {}: jury run {} unparseable, counted as NoInformation", leaf.id, run);
        return detail::JuryRun{Judgment::NoInformation, {}, true};
      }
      return *parsed;
    });
    return reduce(leaf.id, candidates, runs);
  }

  /// Asks the model which operator joins a parent's children.
  OperatorAssignment extract_operator(const OperatorQuery& q) {
    if (q.child_texts.empty()) throw Error("node '" + q.id + "' has no children");
    std::string children;
    for (const auto& c : q.child_texts) children += "- " + c + "\n";
    CompletionRequest req;
    req.prompt = prompts_.render(AgentTask::ExtractOperator, cfg_.strategy,
                                 {{"checklist_item", q.text}, {"chunks", children}});
    req.sampling.temperature = cfg_.temperature;
    req.context = {AgentTask::ExtractOperator, "", q.id, q.text, {}, q.child_texts, 0, 0};
    auto parsed = call<std::pair<std::string, std::string>>(req, [](const std::string& reply) {
      const auto j = parse_reply_object(reply);
      if (!j.contains("operator") || !j["operator"].is_string()) throw FormatError("reply lacks 'operator'");
      return std::pair{j["operator"].get<std::string>(), j.value("rationale", std::string{})};
    });
    if (!parsed) throw AmbiguousOperator("node '" + q.id + "': no parseable operator in reply");
    auto op = parse_operator(parsed->first);
    if (!op) throw AmbiguousOperator("node '" + q.id + "': model abstained (" + parsed->first + ")");
    const bool arity_ok = *op == Operator::Not ? q.child_texts.size() == 1 : q.child_texts.size() >= 2;
    if (!arity_ok) {
      throw AmbiguousOperator("node '" + q.id + "': " + std::string(to_string(*op)) + " does not fit " +
                              std::to_string(q.child_texts.size()) + " children");
    }
    return {*op, parsed->second};
  }

  /// Fills in the operator of every internal node that lacks one.
  ChecklistNode assign_operators(ChecklistNode draft) {
    std::function<void(ChecklistNode&)> walk = [&](ChecklistNode& n) {
      for (auto& c : n.children) walk(c);
      if (n.is_leaf() || n.op) return;
      OperatorQuery q{n.id, n.text, {}};
      for (const auto& c : n.children) q.child_texts.push_back(c.text);
      n.op = extract_operator(q).op;
    };
    walk(draft);
    validate(draft);
    return draft;
  }

 private:
  // nullopt when replies arrived but none parsed; ClientError when every
  // attempt failed in transport.
  template <typename T, typename Parse>
  std::optional<T> call(CompletionRequest req, Parse&& parse) {
    std::string last_transport_error;
    bool any_reply = false;
    for (std::size_t attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      req.context.attempt = attempt;
      std::string reply;
      try {
        RequestLimiter::Slot slot(limiter_);
        reply = client_.complete(req);
      } catch (const ClientError& e) {
        last_transport_error = e.what();
        continue;
      } catch (const std::exception& e) {
        last_transport_error = e.what();
        continue;
      }
      any_reply = true;
      try {
        return parse(reply);
      } catch (const FormatError& e) {
        spdlog::debug("{} {} attempt {}: {}", to_string(req.context.task), req.context.item_id, attempt, e.what());
      }
    }
    if (!any_reply) {
      throw ClientError(std::string(to_string(req.context.task)) + " for '" + req.context.item_id + "' failed after " +
                        std::to_string(cfg_.max_retries + 1) + " attempts: " + last_transport_error);
    }
    return std::nullopt;
  }

  LeafResult reduce(const std::string& leaf_id, const std::vector<ScoredChunk>& candidates,
                    const std::vector<detail::JuryRun>& runs) const {
    LeafResult r;
    r.leaf_id = leaf_id;
    r.runs = runs.size();
    for (const auto& run : runs) {
      ++r.votes[static_cast<std::size_t>(run.judgment)];
      if (run.format_failure) ++r.format_failures;
    }
    const auto winner = resolve_votes(r.votes);
    r.judgment = winner.judgment;
    r.confidence = winner.confidence;
    r.strict_majority = winner.confidence.num() * 2 > winner.confidence.den();
    r.vote_entropy = histogram_entropy(r.votes);

    std::map<std::string, std::size_t> rank;
    for (std::size_t i = 0; i < candidates.size(); ++i) rank.emplace(candidates[i].chunk.chunk_id, i);

    std::set<std::pair<std::size_t, std::string>> seen;
    std::vector<std::pair<std::size_t, Evidence>> kept;
    for (const auto& run : runs) {
      for (const auto& c : run.citations) {
        auto it = rank.find(c.chunk_id);
        if (it == rank.end()) {
          ++r.hallucinated_citations;
          spdlog::warn("leaf {}: dropped citation of unknown chunk '{}'", leaf_id, c.chunk_id);
          continue;
        }
        const auto& chunk_text = candidates[it->second].chunk.text;
        if (c.quote && chunk_text.find(*c.quote) == std::string::npos) {
          ++r.hallucinated_citations;
          spdlog::warn("leaf {}: dropped quote not found in chunk '{}'", leaf_id, c.chunk_id);
          continue;
        }
        if (run.judgment != r.judgment) continue;
        std::string text = c.quote ? *c.quote : chunk_text;
        if (seen.emplace(it->second, text).second) kept.emplace_back(it->second, Evidence{c.chunk_id, std::move(text)});
      }
    }
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [_, e] : kept) r.evidence.push_back(std::move(e));
    return r;
  }

  CompletionClient& client_;
  AgentConfig cfg_;
  PromptLibrary prompts_;
  RequestLimiter* limiter_;
};

inline std::vector<EvidenceVerdict> classify_evidence(const ChecklistNode& leaf,
                                                      const std::vector<ScoredChunk>& candidates,
                                                      CompletionClient& client, const AgentConfig& cfg) {
  return AgentRunner(client, cfg).classify_evidence(leaf, candidates);
}

inline LeafResult judge_leaf(const ChecklistNode& leaf, const std::vector<ScoredChunk>& candidates,
                             const std::vector<EvidenceVerdict>& verdicts, CompletionClient& client,
                             const AgentConfig& cfg) {
  return AgentRunner(client, cfg).judge_leaf(leaf, candidates, verdicts);
}

inline OperatorAssignment extract_operators(const ChecklistNode& parent, CompletionClient& client,
                                            const AgentConfig& cfg) {
  OperatorQuery q{parent.id, parent.text, {}};
  for (const auto& c : parent.children) q.child_texts.push_back(c.text);
  return AgentRunner(client, cfg).extract_operator(q);
}

inline nlohmann::json to_json(const Evidence& e) { return {{"chunk_id", e.chunk_id}, {"text", e.text}}; }

inline nlohmann::json to_json(const LeafResult& r) {
  nlohmann::json votes = nlohmann::json::object();
  for (auto j : kAllJudgments) votes[std::string(to_string(j))] = r.votes[static_cast<std::size_t>(j)];
  nlohmann::json ev = nlohmann::json::array();
  for (const auto& e : r.evidence) ev.push_back(to_json(e));
  nlohmann::json j{{"leaf_id", r.leaf_id},
                   {"judgment", std::string(to_string(r.judgment))},
                   {"confidence", r.confidence.str()},
                   {"confidence_value", r.confidence.value()},
                   {"evidence", ev},
                   {"votes", votes},
                   {"runs", r.runs},
                   {"hallucinated_citations", r.hallucinated_citations},
                   {"format_failures", r.format_failures},
                   {"strict_majority", r.strict_majority},
                   {"vote_entropy", r.vote_entropy}};
  if (!r.reviewer_note.empty()) j["reviewer_note"] = r.reviewer_note;
  return j;
}

inline LeafResult leaf_result_from_json(const nlohmann::json& j) {
  LeafResult r;
  r.leaf_id = j.at("leaf_id").get<std::string>();
  auto jv = parse_judgment(j.at("judgment").get<std::string>());
  if (!jv) throw SchemaError("bad judgment for leaf '" + r.leaf_id + "'");
  r.judgment = *jv;
  r.confidence = Confidence::parse(j.at("confidence").get<std::string>());
  for (const auto& e : j.at("evidence")) {
    r.evidence.push_back({e.at("chunk_id").get<std::string>(), e.at("text").get<std::string>()});
  }
  for (auto jj : kAllJudgments) {
    r.votes[static_cast<std::size_t>(jj)] = j.at("votes").value(std::string(to_string(jj)), std::size_t{0});
  }
  r.runs = j.value("runs", std::size_t{0});
  r.hallucinated_citations = j.value("hallucinated_citations", std::size_t{0});
  r.format_failures = j.value("format_failures", std::size_t{0});
  r.strict_majority = j.value("strict_majority", true);
  r.vote_entropy = j.value("vote_entropy", 0.0);
  r.reviewer_note = j.value("reviewer_note", std::string{});
  return r;
}

}  // namespace priorauth
