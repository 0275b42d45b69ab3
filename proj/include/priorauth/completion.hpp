#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "priorauth/error.hpp"

namespace priorauth {

enum class AgentTask { ClassifyEvidence, JudgeLeaf, ExtractOperator };

inline std::string_view to_string(AgentTask t) {
  switch (t) {
    case AgentTask::ClassifyEvidence: return "classify_evidence";
    case AgentTask::JudgeLeaf: return "judge_leaf";
    case AgentTask::ExtractOperator: return "extract_operator";
  }
  return "";
}

struct CandidateView {
  std::string chunk_id;
  std::string text;
  std::string verdict;  // empty for classification requests
};

/// Structured description of what a prompt asks for. Remote clients only
/// see the rendered prompt; mock clients answer from this.
struct TaskContext {
  AgentTask task = AgentTask::JudgeLeaf;
  std::string case_id;
  std::string item_id;
  std::string item_text;
  std::vector<CandidateView> candidates;
  std::vector<std::string> child_texts;  // operator extraction
  std::size_t run = 0;
  std::size_t attempt = 0;
};

struct Sampling {
  double temperature = 0.7;
  std::optional<std::uint64_t> seed;
  int max_tokens = 1024;
};

inline nlohmann::json to_json(const Sampling& s) {
  nlohmann::json j{{"temperature", s.temperature}, {"max_tokens", s.max_tokens}};
  if (s.seed) j["seed"] = *s.seed;
  return j;
}

struct CompletionRequest {
  std::string prompt;
  Sampling sampling;
  TaskContext context;
};

/// A text-completion backend. Implementations must be safe to call from
/// several threads at once and throw ClientError on transport failure.
class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
  virtual std::string id() const = 0;
};

/// Extracts the first top-level JSON object from a model reply, tolerating
/// surrounding prose or code fences. Throws FormatError.
inline nlohmann::json parse_reply_object(std::string_view reply) {
  for (std::size_t start = reply.find('{'); start != std::string_view::npos; start = reply.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < reply.size(); ++i) {
      const char c = reply[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        auto j = nlohmann::json::parse(reply.substr(start, i - start + 1), nullptr, false);
        if (!j.is_discarded() && j.is_object()) return j;
        break;
      }
    }
  }
  throw FormatError("reply contains no JSON object");
}

}  // namespace priorauth
