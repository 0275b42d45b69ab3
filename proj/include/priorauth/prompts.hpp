#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "priorauth/completion.hpp"
#include "priorauth/error.hpp"

namespace priorauth {

enum class PromptStrategy { ICL, ICL_plus_CoT };

inline std::string_view to_string(PromptStrategy s) { return s == PromptStrategy::ICL ? "icl" : "icl-cot"; }

inline std::optional<PromptStrategy> parse_strategy(std::string_view s) {
  if (s == "icl" || s == "ICL") return PromptStrategy::ICL;
  if (s == "icl-cot" || s == "ICL_plus_CoT" || s == "icl_cot") return PromptStrategy::ICL_plus_CoT;
  return std::nullopt;
}

namespace templates {

// Copies of templates/*.v1.tmpl; a unit test keeps them in sync.
inline constexpr std::string_view kClassifyEvidenceV1 = R"tmpl(You review patient records for prior authorization.

Checklist item:
{{checklist_item}}

Record excerpt:
{{chunks}}

Decide whether the excerpt is SUPPORTING evidence that the checklist item is met, CONTRADICTORY evidence that it is not met, or IRRELEVANT to it.
{{icl_examples}}{{cot_instruction}}
Answer with exactly one JSON object and nothing else:
{"verdict": "Supporting" | "Contradictory" | "Irrelevant", "reasoning": "<optional>"}
)tmpl";

inline constexpr std::string_view kJudgeLeafV1 = R"tmpl(You decide whether a checklist item for prior authorization is satisfied by a patient's records.

Checklist item:
{{checklist_item}}

Candidate evidence, each with its id and a prior verdict:
{{chunks}}

Verdict summary:
{{verdicts}}

Judge the item True (met), False (not met) or NoInformation (the records do not allow a conclusion).
Cite only ids from the list above. A quote, when given, must be copied exactly from the cited excerpt.
{{icl_examples}}{{cot_instruction}}
Answer with exactly one JSON object and nothing else:
{"judgment": "True" | "False" | "NoInformation", "evidence": [{"chunk_id": "<id>", "quote": "<exact text>"}], "reasoning": "<optional>"}
)tmpl";

inline constexpr std::string_view kExtractOperatorV1 = R"tmpl(You convert clinical coverage guidelines into logic trees.

Parent statement:
{{checklist_item}}

Child statements:
{{chunks}}

Name the logical operator that combines the child statements into the parent: AND (all must hold), OR (at least one must hold) or NOT (the single child must not hold). Answer ABSTAIN if the wording does not determine it.
{{icl_examples}}{{cot_instruction}}
Answer with exactly one JSON object and nothing else:
{"operator": "AND" | "OR" | "NOT" | "ABSTAIN", "rationale": "<short reason>"}
)tmpl";

inline constexpr std::string_view kClassifyExamples = R"(
Examples:
Item: The beneficiary has diabetes mellitus.
Excerpt: Past medical history: type 2 diabetes on metformin.
Answer: {"verdict": "Supporting"}
Item: History of previous foot ulceration of either foot.
Excerpt: No history of foot ulcers.
Answer: {"verdict": "Contradictory"}
Item: Poor circulation in either foot.
Excerpt: Patient lives with his daughter.
Answer: {"verdict": "Irrelevant"}
)";

inline constexpr std::string_view kJudgeExamples = R"(
Examples:
Item: The beneficiary has diabetes mellitus.
Evidence: [n#s0003] (Supporting) Type 2 diabetes mellitus, diagnosed 2008.
Answer: {"judgment": "True", "evidence": [{"chunk_id": "n#s0003", "quote": "Type 2 diabetes mellitus"}]}
Item: Foot deformity of either foot.
Evidence: [n#s0010] (Irrelevant) Vitals were stable.
Answer: {"judgment": "NoInformation", "evidence": []}
)";

inline constexpr std::string_view kOperatorExamples = R"(
Examples:
Parent: The physician documented one or more of the following conditions:
Children: "Foot deformity;" / "Poor circulation;"
Answer: {"operator": "OR", "rationale": "one or more of the following"}
Parent: Eligibility checklist
Children: "The beneficiary has diabetes mellitus; and" / "Documented foot condition"
Answer: {"operator": "AND", "rationale": "items joined by 'and'"}
)";

inline constexpr std::string_view kCotInstruction =
    "\nThink step by step. Put your reasoning in the \"reasoning\" field before deciding.\n";

}  // namespace templates

/// A prompt template with `{{slot}}` placeholders.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  explicit PromptTemplate(std::string text) : text_(std::move(text)) {}

  const std::string& text() const { return text_; }

  /// Substitutes every slot; throws FormatError on a slot with no value.
  std::string render(const std::map<std::string, std::string>& slots) const {
    std::string out;
    std::size_t pos = 0;
    while (true) {
      const auto open = text_.find("{{", pos);
      if (open == std::string::npos) break;
      const auto close = text_.find("}}", open + 2);
      if (close == std::string::npos) break;
      out.append(text_, pos, open - pos);
      const auto name = text_.substr(open + 2, close - open - 2);
      auto it = slots.find(name);
      if (it == slots.end()) throw FormatError("template slot '" + name + "' has no value");
      out += it->second;
      pos = close + 2;
    }
    out.append(text_, pos, std::string::npos);
    return out;
  }

 private:
  std::string text_;
};

/// The three agent prompts, either built in or loaded from
/// `<dir>/<task>.v<version>.tmpl`.
class PromptLibrary {
 public:
  static PromptLibrary builtin() {
    PromptLibrary lib;
    lib.set(AgentTask::ClassifyEvidence, PromptTemplate(std::string(templates::kClassifyEvidenceV1)));
    lib.set(AgentTask::JudgeLeaf, PromptTemplate(std::string(templates::kJudgeLeafV1)));
    lib.set(AgentTask::ExtractOperator, PromptTemplate(std::string(templates::kExtractOperatorV1)));
    return lib;
  }

  static PromptLibrary load(const std::filesystem::path& dir, int version = 1) {
    PromptLibrary lib;
    for (auto task : {AgentTask::ClassifyEvidence, AgentTask::JudgeLeaf, AgentTask::ExtractOperator}) {
      const auto file = dir / (std::string(to_string(task)) + ".v" + std::to_string(version) + ".tmpl");
      std::ifstream in(file, std::ios::binary);
      if (!in) throw ConfigError("cannot read prompt template " + file.string());
      std::ostringstream ss;
      ss << in.rdbuf();
      lib.set(task, PromptTemplate(ss.str()));
    }
    lib.version_ = version;
    return lib;
  }

  const PromptTemplate& get(AgentTask task) const { return templates_.at(task); }
  void set(AgentTask task, PromptTemplate t) { templates_[task] = std::move(t); }
  int version() const { return version_; }

  static std::string_view examples_for(AgentTask task) {
    switch (task) {
      case AgentTask::ClassifyEvidence: return templates::kClassifyExamples;
      case AgentTask::JudgeLeaf: return templates::kJudgeExamples;
      case AgentTask::ExtractOperator: return templates::kOperatorExamples;
    }
    return {};
  }

  /// Renders `task` with the strategy-dependent slots filled in.
  std::string render(AgentTask task, PromptStrategy strategy, std::map<std::string, std::string> slots) const {
    slots.try_emplace("icl_examples", std::string(examples_for(task)));
    slots.try_emplace("cot_instruction",
                      strategy == PromptStrategy::ICL_plus_CoT ? std::string(templates::kCotInstruction) : "");
    slots.try_emplace("verdicts", "");
    return get(task).render(slots);
  }

 private:
  std::map<AgentTask, PromptTemplate> templates_;
  int version_ = 1;
};

}  // namespace priorauth
