#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "priorauth/agents.hpp"
#include "priorauth/annotations.hpp"
#include "priorauth/checklist.hpp"
#include "priorauth/error.hpp"
#include "priorauth/ingest.hpp"
#include "priorauth/propagation.hpp"
#include "priorauth/retrieval.hpp"
#include "priorauth/synthetic.hpp"
#include "priorauth/text.hpp"

namespace priorauth {

/// Named metrics in [0,1] plus per-item detail and run metadata.
struct MetricReport {
  std::map<std::string, double> metrics;
  std::map<std::string, std::size_t> counts;
  nlohmann::json items = nlohmann::json::array();
  nlohmann::json extra = nlohmann::json::object();
  nlohmann::json metadata = nlohmann::json::object();

  void merge(const MetricReport& other) {
    for (const auto& [k, v] : other.metrics) metrics[k] = v;
    for (const auto& [k, v] : other.counts) counts[k] = v;
    for (const auto& i : other.items) items.push_back(i);
    extra.update(other.extra);
    metadata.update(other.metadata);
  }
};

inline nlohmann::json to_json(const MetricReport& r) {
  return {{"metrics", r.metrics}, {"counts", r.counts}, {"items", r.items}, {"extra", r.extra},
          {"metadata", r.metadata}};
}

/// Flat "kind,name,value" rows, one per metric and count.
inline std::string to_csv(const MetricReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "kind,name,value\n";
  for (const auto& [k, v] : r.metrics) out << "metric," << k << ',' << v << '\n';
  for (const auto& [k, v] : r.counts) out << "count," << k << ',' << v << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Token recall

/// |gold ∩ predicted| / |gold| over token multisets, where the predicted
/// multiset is the sum of the token counts of every predicted text.
/// Throws EmptyGold when the gold text has no tokens.
inline double token_recall(std::string_view gold, const std::vector<std::string>& predicted) {
  std::unordered_map<std::string, std::size_t> want;
  std::size_t total = 0;
  for (auto& t : tokenize(gold)) {
    ++want[t];
    ++total;
  }
  if (total == 0) throw EmptyGold("gold evidence has no tokens");
  std::unordered_map<std::string, std::size_t> have;
  for (const auto& p : predicted) {
    for (auto& t : tokenize(p)) {
      if (want.contains(t)) ++have[t];
    }
  }
  std::size_t hit = 0;
  for (const auto& [t, n] : want) hit += std::min(n, have[t]);
  return static_cast<double>(hit) / static_cast<double>(total);
}

/// All gold evidence strings of one annotation joined as one text.
inline std::string gold_text(const EvidenceAnnotation& a) {
  std::string out;
  for (const auto& e : a.gold_evidence) {
    if (!out.empty()) out += '\n';
    out += e;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Judgment accuracy

struct JudgmentItem {
  std::string case_id;
  std::string item_id;
  Judgment judgment = Judgment::NoInformation;
};

/// Exact-match accuracy of `predicted` against `gold`, which must cover the
/// same (case_id, item_id) keys. Order does not matter. Metrics are named
/// "<level>_accuracy"; the confusion matrix (rows gold, columns predicted)
/// goes under extra["<level>_confusion"].
inline MetricReport judgment_accuracy(const std::vector<JudgmentItem>& predicted,
                                      const std::vector<JudgmentItem>& gold, const std::string& level = "leaf") {
  using Key = std::pair<std::string, std::string>;
  auto index = [](const std::vector<JudgmentItem>& items, const char* what) {
    std::map<Key, Judgment> m;
    for (const auto& i : items) {
      if (!m.emplace(Key{i.case_id, i.item_id}, i.judgment).second) {
        throw MisalignedIds(std::string("duplicate ") + what + " item " + i.case_id + "/" + i.item_id);
      }
    }
    return m;
  };
  const auto p = index(predicted, "predicted");
  const auto g = index(gold, "gold");
  if (p.size() != g.size()) {
    throw MisalignedIds(std::to_string(p.size()) + " predictions for " + std::to_string(g.size()) + " gold items");
  }

  MetricReport r;
  std::array<std::array<std::size_t, 3>, 3> confusion{};
  std::size_t correct = 0;
  for (const auto& [key, gj] : g) {
    auto it = p.find(key);
    if (it == p.end()) throw MisalignedIds("no prediction for " + key.first + "/" + key.second);
    ++confusion[static_cast<std::size_t>(gj)][static_cast<std::size_t>(it->second)];
    correct += gj == it->second;
    r.items.push_back({{"level", level},
                       {"case_id", key.first},
                       {"item_id", key.second},
                       {"gold", std::string(to_string(gj))},
                       {"predicted", std::string(to_string(it->second))}});
  }
  if (g.empty()) throw MisalignedIds("no items to score");
  r.metrics[level + "_accuracy"] = static_cast<double>(correct) / static_cast<double>(g.size());
  r.counts[level + "_items"] = g.size();
  nlohmann::json cm = nlohmann::json::object();
  for (auto gj : kAllJudgments) {
    for (auto pj : kAllJudgments) {
      cm[std::string(to_string(gj))][std::string(to_string(pj))] =
          confusion[static_cast<std::size_t>(gj)][static_cast<std::size_t>(pj)];
    }
  }
  r.extra[level + "_confusion"] = cm;
  return r;
}

/// Per-leaf judgments of one case against the fixture annotations.
inline std::vector<JudgmentItem> leaf_items(const std::string& case_id, const std::vector<LeafResult>& results) {
  std::vector<JudgmentItem> out;
  for (const auto& l : results) out.push_back({case_id, l.leaf_id, l.judgment});
  return out;
}

inline std::vector<JudgmentItem> gold_items(const std::vector<EvidenceAnnotation>& annotations) {
  std::vector<JudgmentItem> out;
  for (const auto& a : annotations) out.push_back({a.note_id, a.leaf_id, a.gold_judgment});
  return out;
}

/// Mean token recall of agent evidence against gold evidence. Items with
/// empty gold are skipped.
inline MetricReport evidence_recall(const std::map<std::pair<std::string, std::string>, std::vector<Evidence>>& agent,
                                    const std::vector<EvidenceAnnotation>& annotations) {
  MetricReport r;
  double sum = 0;
  std::size_t scored = 0;
  std::size_t skipped = 0;
  for (const auto& a : annotations) {
    auto it = agent.find({a.note_id, a.leaf_id});
    std::vector<std::string> texts;
    if (it != agent.end()) {
      for (const auto& e : it->second) texts.push_back(e.text);
    }
    try {
      const double v = token_recall(gold_text(a), texts);
      sum += v;
      ++scored;
      r.items.push_back({{"case_id", a.note_id}, {"item_id", a.leaf_id}, {"evidence_recall", v}});
    } catch (const EmptyGold&) {
      ++skipped;
    }
  }
  if (scored > 0) r.metrics["evidence_recall"] = sum / static_cast<double>(scored);
  r.counts["evidence_recall_scored"] = scored;
  r.counts["evidence_recall_skipped"] = skipped;
  return r;
}

// ---------------------------------------------------------------------------
// Propagation accuracy

/// Produces a parent judgment and confidence for one synthetic record.
using PropagationEngine = std::function<Scored(const SyntheticRecord&)>;

/// The deterministic rule-table propagator.
inline Scored rule_engine(const SyntheticRecord& rec) {
  return propagate_tree(rec.subchecklist, rec.leaf_assignments).scored();
}

/// Response accuracy (judgment matches the oracle) and score accuracy
/// (judgment and confidence both match) over a synthetic dataset.
inline MetricReport propagation_accuracies(const std::vector<SyntheticRecord>& dataset,
                                           const PropagationEngine& engine = rule_engine) {
  if (dataset.empty()) throw Error("empty synthetic dataset");
  MetricReport r;
  std::size_t response = 0;
  std::size_t score = 0;
  for (const auto& rec : dataset) {
    const auto got = engine(rec);
    response += got.judgment == rec.oracle.judgment;
    score += got == rec.oracle;
  }
  const auto n = static_cast<double>(dataset.size());
  r.metrics["response_accuracy"] = static_cast<double>(response) / n;
  r.metrics["score_accuracy"] = static_cast<double>(score) / n;
  r.counts["records"] = dataset.size();
  return r;
}

/// Fraction of internal nodes whose operator the extraction agent recovers.
/// An ambiguous reply counts as wrong.
inline MetricReport operator_accuracy(const std::vector<const ChecklistNode*>& gold_nodes, CompletionClient& client,
                                      const AgentConfig& cfg) {
  if (gold_nodes.empty()) throw Error("no internal nodes to score");
  MetricReport r;
  std::size_t correct = 0;
  for (const auto* n : gold_nodes) {
    std::string predicted = "ABSTAIN";
    try {
      auto a = extract_operators(*n, client, cfg);
      predicted = std::string(to_string(a.op));
      correct += a.op == n->op;
    } catch (const AmbiguousOperator&) {
    }
    r.items.push_back({{"item_id", n->id}, {"gold", std::string(to_string(*n->op))}, {"predicted", predicted}});
  }
  r.metrics["operator_accuracy"] = static_cast<double>(correct) / static_cast<double>(gold_nodes.size());
  r.counts["operators"] = gold_nodes.size();
  return r;
}

/// Operator accuracy over the distinct sub-checklists of a synthetic dataset.
inline MetricReport operator_accuracy(const std::vector<SyntheticRecord>& dataset, CompletionClient& client,
                                      const AgentConfig& cfg) {
  std::set<std::string> seen;
  std::vector<const ChecklistNode*> nodes;
  for (const auto& rec : dataset) {
    if (seen.insert(rec.subchecklist.id).second) nodes.push_back(&rec.subchecklist);
  }
  return operator_accuracy(nodes, client, cfg);
}

// ---------------------------------------------------------------------------
// Recall vs k

/// Mean token recall of the top-k chunk texts against each annotation's
/// gold evidence, for every k. Queries use the leaf text from `checklist`.
inline MetricReport recall_vs_k(const ChecklistNode& checklist, const std::vector<Document>& notes,
                                const std::vector<EvidenceAnnotation>& annotations, Encoder& encoder,
                                const std::vector<std::size_t>& ks, bool with_ancestors = false) {
  if (ks.empty()) throw Error("no k values");
  const auto k_max = *std::max_element(ks.begin(), ks.end());
  std::map<std::string, const Document*> by_id;
  for (const auto& d : notes) by_id[d.id] = &d;

  std::map<std::size_t, double> sums;
  std::size_t scored = 0;
  std::size_t skipped = 0;
  MetricReport r;
  std::map<std::string, std::unique_ptr<ChunkIndex>> indexes;
  for (const auto& a : annotations) {
    const auto gold = gold_text(a);
    if (tokenize(gold).empty()) {
      ++skipped;
      continue;
    }
    auto doc = by_id.find(a.note_id);
    if (doc == by_id.end()) throw MisalignedIds("annotation for unknown note '" + a.note_id + "'");
    const auto* leaf = find_node(checklist, a.leaf_id);
    if (leaf == nullptr || !leaf->is_leaf()) throw MisalignedIds("annotation for unknown leaf '" + a.leaf_id + "'");
    auto& index = indexes[a.note_id];
    if (!index) index = std::make_unique<ChunkIndex>(ingest({*doc->second}), encoder);

    const auto hits = top_k(*index, encoder, query_text(checklist, *leaf, with_ancestors), k_max);
    nlohmann::json item{{"case_id", a.note_id}, {"item_id", a.leaf_id}};
    for (auto k : ks) {
      std::vector<std::string> texts;
      for (std::size_t i = 0; i < std::min(k, hits.size()); ++i) texts.push_back(hits[i].chunk.text);
      const double v = token_recall(gold, texts);
      sums[k] += v;
      item["recall@" + std::to_string(k)] = v;
    }
    r.items.push_back(item);
    ++scored;
  }
  for (auto k : ks) r.metrics["recall@" + std::to_string(k)] = scored ? sums[k] / static_cast<double>(scored) : 0.0;
  r.counts["recall_scored"] = scored;
  r.counts["recall_skipped"] = skipped;
  r.metadata["encoder"] = encoder.name();
  return r;
}

}  // namespace priorauth
