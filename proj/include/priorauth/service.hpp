#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <spdlog/spdlog.h>

#include "priorauth/agents.hpp"
#include "priorauth/annotations.hpp"
#include "priorauth/clients.hpp"
#include "priorauth/record.hpp"
#include "priorauth/retrieval.hpp"
#include "priorauth/store.hpp"

namespace priorauth {

struct AdjudicationRequest {
  /// Generated when empty.
  std::string id;
  /// Defaults to the first document's id.
  std::string case_id;
  ChecklistNode checklist;
  std::vector<Document> documents;
  PipelineConfig config;
};

struct OverrideRequest {
  std::string record_id;
  std::string leaf_id;
  Judgment judgment = Judgment::NoInformation;
  std::string reviewer;
  std::string note;
  /// Version the reviewer saw; checked when present.
  std::optional<std::uint64_t> version;
};

struct ServiceOptions {
  /// Labels read by the oracle-backed mock clients.
  GoldLabels labels;
  PromptLibrary prompts = PromptLibrary::builtin();
  /// Background adjudications run on this many threads.
  std::size_t workers = 2;
  std::function<std::unique_ptr<CompletionClient>(const PipelineConfig&)> client_factory;
  std::function<std::unique_ptr<Encoder>(const PipelineConfig&)> encoder_factory;
};

inline std::string new_record_id() {
  static std::atomic<std::uint64_t> counter{0};
  static const std::uint64_t salt = std::random_device{}() ^ (std::uint64_t{std::random_device{}()} << 32);
  std::uint64_t state = salt + counter++;
  char buf[32];
  std::snprintf(buf, sizeof buf, "adj-%016llx", static_cast<unsigned long long>(splitmix64(state)));
  return buf;
}

/// Exact-substring evidence of one leaf with its location in the source
/// chunk, for highlighting.
inline nlohmann::json evidence_view(const AdjudicationRecord& r, const std::string& leaf_id) {
  const auto* leaf = r.find_leaf(leaf_id);
  if (leaf == nullptr) throw UnknownLeaf("record '" + r.id + "' has no leaf '" + leaf_id + "'");
  std::map<std::string, std::string> chunk_text;
  for (auto& c : ingest(r.documents)) chunk_text[c.chunk_id] = c.text;
  nlohmann::json items = nlohmann::json::array();
  for (const auto& e : leaf->evidence) {
    nlohmann::json item{{"chunk_id", e.chunk_id}, {"text", e.text}};
    auto it = chunk_text.find(e.chunk_id);
    if (it != chunk_text.end()) {
      item["chunk_text"] = it->second;
      const auto pos = it->second.find(e.text);
      item["start"] = pos == std::string::npos ? nlohmann::json(nullptr) : nlohmann::json(pos);
      item["end"] = pos == std::string::npos ? nlohmann::json(nullptr) : nlohmann::json(pos + e.text.size());
    }
    items.push_back(item);
  }
  nlohmann::json out{{"record_id", r.id},
                     {"leaf_id", leaf_id},
                     {"judgment", std::string(to_string(leaf->judgment))},
                     {"confidence", leaf->confidence.str()},
                     {"evidence", items},
                     {"overridden", r.original_leaf_results.contains(leaf_id)}};
  if (!leaf->reviewer_note.empty()) out["reviewer_note"] = leaf->reviewer_note;
  return out;
}

/// Runs adjudications end to end, persists them, and applies reviewer
/// overrides under optimistic versioning.
class AdjudicationService {
 public:
  AdjudicationService(RecordStore& store, ServiceOptions opts = {}) : store_(store), opts_(std::move(opts)) {
    if (!opts_.client_factory) {
      opts_.client_factory = [this](const PipelineConfig& c) { return make_client(c.agents.client, opts_.labels); };
    }
    if (!opts_.encoder_factory) {
      opts_.encoder_factory = [](const PipelineConfig& c) { return make_encoder(c.encoder, c.encoder_dim); };
    }
    for (std::size_t i = 0; i < std::max<std::size_t>(opts_.workers, 1); ++i) {
      workers_.emplace_back([this](std::stop_token st) { worker_loop(st); });
    }
  }

  ~AdjudicationService() {
    wait_idle();
    {
      std::lock_guard lock(mu_);
      for (auto& w : workers_) w.request_stop();
    }
    cv_.notify_all();
  }

  AdjudicationService(const AdjudicationService&) = delete;
  AdjudicationService& operator=(const AdjudicationService&) = delete;

  RecordStore& store() { return store_; }

  /// Runs the pipeline synchronously. The record is persisted before it is
  /// returned; on failure a Failed record is persisted and PipelineError
  /// names the stage.
  AdjudicationRecord run_adjudication(AdjudicationRequest req) {
    if (req.id.empty()) req.id = new_record_id();
    auto existing = store_.get(req.id);
    if (existing && existing->status != RecordStatus::Pending) {
      throw Error("record '" + req.id + "' already exists");
    }

    AdjudicationRecord r;
    r.id = req.id;
    r.case_id = req.case_id.empty() && !req.documents.empty() ? req.documents.front().id : req.case_id;
    r.checklist = req.checklist;
    r.documents = req.documents;
    r.documents_digest = documents_digest(req.documents);
    r.config = req.config;
    r.created_at = existing ? existing->created_at : utc_now();
    r.version = existing ? existing->version : 0;

    std::string stage = "validate";
    std::mutex partial_mu;
    std::map<std::string, LeafResult> partial;
    auto t0 = std::chrono::steady_clock::now();
    auto lap = [&](const std::string& name) {
      const auto now = std::chrono::steady_clock::now();
      spdlog::debug("adjudication {} stage {} took {} ms", r.id, name,
                    std::chrono::duration_cast<std::chrono::milliseconds>(now - t0).count());
      t0 = now;
    };
    try {
      validate(r.checklist);
      r.config.validate();
      lap(stage);

      stage = "ingest";
      auto chunks = ingest(r.documents);
      lap(stage);

      stage = "index";
      auto encoder = opts_.encoder_factory(r.config);
      r.encoder_id = encoder->name();
      ChunkIndex index(std::move(chunks), *encoder);
      lap(stage);

      stage = "agents";
      auto client = opts_.client_factory(r.config);
      r.client_id = client->id();
      RequestLimiter limiter(r.config.agents.max_in_flight);
      AgentRunner runner(*client, r.config.agents, opts_.prompts, &limiter);
      const auto leaf_nodes = leaves(r.checklist);
      r.leaf_results = parallel_map(leaf_nodes.size(), r.config.leaf_parallelism, [&](std::size_t i) {
        const auto& leaf = *leaf_nodes[i];
        std::string leaf_stage = "retrieve";
        try {
          auto candidates = top_k(index, *encoder, query_text(r.checklist, leaf, r.config.ancestor_context),
                                  r.config.k);
          leaf_stage = "classify";
          auto verdicts = runner.classify_evidence(leaf, candidates, r.case_id);
          leaf_stage = "judge";
          auto result = runner.judge_leaf(leaf, candidates, verdicts, r.case_id);
          std::lock_guard lock(partial_mu);
          partial[leaf.id] = result;
          return result;
        } catch (const PipelineError&) {
          throw;
        } catch (const std::exception& e) {
          throw PipelineError(leaf_stage, "leaf '" + leaf.id + "': " + e.what());
        }
      });
      lap(stage);

      stage = "propagate";
      r.tree = propagate_tree(r.checklist, leaf_assignment(r));
      r.decision = make_decision(r.tree->scored());
      r.status = threshold_status(*r.decision, r.config.review_threshold);
      lap(stage);
    } catch (const std::exception& e) {
      const auto* pe = dynamic_cast<const PipelineError*>(&e);
      const std::string failed_stage = pe ? pe->stage() : stage;
      const std::string message = pe ? std::string(e.what()).substr(failed_stage.size() + 2) : e.what();
      r.status = RecordStatus::Failed;
      r.failure = PipelineFailure{failed_stage, message};
      r.tree.reset();
      r.decision.reset();
      r.leaf_results.clear();
      for (const auto* l : leaves(r.checklist)) {
        if (auto it = partial.find(l->id); it != partial.end()) r.leaf_results.push_back(it->second);
      }
      persist(r, existing.has_value());
      spdlog::warn("adjudication {} failed at {}: {}", r.id, failed_stage, message);
      throw PipelineError(failed_stage, message);
    }
    persist(r, existing.has_value());
    spdlog::info("adjudication {} case {}: Y={} confidence {} status {}", r.id, r.case_id, r.decision->y,
                 r.decision->root_confidence.str(), to_string(r.status));
    return *store_.get(r.id);
  }

  /// Persists a Pending record and runs the pipeline in the background.
  std::string submit(AdjudicationRequest req) {
    if (req.id.empty()) req.id = new_record_id();
    AdjudicationRecord pending;
    pending.id = req.id;
    pending.case_id = req.case_id.empty() && !req.documents.empty() ? req.documents.front().id : req.case_id;
    pending.checklist = req.checklist;
    pending.documents = req.documents;
    pending.documents_digest = documents_digest(req.documents);
    pending.config = req.config;
    pending.status = RecordStatus::Pending;
    pending.version = 1;
    pending.created_at = pending.updated_at = utc_now();
    store_.create(pending);
    {
      std::lock_guard lock(mu_);
      queue_.push_back(std::move(req));
      ++in_flight_;
    }
    cv_.notify_one();
    return pending.id;
  }

  /// Blocks until every submitted adjudication has finished.
  void wait_idle() {
    std::unique_lock lock(mu_);
    idle_cv_.wait(lock, [&] { return in_flight_ == 0; });
  }

  std::optional<AdjudicationRecord> get(const std::string& id) const { return store_.get(id); }

  std::vector<AdjudicationRecord> list(std::optional<RecordStatus> status = std::nullopt) const {
    return store_.list(status);
  }

  /// Replaces one leaf's judgment with a reviewer's, at confidence 1, and
  /// re-propagates its ancestors. Overriding a leaf to the judgment it
  /// already has changes nothing but the audit trail.
  AdjudicationRecord apply_override(const OverrideRequest& o) {
    auto r = load_reviewable(o.record_id, o.version);
    const auto expected = r.version;
    auto* leaf = r.find_leaf(o.leaf_id);
    if (leaf == nullptr) throw UnknownLeaf("record '" + r.id + "' has no leaf '" + o.leaf_id + "'");

    AuditEntry entry{r.id, "override", o.leaf_id, o.reviewer, o.note, utc_now(), leaf->scored(), {}, r.decision->y, 0, 0};
    if (leaf->judgment == o.judgment) {
      entry.new_value = entry.old_value;
    } else {
      if (!r.original_leaf_results.contains(o.leaf_id)) r.original_leaf_results[o.leaf_id] = *leaf;
      leaf->judgment = o.judgment;
      leaf->confidence = Confidence::one();
      leaf->reviewer_note = o.note;
      entry.new_value = leaf->scored();
      r.tree = repropagate(r.checklist, *r.tree, o.leaf_id, leaf->scored());
      r.decision = make_decision(r.tree->scored());
      r.status = RecordStatus::Overridden;
    }
    entry.new_y = r.decision->y;
    return commit(std::move(r), expected, std::move(entry));
  }

  /// Restores the machine result of an overridden leaf exactly.
  AdjudicationRecord revert_override(const std::string& record_id, const std::string& leaf_id,
                                     const std::string& reviewer, const std::string& note = {},
                                     std::optional<std::uint64_t> version = std::nullopt) {
    auto r = load_reviewable(record_id, version);
    const auto expected = r.version;
    auto* leaf = r.find_leaf(leaf_id);
    if (leaf == nullptr) throw UnknownLeaf("record '" + r.id + "' has no leaf '" + leaf_id + "'");
    auto orig = r.original_leaf_results.find(leaf_id);
    if (orig == r.original_leaf_results.end()) throw Error("leaf '" + leaf_id + "' has no override to revert");

    AuditEntry entry{r.id, "revert", leaf_id, reviewer, note, utc_now(), leaf->scored(), orig->second.scored(),
                     r.decision->y, 0, 0};
    *leaf = orig->second;
    r.original_leaf_results.erase(orig);
    r.tree = repropagate(r.checklist, *r.tree, leaf_id, leaf->scored());
    r.decision = make_decision(r.tree->scored());
    r.status = r.original_leaf_results.empty() ? threshold_status(*r.decision, r.config.review_threshold)
                                               : RecordStatus::Overridden;
    entry.new_y = r.decision->y;
    return commit(std::move(r), expected, std::move(entry));
  }

  /// Reviewer-asserted leaf judgments as evaluation fixtures.
  std::vector<EvidenceAnnotation> export_feedback() const {
    std::vector<EvidenceAnnotation> out;
    for (const auto& r : store_.list()) {
      for (const auto& l : r.leaf_results) {
        if (!r.original_leaf_results.contains(l.leaf_id)) continue;
        EvidenceAnnotation a{r.case_id, l.leaf_id, l.judgment, {}};
        for (const auto& e : l.evidence) a.gold_evidence.push_back(e.text);
        out.push_back(std::move(a));
      }
    }
    return out;
  }

 private:
  AdjudicationRecord load_reviewable(const std::string& id, std::optional<std::uint64_t> version) {
    auto r = store_.get(id);
    if (!r) throw UnknownRecord("no record '" + id + "'");
    if (version && *version != r->version) {
      throw ConcurrentOverrideConflict("record '" + id + "' is at version " + std::to_string(r->version) + ", not " +
                                       std::to_string(*version));
    }
    if (!r->tree || !r->decision) {
      throw Error("record '" + id + "' is " + std::string(to_string(r->status)) + " and cannot be reviewed");
    }
    return std::move(*r);
  }

  AdjudicationRecord commit(AdjudicationRecord r, std::uint64_t expected, AuditEntry entry) {
    r.version = expected + 1;
    r.updated_at = entry.at;
    entry.version = r.version;
    r.audit.push_back(entry);
    store_.update(r, expected);
    store_.append_audit(entry);
    spdlog::info("record {} {} leaf {} by {}: {} -> {}, Y {} -> {}", r.id, entry.action, entry.leaf_id,
                 entry.reviewer, to_string(entry.old_value.judgment), to_string(entry.new_value.judgment), entry.old_y,
                 entry.new_y);
    return r;
  }

  void persist(AdjudicationRecord& r, bool exists) {
    r.updated_at = utc_now();
    if (exists) {
      const auto expected = r.version;
      r.version = expected + 1;
      store_.update(r, expected);
    } else {
      r.version = 1;
      store_.create(r);
    }
  }

  void worker_loop(std::stop_token st) {
    while (true) {
      AdjudicationRequest req;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return st.stop_requested() || !queue_.empty(); });
        if (queue_.empty()) return;
        req = std::move(queue_.front());
        queue_.pop_front();
      }
      try {
        run_adjudication(std::move(req));
      } catch (const std::exception& e) {
        spdlog::debug("background adjudication ended with error: {}", e.what());
      }
      {
        std::lock_guard lock(mu_);
        --in_flight_;
      }
      idle_cv_.notify_all();
    }
  }

  RecordStore& store_;
  ServiceOptions opts_;
  std::mutex mu_;
  std::condition_variable_any cv_;
  std::condition_variable idle_cv_;
  std::deque<AdjudicationRequest> queue_;
  std::size_t in_flight_ = 0;
  std::vector<std::jthread> workers_;
};

}  // namespace priorauth
