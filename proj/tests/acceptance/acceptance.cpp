// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "priorauth/evaluation.hpp"
#include "priorauth/service.hpp"
#include "priorauth/synthetic.hpp"
#include "support/fixtures.hpp"
#include "support/random_trees.hpp"
#include "support/reference_propagator.hpp"

using namespace priorauth;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

testsupport::Tv to_tv(Judgment j) {
  return j == Judgment::True ? testsupport::Tv::T : j == Judgment::False ? testsupport::Tv::F : testsupport::Tv::N;
}

// Confidence in tenths; every confidence used here sits on that grid.
std::int64_t tenths(const Confidence& c) { return c.num() * 10 / c.den(); }

// Mirror of a checklist in the reference evaluator's node type, leaves
// numbered in document order.
testsupport::RefNode mirror(const ChecklistNode& n, std::vector<std::string>& leaf_order) {
  testsupport::RefNode r;
  if (n.is_leaf()) {
    r.leaf_index = static_cast<int>(leaf_order.size());
    leaf_order.push_back(n.id);
    return r;
  }
  r.op = *n.op == Operator::And ? testsupport::RefOp::And
       : *n.op == Operator::Or  ? testsupport::RefOp::Or
                                : testsupport::RefOp::Not;
  for (const auto& c : n.children) r.kids.push_back(mirror(c, leaf_order));
  return r;
}

// Independent engine for the synthetic parity check.
Scored reference_engine(const SyntheticRecord& rec) {
  std::vector<std::string> order;
  auto ref = mirror(rec.subchecklist, order);
  std::vector<testsupport::RefValue> vals;
  for (const auto& id : order) {
    const auto& s = rec.leaf_assignments.at(id);
    vals.push_back({to_tv(s.judgment), tenths(s.confidence)});
  }
  const auto v = testsupport::evaluate(ref, vals);
  const auto j = v.v == testsupport::Tv::T ? Judgment::True : v.v == testsupport::Tv::F ? Judgment::False
                                                                                        : Judgment::NoInformation;
  return {j, Confidence(v.f, 10)};
}

std::vector<ChecklistNode> all_checklists() {
  std::vector<ChecklistNode> out;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(testsupport::checklist_dir())) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out.push_back(parse_checklist(testsupport::read_file(f)));
  return out;
}

AdjudicationRequest fixture_request(const testsupport::FixtureSet& fx, const Document& note,
                                    const std::string& client) {
  AdjudicationRequest r;
  r.id = "acc-" + client.substr(client.rfind(':') + 1) + "-" + note.id;
  r.case_id = note.id;
  r.checklist = fx.checklist;
  r.documents = {note};
  r.config.agents.client = client;
  return r;
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(7331);
  std::uint64_t assignments = 0;
  for (int t = 0; t < 1000; ++t) {
    auto rt = testsupport::random_tree(rng, 1 + static_cast<int>(rng() % 8));
    std::vector<std::string> order;
    mirror(rt.tree, order);
    std::size_t total = 1;
    for (std::size_t i = 0; i < order.size(); ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      LeafAssignment a;
      std::vector<testsupport::RefValue> vals(order.size());
      auto c = code;
      for (std::size_t i = 0; i < order.size(); ++i) {
        const auto j = kAllJudgments[c % 3];
        c /= 3;
        const auto f = static_cast<std::int64_t>(1 + rng() % 10);
        a[order[i]] = {j, Confidence(f, 10)};
        // random_tree numbers leaves in document order, as mirror() does.
        vals[i] = {to_tv(j), f};
      }
      const auto got = propagate_tree(rt.tree, a).scored();
      const auto want = testsupport::evaluate(rt.ref, vals);
      ++assignments;
      if (to_tv(got.judgment) != want.v || got.confidence != Confidence(want.f, 10)) {
        return {false, "tree " + std::to_string(t) + " assignment " + std::to_string(code) + " disagrees"};
      }
    }
  }
  const double secs = seconds_since(t0);
  return {secs < 60.0, std::to_string(assignments) + " assignments over 1000 trees in " + fmt(secs, 2) + " s"};
}

Outcome rule_table_conformance() {
  constexpr auto T = Judgment::True;
  constexpr auto F = Judgment::False;
  constexpr auto N = Judgment::NoInformation;
  auto s = [](Judgment j, int t) { return Scored{j, Confidence(t, 10)}; };
  int checks = 0;
  std::string failed;
  auto expect = [&](const std::string& name, const Scored& got, const Scored& want) {
    ++checks;
    if (!(got == want)) failed += (failed.empty() ? "" : ", ") + name;
  };
  // No-information identities.
  expect("T and N", propagate_node(Operator::And, {s(T, 5), s(N, 5)}), s(N, 5));
  expect("F and N", propagate_node(Operator::And, {s(F, 5), s(N, 5)}), s(F, 5));
  expect("T or N", propagate_node(Operator::Or, {s(T, 5), s(N, 5)}), s(T, 5));
  expect("F or N", propagate_node(Operator::Or, {s(F, 5), s(N, 5)}), s(N, 5));
  expect("not N", propagate_node(Operator::Not, {s(N, 5)}), s(N, 5));
  // Confidence selection.
  expect("and/T min", propagate_node(Operator::And, {s(T, 8), s(T, 6)}), s(T, 6));
  expect("and/F max", propagate_node(Operator::And, {s(F, 9), s(F, 5), s(T, 7)}), s(F, 9));
  expect("and/N min", propagate_node(Operator::And, {s(N, 4), s(T, 2), s(N, 7)}), s(N, 4));
  expect("or/T max", propagate_node(Operator::Or, {s(T, 3), s(F, 10), s(T, 8)}), s(T, 8));
  expect("or/F min", propagate_node(Operator::Or, {s(F, 9), s(F, 4)}), s(F, 4));
  expect("or/N min", propagate_node(Operator::Or, {s(N, 6), s(F, 1), s(N, 2)}), s(N, 2));
  // Every binary cell and confidence pair against the reference tables.
  for (auto a : kAllJudgments) {
    for (auto b : kAllJudgments) {
      for (int fa = 1; fa <= 10; ++fa) {
        for (int fb = 1; fb <= 10; ++fb) {
          for (auto [op, table] : {std::pair{Operator::And, &testsupport::kAndTable},
                                   std::pair{Operator::Or, &testsupport::kOrTable}}) {
            const auto want = testsupport::combine(*table, {to_tv(a), fa}, {to_tv(b), fb});
            const auto got = propagate_node(op, {s(a, fa), s(b, fb)});
            ++checks;
            if (to_tv(got.judgment) != want.v || got.confidence != Confidence(want.f, 10)) {
              failed += (failed.empty() ? "" : ", ") + std::string("table cell ") + std::string(to_string(a)) + "/" +
                        std::string(to_string(b));
            }
          }
        }
      }
    }
  }
  if (!failed.empty()) return {false, "mismatch: " + failed};
  return {true, std::to_string(checks) + " rule checks"};
}

Outcome synthetic_parity() {
  const fs::path cli = PRIORAUTH_CLI_PATH;
  const auto tmp = fs::temp_directory_path() / ("priorauth-acc-" + std::to_string(::getpid()));
  fs::create_directories(tmp);
  std::string checklist_args;
  for (const auto& e : fs::directory_iterator(testsupport::checklist_dir())) {
    checklist_args += " --checklist '" + e.path().string() + "'";
  }
  std::vector<std::string> outputs;
  for (int i = 0; i < 2; ++i) {
    const auto out = tmp / ("synthetic" + std::to_string(i) + ".jsonl");
    const auto cmd = "'" + cli.string() + "' generate-synthetic --count 450 --seed 42" + checklist_args + " --out '" +
                     out.string() + "'";
    if (std::system(cmd.c_str()) != 0) return {false, "generate-synthetic exited non-zero"};
    outputs.push_back(testsupport::read_file(out));
  }
  fs::remove_all(tmp);
  if (outputs[0] != outputs[1]) return {false, "two runs with the same seed differ"};

  std::vector<SyntheticRecord> dataset;
  std::istringstream in(outputs[0]);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) dataset.push_back(synthetic_record_from_json(nlohmann::json::parse(line)));
  }
  if (dataset.size() != 450) return {false, "expected 450 records, got " + std::to_string(dataset.size())};
  const auto file_report = propagation_accuracies(dataset);
  const auto ref_report = propagation_accuracies(dataset, reference_engine);

  const auto t0 = Clock::now();
  const auto big = generate_synthetic(all_checklists(), {SyntheticMode::Sampled, 4500, 42});
  const auto big_report = propagation_accuracies(big, reference_engine);
  const double secs = seconds_since(t0);

  const bool ok = file_report.metrics.at("response_accuracy") == 1.0 &&
                  file_report.metrics.at("score_accuracy") == 1.0 &&
                  ref_report.metrics.at("response_accuracy") == 1.0 &&
                  ref_report.metrics.at("score_accuracy") == 1.0 &&
                  big_report.metrics.at("score_accuracy") == 1.0 && secs < 30.0;
  return {ok, "byte-identical reruns; response " + fmt(ref_report.metrics.at("response_accuracy")) + " score " +
                  fmt(ref_report.metrics.at("score_accuracy")) + " against the reference evaluator; 4500 records in " +
                  fmt(secs, 2) + " s"};
}

// Probability that a 10-run majority with per-run flip rate p (uniform to
// either wrong label) returns the gold label. Top ties resolve to
// NoInformation, which is correct only when the gold label is
// NoInformation.
double majority_accuracy(double p, int n, bool gold_is_no_information) {
  std::vector<double> logfact(static_cast<std::size_t>(n) + 1, 0.0);
  for (int i = 1; i <= n; ++i) logfact[static_cast<std::size_t>(i)] = logfact[static_cast<std::size_t>(i) - 1] + std::log(i);
  double acc = 0.0;
  for (int g = 0; g <= n; ++g) {
    for (int w1 = 0; g + w1 <= n; ++w1) {
      const int w2 = n - g - w1;
      const double lp = logfact[static_cast<std::size_t>(n)] - logfact[static_cast<std::size_t>(g)] -
                        logfact[static_cast<std::size_t>(w1)] - logfact[static_cast<std::size_t>(w2)] +
                        g * std::log(1.0 - p) + (w1 + w2) * std::log(p / 2.0);
      const int top = std::max({g, w1, w2});
      const int at_top = (g == top) + (w1 == top) + (w2 == top);
      const bool correct = at_top == 1 ? g == top : gold_is_no_information;
      if (correct) acc += std::exp(lp);
    }
  }
  return acc;
}

Outcome majority_amplification() {
  const double p = 0.2;
  const int n = 10;
  const auto fx = testsupport::load_fixture_set("footwear_bulk");
  MemoryStore store;
  ServiceOptions opts;
  opts.labels = GoldLabels(fx.annotations);
  AdjudicationService service(store, std::move(opts));

  std::vector<JudgmentItem> predicted;
  for (const auto& note : fx.notes) {
    auto req = fixture_request(fx, note, "mock:noise:0.2:90210");
    req.config.agents.n_votes = n;
    const auto rec = service.run_adjudication(req);
    auto items = leaf_items(rec.case_id, rec.leaf_results);
    predicted.insert(predicted.end(), items.begin(), items.end());
  }
  const auto report = judgment_accuracy(predicted, gold_items(fx.annotations));
  const double measured = report.metrics.at("leaf_accuracy");

  std::size_t ni = 0;
  for (const auto& a : fx.annotations) ni += a.gold_judgment == Judgment::NoInformation;
  const double total = static_cast<double>(fx.annotations.size());
  const double closed = (static_cast<double>(ni) * majority_accuracy(p, n, true) +
                         (total - static_cast<double>(ni)) * majority_accuracy(p, n, false)) /
                        total;
  const bool ok = measured >= 0.87 && std::abs(measured - closed) <= 0.02;
  return {ok, "accuracy " + fmt(measured) + " over " + std::to_string(predicted.size()) + " leaves; closed form " +
                  fmt(closed) + "; single-run " + fmt(1.0 - p)};
}

struct FootwearRuns {
  testsupport::FixtureSet fx = testsupport::load_fixture_set("footwear");
  MemoryStore store;
  std::unique_ptr<AdjudicationService> service;
  std::vector<AdjudicationRecord> oracle;

  FootwearRuns() {
    ServiceOptions opts;
    opts.labels = GoldLabels(fx.annotations);
    service = std::make_unique<AdjudicationService>(store, std::move(opts));
    for (const auto& note : fx.notes) oracle.push_back(service->run_adjudication(fixture_request(fx, note, "mock:oracle")));
  }
};

FootwearRuns& footwear_runs() {
  static FootwearRuns runs;
  return runs;
}

Outcome oracle_end_to_end() {
  auto& runs = footwear_runs();
  std::vector<JudgmentItem> predicted;
  int y_ok = 0;
  std::string wrong;
  for (const auto& rec : runs.oracle) {
    auto items = leaf_items(rec.case_id, rec.leaf_results);
    predicted.insert(predicted.end(), items.begin(), items.end());
    if (rec.decision && rec.decision->y == runs.fx.expected_y.at(rec.case_id)) {
      ++y_ok;
    } else {
      wrong += " " + rec.case_id;
    }
  }
  const double acc = judgment_accuracy(predicted, gold_items(runs.fx.annotations)).metrics.at("leaf_accuracy");
  const bool ok = acc == 1.0 && y_ok == static_cast<int>(runs.oracle.size());
  return {ok, "leaf accuracy " + fmt(acc) + "; decisions " + std::to_string(y_ok) + "/" +
                  std::to_string(runs.oracle.size()) + (wrong.empty() ? "" : "; wrong:" + wrong)};
}

Outcome retrieval_monotonicity() {
  auto& runs = footwear_runs();
  LexicalEmbedder encoder(384);
  const std::vector<std::size_t> ks{5, 10, 20, 40};
  const auto report = recall_vs_k(runs.fx.checklist, runs.fx.notes, runs.fx.annotations, encoder, ks);
  bool ok = true;
  std::string series;
  double prev = -1.0;
  for (auto k : ks) {
    const double v = report.metrics.at("recall@" + std::to_string(k));
    ok = ok && v >= prev;
    prev = v;
    series += (series.empty() ? "" : " ") + std::string("@") + std::to_string(k) + "=" + fmt(v, 3);
  }

  // Nested top-k on random indexes with many duplicate texts.
  std::mt19937_64 rng(404);
  HashEmbedder hash(16);
  int nested = 0;
  for (; nested < 10000 && ok; ++nested) {
    const int n = 1 + static_cast<int>(rng() % 50);
    std::vector<DocumentChunk> chunks;
    for (int i = 0; i < n; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "doc#s%04d", i);
      chunks.push_back({id, "doc", "t" + std::to_string(rng() % 20), ChunkKind::Sentence, 0});
    }
    ChunkIndex index(chunks, hash);
    const auto query = hash.embed_one("q" + std::to_string(rng() % 100));
    const auto k1 = 1 + rng() % static_cast<std::uint64_t>(n);
    const auto k2 = k1 + rng() % (static_cast<std::uint64_t>(n) - k1 + 2);
    const auto a = index.top_k(query, k1);
    const auto b = index.top_k(query, k2);
    for (std::size_t i = 0; i < a.size(); ++i) ok = ok && a[i].chunk.chunk_id == b[i].chunk.chunk_id;
  }
  return {ok, "recall " + series + "; " + std::to_string(nested) + " nested top-k checks"};
}

Outcome evidence_provenance() {
  auto& runs = footwear_runs();
  std::size_t surfaced = 0;
  std::string bad;
  auto check_record = [&](const AdjudicationRecord& rec) {
    std::map<std::string, std::string> chunk_text;
    for (auto& c : ingest(rec.documents)) chunk_text[c.chunk_id] = c.text;
    for (const auto& l : rec.leaf_results) {
      for (const auto& e : l.evidence) {
        ++surfaced;
        auto it = chunk_text.find(e.chunk_id);
        if (it == chunk_text.end() || e.text.empty() || it->second.find(e.text) == std::string::npos) {
          bad += " " + rec.id + "/" + l.leaf_id;
        }
      }
    }
  };
  for (const auto& rec : runs.oracle) check_record(rec);

  // Same notes with injected citations: each jury run adds one unknown
  // chunk id and one quote absent from a real candidate.
  std::size_t dropped = 0;
  std::size_t expected_dropped = 0;
  bool same_as_clean = true;
  for (std::size_t i = 0; i < runs.fx.notes.size(); ++i) {
    const auto rec = runs.service->run_adjudication(fixture_request(runs.fx, runs.fx.notes[i], "mock:hallucinate"));
    check_record(rec);
    for (const auto& l : rec.leaf_results) {
      dropped += l.hallucinated_citations;
      expected_dropped += 2 * l.runs;
      const auto* clean = runs.oracle[i].find_leaf(l.leaf_id);
      same_as_clean = same_as_clean && clean != nullptr && clean->evidence == l.evidence &&
                      clean->scored() == l.scored();
    }
  }
  const bool ok = bad.empty() && surfaced > 0 && dropped == expected_dropped && same_as_clean;
  return {ok, std::to_string(surfaced) + " surfaced excerpts all verbatim" + (bad.empty() ? "" : " except" + bad) +
                  "; dropped " + std::to_string(dropped) + "/" + std::to_string(expected_dropped) +
                  " injected citations" + (same_as_clean ? "" : "; results differ from the clean run")};
}

Outcome replay_and_overrides() {
  auto& runs = footwear_runs();
  std::size_t overrides = 0;
  std::size_t replays = 0;
  for (const auto& original : runs.oracle) {
    if (!replay_matches(original)) return {false, original.id + " does not replay"};
    ++replays;
    auto current = *runs.store.get(original.id);
    for (const auto& leaf : original.leaf_results) {
      for (auto j : kAllJudgments) {
        if (j == leaf.judgment) continue;
        OverrideRequest o{original.id, leaf.leaf_id, j, "acceptance", "check", current.version};
        current = runs.service->apply_override(o);
        ++overrides;
        auto expected_leaves = leaf_assignment(original);
        expected_leaves[leaf.leaf_id] = {j, Confidence::one()};
        const auto full = propagate_tree(original.checklist, expected_leaves);
        if (!current.tree || !(*current.tree == full) || !(current.decision == make_decision(full.scored())) ||
            current.status != RecordStatus::Overridden || !replay_matches(current)) {
          return {false, original.id + " leaf " + leaf.leaf_id + " override does not match a full recompute"};
        }
        current = runs.service->revert_override(original.id, leaf.leaf_id, "acceptance", "undo", current.version);
        if (to_json(*current.tree) != to_json(*original.tree) || !(current.decision == original.decision) ||
            current.status != original.status || !replay_matches(current)) {
          return {false, original.id + " leaf " + leaf.leaf_id + " revert does not restore the original"};
        }
        ++replays;
      }
    }
  }
  std::size_t audit = 0;
  for (const auto& e : runs.store.audit_log()) audit += e.reviewer == "acceptance";
  const bool ok = audit == 2 * overrides;
  return {ok, std::to_string(replays) + " replays; " + std::to_string(overrides) +
                  " override/revert pairs match full recompute; " + std::to_string(audit) + " audit entries"};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"propagation matches reference evaluator", oracle_equivalence},
      {"rule table conformance", rule_table_conformance},
      {"synthetic dataset parity", synthetic_parity},
      {"majority vote amplification", majority_amplification},
      {"perfect-oracle end to end", oracle_end_to_end},
      {"retrieval recall monotone in k", retrieval_monotonicity},
      {"evidence provenance", evidence_provenance},
      {"replay and override consistency", replay_and_overrides},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
