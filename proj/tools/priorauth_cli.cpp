#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <functional>
#include <set>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "priorauth/clients.hpp"
#include "priorauth/evaluation.hpp"
#include "priorauth/io.hpp"
#include "priorauth/rest.hpp"
#include "priorauth/service.hpp"
#include "priorauth/store.hpp"
#include "priorauth/synthetic.hpp"

using namespace priorauth;

namespace {

std::string default_store() {
  const char* env = std::getenv("PRIORAUTH_STORE");
  return env ? env : "priorauth-store";
}

/// Flags shared by the commands that run the pipeline.
struct PipelineFlags {
  std::string config_file;
  std::string labels_file;
  std::optional<std::size_t> k;
  std::optional<std::string> encoder;
  std::optional<std::string> encoder_url;
  std::optional<std::size_t> encoder_dim;
  std::optional<std::size_t> votes;
  std::optional<std::string> strategy;
  std::optional<std::string> client;
  std::optional<double> threshold;
  bool ancestor_context = false;

  void add_to(CLI::App* app) {
    app->add_option("--config", config_file, "JSON config file (k, n_votes, strategy, threshold, client, encoder)");
    app->add_option("--labels", labels_file, "Gold annotations (JSONL) read by mock clients");
    app->add_option("--k", k, "Candidate chunks per checklist item")->check(CLI::Range(1, 50));
    app->add_option("--encoder", encoder, "Encoder: lexical | test");
    app->add_option("--encoder-url", encoder_url, "Remote encoder endpoint");
    app->add_option("--encoder-dim", encoder_dim, "Embedding dimension for local encoders");
    app->add_option("--votes", votes, "Jury runs per leaf")->check(CLI::PositiveNumber);
    app->add_option("--strategy", strategy, "Prompt strategy")->check(CLI::IsMember({"icl", "icl-cot"}));
    app->add_option("--client", client, "mock:oracle | mock:noise:<p> | mock:phrase | http:<url>");
    app->add_option("--threshold", threshold, "Review threshold on root confidence")->check(CLI::Range(0.0, 1.0));
    app->add_flag("--ancestor-context", ancestor_context, "Prefix item queries with ancestor texts");
  }

  PipelineConfig config() const {
    PipelineConfig c;
    if (!config_file.empty()) c = config_from_json(read_json_file(config_file));
    if (k) c.k = *k;
    if (encoder) c.encoder = *encoder;
    if (encoder_url) c.encoder = *encoder_url;
    if (encoder_dim) c.encoder_dim = *encoder_dim;
    if (votes) c.agents.n_votes = *votes;
    if (strategy) c.agents.strategy = *parse_strategy(*strategy);
    if (client) c.agents.client = *client;
    if (threshold) c.review_threshold = *threshold;
    if (ancestor_context) c.ancestor_context = true;
    c.validate();
    return c;
  }

  GoldLabels labels() const { return labels_file.empty() ? GoldLabels{} : GoldLabels(load_annotations(labels_file)); }
};

void print_summary(const AdjudicationRecord& r) {
  std::cout << "id: " << r.id << "\ncase: " << r.case_id << "\nstatus: " << to_string(r.status)
            << "\nversion: " << r.version << '\n';
  if (r.decision) std::cout << "Y: " << r.decision->y << " (confidence " << r.decision->root_confidence.str() << ")\n";
  if (r.failure) std::cout << "failed at " << r.failure->stage << ": " << r.failure->message << '\n';
  std::function<void(const NodeResult&, int)> walk = [&](const NodeResult& n, int depth) {
    std::cout << std::string(static_cast<std::size_t>(depth * 2), ' ') << n.node_id << "  " << to_string(n.judgment)
              << "  " << n.confidence.str();
    if (r.original_leaf_results.contains(n.node_id)) std::cout << "  [overridden]";
    std::cout << '\n';
    for (const auto& c : n.children) walk(c, depth + 1);
  };
  if (r.tree) walk(*r.tree, 1);
}

void write_report(const MetricReport& report, const std::string& csv_path) {
  std::cout << to_json(report).dump(2) << '\n';
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    out << to_csv(report);
    if (!out) throw ConfigError("cannot write " + csv_path);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prior-authorization adjudication engine"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace | debug | info | warn | error");

  // adjudicate
  auto* adj = app.add_subcommand("adjudicate", "Run the pipeline on one case and persist the record");
  std::string adj_checklist;
  std::vector<std::string> adj_docs;
  std::string adj_chunking;
  std::string adj_case;
  std::string adj_id;
  std::string store_dir = default_store();
  bool adj_json = false;
  PipelineFlags adj_flags;
  adj->add_option("--checklist", adj_checklist, "Checklist JSON")->required();
  adj->add_option("documents", adj_docs, "Patient documents (.txt notes or .json resource bundles)")->required();
  adj->add_option("--chunking", adj_chunking, "Force chunking for all documents")
      ->check(CLI::IsMember({"sentence", "resource"}));
  adj->add_option("--case-id", adj_case, "Case id (default: first document's stem)");
  adj->add_option("--id", adj_id, "Record id (default: generated)");
  adj->add_option("--store", store_dir, "Record store directory");
  adj->add_flag("--json", adj_json, "Print the full record as JSON");
  adj_flags.add_to(adj);

  // show
  auto* show = app.add_subcommand("show", "Print a stored record");
  std::string show_id;
  std::string show_leaf;
  bool show_json = false;
  std::string show_status;
  show->add_option("id", show_id, "Record id (omit to list records)");
  show->add_option("--evidence", show_leaf, "Show the evidence of one leaf");
  show->add_option("--status", show_status, "When listing, filter by status");
  show->add_option("--store", store_dir, "Record store directory");
  show->add_flag("--json", show_json, "Print JSON");

  // override
  auto* ovr = app.add_subcommand("override", "Override one leaf judgment of a record");
  std::string ovr_id;
  std::string ovr_leaf;
  std::string ovr_judgment;
  std::string ovr_reviewer;
  std::string ovr_note;
  std::optional<std::uint64_t> ovr_version;
  bool ovr_revert = false;
  ovr->add_option("id", ovr_id, "Record id")->required();
  ovr->add_option("--leaf", ovr_leaf, "Leaf id")->required();
  ovr->add_option("--judgment", ovr_judgment, "True | False | NoInformation");
  ovr->add_option("--reviewer", ovr_reviewer, "Reviewer id")->required();
  ovr->add_option("--note", ovr_note, "Reviewer note");
  ovr->add_option("--version", ovr_version, "Expected record version");
  ovr->add_flag("--revert", ovr_revert, "Restore the machine result of the leaf instead");
  ovr->add_option("--store", store_dir, "Record store directory");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the REST service");
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string docs_root;
  std::size_t workers = 2;
  PipelineFlags serve_flags;
  serve->add_option("--port", port, "Port (0 picks a free one)");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--store", store_dir, "Record store directory");
  serve->add_option("--documents-root", docs_root, "Directory for document_refs");
  serve->add_option("--workers", workers, "Concurrent background adjudications")->check(CLI::PositiveNumber);
  serve_flags.add_to(serve);

  // generate-synthetic
  auto* gen = app.add_subcommand("generate-synthetic", "Emit synthetic parent-judgment records as JSONL");
  std::size_t gen_count = 450;
  std::uint64_t gen_seed = 0;
  std::vector<std::string> gen_checklists;
  std::string gen_mode = "sampled";
  std::string gen_out;
  gen->add_option("--count", gen_count, "Records to generate (sampled mode)");
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--checklist", gen_checklists, "Guideline checklist JSON (repeatable)")->required();
  gen->add_option("--mode", gen_mode, "sampled | exhaustive")->check(CLI::IsMember({"sampled", "exhaustive"}));
  gen->add_option("--out", gen_out, "Output file (default stdout)");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score stored runs or a synthetic dataset");
  std::vector<std::string> eval_runs;
  std::string eval_fixtures;
  std::string eval_expected;
  std::string eval_synthetic;
  std::string eval_csv;
  eval->add_option("--run", eval_runs, "Record id (repeatable; 'all' for every reviewable record)");
  eval->add_option("--fixtures", eval_fixtures, "Gold annotations (JSONL)");
  eval->add_option("--expected", eval_expected, "Expected root decisions {case_id: y} (JSON)");
  eval->add_option("--synthetic", eval_synthetic, "Synthetic dataset (JSONL) for propagation accuracy");
  eval->add_option("--csv", eval_csv, "Also write the metrics as CSV");
  eval->add_option("--store", store_dir, "Record store directory");

  // extract-operators
  auto* ext = app.add_subcommand("extract-operators", "Fill in missing operators of a draft checklist");
  std::string ext_checklist;
  std::string ext_client = "mock:phrase";
  std::size_t ext_votes = 1;
  ext->add_option("--checklist", ext_checklist, "Draft checklist JSON")->required();
  ext->add_option("--client", ext_client, "Completion client");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));
  spdlog::set_default_logger(spdlog::default_logger());

  try {
    if (*adj) {
      FileStore store(store_dir);
      ServiceOptions opts;
      opts.labels = adj_flags.labels();
      opts.workers = 1;
      AdjudicationService service(store, std::move(opts));
      std::optional<ChunkKind> chunking;
      if (!adj_chunking.empty()) chunking = parse_chunking(adj_chunking);
      AdjudicationRequest req;
      req.id = adj_id;
      req.case_id = adj_case;
      req.checklist = parse_checklist(read_text_file(adj_checklist));
      for (const auto& d : adj_docs) req.documents.push_back(load_document(d, chunking));
      req.config = adj_flags.config();
      auto rec = service.run_adjudication(std::move(req));
      if (adj_json) {
        std::cout << to_json(rec).dump(2) << '\n';
      } else {
        print_summary(rec);
      }
      return 0;
    }

    if (*show) {
      FileStore store(store_dir);
      if (show_id.empty()) {
        std::optional<RecordStatus> status;
        if (!show_status.empty()) {
          status = parse_status(show_status);
          if (!status) throw ConfigError("unknown status '" + show_status + "'");
        }
        for (const auto& r : store.list(status)) {
          std::cout << r.id << '\t' << r.case_id << '\t' << to_string(r.status);
          if (r.decision) std::cout << "\tY=" << r.decision->y << '\t' << r.decision->root_confidence.str();
          std::cout << '\n';
        }
        return 0;
      }
      auto rec = store.get(show_id);
      if (!rec) throw UnknownRecord("no record '" + show_id + "'");
      if (!show_leaf.empty()) {
        std::cout << evidence_view(*rec, show_leaf).dump(2) << '\n';
      } else if (show_json) {
        std::cout << to_json(*rec).dump(2) << '\n';
      } else {
        print_summary(*rec);
      }
      return 0;
    }

    if (*ovr) {
      FileStore store(store_dir);
      ServiceOptions opts;
      opts.workers = 1;
      AdjudicationService service(store, std::move(opts));
      AdjudicationRecord rec;
      if (ovr_revert) {
        rec = service.revert_override(ovr_id, ovr_leaf, ovr_reviewer, ovr_note, ovr_version);
      } else {
        auto j = parse_judgment(ovr_judgment);
        if (!j) throw ConfigError("--judgment must be True, False or NoInformation");
        rec = service.apply_override({ovr_id, ovr_leaf, *j, ovr_reviewer, ovr_note, ovr_version});
      }
      print_summary(rec);
      return 0;
    }

    if (*serve) {
      FileStore store(store_dir);
      ServiceOptions opts;
      opts.labels = serve_flags.labels();
      opts.workers = workers;
      AdjudicationService service(store, std::move(opts));
      RestServer server(service, {serve_flags.config(), docs_root});
      const int bound = server.bind(host, port);
      std::cout << "listening on " << host << ':' << bound << std::endl;
      spdlog::info("serving on {}:{} with store {}", host, bound, store_dir);
      server.listen();
      return 0;
    }

    if (*gen) {
      std::vector<ChecklistNode> guidelines;
      for (const auto& p : gen_checklists) guidelines.push_back(parse_checklist(read_text_file(p)));
      SyntheticOptions opt;
      opt.mode = gen_mode == "exhaustive" ? SyntheticMode::Exhaustive : SyntheticMode::Sampled;
      opt.count = gen_count;
      opt.seed = gen_seed;
      const auto text = to_jsonl(generate_synthetic(guidelines, opt));
      if (gen_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(gen_out, std::ios::binary);
        out << text;
        if (!out) throw ConfigError("cannot write " + gen_out);
      }
      return 0;
    }

    if (*eval) {
      MetricReport report;
      if (!eval_synthetic.empty()) {
        std::ifstream in(eval_synthetic);
        if (!in) throw ConfigError("cannot read " + eval_synthetic);
        std::vector<SyntheticRecord> data;
        std::string line;
        while (std::getline(in, line)) {
          if (!line.empty()) data.push_back(synthetic_record_from_json(nlohmann::json::parse(line)));
        }
        report.merge(propagation_accuracies(data));
      }
      if (!eval_runs.empty()) {
        if (eval_fixtures.empty()) throw ConfigError("--run needs --fixtures");
        FileStore store(store_dir);
        std::vector<AdjudicationRecord> records;
        for (const auto& id : eval_runs) {
          if (id == "all") {
            for (auto& r : store.list()) {
              if (r.tree) records.push_back(std::move(r));
            }
            continue;
          }
          auto r = store.get(id);
          if (!r) throw UnknownRecord("no record '" + id + "'");
          if (!r->tree) throw Error("record '" + id + "' has no results");
          records.push_back(std::move(*r));
        }
        const auto fixtures = load_annotations(eval_fixtures);
        std::set<std::string> cases;
        for (const auto& r : records) cases.insert(r.case_id);
        std::vector<EvidenceAnnotation> gold;
        for (const auto& a : fixtures) {
          if (cases.contains(a.note_id)) gold.push_back(a);
        }
        std::vector<JudgmentItem> predicted;
        std::map<std::pair<std::string, std::string>, std::vector<Evidence>> evidence;
        for (const auto& r : records) {
          for (const auto& l : r.leaf_results) {
            predicted.push_back({r.case_id, l.leaf_id, l.judgment});
            evidence[{r.case_id, l.leaf_id}] = l.evidence;
          }
        }
        report.merge(judgment_accuracy(predicted, gold_items(gold), "leaf"));
        report.merge(evidence_recall(evidence, gold));
        if (!eval_expected.empty()) {
          const auto expected = read_json_file(eval_expected);
          std::vector<JudgmentItem> root_pred;
          std::vector<JudgmentItem> root_gold;
          for (const auto& r : records) {
            const int y = expected.at(r.case_id).get<int>();
            const Judgment g = y > 0 ? Judgment::True : y < 0 ? Judgment::False : Judgment::NoInformation;
            root_gold.push_back({r.case_id, r.checklist.id, g});
            root_pred.push_back({r.case_id, r.checklist.id, r.tree->judgment});
          }
          report.merge(judgment_accuracy(root_pred, root_gold, "root"));
        }
        report.metadata["runs"] = records.size();
        if (!records.empty()) {
          report.metadata["k"] = records.front().config.k;
          report.metadata["n_votes"] = records.front().config.agents.n_votes;
          report.metadata["strategy"] = std::string(to_string(records.front().config.agents.strategy));
          report.metadata["client"] = records.front().client_id;
        }
      }
      if (eval_synthetic.empty() && eval_runs.empty()) throw ConfigError("nothing to evaluate: give --run or --synthetic");
      write_report(report, eval_csv);
      return 0;
    }

    if (*ext) {
      auto draft = parse_draft_checklist(read_json_file(ext_checklist));
      auto client = make_client(ext_client);
      AgentConfig cfg;
      cfg.n_votes = ext_votes;
      AgentRunner runner(*client, cfg);
      std::cout << to_json(runner.assign_operators(std::move(draft))).dump(2) << '\n';
      return 0;
    }
  } catch (const PipelineError& e) {
    std::cerr << "pipeline failed at stage " << e.stage() << ": " << e.what() << '\n';
    return 3;
  } catch (const AmbiguousOperator& e) {
    std::cerr << "ambiguous operator: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
