#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "swefixer/swefixer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace swefixer;

namespace {

// Flags shared by run / prepare-data / eval-retrieval. Unset options leave
// the config file (or built-in default) value alone.
struct Overrides {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::string> snapshots;
  std::optional<int> workers;
  std::optional<std::size_t> context_limit;
  std::optional<std::size_t> top_k;
  std::optional<double> k1;
  std::optional<double> b;
  std::optional<bool> readme_retrieval;
  std::optional<bool> readme_editing;
  std::optional<bool> line_numbers;
  std::optional<std::string> documents;
  std::optional<int> max_attempts;
  std::optional<bool> p2p;
  std::optional<int> p2p_max_attempts;
  std::optional<std::string> runner_command;
  std::optional<std::string> retriever_script;
  std::optional<std::string> editor_script;
  std::optional<double> cot_fraction;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app) {
    app->add_option("--config", config, "JSON config file");
    app->add_option("--out", out, "output directory");
    app->add_option("--snapshots", snapshots, "directory holding snapshot dirs/archives");
    app->add_option("--workers", workers, "parallel instances");
    app->add_option("--context-limit", context_limit, "token budget per task");
    app->add_option("--top-k", top_k, "BM25 candidates");
    app->add_option("--k1", k1, "BM25 k1");
    app->add_option("--b", b, "BM25 b");
    app->add_option("--readme-retrieval", readme_retrieval, "include the readme in retrieval tasks");
    app->add_option("--readme-editing", readme_editing, "include the readme in editing tasks");
    app->add_option("--line-numbers", line_numbers, "number lines in editing tasks");
    app->add_option("--documents", documents, "retrieval documents: skeleton|content");
    app->add_option("--max-attempts", max_attempts, "sampling attempts per stage");
    app->add_option("--p2p", p2p, "enable P2P filtering");
    app->add_option("--p2p-max-attempts", p2p_max_attempts, "P2P attempt cap");
    app->add_option("--runner-command", runner_command, "test command, {test} is replaced by the test id");
    app->add_option("--retriever-script", retriever_script, "scripted retriever outputs (JSONL)");
    app->add_option("--editor-script", editor_script, "scripted editor outputs (JSONL)");
    app->add_option("--cot-fraction", cot_fraction, "share of editing examples sent for CoT");
    app->add_option("--seed", seed, "CoT sampling seed");
  }

  RunConfig resolve() const {
    RunConfig cfg = config.empty() ? RunConfig{} : load_config(config);
    auto& p = cfg.pipeline;
    if (out) cfg.output_dir = *out;
    if (snapshots) cfg.snapshots_dir = *snapshots;
    if (workers) cfg.workers = *workers;
    if (context_limit) p.budget.max_tokens = *context_limit;
    if (top_k) p.top_k = *top_k;
    if (k1) p.bm25.k1 = *k1;
    if (b) p.bm25.b = *b;
    if (readme_retrieval) p.include_readme_retrieval = *readme_retrieval;
    if (readme_editing) p.include_readme_editing = *readme_editing;
    if (line_numbers) p.line_numbers = *line_numbers;
    if (documents) p.retrieval_documents = *documents;
    if (max_attempts) p.sampling.max_attempts = *max_attempts;
    if (p2p) p.p2p.enabled = *p2p;
    if (p2p_max_attempts) p.p2p.max_attempts = *p2p_max_attempts;
    if (runner_command) {
      cfg.runner = "command";
      cfg.runner_command = *runner_command;
    }
    if (retriever_script) {
      cfg.retriever.kind = "scripted";
      cfg.retriever.script = *retriever_script;
    }
    if (editor_script) {
      cfg.editor.kind = "scripted";
      cfg.editor.script = *editor_script;
    }
    if (cot_fraction) cfg.cot_fraction = *cot_fraction;
    if (seed) cfg.cot_seed = *seed;
    return cfg;
  }
};

int report_error(const Error& e) {
  std::cerr << json{{"error", to_string(e.kind())}, {"message", e.what()}}.dump() << "\n";
  return e.kind() == ErrorKind::Config ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage issue resolution: BM25 + retrieval model, then structured editing"};
  app.require_subcommand(1);

  std::string repo, index_out = "index";
  auto* index = app.add_subcommand("index", "build skeletons and the BM25 index of a repository");
  index->add_option("repo", repo, "repository directory or archive")->required();
  index->add_option("--out", index_out, "output directory");
  std::string index_docs = "skeleton";
  index->add_option("--documents", index_docs, "indexed text: skeleton|content");

  std::string instances;
  Overrides run_flags;
  auto* run = app.add_subcommand("run", "resolve instances end to end");
  run->add_option("instances", instances, "instances JSONL")->required();
  run_flags.add(run);

  std::string raws;
  Overrides prep_flags;
  auto* prep = app.add_subcommand("prepare-data", "build retrieval/editing training data");
  prep->add_option("raws", raws, "raw instances JSONL")->required();
  prep_flags.add(prep);

  std::string predictions, gold, baseline_instances;
  std::optional<std::size_t> baseline_k;
  Overrides eval_flags;
  auto* eval = app.add_subcommand("eval-retrieval", "precision/recall of file predictions");
  eval->add_option("gold", gold, "gold file lists or raw instances JSONL")->required();
  eval->add_option("--predictions", predictions, "predictions JSONL");
  eval->add_option("--bm25-baseline", baseline_k, "score BM25 top-k instead of predictions");
  eval->add_option("--instances", baseline_instances, "raw instances for the BM25 baseline");
  eval_flags.add(eval);

  std::string stats_raws;
  auto* stats = app.add_subcommand("stats", "corpus statistics of raw instances");
  stats->add_option("raws", stats_raws, "raw instances JSONL")->required();

  std::string events, diffs, ingest_out = "raw.jsonl", ref_template;
  auto* ingest = app.add_subcommand("ingest", "recorded GitHub events -> raw instances");
  ingest->add_option("events", events, "events JSONL")->required();
  ingest->add_option("--diffs", diffs, "directory of <owner>__<repo>-<n>.diff files");
  ingest->add_option("--out", ingest_out, "output JSONL");
  ingest->add_option("--snapshot-ref", ref_template, "base_snapshot_ref template ({owner}, {name}, {sha})");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*index) {
      cmd::IndexOptions opts;
      opts.documents = index_docs;
      auto manifest = cmd::cmd_index(repo, index_out, opts);
      std::cout << manifest.dump(2) << "\n";
    } else if (*run) {
      auto cfg = run_flags.resolve();
      auto result = cmd::cmd_run(instances, cfg, cfg.output_dir);
      std::cout << canonical_dump(cmd::to_json(result.summary)) << "\n";
    } else if (*prep) {
      auto cfg = prep_flags.resolve();
      cfg.validate();
      auto result = cmd::cmd_prepare_data(dataset::read_raw_jsonl(raws), cfg, cfg.output_dir);
      std::cout << "retrieval examples: " << result.retrieval.size() << "\n"
                << "editing examples:   " << result.editing.size() << "\n"
                << "cot requests:       " << result.cot_requests.size() << "\n\n"
                << cmd::drop_table(result);
    } else if (*eval) {
      auto cfg = eval_flags.resolve();
      auto gold_lists = cmd::read_file_lists(gold);
      std::map<std::string, std::vector<std::string>> pred;
      if (baseline_k) {
        if (baseline_instances.empty()) fail(ErrorKind::Config, "--bm25-baseline needs --instances");
        cfg.validate();
        pred = cmd::bm25_predictions(dataset::read_raw_jsonl(baseline_instances), cfg, *baseline_k);
      } else {
        if (predictions.empty()) fail(ErrorKind::Config, "--predictions is required");
        pred = cmd::read_file_lists(predictions);
      }
      std::cout << cmd::to_json(cmd::evaluate_retrieval(pred, gold_lists)).dump(2) << "\n";
    } else if (*stats) {
      std::cout << cmd::cmd_stats(stats_raws).dump(2) << "\n";
    } else if (*ingest) {
      github::IngestOptions opts;
      if (!ref_template.empty()) opts.snapshot_ref_template = ref_template;
      auto report = cmd::cmd_ingest(events, diffs.empty() ? std::nullopt : std::optional<fs::path>(diffs), ingest_out, opts);
      std::cout << json{{"instances", report.instances.size()},
                        {"pull_requests", report.pull_requests},
                        {"unmerged", report.unmerged},
                        {"without_issue", report.without_issue},
                        {"missing_issue", report.missing_issue},
                        {"missing_diff", report.missing_diff}}
                       .dump(2)
                << "\n";
    }
  } catch (const Error& e) {
    return report_error(e);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
