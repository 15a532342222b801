#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "swefixer/bm25.hpp"
#include "swefixer/config.hpp"
#include "swefixer/dataset.hpp"
#include "swefixer/error.hpp"
#include "swefixer/github_ingest.hpp"
#include "swefixer/inference.hpp"
#include "swefixer/repo.hpp"
#include "swefixer/skeleton.hpp"
#include "swefixer/task_codec.hpp"

namespace swefixer::cmd {

namespace fs = std::filesystem;
using nlohmann::json;

inline void write_file(const fs::path& path, const std::string& data) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << data;
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string jsonl(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) out += canonical_dump(r) + "\n";
  return out;
}

inline std::vector<json> read_jsonl(const fs::path& path) {
  std::vector<json> out;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) fail(ErrorKind::Structural, path.string() + ":" + std::to_string(n) + ": invalid JSON");
    out.push_back(std::move(j));
  }
  return out;
}

// ---- index -------------------------------------------------------------------

struct IndexOptions {
  std::vector<std::string> exclusions = glob::default_exclusions();
  bm25::Params params;
  std::string documents = "skeleton";
};

/// Writes index.json (BM25 artifact) and manifest.json; returns the manifest.
inline json cmd_index(const fs::path& repo, const fs::path& out_dir, const IndexOptions& options = {}) {
  auto snapshot = load_snapshot(repo, options.exclusions);
  auto corpus = build_retrieval_corpus(snapshot, options.params, options.documents);
  std::size_t source = 0, tests = 0, binary = 0;
  std::vector<std::string> fallback;
  for (const auto& [path, rec] : snapshot.files()) {
    source += rec->is_source;
    tests += rec->is_test;
    binary += rec->is_binary;
  }
  for (const auto& [path, doc] : corpus.docs) {
    if (doc.fallback) fallback.push_back(path);
  }
  json manifest = {{"schema", "swefixer.index_manifest.v1"},
                   {"root_id", snapshot.root_id()},
                   {"files_total", snapshot.size()},
                   {"source_files", source},
                   {"test_files", tests},
                   {"binary_files", binary},
                   {"indexed", corpus.index.doc_count()},
                   {"fallback", fallback.size()},
                   {"fallback_files", fallback},
                   {"skipped", snapshot.size() - corpus.index.doc_count()},
                   {"documents", options.documents},
                   {"readme", snapshot.readme() ? json(*snapshot.readme()) : json(nullptr)}};
  write_file(out_dir / "index.json", canonical_dump(corpus.index.to_json()) + "\n");
  write_file(out_dir / "manifest.json", canonical_dump(manifest, 2) + "\n");
  return manifest;
}

// ---- snapshots -----------------------------------------------------------------

/// Loads each referenced snapshot once; safe to share between workers.
class SnapshotCache {
 public:
  SnapshotCache(fs::path root, std::vector<std::string> exclusions)
      : root_(std::move(root)), exclusions_(std::move(exclusions)) {}

  std::shared_ptr<const RepoSnapshot> get(const std::string& ref) {
    std::lock_guard lock(mu_);
    auto it = cache_.find(ref);
    if (it != cache_.end()) return it->second;
    if (ref.empty()) fail(ErrorKind::Io, "instance has no base_snapshot_ref");
    fs::path p = root_ / ref;
    if (!fs::exists(p)) fail(ErrorKind::Io, "snapshot not found: " + p.string());
    auto snap = std::make_shared<const RepoSnapshot>(load_snapshot(p, exclusions_));
    cache_.emplace(ref, snap);
    return snap;
  }

 private:
  fs::path root_;
  std::vector<std::string> exclusions_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const RepoSnapshot>> cache_;
};

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mu;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// ---- run ---------------------------------------------------------------------

struct RunSummary {
  std::size_t instances = 0;
  std::map<std::string, std::size_t> statuses;
  std::size_t resolved_candidates = 0;
  double mean_model_calls = 0.0;
  double mean_p2p_attempts = 0.0;      // over instances retained by the P2P filter
  double mean_p2p_attempts_all = 0.0;  // over every instance that reached the filter
};

inline json to_json(const RunSummary& s) {
  return {{"instances", s.instances},
          {"statuses", s.statuses},
          {"resolved_candidates", s.resolved_candidates},
          {"mean_model_calls", s.mean_model_calls},
          {"mean_p2p_attempts", s.mean_p2p_attempts},
          {"mean_p2p_attempts_all", s.mean_p2p_attempts_all}};
}

inline RunSummary summarize_run(const std::vector<PipelineOutcome>& outcomes, bool p2p_enabled) {
  RunSummary s;
  s.instances = outcomes.size();
  double calls = 0, p2p_retained = 0, p2p_all = 0;
  std::size_t n_retained = 0, n_all = 0;
  for (const auto& o : outcomes) {
    ++s.statuses[o.status];
    calls += o.model_calls;
    if (o.status == status::kResolvedCandidate) ++s.resolved_candidates;
    if (p2p_enabled && o.p2p_attempts > 0) {
      p2p_all += o.p2p_attempts;
      ++n_all;
      if (o.status == status::kResolvedCandidate) {
        p2p_retained += o.p2p_attempts;
        ++n_retained;
      }
    }
  }
  if (s.instances) s.mean_model_calls = calls / static_cast<double>(s.instances);
  if (n_retained) s.mean_p2p_attempts = p2p_retained / static_cast<double>(n_retained);
  if (n_all) s.mean_p2p_attempts_all = p2p_all / static_cast<double>(n_all);
  return s;
}

struct RunResult {
  std::vector<PipelineOutcome> outcomes;
  RunSummary summary;
};

inline std::string safe_file_name(const std::string& id) {
  std::string out;
  for (char c : id) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_');
  return out;
}

/// Resolves every instance; writes run.jsonl, patches/<id>.patch and
/// summary.json under out_dir. Per-instance failures become statuses.
inline RunResult cmd_run(const std::vector<dataset::RawInstance>& instances, const RunConfig& config,
                         ModelBackend& retriever, ModelBackend& editor, TestRunner* runner, const fs::path& out_dir) {
  SnapshotCache snapshots(config.snapshots_dir, config.exclusions);
  std::map<std::string, std::shared_ptr<const RetrievalCorpus>> corpora;
  std::mutex corpora_mu;
  RunResult result;
  result.outcomes.resize(instances.size());
  parallel_for(instances.size(), config.workers, [&](std::size_t i) {
    const auto& raw = instances[i];
    PipelineOutcome outcome;
    outcome.instance_id = raw.instance_id;
    try {
      auto snap = snapshots.get(raw.base_snapshot_ref);
      std::shared_ptr<const RetrievalCorpus> corpus;
      {
        std::lock_guard lock(corpora_mu);
        auto& slot = corpora[raw.base_snapshot_ref];
        if (!slot) {
          slot = std::make_shared<const RetrievalCorpus>(
              build_retrieval_corpus(*snap, config.pipeline.bm25, config.pipeline.index_documents));
        }
        corpus = slot;
      }
      InstanceInput input{raw.instance_id, raw.issue_text, snap.get(), raw.p2p_tests, raw.validation_tests};
      outcome = resolve_instance(input, retriever, editor, config.pipeline, runner, corpus.get());
    } catch (const Error& e) {
      outcome.status = status::kUnevaluated;
      outcome.error = e.what();
    }
    result.outcomes[i] = std::move(outcome);
  });

  std::vector<json> records;
  fs::create_directories(out_dir / "patches");
  for (const auto& o : result.outcomes) {
    records.push_back(to_json(o));
    if (o.status == status::kResolvedCandidate && o.final_patch) {
      write_file(out_dir / "patches" / (safe_file_name(o.instance_id) + ".patch"), *o.final_patch);
    }
  }
  write_file(out_dir / "run.jsonl", jsonl(records));
  result.summary = summarize_run(result.outcomes, config.pipeline.p2p.enabled);
  write_file(out_dir / "summary.json", canonical_dump(to_json(result.summary), 2) + "\n");
  return result;
}

inline RunResult cmd_run(const fs::path& instances_path, const RunConfig& config, const fs::path& out_dir) {
  config.validate();
  auto instances = dataset::read_raw_jsonl(instances_path);
  auto retriever = make_backend(config.retriever, config.pipeline.budget.max_tokens);
  auto editor = make_backend(config.editor, config.pipeline.budget.max_tokens);
  auto runner = make_runner(config);
  return cmd_run(instances, config, *retriever, *editor, runner.get(), out_dir);
}

// ---- prepare-data ------------------------------------------------------------------

struct InstanceDisposition {
  std::string instance_id;
  std::string filter;     // "kept" or drop reason
  std::string retrieval;  // "kept", drop reason, or "-" when filtered out
  std::string editing;
};

struct PrepareResult {
  std::vector<InstanceDisposition> dispositions;
  std::vector<dataset::TrainingExample> retrieval;
  std::vector<dataset::TrainingExample> editing;
  std::vector<dataset::CotRequest> cot_requests;
  std::vector<dataset::TrainingExample> editing_cot;
  std::size_t cot_dropped = 0;
  dataset::CorpusStats stats;
  std::map<std::string, std::map<std::string, std::size_t>> drops;  // stage -> reason -> count
};

inline std::string drop_table(const PrepareResult& r) {
  std::ostringstream out;
  out << "stage      reason                count\n";
  for (const auto& [stage, reasons] : r.drops) {
    for (const auto& [reason, n] : reasons) {
      std::string s = stage, re = reason;
      s.resize(std::max<std::size_t>(s.size(), 10), ' ');
      re.resize(std::max<std::size_t>(re.size(), 21), ' ');
      out << s << " " << re << " " << n << "\n";
    }
  }
  return out.str();
}

/// filter -> retrieval / editing examples -> CoT requests -> statistics. Writes
/// retrieval.jsonl, editing.jsonl, cot_requests.jsonl, stats.json, drops.json.
inline PrepareResult cmd_prepare_data(std::vector<dataset::RawInstance> raws, const RunConfig& config,
                                      const fs::path& out_dir) {
  std::sort(raws.begin(), raws.end(), [](const auto& a, const auto& b) { return a.instance_id < b.instance_id; });
  SnapshotCache snapshots(config.snapshots_dir, config.exclusions);
  dataset::FilterOptions fopts{config.max_files, config.excluded_repos};
  dataset::ExampleOptions eopts;
  eopts.budget = config.pipeline.budget;
  eopts.bm25 = config.pipeline.bm25;
  eopts.top_k = config.pipeline.top_k;
  eopts.include_readme = config.pipeline.include_readme_retrieval;
  eopts.line_numbers = config.pipeline.line_numbers;
  eopts.index_documents = config.pipeline.index_documents;

  struct Slot {
    InstanceDisposition disp;
    std::optional<dataset::TrainingExample> retrieval, editing;
    std::optional<dataset::CotSource> cot;
  };
  std::vector<Slot> slots(raws.size());
  parallel_for(raws.size(), config.workers, [&](std::size_t i) {
    const auto& raw = raws[i];
    Slot& slot = slots[i];
    slot.disp.instance_id = raw.instance_id;
    auto verdict = dataset::filter_instance(raw, fopts);
    if (!verdict.keep) {
      slot.disp.filter = verdict.reason;
      slot.disp.retrieval = slot.disp.editing = "-";
      return;
    }
    slot.disp.filter = "kept";
    auto snap = snapshots.get(raw.base_snapshot_ref);
    auto r = dataset::build_retrieval_example(raw, *snap, *verdict.summary, eopts);
    slot.disp.retrieval = r.example ? "kept" : r.reason;
    slot.retrieval = std::move(r.example);
    auto e = dataset::build_editing_example(raw, *snap, *verdict.summary, eopts);
    slot.disp.editing = e.example ? "kept" : e.reason;
    if (e.example) slot.cot = dataset::CotSource{raw.instance_id, raw.issue_text, e.gold_file_contents, e.gold_edit};
    slot.editing = std::move(e.example);
  });

  PrepareResult result;
  std::vector<dataset::CotSource> cot_sources;
  std::vector<const dataset::TrainingExample*> editing_for_cot;
  for (auto& slot : slots) {
    result.dispositions.push_back(slot.disp);
    if (slot.disp.filter != "kept") ++result.drops["filter"][slot.disp.filter];
    if (slot.disp.retrieval != "kept" && slot.disp.retrieval != "-") ++result.drops["retrieval"][slot.disp.retrieval];
    if (slot.disp.editing != "kept" && slot.disp.editing != "-") ++result.drops["editing"][slot.disp.editing];
    if (slot.retrieval) result.retrieval.push_back(std::move(*slot.retrieval));
    if (slot.editing) {
      result.editing.push_back(std::move(*slot.editing));
      cot_sources.push_back(std::move(*slot.cot));
    }
  }
  std::vector<dataset::CotSource> sampled;
  for (auto i : dataset::sample_indices(cot_sources.size(), config.cot_fraction, config.cot_seed)) {
    sampled.push_back(cot_sources[i]);
  }
  result.cot_requests = dataset::emit_cot_requests(sampled);

  if (!config.cot_responses.empty()) {
    std::map<std::string, std::string> responses;
    for (const auto& j : read_jsonl(config.cot_responses)) {
      responses[j.value("instance_id", "")] = j.value("response", "");
    }
    for (std::size_t i = 0; i < result.editing.size(); ++i) {
      const auto& src = cot_sources[i];
      auto it = responses.find(src.instance_id);
      if (it == responses.end()) continue;
      auto reasoning = dataset::check_teacher_response(it->second, src.gold_edit);
      if (!reasoning) {
        ++result.cot_dropped;
        continue;
      }
      auto example = result.editing[i];
      StructuredEdit filled = src.gold_edit;
      filled.reasoning = *reasoning;
      example.target = serialize_structured_edit(filled);
      result.editing_cot.push_back(std::move(example));
    }
  }
  result.stats = dataset::compute_statistics(raws);

  std::vector<json> rec;
  for (const auto& e : result.retrieval) rec.push_back(dataset::to_json(e));
  write_file(out_dir / "retrieval.jsonl", jsonl(rec));
  rec.clear();
  for (const auto& e : result.editing) rec.push_back(dataset::to_json(e));
  write_file(out_dir / "editing.jsonl", jsonl(rec));
  rec.clear();
  for (const auto& c : result.cot_requests) rec.push_back(dataset::to_json(c));
  write_file(out_dir / "cot_requests.jsonl", jsonl(rec));
  if (!config.cot_responses.empty()) {
    rec.clear();
    for (const auto& e : result.editing_cot) rec.push_back(dataset::to_json(e));
    write_file(out_dir / "editing_cot.jsonl", jsonl(rec));
  }
  write_file(out_dir / "stats.json", canonical_dump(dataset::to_json(result.stats), 2) + "\n");
  json per = json::array();
  for (const auto& d : result.dispositions) {
    per.push_back({{"instance_id", d.instance_id}, {"filter", d.filter}, {"retrieval", d.retrieval}, {"editing", d.editing}});
  }
  json drops = {{"drops", result.drops},
                {"instances", per},
                {"retrieval_examples", result.retrieval.size()},
                {"editing_examples", result.editing.size()},
                {"cot_requests", result.cot_requests.size()},
                {"cot_dropped", result.cot_dropped}};
  write_file(out_dir / "drops.json", canonical_dump(drops, 2) + "\n");
  return result;
}

// ---- eval-retrieval ----------------------------------------------------------------

struct RetrievalScore {
  std::string instance_id;
  double precision = 0.0;
  double recall = 0.0;
};

struct RetrievalReport {
  std::vector<RetrievalScore> instances;
  double precision_pct = 0.0;
  double recall_pct = 0.0;
};

inline json to_json(const RetrievalReport& r) {
  json per = json::array();
  for (const auto& s : r.instances) {
    per.push_back({{"instance_id", s.instance_id}, {"precision", s.precision}, {"recall", s.recall}});
  }
  return {{"instances", r.instances.size()}, {"precision", r.precision_pct}, {"recall", r.recall_pct}, {"per_instance", per}};
}

/// File lists keyed by instance id. A record carries "files", "files_to_edit",
/// or a gold patch ("gold_patch_text", whose non-test source files count).
inline std::map<std::string, std::vector<std::string>> read_file_lists(const fs::path& path) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& j : read_jsonl(path)) {
    if (!j.is_object() || !j.contains("instance_id")) fail(ErrorKind::Structural, path.string() + ": record lacks instance_id");
    auto id = j["instance_id"].get<std::string>();
    std::vector<std::string> files;
    if (j.contains("files")) {
      files = j["files"].get<std::vector<std::string>>();
    } else if (j.contains("files_to_edit")) {
      files = j["files_to_edit"].get<std::vector<std::string>>();
    } else if (j.contains("gold_patch_text")) {
      files = dataset::summarize_patch(diff::parse_unified_patch(j["gold_patch_text"].get<std::string>())).source_files;
    } else {
      fail(ErrorKind::Structural, path.string() + ": record " + id + " has no file list");
    }
    if (!out.emplace(id, std::move(files)).second) fail(ErrorKind::Structural, "duplicate instance_id " + id);
  }
  return out;
}

/// Macro-averaged precision and recall in percent. Instance ids must match.
inline RetrievalReport evaluate_retrieval(const std::map<std::string, std::vector<std::string>>& pred,
                                          const std::map<std::string, std::vector<std::string>>& gold) {
  std::vector<std::string> missing, extra;
  for (const auto& [id, f] : gold) {
    if (!pred.count(id)) missing.push_back(id);
  }
  for (const auto& [id, f] : pred) {
    if (!gold.count(id)) extra.push_back(id);
  }
  if (!missing.empty() || !extra.empty()) {
    fail(ErrorKind::Validation, "instance ids differ; missing predictions: [" + text::join(missing, ", ") +
                                    "], unknown predictions: [" + text::join(extra, ", ") + "]");
  }
  RetrievalReport report;
  double p = 0, r = 0;
  for (const auto& [id, g] : gold) {
    std::set<std::string> ps(pred.at(id).begin(), pred.at(id).end());
    std::set<std::string> gs(g.begin(), g.end());
    std::size_t hit = 0;
    for (const auto& f : ps) hit += gs.count(f);
    RetrievalScore s{id, ps.empty() ? 0.0 : double(hit) / double(ps.size()), gs.empty() ? 0.0 : double(hit) / double(gs.size())};
    p += s.precision;
    r += s.recall;
    report.instances.push_back(s);
  }
  if (!gold.empty()) {
    report.precision_pct = 100.0 * p / double(gold.size());
    report.recall_pct = 100.0 * r / double(gold.size());
  }
  return report;
}

inline RetrievalReport cmd_eval_retrieval(const fs::path& predictions, const fs::path& gold) {
  return evaluate_retrieval(read_file_lists(predictions), read_file_lists(gold));
}

/// BM25-only predictions: the top k candidates per instance.
inline std::map<std::string, std::vector<std::string>> bm25_predictions(const std::vector<dataset::RawInstance>& raws,
                                                                        const RunConfig& config, std::size_t k) {
  SnapshotCache snapshots(config.snapshots_dir, config.exclusions);
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& raw : raws) {
    auto snap = snapshots.get(raw.base_snapshot_ref);
    auto corpus = build_retrieval_corpus(*snap, config.pipeline.bm25, config.pipeline.index_documents);
    auto& files = out[raw.instance_id];
    for (const auto& d : corpus.index.top_k(raw.issue_text, k)) files.push_back(d.path);
  }
  return out;
}

// ---- stats / ingest --------------------------------------------------------------

inline json cmd_stats(const fs::path& raws_path) {
  return dataset::to_json(dataset::compute_statistics(dataset::read_raw_jsonl(raws_path)));
}

/// Recorded events (JSONL) plus an optional directory of `<owner>__<repo>-<n>.diff`
/// files -> raw instance JSONL.
inline github::IngestReport cmd_ingest(const fs::path& events_path, const std::optional<fs::path>& diffs_dir,
                                       const fs::path& out_path, const github::IngestOptions& options = {}) {
  auto events = read_jsonl(events_path);
  std::map<std::string, std::string> diffs;
  if (diffs_dir) {
    for (const auto& entry : fs::directory_iterator(*diffs_dir)) {
      auto name = entry.path().filename().string();
      if (!text::ends_with(name, ".diff")) continue;
      auto stem = name.substr(0, name.size() - 5);
      auto sep = stem.find("__");
      auto dash = stem.rfind('-');
      if (sep == std::string::npos || dash == std::string::npos || dash < sep) continue;
      std::string repo = stem.substr(0, sep) + "/" + stem.substr(sep + 2, dash - sep - 2);
      diffs[repo + "#" + stem.substr(dash + 1)] = read_file(entry.path());
    }
  }
  auto report = github::ingest_events(events, diffs, options);
  std::vector<json> rec;
  for (const auto& r : report.instances) rec.push_back(dataset::to_json(r));
  write_file(out_path, jsonl(rec));
  return report;
}

}  // namespace swefixer::cmd
