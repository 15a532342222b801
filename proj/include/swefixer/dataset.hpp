#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swefixer/bm25.hpp"
#include "swefixer/diff.hpp"
#include "swefixer/edit_engine.hpp"
#include "swefixer/error.hpp"
#include "swefixer/inference.hpp"
#include "swefixer/repo.hpp"
#include "swefixer/task_codec.hpp"

namespace swefixer::dataset {

using nlohmann::json;

inline constexpr const char* kRawSchema = "swefixer.raw_instance.v1";
inline constexpr const char* kExampleSchema = "swefixer.training_example.v1";
inline constexpr const char* kCotRequestSchema = "swefixer.cot_request.v1";

struct RawInstance {
  std::string instance_id;
  std::string repo_id;
  std::string issue_text;
  std::string base_snapshot_ref;
  std::string gold_patch_text;
  std::optional<std::vector<std::string>> candidate_test_commands;
  std::vector<std::string> p2p_tests;
  std::vector<std::string> validation_tests;
};

inline RawInstance raw_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::Structural, "instance record must be a JSON object");
  if (j.contains("schema") && j["schema"] != kRawSchema) {
    fail(ErrorKind::Structural, "unsupported instance schema " + j["schema"].dump());
  }
  RawInstance r;
  try {
    r.instance_id = j.at("instance_id").get<std::string>();
    r.repo_id = j.value("repo_id", "");
    r.issue_text = j.value("issue_text", "");
    r.base_snapshot_ref = j.value("base_snapshot_ref", "");
    r.gold_patch_text = j.value("gold_patch_text", "");
    if (j.contains("candidate_test_commands") && !j["candidate_test_commands"].is_null()) {
      r.candidate_test_commands = j["candidate_test_commands"].get<std::vector<std::string>>();
    }
    r.p2p_tests = j.value("p2p_tests", std::vector<std::string>{});
    r.validation_tests = j.value("validation_tests", std::vector<std::string>{});
  } catch (const json::exception& e) {
    fail(ErrorKind::Structural, std::string("malformed instance record: ") + e.what());
  }
  if (r.instance_id.empty()) fail(ErrorKind::Structural, "instance record has an empty instance_id");
  return r;
}

inline json to_json(const RawInstance& r) {
  json j = {{"schema", kRawSchema},
            {"instance_id", r.instance_id},
            {"repo_id", r.repo_id},
            {"issue_text", r.issue_text},
            {"base_snapshot_ref", r.base_snapshot_ref},
            {"gold_patch_text", r.gold_patch_text}};
  if (r.candidate_test_commands) j["candidate_test_commands"] = *r.candidate_test_commands;
  if (!r.p2p_tests.empty()) j["p2p_tests"] = r.p2p_tests;
  if (!r.validation_tests.empty()) j["validation_tests"] = r.validation_tests;
  return j;
}

/// Parsed JSONL; blank lines are skipped and instance ids must be unique.
inline std::vector<RawInstance> read_raw_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  std::vector<RawInstance> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) fail(ErrorKind::Structural, path.string() + ":" + std::to_string(n) + ": invalid JSON");
    auto r = raw_from_json(j);
    if (!ids.insert(r.instance_id).second) fail(ErrorKind::Structural, "duplicate instance_id " + r.instance_id);
    out.push_back(std::move(r));
  }
  return out;
}

namespace reason {
inline constexpr const char* kUnparseable = "unparseable";
inline constexpr const char* kExcludedRepo = "excluded-repo";
inline constexpr const char* kNoSourceEdits = "no-source-edits";
inline constexpr const char* kTooManyFiles = "too-many-files";
inline constexpr const char* kGoldNotRetrieved = "gold-not-retrieved";
inline constexpr const char* kOverBudget = "over-budget";
inline constexpr const char* kFileAddOrDelete = "file-add-or-delete";
inline constexpr const char* kApplyFailed = "apply-failed";
}  // namespace reason

/// What a gold patch touches. Counted files are non-test source files.
struct PatchSummary {
  diff::UnifiedPatch patch;
  std::vector<std::string> source_files;
  std::vector<std::string> test_files;
  std::vector<std::string> other_files;
  std::size_t hunks = 0;           // over source files
  std::size_t modified_lines = 0;  // added + removed over source files
};

inline PatchSummary summarize_patch(diff::UnifiedPatch patch) {
  PatchSummary s;
  std::set<std::string> seen;
  for (const auto& f : patch.files) {
    const auto& path = f.path();
    bool first = seen.insert(path).second;
    if (classify_test_file(path)) {
      if (first) s.test_files.push_back(path);
    } else if (language_for(path)) {
      if (first) s.source_files.push_back(path);
      s.hunks += f.hunks.size();
      s.modified_lines += f.added() + f.removed();
    } else if (first) {
      s.other_files.push_back(path);
    }
  }
  s.patch = std::move(patch);
  return s;
}

struct FilterOptions {
  std::size_t max_files = 3;
  std::vector<std::string> excluded_repos;
};

struct FilterVerdict {
  bool keep = false;
  std::string reason;
  std::optional<PatchSummary> summary;
};

/// Parse, exclusion list, at least one edited source file, at most
/// max_files edited source files (tests not counted), in that order.
inline FilterVerdict filter_instance(const RawInstance& raw, const FilterOptions& options = {}) {
  FilterVerdict v;
  try {
    v.summary = summarize_patch(diff::parse_unified_patch(raw.gold_patch_text));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Parse) throw;
    v.reason = reason::kUnparseable;
    return v;
  }
  if (std::find(options.excluded_repos.begin(), options.excluded_repos.end(), raw.repo_id) !=
      options.excluded_repos.end()) {
    v.reason = reason::kExcludedRepo;
  } else if (v.summary->source_files.empty()) {
    v.reason = reason::kNoSourceEdits;
  } else if (v.summary->source_files.size() > options.max_files) {
    v.reason = reason::kTooManyFiles;
  } else {
    v.keep = true;
  }
  return v;
}

enum class ExampleKind { Retrieval, Editing };

struct TrainingExample {
  ExampleKind kind = ExampleKind::Retrieval;
  std::string instance_id;
  JsonTask input_task;
  std::string target;
};

inline json to_json(const TrainingExample& e) {
  return {{"schema", kExampleSchema},
          {"kind", e.kind == ExampleKind::Retrieval ? "retrieval" : "editing"},
          {"instance_id", e.instance_id},
          {"input", e.input_task.input_object},
          {"expected_schema", e.input_task.expected_schema},
          {"target", e.target}};
}

struct ExampleResult {
  std::optional<TrainingExample> example;
  std::string reason;  // drop reason when no example
  std::vector<std::string> ranked;  // retrieval only: BM25 candidates
};

struct ExampleOptions {
  ContextBudget budget;
  bm25::Params bm25;
  std::size_t top_k = bm25::kDefaultTopK;
  bool include_readme = true;
  bool line_numbers = true;
  std::string index_documents = "skeleton";
};

/// Retrieval example: every gold file must rank in the top k and the whole
/// assembled input (issue, readme, all candidate docs) must fit the budget.
inline ExampleResult build_retrieval_example(const RawInstance& raw, const RepoSnapshot& snapshot,
                                             const PatchSummary& summary, const ExampleOptions& options = {}) {
  ExampleResult result;
  auto corpus = build_retrieval_corpus(snapshot, options.bm25, options.index_documents);
  auto ranked = corpus.index.top_k(raw.issue_text, options.top_k);
  std::set<std::string> top;
  for (const auto& r : ranked) {
    result.ranked.push_back(r.path);
    top.insert(r.path);
  }
  for (const auto& gold : summary.source_files) {
    if (!top.count(gold)) {
      result.reason = reason::kGoldNotRetrieved;
      return result;
    }
  }
  std::optional<std::string> readme;
  if (snapshot.readme()) readme = snapshot.at(*snapshot.readme()).content;
  JsonTask task;
  try {
    task = build_retrieval_input(raw.issue_text, readme, retrieval_documents(snapshot, corpus, ranked, "skeleton"),
                                 options.budget, {options.include_readme});
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::BudgetExhausted) throw;
    result.reason = reason::kOverBudget;
    return result;
  }
  if (task.included_docs < ranked.size()) {
    result.reason = reason::kOverBudget;
    return result;
  }
  result.example = TrainingExample{ExampleKind::Retrieval, raw.instance_id, std::move(task),
                                   serialize_retrieval_answer({summary.source_files})};
  return result;
}

struct EditingExampleResult {
  std::optional<TrainingExample> example;
  std::string reason;
  StructuredEdit gold_edit;
  std::vector<std::pair<std::string, std::string>> gold_file_contents;
};

/// Editing example: numbered gold files in, gold edit (empty reasoning) out.
inline EditingExampleResult build_editing_example(const RawInstance& raw, const RepoSnapshot& snapshot,
                                                  const PatchSummary& summary, const ExampleOptions& options = {}) {
  EditingExampleResult result;
  auto source = source_only(summary.patch);
  for (const auto& f : source.files) {
    if (f.is_new || f.is_deleted) {
      result.reason = reason::kFileAddOrDelete;
      return result;
    }
  }
  try {
    result.gold_edit = gold_patch_to_structured_edit(snapshot, source);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Apply) throw;
    result.reason = reason::kApplyFailed;
    return result;
  }
  std::vector<std::pair<std::string, NumberedText>> files;
  for (const auto& path : summary.source_files) {
    const auto& content = snapshot.at(path).content;
    files.emplace_back(path, number_lines(content));
    result.gold_file_contents.emplace_back(path, content);
  }
  JsonTask task;
  try {
    EditingInputOptions eopts;
    eopts.line_numbers = options.line_numbers;
    task = build_editing_input(raw.issue_text, files, options.budget, eopts);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::BudgetExhausted) throw;
    result.reason = reason::kOverBudget;
    return result;
  }
  if (task.included_files.size() < files.size()) {
    result.reason = reason::kOverBudget;
    return result;
  }
  result.example = TrainingExample{ExampleKind::Editing, raw.instance_id, std::move(task),
                                   serialize_structured_edit(result.gold_edit)};
  return result;
}

// ---- CoT requests ---------------------------------------------------------------

struct CotSource {
  std::string instance_id;
  std::string issue;
  std::vector<std::pair<std::string, std::string>> files;
  StructuredEdit gold_edit;
};

struct CotRequest {
  std::string instance_id;
  CotPrompt prompt;
};

/// Uniform sample without replacement of round(n * fraction) indices,
/// returned in ascending order.
inline std::vector<std::size_t> sample_indices(std::size_t n, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) fail(ErrorKind::Config, "CoT sample fraction must be within [0, 1]");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    auto j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline std::vector<CotRequest> emit_cot_requests(const std::vector<CotSource>& sources) {
  std::vector<CotRequest> out;
  for (const auto& s : sources) out.push_back({s.instance_id, render_cot_prompt(s.issue, s.files, s.gold_edit)});
  return out;
}

inline json to_json(const CotRequest& r) {
  return {{"schema", kCotRequestSchema},
          {"instance_id", r.instance_id},
          {"system", r.prompt.system},
          {"user", r.prompt.user}};
}

inline constexpr const char* kCotSections[] = {"Issue Analysis", "Task Decomposition", "Code Localization and Editing"};

/// Checks a teacher response: editing-output JSON, reasoning covering the
/// three guideline steps, edits identical to the gold edits. Returns the
/// reasoning, or nullopt when the response must be dropped.
inline std::optional<std::string> check_teacher_response(const std::string& response, const StructuredEdit& gold) {
  StructuredEdit parsed;
  try {
    parsed = parse_editing_output(response);
  } catch (const Error&) {
    return std::nullopt;
  }
  if (text::trim(parsed.reasoning).empty()) return std::nullopt;
  for (const char* section : kCotSections) {
    if (parsed.reasoning.find(section) == std::string::npos) return std::nullopt;
  }
  if (parsed.edits != gold.edits) return std::nullopt;
  return parsed.reasoning;
}

// ---- statistics ------------------------------------------------------------------

struct CorpusStats {
  std::size_t instances = 0;
  std::size_t parsed = 0;
  std::size_t unparseable = 0;
  std::map<std::size_t, std::size_t> edited_files;
  std::map<std::size_t, std::size_t> modified_lines;
  std::map<std::size_t, std::size_t> modified_line_buckets;  // key: bucket start, width 100
  std::map<std::size_t, std::size_t> hunks;
};

inline constexpr std::size_t kLineBucket = 100;

inline CorpusStats compute_statistics(const std::vector<RawInstance>& raws) {
  CorpusStats s;
  s.instances = raws.size();
  for (const auto& r : raws) {
    PatchSummary summary;
    try {
      summary = summarize_patch(diff::parse_unified_patch(r.gold_patch_text));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Parse) throw;
      ++s.unparseable;
      continue;
    }
    ++s.parsed;
    ++s.edited_files[summary.source_files.size()];
    ++s.modified_lines[summary.modified_lines];
    ++s.modified_line_buckets[summary.modified_lines / kLineBucket * kLineBucket];
    ++s.hunks[summary.hunks];
  }
  return s;
}

inline json histogram_json(const std::map<std::size_t, std::size_t>& h, std::size_t total, bool buckets = false) {
  auto arr = json::array();
  for (const auto& [k, n] : h) {
    json row = {{"count", n}, {"percent", total ? 100.0 * static_cast<double>(n) / static_cast<double>(total) : 0.0}};
    if (buckets) {
      row["range"] = {k, k + kLineBucket - 1};
    } else {
      row["value"] = k;
    }
    arr.push_back(std::move(row));
  }
  return arr;
}

inline json to_json(const CorpusStats& s) {
  return {{"instances", s.instances},
          {"parsed", s.parsed},
          {"unparseable", s.unparseable},
          {"edited_files", histogram_json(s.edited_files, s.parsed)},
          {"modified_lines", histogram_json(s.modified_lines, s.parsed)},
          {"modified_line_buckets", histogram_json(s.modified_line_buckets, s.parsed, true)},
          {"hunks", histogram_json(s.hunks, s.parsed)}};
}

}  // namespace swefixer::dataset
