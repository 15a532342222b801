#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swefixer/backend.hpp"
#include "swefixer/bm25.hpp"
#include "swefixer/diff.hpp"
#include "swefixer/edit_engine.hpp"
#include "swefixer/error.hpp"
#include "swefixer/repo.hpp"
#include "swefixer/runner.hpp"
#include "swefixer/skeleton.hpp"
#include "swefixer/task_codec.hpp"

namespace swefixer {

struct SamplingPolicy {
  double first_temperature = 0.0;
  double retry_temperature = 0.7;
  int max_attempts = 5;

  void validate() const {
    if (max_attempts < 1) fail(ErrorKind::Config, "sampling max_attempts must be at least 1");
    if (first_temperature < 0 || retry_temperature < 0) fail(ErrorKind::Config, "temperatures must be non-negative");
  }
  double temperature(int attempt) const { return attempt <= 1 ? first_temperature : retry_temperature; }
};

struct P2PPolicy {
  bool enabled = false;
  int max_attempts = 10;
  std::string runner = "marker";
  double regen_first_temperature = 0.0;
  double regen_retry_temperature = 0.7;

  void validate() const {
    if (max_attempts < 1) fail(ErrorKind::Config, "p2p max_attempts must be at least 1");
  }
};

namespace status {
inline constexpr const char* kResolvedCandidate = "resolved-candidate";
inline constexpr const char* kInvalidAfterRetries = "invalid-after-retries";
inline constexpr const char* kBudgetExhausted = "budget-exhausted";
inline constexpr const char* kP2PRejected = "p2p-rejected";
inline constexpr const char* kUnevaluated = "unevaluated";
inline constexpr const char* kBackendError = "backend-error";
}  // namespace status

struct Verdict {
  bool ok = false;
  std::string stage;  // where validation stopped; empty when accepted
  std::string message;
  std::vector<std::string> warnings;

  static Verdict accept(std::vector<std::string> warnings = {}) { return {true, "", "", std::move(warnings)}; }
  static Verdict reject(std::string stage, std::string message) { return {false, std::move(stage), std::move(message), {}}; }
};

struct Attempt {
  int index = 0;
  double temperature = 0.0;
  std::string raw;
  std::string task_hash;
  int transport_failures = 0;
  double latency_ms = 0.0;  // transcript only, never persisted
  Verdict verdict;
};

struct GenerateContext {
  std::string instance_id;
  std::string stage;
  int transport_retries = 3;
};

/// One completion for a task. Transport failures are retried up to
/// ctx.transport_retries times and counted in `record`.
inline std::string generate(ModelBackend& backend, const JsonTask& task, double temperature, const GenerateContext& ctx,
                            Attempt* record = nullptr) {
  auto prompt = task.serialize();
  auto tokens = estimate_tokens(prompt);
  if (tokens > backend.max_context_tokens()) {
    fail(ErrorKind::BudgetExhausted, "task of ~" + std::to_string(tokens) + " tokens exceeds " + backend.name() +
                                         " capacity of " + std::to_string(backend.max_context_tokens()));
  }
  GenerateRequest request{ctx.instance_id, ctx.stage, std::move(prompt), temperature};
  auto start = std::chrono::steady_clock::now();
  int failures = 0;
  while (true) {
    try {
      auto out = backend.complete(request);
      if (record) {
        record->temperature = temperature;
        record->raw = out;
        record->task_hash = task_hash(request.prompt);
        record->transport_failures = failures;
        record->latency_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      }
      return out;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Backend) throw;
      if (++failures > ctx.transport_retries) {
        if (record) record->transport_failures = failures;
        throw;
      }
    }
  }
}

using Validator = std::function<Verdict(const std::string& raw)>;

struct ResamplingResult {
  bool accepted = false;
  std::vector<Attempt> attempts;
  std::optional<std::string> backend_error;

  const Attempt* accepted_attempt() const { return accepted ? &attempts.back() : nullptr; }
  std::vector<double> temperatures() const {
    std::vector<double> out;
    for (const auto& a : attempts) out.push_back(a.temperature);
    return out;
  }
};

/// Samples until the validator accepts or the policy's attempts run out.
/// BudgetExhausted propagates; a backend that stays unreachable ends the loop
/// with backend_error set.
inline ResamplingResult run_with_resampling(ModelBackend& backend, const JsonTask& task, const Validator& validator,
                                            const SamplingPolicy& policy, const GenerateContext& ctx) {
  policy.validate();
  ResamplingResult result;
  for (int k = 1; k <= policy.max_attempts; ++k) {
    Attempt attempt;
    attempt.index = k;
    attempt.temperature = policy.temperature(k);
    try {
      generate(backend, task, attempt.temperature, ctx, &attempt);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Backend) throw;
      result.backend_error = e.what();
      return result;
    }
    attempt.verdict = validator(attempt.raw);
    bool ok = attempt.verdict.ok;
    result.attempts.push_back(std::move(attempt));
    if (ok) {
      result.accepted = true;
      return result;
    }
  }
  return result;
}

// ---- validation ----------------------------------------------------------------

inline Verdict validate_retrieval(const RetrievalAnswer& answer, const RepoSnapshot& snapshot,
                                  const std::vector<std::string>& candidates = {}) {
  if (answer.files.empty()) return Verdict::reject("files", "no files selected");
  std::set<std::string> cand(candidates.begin(), candidates.end());
  std::vector<std::string> warnings;
  for (const auto& f : answer.files) {
    if (!snapshot.contains(f)) return Verdict::reject("files", "file not in repository: " + f);
    if (!candidates.empty() && !cand.count(f)) warnings.push_back("selected file outside the candidate set: " + f);
  }
  return Verdict::accept(std::move(warnings));
}

inline Verdict validate_retrieval_output(const std::string& raw, const RepoSnapshot& snapshot,
                                         const std::vector<std::string>& candidates, RetrievalAnswer* out = nullptr) {
  RetrievalAnswer answer;
  try {
    answer = parse_retrieval_output(raw);
  } catch (const Error& e) {
    return Verdict::reject("parse", e.what());
  }
  auto v = validate_retrieval(answer, snapshot, candidates);
  if (v.ok && out) *out = std::move(answer);
  return v;
}

struct EditValidationOptions {
  bool require_line_numbers = true;
  std::vector<std::string> allowed_files;  // empty: any file in the snapshot
  TestRunner* runner = nullptr;            // repository tests, when set
  std::vector<std::string> tests;
};

struct EditValidation {
  Verdict verdict;
  StructuredEdit edit;
  RepoSnapshot modified;
  diff::UnifiedPatch patch;
  std::string patch_text;
};

/// parse -> locate -> apply -> syntax -> tests; the first failing stage rejects.
/// A runner error propagates.
inline EditValidation validate_editing(const std::string& raw, const RepoSnapshot& snapshot,
                                       const EditValidationOptions& options = {}) {
  EditValidation v;
  try {
    v.edit = parse_editing_output(raw, {options.require_line_numbers});
  } catch (const Error& e) {
    v.verdict = Verdict::reject("parse", e.what());
    return v;
  }
  std::set<std::string> allowed(options.allowed_files.begin(), options.allowed_files.end());
  for (const auto& block : v.edit.edits) {
    if (!allowed.empty() && !allowed.count(block.file)) {
      v.verdict = Verdict::reject("locate", "edit targets a file that was not provided: " + block.file);
      return v;
    }
    const auto* file = snapshot.find(block.file);
    if (!file) {
      v.verdict = Verdict::reject("locate", "edit targets unknown file " + block.file);
      return v;
    }
    try {
      locate_snippet(*file, block);
    } catch (const Error& e) {
      v.verdict = Verdict::reject("locate", e.what());
      return v;
    }
  }
  AppliedEdits applied;
  try {
    applied = apply_edits_detailed(snapshot, v.edit);
  } catch (const Error& e) {
    v.verdict = Verdict::reject(e.kind() == ErrorKind::Locate ? "locate" : "apply", e.what());
    return v;
  }
  if (applied.changed_files.empty()) {
    v.verdict = Verdict::reject("apply", "edits leave every file unchanged");
    return v;
  }
  for (const auto& path : applied.changed_files) {
    auto lang = language_for(path);
    if (!lang) continue;
    auto check = check_syntax(applied.snapshot.at(path).content, *lang);
    if (!check.ok) {
      v.verdict = Verdict::reject("syntax", path + ":" + std::to_string(check.line) + ":" + std::to_string(check.col) +
                                                ": " + check.message);
      return v;
    }
  }
  if (options.runner && !options.tests.empty()) {
    auto results = options.runner->run(applied.snapshot, options.tests);
    for (const auto& [test, ok] : results) {
      if (!ok) {
        v.verdict = Verdict::reject("tests", "test failed: " + test);
        return v;
      }
    }
  }
  v.modified = applied.snapshot;
  v.patch = to_unified_patch(snapshot, v.modified);
  v.patch_text = diff::render(v.patch);
  v.verdict = Verdict::accept();
  return v;
}

// ---- P2P filtering -------------------------------------------------------------

struct P2PAttempt {
  int index = 0;
  double temperature = 0.0;
  bool valid = false;   // the regenerated output passed validate_editing
  bool passed = false;  // every P2P test passed
  std::vector<std::string> failed_tests;
  std::string message;
};

struct P2PResult {
  bool retained = false;
  std::vector<P2PAttempt> attempts;
  std::optional<EditValidation> final;
  std::optional<std::string> runner_error;

  int regenerations() const {
    int n = 0;
    for (const auto& a : attempts) n += a.index > 1;
    return n;
  }
};

/// Produces a fresh validated editing sample at a temperature; nullopt when
/// the sample is invalid.
using Regenerator = std::function<std::optional<EditValidation>(double temperature)>;

/// Runs the P2P tests on the candidate; on failure asks for new samples
/// (greedy first, then the retry temperature) up to the policy's cap.
inline P2PResult p2p_filter(const EditValidation& candidate, double candidate_temperature,
                            const std::vector<std::string>& p2p_tests, TestRunner& runner, const P2PPolicy& policy,
                            const Regenerator& regenerate) {
  policy.validate();
  P2PResult result;
  std::optional<EditValidation> current = candidate;
  for (int k = 1; k <= policy.max_attempts; ++k) {
    P2PAttempt attempt;
    attempt.index = k;
    if (k == 1) {
      attempt.temperature = candidate_temperature;
    } else {
      attempt.temperature = k == 2 ? policy.regen_first_temperature : policy.regen_retry_temperature;
      current = regenerate(attempt.temperature);
    }
    attempt.valid = current.has_value();
    if (!current) {
      attempt.message = "regenerated output failed validation";
      result.attempts.push_back(std::move(attempt));
      continue;
    }
    TestResults runs;
    try {
      runs = runner.run(current->modified, p2p_tests);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Runner) throw;
      result.runner_error = e.what();
      result.attempts.push_back(std::move(attempt));
      return result;
    }
    for (const auto& [test, ok] : runs) {
      if (!ok) attempt.failed_tests.push_back(test);
    }
    attempt.passed = attempt.failed_tests.empty();
    result.attempts.push_back(std::move(attempt));
    if (result.attempts.back().passed) {
      result.retained = true;
      result.final = std::move(current);
      return result;
    }
  }
  return result;
}

// ---- full pipeline ---------------------------------------------------------------

struct PipelineConfig {
  SamplingPolicy sampling;
  P2PPolicy p2p;
  ContextBudget budget;
  bm25::Params bm25;
  std::size_t top_k = bm25::kDefaultTopK;
  bool include_readme_retrieval = true;
  bool include_readme_editing = false;
  bool line_numbers = true;
  std::string retrieval_documents = "skeleton";  // or "content"
  std::string index_documents = "skeleton";      // or "content"
  bool run_repo_tests = false;
  int transport_retries = 3;
};

struct InstanceInput {
  std::string instance_id;
  std::string issue;
  const RepoSnapshot* snapshot = nullptr;
  std::vector<std::string> p2p_tests;
  std::vector<std::string> validation_tests;
};

struct PipelineOutcome {
  static constexpr const char* kSchema = "swefixer.outcome.v1";

  std::string instance_id;
  std::string status;
  std::vector<std::string> candidates;
  std::vector<Attempt> retrieval;
  std::vector<Attempt> editing;
  std::vector<P2PAttempt> p2p;
  std::vector<std::string> final_files;
  std::optional<std::string> final_patch;
  int model_calls = 0;
  int p2p_attempts = 0;
  std::vector<std::string> warnings;
  std::string error;
};

inline nlohmann::json attempts_json(const std::vector<Attempt>& attempts) {
  auto arr = nlohmann::json::array();
  for (const auto& a : attempts) {
    nlohmann::json v = {{"ok", a.verdict.ok}};
    if (!a.verdict.ok) {
      v["stage"] = a.verdict.stage;
      v["message"] = a.verdict.message;
    }
    if (!a.verdict.warnings.empty()) v["warnings"] = a.verdict.warnings;
    arr.push_back({{"attempt", a.index},
                   {"temperature", a.temperature},
                   {"task_hash", a.task_hash},
                   {"transport_failures", a.transport_failures},
                   {"raw", a.raw},
                   {"verdict", std::move(v)}});
  }
  return arr;
}

inline nlohmann::json to_json(const PipelineOutcome& o) {
  auto p2p = nlohmann::json::array();
  for (const auto& a : o.p2p) {
    p2p.push_back({{"attempt", a.index},
                   {"temperature", a.temperature},
                   {"valid", a.valid},
                   {"passed", a.passed},
                   {"failed_tests", a.failed_tests}});
  }
  nlohmann::json j = {{"schema", PipelineOutcome::kSchema},
                      {"instance_id", o.instance_id},
                      {"status", o.status},
                      {"candidates", o.candidates},
                      {"retrieval", {{"attempts", attempts_json(o.retrieval)}}},
                      {"editing", {{"attempts", attempts_json(o.editing)}}},
                      {"p2p", {{"attempts", std::move(p2p)}}},
                      {"final_files", o.final_files},
                      {"final_patch", o.final_patch ? nlohmann::json(*o.final_patch) : nlohmann::json(nullptr)},
                      {"model_calls", o.model_calls},
                      {"p2p_attempts", o.p2p_attempts},
                      {"warnings", o.warnings}};
  if (!o.error.empty()) j["error"] = o.error;
  return j;
}

/// Retrieval corpus of a snapshot: non-test source files with their skeletons.
struct RetrievalCorpus {
  std::map<std::string, FileDoc> docs;
  bm25::Index index;
};

inline RetrievalCorpus build_retrieval_corpus(const RepoSnapshot& snapshot, const bm25::Params& params = {},
                                              const std::string& index_documents = "skeleton") {
  RetrievalCorpus corpus;
  std::vector<std::pair<std::string, std::string>> docs;
  for (const auto& [path, rec] : snapshot.files()) {
    if (!rec->is_source || rec->is_test) continue;
    auto doc = extract_skeleton(*rec);
    docs.emplace_back(path, index_documents == "content" ? rec->content : doc.rendered);
    corpus.docs.emplace(path, std::move(doc));
  }
  corpus.index = bm25::Index::build(std::move(docs), params);
  return corpus;
}

/// Documents shown to the retriever for the ranked candidates.
inline std::vector<FileDoc> retrieval_documents(const RepoSnapshot& snapshot, const RetrievalCorpus& corpus,
                                                const std::vector<bm25::ScoredDoc>& ranked, const std::string& mode) {
  std::vector<FileDoc> out;
  for (const auto& r : ranked) {
    FileDoc doc = corpus.docs.at(r.path);
    if (mode == "content") doc.rendered = r.path + "\n\n" + snapshot.at(r.path).content;
    out.push_back(std::move(doc));
  }
  return out;
}

inline std::vector<std::pair<std::string, NumberedText>> editing_files(const RepoSnapshot& snapshot,
                                                                       const std::vector<std::string>& paths) {
  std::vector<std::pair<std::string, NumberedText>> out;
  for (const auto& p : paths) out.emplace_back(p, number_lines(snapshot.at(p).content));
  return out;
}

/// BM25 candidates, retrieval call, editing call over the selected files, and
/// optional P2P filtering. Model garbage never throws; it becomes a status.
inline PipelineOutcome resolve_instance(const InstanceInput& input, ModelBackend& retriever, ModelBackend& editor,
                                        const PipelineConfig& config, TestRunner* runner = nullptr,
                                        const RetrievalCorpus* corpus_in = nullptr) {
  PipelineOutcome out;
  out.instance_id = input.instance_id;
  if (!input.snapshot) fail(ErrorKind::Validation, input.instance_id + ": no snapshot");
  const RepoSnapshot& snapshot = *input.snapshot;
  config.sampling.validate();

  std::optional<RetrievalCorpus> own;
  if (!corpus_in) own = build_retrieval_corpus(snapshot, config.bm25, config.index_documents);
  const RetrievalCorpus& corpus = corpus_in ? *corpus_in : *own;

  try {
    auto ranked = corpus.index.top_k(input.issue, config.top_k);
    for (const auto& r : ranked) out.candidates.push_back(r.path);
    std::optional<std::string> readme;
    if (snapshot.readme()) readme = snapshot.at(*snapshot.readme()).content;

    auto rtask = build_retrieval_input(input.issue, readme, retrieval_documents(snapshot, corpus, ranked, config.retrieval_documents),
                                       config.budget, {config.include_readme_retrieval});
    for (auto& w : rtask.warnings) out.warnings.push_back(w);
    RetrievalAnswer answer;
    auto retrieval = run_with_resampling(
        retriever, rtask,
        [&](const std::string& raw) { return validate_retrieval_output(raw, snapshot, out.candidates, &answer); },
        config.sampling, {input.instance_id, "retrieval", config.transport_retries});
    out.retrieval = retrieval.attempts;
    out.model_calls += static_cast<int>(retrieval.attempts.size());
    if (retrieval.backend_error) {
      out.status = status::kBackendError;
      out.error = *retrieval.backend_error;
      return out;
    }
    if (!retrieval.accepted) {
      out.status = status::kInvalidAfterRetries;
      return out;
    }
    for (auto& w : retrieval.attempts.back().verdict.warnings) out.warnings.push_back(w);

    EditingInputOptions eopts;
    eopts.line_numbers = config.line_numbers;
    if (config.include_readme_editing) eopts.readme = readme;
    auto etask = build_editing_input(input.issue, editing_files(snapshot, answer.files), config.budget, eopts);
    for (auto& w : etask.warnings) out.warnings.push_back(w);

    EditValidationOptions vopts;
    vopts.require_line_numbers = config.line_numbers;
    vopts.allowed_files = etask.included_files;
    if (config.run_repo_tests) {
      vopts.runner = runner;
      vopts.tests = input.validation_tests;
    }
    std::optional<EditValidation> accepted;
    auto editing = run_with_resampling(
        editor, etask,
        [&](const std::string& raw) {
          auto v = validate_editing(raw, snapshot, vopts);
          if (v.verdict.ok) accepted = v;
          return v.verdict;
        },
        config.sampling, {input.instance_id, "editing", config.transport_retries});
    out.editing = editing.attempts;
    out.model_calls += static_cast<int>(editing.attempts.size());
    if (editing.backend_error) {
      out.status = status::kBackendError;
      out.error = *editing.backend_error;
      return out;
    }
    if (!editing.accepted) {
      out.status = status::kInvalidAfterRetries;
      return out;
    }

    if (config.p2p.enabled && !input.p2p_tests.empty()) {
      if (!runner) fail(ErrorKind::Config, "P2P filtering enabled without a test runner");
      int regen = 0;
      auto p2p = p2p_filter(
          *accepted, editing.attempts.back().temperature, input.p2p_tests, *runner, config.p2p,
          [&](double temperature) -> std::optional<EditValidation> {
            Attempt a;
            a.index = ++regen;
            generate(editor, etask, temperature, {input.instance_id, "editing", config.transport_retries}, &a);
            ++out.model_calls;
            auto v = validate_editing(a.raw, snapshot, vopts);
            if (!v.verdict.ok) return std::nullopt;
            return v;
          });
      out.p2p = p2p.attempts;
      out.p2p_attempts = static_cast<int>(p2p.attempts.size());
      if (p2p.runner_error) {
        out.status = status::kUnevaluated;
        out.error = *p2p.runner_error;
        return out;
      }
      if (!p2p.retained) {
        out.status = status::kP2PRejected;
        return out;
      }
      accepted = p2p.final;
    }

    for (const auto& f : accepted->patch.files) out.final_files.push_back(f.path());
    out.final_patch = accepted->patch_text;
    out.status = status::kResolvedCandidate;
  } catch (const Error& e) {
    out.error = e.what();
    switch (e.kind()) {
      case ErrorKind::BudgetExhausted: out.status = status::kBudgetExhausted; break;
      case ErrorKind::Backend: out.status = status::kBackendError; break;
      case ErrorKind::Runner: out.status = status::kUnevaluated; break;
      default: throw;
    }
  }
  return out;
}

}  // namespace swefixer
