#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swefixer/backend.hpp"
#include "swefixer/chat_backend.hpp"
#include "swefixer/error.hpp"
#include "swefixer/glob.hpp"
#include "swefixer/inference.hpp"
#include "swefixer/runner.hpp"

namespace swefixer {

struct BackendConfig {
  std::string kind = "scripted";  // "scripted" or "chat"
  std::string name;
  std::string script;             // scripted: JSONL of canned outputs
  ChatBackendConfig chat;
};

struct RunConfig {
  BackendConfig retriever;
  BackendConfig editor;
  PipelineConfig pipeline;
  std::string runner = "marker";  // "marker" or "command"
  std::string runner_command;
  int workers = 1;
  std::string output_dir = "out";
  std::string snapshots_dir = ".";
  std::vector<std::string> exclusions = glob::default_exclusions();
  std::vector<std::string> excluded_repos;
  std::size_t max_files = 3;
  double cot_fraction = 1.0;
  std::uint64_t cot_seed = 0;
  std::string cot_responses;

  RunConfig() {
    retriever.name = "retriever";
    editor.name = "editor";
  }

  void validate() const {
    pipeline.sampling.validate();
    pipeline.p2p.validate();
    if (workers < 1) fail(ErrorKind::Config, "workers must be at least 1");
    if (pipeline.top_k < 1) fail(ErrorKind::Config, "top_k must be at least 1");
    if (pipeline.budget.max_tokens < 1) fail(ErrorKind::Config, "context_limit must be positive");
    for (const auto* mode : {&pipeline.retrieval_documents, &pipeline.index_documents}) {
      if (*mode != "skeleton" && *mode != "content") {
        fail(ErrorKind::Config, "document mode must be 'skeleton' or 'content', got '" + *mode + "'");
      }
    }
    if (runner != "marker" && runner != "command") fail(ErrorKind::Config, "unknown runner '" + runner + "'");
    if (runner == "command" && runner_command.empty()) fail(ErrorKind::Config, "command runner needs runner_command");
    if (cot_fraction < 0 || cot_fraction > 1) fail(ErrorKind::Config, "cot.fraction must be within [0, 1]");
    for (const auto* b : {&retriever, &editor}) {
      if (b->kind != "scripted" && b->kind != "chat") fail(ErrorKind::Config, "unknown backend kind '" + b->kind + "'");
      if (b->kind == "chat" && b->chat.endpoint.empty()) fail(ErrorKind::Config, b->name + ": chat backend needs an endpoint");
      if (b->kind == "scripted" && !b->script.empty() && !std::filesystem::exists(b->script)) {
        fail(ErrorKind::Config, b->name + ": script not found: " + b->script);
      }
    }
    if (!std::filesystem::is_directory(snapshots_dir)) fail(ErrorKind::Config, "snapshots_dir not found: " + snapshots_dir);
    if (!cot_responses.empty() && !std::filesystem::exists(cot_responses)) {
      fail(ErrorKind::Config, "cot responses not found: " + cot_responses);
    }
  }
};

namespace detail {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key) || j[key].is_null()) return;
  try {
    out = j[key].get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("config key '") + key + "': " + e.what());
  }
}

inline void merge_backend(const nlohmann::json& j, BackendConfig& b, const std::filesystem::path& base) {
  if (!j.is_object()) fail(ErrorKind::Config, "backend config must be an object");
  take(j, "kind", b.kind);
  take(j, "name", b.name);
  take(j, "script", b.script);
  if (!b.script.empty() && std::filesystem::path(b.script).is_relative()) b.script = (base / b.script).string();
  take(j, "endpoint", b.chat.endpoint);
  take(j, "model", b.chat.model);
  take(j, "token_env", b.chat.token_env);
  take(j, "system_prompt", b.chat.system_prompt);
  take(j, "timeout_seconds", b.chat.timeout_seconds);
  take(j, "max_context_tokens", b.chat.max_context_tokens);
  take(j, "max_output_tokens", b.chat.max_output_tokens);
  b.chat.name = b.name;
}

}  // namespace detail

/// Overlays a JSON config onto `cfg`. Relative paths resolve against `base`.
inline void merge_config(RunConfig& cfg, const nlohmann::json& j, const std::filesystem::path& base = ".") {
  using detail::take;
  if (!j.is_object()) fail(ErrorKind::Config, "config must be a JSON object");
  static const std::set<std::string> kKnown = {"retriever", "editor",  "sampling",      "p2p",       "runner",
                                               "bm25",      "flags",   "run_repo_tests", "transport_retries",
                                               "workers",   "output_dir", "snapshots_dir", "exclusions",
                                               "excluded_repos", "max_files", "cot"};
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.count(key)) fail(ErrorKind::Config, "unknown config key '" + key + "'");
  }
  auto& p = cfg.pipeline;
  if (j.contains("retriever")) detail::merge_backend(j["retriever"], cfg.retriever, base);
  if (j.contains("editor")) detail::merge_backend(j["editor"], cfg.editor, base);
  if (j.contains("sampling")) {
    const auto& s = j["sampling"];
    take(s, "first_temperature", p.sampling.first_temperature);
    take(s, "retry_temperature", p.sampling.retry_temperature);
    take(s, "max_attempts", p.sampling.max_attempts);
  }
  if (j.contains("p2p")) {
    const auto& s = j["p2p"];
    take(s, "enabled", p.p2p.enabled);
    take(s, "max_attempts", p.p2p.max_attempts);
    take(s, "runner", cfg.runner);
  }
  if (j.contains("runner")) {
    const auto& s = j["runner"];
    if (s.is_string()) {
      cfg.runner = s.get<std::string>();
    } else {
      take(s, "kind", cfg.runner);
      take(s, "command", cfg.runner_command);
    }
  }
  if (j.contains("bm25")) {
    const auto& s = j["bm25"];
    take(s, "k1", p.bm25.k1);
    take(s, "b", p.bm25.b);
    take(s, "top_k", p.top_k);
    take(s, "documents", p.index_documents);
  }
  if (j.contains("flags")) {
    const auto& s = j["flags"];
    take(s, "include_readme_retrieval", p.include_readme_retrieval);
    take(s, "include_readme_editing", p.include_readme_editing);
    take(s, "line_numbers", p.line_numbers);
    take(s, "skeleton_vs_content", p.retrieval_documents);
    take(s, "context_limit", p.budget.max_tokens);
  }
  take(j, "run_repo_tests", p.run_repo_tests);
  take(j, "transport_retries", p.transport_retries);
  take(j, "workers", cfg.workers);
  take(j, "output_dir", cfg.output_dir);
  if (j.contains("snapshots_dir")) {
    take(j, "snapshots_dir", cfg.snapshots_dir);
    if (std::filesystem::path(cfg.snapshots_dir).is_relative()) cfg.snapshots_dir = (base / cfg.snapshots_dir).string();
  }
  take(j, "exclusions", cfg.exclusions);
  take(j, "excluded_repos", cfg.excluded_repos);
  take(j, "max_files", cfg.max_files);
  if (j.contains("cot")) {
    const auto& s = j["cot"];
    take(s, "fraction", cfg.cot_fraction);
    take(s, "seed", cfg.cot_seed);
    take(s, "responses", cfg.cot_responses);
    if (!cfg.cot_responses.empty() && std::filesystem::path(cfg.cot_responses).is_relative()) {
      cfg.cot_responses = (base / cfg.cot_responses).string();
    }
  }
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto j = nlohmann::json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::Config, "config is not valid JSON: " + path.string());
  RunConfig cfg;
  merge_config(cfg, j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
  return cfg;
}

/// Scripted outputs, one JSON object per line:
///   {"stage": "retrieval"|"editing", "instance_id"?: id, "output": text}
///   {"task_hash": hex, "output": text}
///   {"stage": ..., "instance_id": id, "transport_failures": n}
inline std::unique_ptr<ScriptedBackend> load_scripted_backend(const std::string& name, const std::string& path,
                                                              std::size_t max_context) {
  auto backend = std::make_unique<ScriptedBackend>(name, max_context);
  if (path.empty()) return backend;
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot read script " + path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_object()) fail(ErrorKind::Config, path + ":" + std::to_string(n) + ": not a JSON object");
    auto id = j.value("instance_id", "");
    auto stage = j.value("stage", "");
    if (j.contains("transport_failures")) {
      backend->fail_transport(id, stage, j["transport_failures"].get<int>());
      continue;
    }
    if (!j.contains("output") || !j["output"].is_string()) {
      fail(ErrorKind::Config, path + ":" + std::to_string(n) + ": missing string 'output'");
    }
    auto output = j["output"].get<std::string>();
    if (j.contains("task_hash")) {
      backend->on_hash(j["task_hash"].get<std::string>(), output);
    } else if (id.empty()) {
      backend->push_default(stage, output);
    } else {
      backend->push(id, stage, output);
    }
  }
  return backend;
}

inline std::unique_ptr<ModelBackend> make_backend(const BackendConfig& b, std::size_t context_limit) {
  if (b.kind == "chat") {
    auto chat = b.chat;
    chat.name = b.name;
    return std::make_unique<ChatCompletionsBackend>(chat);
  }
  return load_scripted_backend(b.name, b.script, std::max(context_limit, b.chat.max_context_tokens));
}

inline std::unique_ptr<TestRunner> make_runner(const RunConfig& cfg) {
  if (cfg.runner == "command") return std::make_unique<CommandRunner>(cfg.runner_command);
  return std::make_unique<MarkerRunner>();
}

}  // namespace swefixer
