#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "swefixer/error.hpp"
#include "swefixer/text.hpp"

namespace swefixer {

struct GenerateRequest {
  std::string instance_id;
  std::string stage;  // "retrieval" or "editing"
  std::string prompt;
  double temperature = 0.0;
};

/// A completion source. complete() throws Error(Backend) on transport
/// failures; everything else about a call lives in the caller's transcript.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual std::string name() const = 0;
  virtual std::size_t max_context_tokens() const = 0;
  virtual std::string complete(const GenerateRequest& request) = 0;
};

inline std::string task_hash(std::string_view serialized) { return text::hex64(text::fnv1a64(serialized)); }

/// Replays canned outputs. Lookup order: exact task hash, then the queue for
/// (instance, stage), then the queue for the stage alone. Transport failures
/// can be injected per (instance, stage).
class ScriptedBackend : public ModelBackend {
 public:
  explicit ScriptedBackend(std::string name = "scripted", std::size_t max_context = 65536)
      : name_(std::move(name)), max_context_(max_context) {}

  std::string name() const override { return name_; }
  std::size_t max_context_tokens() const override { return max_context_; }

  void on_hash(const std::string& hash, std::string output) {
    std::lock_guard lock(mu_);
    by_hash_[hash] = std::move(output);
  }
  void push(const std::string& instance_id, const std::string& stage, std::string output) {
    std::lock_guard lock(mu_);
    queues_[{instance_id, stage}].push_back(std::move(output));
  }
  void push_default(const std::string& stage, std::string output) {
    std::lock_guard lock(mu_);
    queues_[{"", stage}].push_back(std::move(output));
  }
  void fail_transport(const std::string& instance_id, const std::string& stage, int times) {
    std::lock_guard lock(mu_);
    transport_failures_[{instance_id, stage}] += times;
  }

  std::string complete(const GenerateRequest& request) override {
    std::lock_guard lock(mu_);
    ++calls_;
    auto key = std::make_pair(request.instance_id, request.stage);
    if (auto it = transport_failures_.find(key); it != transport_failures_.end() && it->second > 0) {
      --it->second;
      ++transport_failed_;
      fail(ErrorKind::Backend, "scripted transport failure");
    }
    if (auto it = by_hash_.find(task_hash(request.prompt)); it != by_hash_.end()) return it->second;
    for (const auto& k : {key, std::make_pair(std::string(), request.stage)}) {
      auto q = queues_.find(k);
      if (q != queues_.end() && !q->second.empty()) {
        auto out = std::move(q->second.front());
        q->second.pop_front();
        return out;
      }
    }
    return {};
  }

  std::size_t calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }
  std::size_t transport_failed() const {
    std::lock_guard lock(mu_);
    return transport_failed_;
  }

 private:
  using Key = std::pair<std::string, std::string>;
  std::string name_;
  std::size_t max_context_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> by_hash_;
  std::map<Key, std::deque<std::string>> queues_;
  std::map<Key, int> transport_failures_;
  std::size_t calls_ = 0;
  std::size_t transport_failed_ = 0;
};

}  // namespace swefixer
