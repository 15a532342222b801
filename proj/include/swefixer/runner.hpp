#pragma once

#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "swefixer/error.hpp"
#include "swefixer/repo.hpp"
#include "swefixer/text.hpp"

namespace swefixer {

using TestResults = std::map<std::string, bool>;  // test id -> passed

/// Runs repository tests against a snapshot. Throws Error(Runner) when the
/// runner itself breaks, as opposed to a test failing.
class TestRunner {
 public:
  virtual ~TestRunner() = default;
  virtual std::string id() const = 0;
  virtual TestResults run(const RepoSnapshot& snapshot, const std::vector<std::string>& tests) = 0;
};

inline bool all_passed(const TestResults& results) {
  for (const auto& [test, ok] : results) {
    if (!ok) return false;
  }
  return true;
}

/// Simulated runner: test `t` fails when any file contains `breaks: t`;
/// `runner-crash` anywhere makes the run itself fail.
class MarkerRunner : public TestRunner {
 public:
  std::string id() const override { return "marker"; }
  TestResults run(const RepoSnapshot& snapshot, const std::vector<std::string>& tests) override {
    TestResults out;
    for (const auto& [path, rec] : snapshot.files()) {
      if (rec->content.find("runner-crash") != std::string::npos) fail(ErrorKind::Runner, "test runner crashed");
    }
    for (const auto& t : tests) {
      bool broken = false;
      for (const auto& [path, rec] : snapshot.files()) {
        if (rec->content.find("breaks: " + t) != std::string::npos) broken = true;
      }
      out[t] = !broken;
    }
    return out;
  }
};

/// Simulated runner replaying a fixed sequence of verdicts, one per call.
/// An exhausted schedule passes everything.
class ScheduledRunner : public TestRunner {
 public:
  std::string id() const override { return "scheduled"; }
  void push(bool pass) {
    std::lock_guard lock(mu_);
    schedule_.push_back(pass);
  }
  TestResults run(const RepoSnapshot&, const std::vector<std::string>& tests) override {
    std::lock_guard lock(mu_);
    ++calls_;
    bool pass = true;
    if (!schedule_.empty()) {
      pass = schedule_.front();
      schedule_.pop_front();
    }
    TestResults out;
    for (std::size_t i = 0; i < tests.size(); ++i) out[tests[i]] = pass || i > 0;
    return out;
  }
  int calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }

 private:
  mutable std::mutex mu_;
  std::deque<bool> schedule_;
  int calls_ = 0;
};

/// External command per test: the snapshot is written to a scratch directory
/// and `command` runs there with `{test}` replaced by the test id. Exit 0 is a
/// pass, 1 a failure, anything else a runner error.
class CommandRunner : public TestRunner {
 public:
  explicit CommandRunner(std::string command) : command_(std::move(command)) {}
  std::string id() const override { return "command"; }

  TestResults run(const RepoSnapshot& snapshot, const std::vector<std::string>& tests) override {
    namespace fs = std::filesystem;
    std::random_device rd;
    fs::path dir = fs::temp_directory_path() / ("swefixer-run-" + text::hex64((std::uint64_t(rd()) << 32) | rd()));
    fs::create_directories(dir);
    struct Cleanup {
      fs::path p;
      ~Cleanup() {
        std::error_code ec;
        fs::remove_all(p, ec);
      }
    } cleanup{dir};
    for (const auto& [path, rec] : snapshot.files()) {
      fs::path target = dir / path;
      fs::create_directories(target.parent_path());
      std::ofstream out(target, std::ios::binary);
      out << rec->content;
      if (!out) fail(ErrorKind::Runner, "cannot materialize " + path);
    }
    TestResults results;
    for (const auto& t : tests) {
      std::string cmd = "cd '" + dir.string() + "' && " + text::replace_all(command_, "{test}", t) + " >/dev/null 2>&1";
      int status = std::system(cmd.c_str());
      if (status == -1 || !WIFEXITED(status)) fail(ErrorKind::Runner, "test command did not exit normally: " + t);
      int code = WEXITSTATUS(status);
      if (code != 0 && code != 1) fail(ErrorKind::Runner, "test command exited " + std::to_string(code) + ": " + t);
      results[t] = code == 0;
    }
    return results;
  }

 private:
  std::string command_;
};

}  // namespace swefixer
