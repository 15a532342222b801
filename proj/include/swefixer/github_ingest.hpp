#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "swefixer/dataset.hpp"
#include "swefixer/error.hpp"
#include "swefixer/text.hpp"

namespace swefixer::github {

using nlohmann::json;

struct IssueRef {
  std::string repo;  // owner/name
  int number = 0;
  bool operator<(const IssueRef& o) const { return std::tie(repo, number) < std::tie(o.repo, o.number); }
  bool operator==(const IssueRef&) const = default;
};

namespace detail {

inline bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

inline bool is_repo_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
}

}  // namespace detail

/// Issues a PR body closes: a closing keyword (close/fix/resolve and their
/// -s/-d forms, any case), optional colon, then `#N`, `owner/repo#N` or an
/// issue URL.
inline std::vector<IssueRef> closing_references(std::string_view body, const std::string& default_repo) {
  static const std::set<std::string> kKeywords = {"close", "closes", "closed", "fix", "fixes",
                                                  "fixed", "resolve", "resolves", "resolved"};
  std::vector<IssueRef> out;
  std::set<IssueRef> seen;
  std::size_t i = 0;
  while (i < body.size()) {
    if (!std::isalpha(static_cast<unsigned char>(body[i])) || (i > 0 && detail::is_word(body[i - 1]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < body.size() && std::isalpha(static_cast<unsigned char>(body[j]))) ++j;
    std::string word = text::to_lower(body.substr(i, j - i));
    i = j;
    if (!kKeywords.count(word)) continue;
    if (j < body.size() && body[j] == ':') ++j;
    std::size_t spaces = j;
    while (j < body.size() && (body[j] == ' ' || body[j] == '\t')) ++j;
    if (j == spaces && (j >= body.size() || body[j] != '#')) continue;

    IssueRef ref{default_repo, 0};
    std::string_view rest = body.substr(j);
    constexpr std::string_view kUrl = "https://github.com/";
    if (text::starts_with(rest, kUrl)) {
      auto parts = text::split(std::string(rest.substr(kUrl.size())), '/');
      if (parts.size() >= 4 && parts[2] == "issues") {
        ref.repo = parts[0] + "/" + parts[1];
        std::string digits;
        for (char c : parts[3]) {
          if (!std::isdigit(static_cast<unsigned char>(c))) break;
          digits.push_back(c);
        }
        if (!digits.empty()) ref.number = std::stoi(digits);
      }
    } else {
      std::size_t k = 0;
      while (k < rest.size() && (detail::is_repo_char(rest[k]) || rest[k] == '/')) ++k;
      std::string_view repo = rest.substr(0, k);
      if (k < rest.size() && rest[k] == '#') {
        if (!repo.empty()) {
          if (std::count(repo.begin(), repo.end(), '/') != 1) continue;
          ref.repo = std::string(repo);
        }
        std::size_t d = k + 1;
        while (d < rest.size() && std::isdigit(static_cast<unsigned char>(rest[d]))) ++d;
        if (d > k + 1 && d - k - 1 < 10 && (d >= rest.size() || !detail::is_word(rest[d]))) {
          ref.number = std::stoi(std::string(rest.substr(k + 1, d - k - 1)));
        }
      }
    }
    if (ref.number > 0 && seen.insert(ref).second) out.push_back(ref);
  }
  return out;
}

/// The `rel="next"` target of an HTTP Link header, if any.
inline std::optional<std::string> next_page_link(std::string_view link_header) {
  for (auto part : text::split(link_header, ',')) {
    auto lt = part.find('<');
    auto gt = part.find('>');
    if (lt == std::string::npos || gt == std::string::npos || gt < lt) continue;
    if (part.find("rel=\"next\"") != std::string::npos) return part.substr(lt + 1, gt - lt - 1);
  }
  return std::nullopt;
}

/// Seconds to wait before the next request given rate-limit headers:
/// 0 while requests remain, else until the reset epoch (at least 1),
/// or Retry-After when present.
inline long rate_limit_wait(const std::map<std::string, std::string>& headers, long now_epoch) {
  auto get = [&](const std::string& key) -> std::optional<long> {
    for (const auto& [k, v] : headers) {
      if (text::to_lower(k) == text::to_lower(key)) {
        try {
          return std::stol(v);
        } catch (...) {
          return std::nullopt;
        }
      }
    }
    return std::nullopt;
  };
  if (auto retry = get("Retry-After")) return std::max(0L, *retry);
  auto remaining = get("X-RateLimit-Remaining");
  if (!remaining || *remaining > 0) return 0;
  auto reset = get("X-RateLimit-Reset");
  if (!reset) return 60;
  return std::max(1L, *reset - now_epoch);
}

struct HttpReply {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;
};

using HttpGet = std::function<HttpReply(const std::string& url)>;
using Sleeper = std::function<void(long seconds)>;

/// Follows Link pagination and honours rate limits; every page must be a
/// JSON array. The transport is injected so recorded replies can be replayed.
inline json fetch_all_pages(const std::string& first_url, const HttpGet& get, const Sleeper& sleep,
                            const std::function<long()>& now, std::size_t max_pages = 1000) {
  json all = json::array();
  std::optional<std::string> url = first_url;
  std::size_t pages = 0;
  while (url && pages < max_pages) {
    auto reply = get(*url);
    if (reply.status == 403 || reply.status == 429) {
      long wait = rate_limit_wait(reply.headers, now());
      if (wait <= 0) fail(ErrorKind::Backend, "forbidden without rate-limit headers: " + *url);
      sleep(wait);
      continue;
    }
    if (reply.status < 200 || reply.status >= 300) {
      fail(ErrorKind::Backend, "HTTP " + std::to_string(reply.status) + " for " + *url);
    }
    auto page = json::parse(reply.body, nullptr, false);
    if (!page.is_array()) fail(ErrorKind::Structural, "expected a JSON array from " + *url);
    for (auto& item : page) all.push_back(std::move(item));
    ++pages;
    url.reset();
    for (const auto& [k, v] : reply.headers) {
      if (text::to_lower(k) == "link") url = next_page_link(v);
    }
    if (long wait = rate_limit_wait(reply.headers, now()); wait > 0 && url) sleep(wait);
  }
  return all;
}

struct IngestOptions {
  std::string snapshot_ref_template = "{owner}__{name}/{sha}";
  bool require_merged = true;
};

struct IngestReport {
  std::vector<dataset::RawInstance> instances;
  std::size_t pull_requests = 0;
  std::size_t unmerged = 0;
  std::size_t without_issue = 0;
  std::size_t missing_issue = 0;
  std::size_t missing_diff = 0;
};

/// Joins recorded issues and merged PRs into raw instances. Events follow the
/// public event shape: {"type", "repo": {"name"}, "payload": {...}}; an
/// IssuesEvent carries payload.issue, a PullRequestEvent payload.pull_request
/// (with the unified diff under "diff", or looked up in `diffs` by
/// "<owner/repo>#<number>"). The first closing reference that resolves wins.
inline IngestReport ingest_events(const std::vector<json>& events, const std::map<std::string, std::string>& diffs = {},
                                  const IngestOptions& options = {}) {
  IngestReport report;
  std::map<IssueRef, json> issues;
  std::vector<std::pair<std::string, json>> pulls;
  for (const auto& ev : events) {
    auto type = ev.value("type", "");
    std::string repo = ev.contains("repo") ? ev["repo"].value("name", "") : "";
    const auto& payload = ev.contains("payload") ? ev["payload"] : json::object();
    if (type == "IssuesEvent" && payload.contains("issue")) {
      const auto& issue = payload["issue"];
      if (issue.contains("pull_request")) continue;
      issues[{repo, issue.value("number", 0)}] = issue;
    } else if (type == "PullRequestEvent" && payload.contains("pull_request")) {
      pulls.emplace_back(repo, payload["pull_request"]);
    }
  }
  std::set<std::string> emitted;
  for (const auto& [repo, pr] : pulls) {
    ++report.pull_requests;
    bool merged = pr.value("merged", false) || (pr.contains("merged_at") && !pr["merged_at"].is_null());
    if (options.require_merged && !merged) {
      ++report.unmerged;
      continue;
    }
    auto refs = closing_references(pr.value("body", std::string()) + "\n" + pr.value("title", std::string()), repo);
    if (refs.empty()) {
      ++report.without_issue;
      continue;
    }
    const json* issue = nullptr;
    for (const auto& ref : refs) {
      auto it = issues.find(ref);
      if (it != issues.end() && ref.repo == repo) {
        issue = &it->second;
        break;
      }
    }
    if (!issue) {
      ++report.missing_issue;
      continue;
    }
    int number = pr.value("number", 0);
    std::string diff_text = pr.value("diff", "");
    if (diff_text.empty()) {
      auto it = diffs.find(repo + "#" + std::to_string(number));
      if (it != diffs.end()) diff_text = it->second;
    }
    if (diff_text.empty()) {
      ++report.missing_diff;
      continue;
    }
    auto slash = repo.find('/');
    std::string owner = repo.substr(0, slash);
    std::string name = slash == std::string::npos ? repo : repo.substr(slash + 1);
    std::string sha = pr.contains("base") ? pr["base"].value("sha", "") : "";

    dataset::RawInstance r;
    r.instance_id = owner + "__" + name + "-" + std::to_string(number);
    if (!emitted.insert(r.instance_id).second) continue;
    r.repo_id = repo;
    std::string title = issue->value("title", "");
    std::string body = issue->contains("body") && (*issue)["body"].is_string() ? (*issue)["body"].get<std::string>() : "";
    r.issue_text = body.empty() ? title : title + "\n" + body;
    r.base_snapshot_ref = text::replace_all(
        text::replace_all(text::replace_all(options.snapshot_ref_template, "{owner}", owner), "{name}", name), "{sha}",
        sha);
    r.gold_patch_text = diff_text;
    report.instances.push_back(std::move(r));
  }
  std::sort(report.instances.begin(), report.instances.end(),
            [](const auto& a, const auto& b) { return a.instance_id < b.instance_id; });
  return report;
}

}  // namespace swefixer::github
