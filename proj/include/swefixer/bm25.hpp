#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "swefixer/error.hpp"

namespace swefixer::bm25 {

struct Params {
  double k1 = 1.2;
  double b = 0.75;
};

inline constexpr std::size_t kDefaultTopK = 30;

namespace detail {

inline bool is_alnum(unsigned char c) { return std::isalnum(c) != 0; }
inline bool is_upper(unsigned char c) { return std::isupper(c) != 0; }
inline bool is_lower(unsigned char c) { return std::islower(c) != 0; }
inline bool is_digit(unsigned char c) { return std::isdigit(c) != 0; }

// Splits one alphanumeric run at camel humps: aB -> a|B, 1B -> 1|B, ABc -> A|Bc.
inline void split_camel(std::string_view run, std::vector<std::string>& out) {
  std::size_t start = 0;
  for (std::size_t i = 1; i < run.size(); ++i) {
    auto prev = static_cast<unsigned char>(run[i - 1]);
    auto cur = static_cast<unsigned char>(run[i]);
    bool boundary = (is_upper(cur) && (is_lower(prev) || is_digit(prev))) ||
                    (is_upper(prev) && is_upper(cur) && i + 1 < run.size() &&
                     is_lower(static_cast<unsigned char>(run[i + 1])));
    if (boundary) {
      out.emplace_back(run.substr(start, i - start));
      start = i;
    }
  }
  out.emplace_back(run.substr(start));
}

}  // namespace detail

/// Lowercased alphanumeric tokens, split at underscores and camel humps.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !detail::is_alnum(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && detail::is_alnum(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) detail::split_camel(text.substr(start, i - start), out);
  }
  for (auto& tok : out) {
    for (auto& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  std::erase_if(out, [](const std::string& t) { return t.empty(); });
  return out;
}

struct Posting {
  std::uint32_t doc = 0;
  std::uint32_t tf = 0;
  bool operator==(const Posting&) const = default;
};

struct ScoredDoc {
  std::string path;
  double score = 0.0;
};

/// Non-negative Okapi IDF: ln(1 + (N - df + 0.5) / (df + 0.5)).
inline double idf(std::size_t doc_count, std::size_t doc_freq) {
  double n = static_cast<double>(doc_count);
  double df = static_cast<double>(doc_freq);
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

/// Saturated term-frequency component of one query term.
inline double term_weight(double idf_value, double tf, double doc_len, double avg_doc_len, const Params& p) {
  if (tf <= 0.0) return 0.0;
  double norm = avg_doc_len > 0.0 ? doc_len / avg_doc_len : 0.0;
  return idf_value * (tf * (p.k1 + 1.0)) / (tf + p.k1 * (1.0 - p.b + p.b * norm));
}

/// Immutable inverted index. Document ids follow lexicographic path order, so
/// the input order of documents does not affect any result.
class Index {
 public:
  static constexpr std::string_view kFormat = "swefixer-bm25-index";
  static constexpr int kVersion = 1;

  Index() = default;

  static Index build(std::vector<std::pair<std::string, std::string>> docs, Params params = {}) {
    std::sort(docs.begin(), docs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < docs.size(); ++i) {
      if (docs[i].first == docs[i - 1].first) fail(ErrorKind::Structural, "duplicate document path: " + docs[i].first);
    }
    Index index;
    index.params_ = params;
    std::uint64_t total = 0;
    for (std::uint32_t id = 0; id < docs.size(); ++id) {
      auto tokens = tokenize(docs[id].second);
      std::map<std::string, std::uint32_t> counts;
      for (auto& t : tokens) ++counts[t];
      for (auto& [term, tf] : counts) index.postings_[term].push_back({id, tf});
      index.doc_lens_.push_back(static_cast<std::uint32_t>(tokens.size()));
      index.doc_paths_.push_back(docs[id].first);
      total += tokens.size();
    }
    index.avg_doc_len_ = docs.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs.size());
    return index;
  }

  std::size_t doc_count() const { return doc_lens_.size(); }
  double avg_doc_len() const { return avg_doc_len_; }
  const Params& params() const { return params_; }
  const std::map<std::string, std::vector<Posting>>& postings() const { return postings_; }
  const std::vector<std::uint32_t>& doc_lens() const { return doc_lens_; }
  const std::vector<std::string>& doc_paths() const { return doc_paths_; }

  std::uint32_t doc_id(std::string_view path) const {
    auto it = std::lower_bound(doc_paths_.begin(), doc_paths_.end(), path);
    if (it == doc_paths_.end() || *it != path) fail(ErrorKind::Lookup, "unknown document: " + std::string(path));
    return static_cast<std::uint32_t>(it - doc_paths_.begin());
  }

  std::size_t doc_freq(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
  }

  std::uint32_t term_frequency(const std::string& term, std::uint32_t doc) const {
    auto it = postings_.find(term);
    if (it == postings_.end()) return 0;
    auto p = std::lower_bound(it->second.begin(), it->second.end(), doc,
                              [](const Posting& post, std::uint32_t d) { return post.doc < d; });
    return p != it->second.end() && p->doc == doc ? p->tf : 0;
  }

  /// Sum over unique query terms of IDF times the saturated tf component.
  double score(const std::vector<std::string>& query_tokens, std::uint32_t doc) const {
    if (doc >= doc_count()) fail(ErrorKind::Lookup, "unknown document id " + std::to_string(doc));
    std::set<std::string> terms(query_tokens.begin(), query_tokens.end());
    return score_terms(terms, doc);
  }

  /// The k best documents, descending by score, ties by path. Zero-score
  /// documents only appear when fewer than k documents match.
  std::vector<ScoredDoc> top_k(std::string_view query, std::size_t k = kDefaultTopK) const {
    auto tokens = tokenize(query);
    std::set<std::string> terms(tokens.begin(), tokens.end());
    std::vector<double> scores(doc_count(), 0.0);
    std::set<std::uint32_t> candidates;
    for (const auto& t : terms) {
      auto it = postings_.find(t);
      if (it == postings_.end()) continue;
      for (const auto& p : it->second) candidates.insert(p.doc);
    }
    for (auto d : candidates) scores[d] = score_terms(terms, d);

    std::vector<std::uint32_t> order(doc_count());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    auto better = [&](std::uint32_t a, std::uint32_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return doc_paths_[a] < doc_paths_[b];
    };
    std::size_t n = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(), better);
    std::vector<ScoredDoc> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back({doc_paths_[order[i]], scores[order[i]]});
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json postings = nlohmann::json::object();
    for (const auto& [term, list] : postings_) {
      auto arr = nlohmann::json::array();
      for (const auto& p : list) arr.push_back({p.doc, p.tf});
      postings[term] = std::move(arr);
    }
    return {{"format", kFormat},
            {"version", kVersion},
            {"params", {{"k1", params_.k1}, {"b", params_.b}}},
            {"doc_paths", doc_paths_},
            {"doc_lens", doc_lens_},
            {"postings", std::move(postings)}};
  }

  static Index from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("format", "") != kFormat) fail(ErrorKind::Structural, "not a BM25 index artifact");
    if (j.value("version", 0) != kVersion) {
      fail(ErrorKind::Structural, "unsupported BM25 index version " + std::to_string(j.value("version", 0)));
    }
    Index index;
    index.params_.k1 = j.at("params").at("k1").get<double>();
    index.params_.b = j.at("params").at("b").get<double>();
    index.doc_paths_ = j.at("doc_paths").get<std::vector<std::string>>();
    index.doc_lens_ = j.at("doc_lens").get<std::vector<std::uint32_t>>();
    if (index.doc_paths_.size() != index.doc_lens_.size()) fail(ErrorKind::Structural, "index doc tables disagree");
    std::uint64_t total = 0;
    for (auto l : index.doc_lens_) total += l;
    index.avg_doc_len_ =
        index.doc_lens_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(index.doc_lens_.size());
    for (const auto& [term, arr] : j.at("postings").items()) {
      auto& list = index.postings_[term];
      for (const auto& p : arr) {
        Posting post{p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()};
        if (post.doc >= index.doc_lens_.size()) fail(ErrorKind::Structural, "posting refers to unknown document");
        list.push_back(post);
      }
    }
    return index;
  }

 private:
  double score_terms(const std::set<std::string>& terms, std::uint32_t doc) const {
    double total = 0.0;
    for (const auto& t : terms) {
      auto tf = term_frequency(t, doc);
      if (tf == 0) continue;
      total += term_weight(idf(doc_count(), doc_freq(t)), tf, doc_lens_[doc], avg_doc_len_, params_);
    }
    return total;
  }

  Params params_;
  std::map<std::string, std::vector<Posting>> postings_;
  std::vector<std::uint32_t> doc_lens_;
  std::vector<std::string> doc_paths_;
  double avg_doc_len_ = 0.0;
};

}  // namespace swefixer::bm25
