#pragma once

// Seeded randomized cases shared by the unit and acceptance suites. Each case
// drives the library and checks it against the independent oracles.

#include <cstdlib>
#include <set>
#include <sstream>
#include <string>

#include "support/oracles.hpp"
#include "swefixer/bm25.hpp"
#include "swefixer/edit_engine.hpp"
#include "swefixer/skeleton.hpp"

namespace cases {

enum class Outcome { Match, Mismatch, Skipped };

struct Result {
  Outcome outcome = Outcome::Match;
  std::string detail;    // what went wrong, for failure messages
  std::string artifact;  // deterministic output, for rerun comparison
};

// ---- BM25 --------------------------------------------------------------------

inline std::vector<std::pair<std::string, std::string>> random_corpus(oracle::Rng& rng, int n, int max_tokens) {
  static const std::vector<std::string> vocab = {"parse", "url",   "http", "error", "render", "cache",
                                                 "user",  "name",  "query", "index", "token",  "file",
                                                 "path",  "model", "edit",  "skip",  "wrap",   "load"};
  std::vector<std::pair<std::string, std::string>> docs;
  for (int i = 0; i < n; ++i) {
    std::string t;
    int len = rng.range(1, max_tokens);
    for (int w = 0; w < len; ++w) t += rng.pick(vocab) + " ";
    docs.push_back({"f" + std::to_string(i) + ".py", t});
  }
  return docs;
}

/// Scores every document against the brute-force formula and compares top_k
/// with score-all-then-sort.
inline Result bm25_case(std::uint64_t seed, int max_docs = 50, int max_tokens = 200) {
  using namespace swefixer;
  Result r;
  oracle::Rng rng(seed);
  auto docs = random_corpus(rng, rng.range(1, max_docs), max_tokens);
  auto query_words = random_corpus(rng, 1, 6)[0].second;
  auto idx = bm25::Index::build(docs);
  std::vector<std::vector<std::string>> toks;
  for (const auto& d : docs) toks.push_back(bm25::tokenize(d.second));
  auto q = bm25::tokenize(query_words);
  std::vector<std::pair<double, std::string>> expected;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    double want = oracle::bm25(toks, q, d);
    double got = idx.score(q, idx.doc_id(docs[d].first));
    if (std::abs(want - got) > 1e-9) {
      r.outcome = Outcome::Mismatch;
      r.detail = "seed " + std::to_string(seed) + ": score of " + docs[d].first + " is " + std::to_string(got) +
                 ", expected " + std::to_string(want);
      return r;
    }
    expected.push_back({want, docs[d].first});
  }
  std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  auto k = static_cast<std::size_t>(rng.range(1, 40));
  auto got = idx.top_k(query_words, k);
  if (got.size() != std::min(k, docs.size())) {
    r.outcome = Outcome::Mismatch;
    r.detail = "seed " + std::to_string(seed) + ": top_k size";
    return r;
  }
  std::ostringstream art;
  art.precision(17);
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (got[i].path != expected[i].second) {
      r.outcome = Outcome::Mismatch;
      r.detail = "seed " + std::to_string(seed) + ": rank " + std::to_string(i) + " is " + got[i].path + ", expected " +
                 expected[i].second;
      return r;
    }
    art << got[i].path << ' ' << got[i].score << '\n';
  }
  r.artifact = art.str();
  return r;
}

// ---- skeletons ------------------------------------------------------------------

/// A generated module with functions of 1..25 body lines (all lines distinct)
/// and a class; no line strictly inside a >10-line body may appear.
inline Result skeleton_leak_case(std::uint64_t seed) {
  using namespace swefixer;
  Result r;
  oracle::Rng rng(seed);
  std::string src = "\"\"\"Module.\"\"\"\nimport os\n\n";
  std::set<std::string> interior;
  int nfun = rng.range(1, 4);
  for (int f = 0; f < nfun; ++f) {
    std::string name = "f" + std::to_string(f);
    int n = rng.range(1, 25);
    bool decorated = rng.chance(0.3);
    if (decorated) src += "@cache\n";
    src += "def " + name + "(a, b):\n";
    std::vector<std::string> body;
    for (int i = 0; i < n; ++i) {
      body.push_back("    v_" + name + "_" + std::to_string(i) + " = " + std::to_string(rng.below(100)));
      src += body.back() + "\n";
    }
    src += "\n";
    if (n > 10) {
      for (int i = 5; i < n - 5; ++i) interior.insert(body[static_cast<std::size_t>(i)]);
    }
  }
  src += "class K:\n    def m(self):\n        hidden_method_line = 1\n";
  interior.insert("        hidden_method_line = 1");
  auto d = extract_skeleton(FileRecord::make("p.py", src));
  if (d.fallback) {
    r.outcome = Outcome::Mismatch;
    r.detail = "seed " + std::to_string(seed) + ": unexpected fallback";
    return r;
  }
  for (const auto& line : text::to_lines(d.rendered).lines) {
    if (interior.count(line)) {
      r.outcome = Outcome::Mismatch;
      r.detail = "seed " + std::to_string(seed) + ": leaked " + line;
      return r;
    }
  }
  r.artifact = d.rendered;
  return r;
}

// ---- edit round trips ------------------------------------------------------------

/// Round trip A: random line-span edits on a random file. The expected result
/// comes from string surgery; the emitted patch is applied by the oracle.
inline Result roundtrip_a_case(std::uint64_t seed) {
  using namespace swefixer;
  Result r;
  oracle::Rng rng(seed);
  auto lines = oracle::random_lines(rng, 1, 50);
  bool final_nl = rng.chance(0.85);
  auto before = oracle::join_lines(lines, final_nl);
  std::map<std::string, std::string> tree = {{"m.py", before}, {"z.py", "keep\n"}};
  auto s = RepoSnapshot::from_map("r", tree);

  StructuredEdit edit;
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // [start, end) 0-based
  std::size_t cursor = 0;
  while (cursor < lines.size() && spans.size() < 4) {
    std::size_t start = cursor + rng.below(8);
    if (start >= lines.size()) break;
    std::size_t end = std::min(lines.size(), start + 1 + rng.below(4));
    spans.push_back({start, end});
    cursor = end + rng.below(3);
  }
  if (spans.empty()) spans.push_back({0, 1});
  std::vector<std::vector<std::string>> replacements;
  for (auto [a, b] : spans) {
    std::vector<std::string> pre(lines.begin() + static_cast<std::ptrdiff_t>(a),
                                 lines.begin() + static_cast<std::ptrdiff_t>(b));
    std::vector<std::string> repl;
    if (!rng.chance(0.15)) {
      repl = oracle::random_lines(rng, 1, 4);
      if (repl.size() == 1 && repl[0].empty()) repl[0] = "pass";
    }
    replacements.push_back(repl);
    edit.edits.push_back({"m.py", render_numbered(static_cast<int>(a) + 1, pre), oracle::join_lines(repl, false)});
  }
  auto expected_lines = lines;
  for (std::size_t i = spans.size(); i-- > 0;) {
    auto [a, b] = spans[i];
    expected_lines.erase(expected_lines.begin() + static_cast<std::ptrdiff_t>(a),
                         expected_lines.begin() + static_cast<std::ptrdiff_t>(b));
    expected_lines.insert(expected_lines.begin() + static_cast<std::ptrdiff_t>(a), replacements[i].begin(),
                          replacements[i].end());
  }
  auto expected = oracle::join_lines(expected_lines, final_nl);

  auto fail = [&](std::string why) {
    r.outcome = Outcome::Mismatch;
    r.detail = "seed " + std::to_string(seed) + ": " + why;
    return r;
  };
  RepoSnapshot applied;
  try {
    applied = apply_edits(s, edit);
  } catch (const Error& e) {
    return fail(std::string("apply_edits threw ") + e.what());
  }
  if (applied.at("m.py").content != expected) return fail("edited file differs from string surgery");
  if (applied.at("z.py").content != "keep\n") return fail("untouched file changed");
  r.artifact = diff::render(to_unified_patch(s, applied));
  if (expected == before) {
    if (!r.artifact.empty()) return fail("no-op edit produced a patch");
    return r;
  }
  try {
    if (oracle::apply(tree, r.artifact)["m.py"] != expected) return fail("oracle-applied patch differs\n" + r.artifact);
  } catch (const std::exception& e) {
    return fail(std::string("oracle rejected patch: ") + e.what() + "\n" + r.artifact);
  }
  return r;
}

/// Round trip B: a GNU `diff -U3` patch between random versions is turned
/// into structured edits, which must reproduce the oracle-applied result.
/// Patches whose hunk post-image is a lone blank line cannot be anchored and
/// count as skipped.
inline Result roundtrip_b_case(std::uint64_t seed, const std::filesystem::path& scratch) {
  using namespace swefixer;
  Result r;
  oracle::Rng rng(seed);
  bool final_nl = rng.chance(0.85);
  auto before_lines = oracle::random_lines(rng, 4, 60);
  auto after_lines = before_lines;
  int changes = rng.range(1, 4);
  for (int c = 0; c < changes; ++c) {
    std::size_t pos = rng.below(after_lines.size() + 1);
    int op = static_cast<int>(rng.below(3));
    if (op == 0) {
      after_lines.insert(after_lines.begin() + static_cast<std::ptrdiff_t>(pos), oracle::random_line(rng));
    } else if (pos < after_lines.size() && after_lines.size() > 1 && op == 1) {
      after_lines.erase(after_lines.begin() + static_cast<std::ptrdiff_t>(pos));
    } else if (pos < after_lines.size()) {
      after_lines[pos] = oracle::random_line(rng);
    }
  }
  // A trailing "" joined without a newline would read back as a newline flip.
  for (auto* v : {&before_lines, &after_lines}) {
    if (!final_nl && v->back().empty()) v->back() = "pass";
  }
  if (before_lines == after_lines) after_lines.push_back("tail_line = 0");
  auto before = oracle::join_lines(before_lines, final_nl);
  auto after = oracle::join_lines(after_lines, final_nl);

  auto fail = [&](std::string why) {
    r.outcome = Outcome::Mismatch;
    r.detail = "seed " + std::to_string(seed) + ": " + why;
    return r;
  };
  oracle::write_tree(scratch, {{"a/m.py", before}, {"b/m.py", after}});
  std::string cmd = "cd '" + scratch.string() + "' && diff -U3 a/m.py b/m.py > p.diff";
  if (std::system(cmd.c_str()) >> 8 != 1) return fail("diff did not report a difference");
  auto patch_text = oracle::read_text(scratch / "p.diff");
  auto expected = oracle::apply({{"m.py", before}}, patch_text)["m.py"];
  if (expected != after) return fail("oracle applier disagrees with diff");

  auto s = RepoSnapshot::from_map("r", {{"m.py", before}});
  StructuredEdit edit;
  try {
    edit = gold_patch_to_structured_edit(s, diff::parse_unified_patch(patch_text));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Apply && std::string(e.what()).find("single blank line") != std::string::npos) {
      r.outcome = Outcome::Skipped;
      r.artifact = "skipped\n";
      return r;
    }
    return fail(std::string("conversion threw ") + e.what() + "\n" + patch_text);
  }
  std::string got;
  try {
    got = apply_edits(s, edit).at("m.py").content;
  } catch (const Error& e) {
    return fail(std::string("apply_edits threw ") + e.what() + "\n" + patch_text);
  }
  if (got != expected) return fail("structured edits do not reproduce the patch\n" + patch_text);
  r.artifact = serialize_structured_edit(edit);
  return r;
}

}  // namespace cases
