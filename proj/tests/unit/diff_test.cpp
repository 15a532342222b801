#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "swefixer/diff.hpp"

using namespace swefixer;

namespace {

std::string numbered_file(int n) {
  std::string out;
  for (int i = 1; i <= n; ++i) out += "line " + std::to_string(i) + "\n";
  return out;
}

diff::UnifiedPatch patch_of(const std::string& path, const std::string& before, const std::string& after) {
  diff::UnifiedPatch p;
  auto f = diff::make_file_diff(path, before, after);
  if (!f.hunks.empty()) p.files.push_back(f);
  return p;
}

// Minimum edit count from an LCS table over terminator-preserving segments.
std::size_t min_edits(const std::string& a, const std::string& b) {
  auto x = oracle::segments(a), y = oracle::segments(b);
  std::vector<std::vector<std::size_t>> t(x.size() + 1, std::vector<std::size_t>(y.size() + 1, 0));
  for (std::size_t i = x.size(); i-- > 0;) {
    for (std::size_t j = y.size(); j-- > 0;) {
      t[i][j] = x[i] == y[j] ? t[i + 1][j + 1] + 1 : std::max(t[i + 1][j], t[i][j + 1]);
    }
  }
  return x.size() + y.size() - 2 * t[0][0];
}

std::string mutate(oracle::Rng& rng, const std::string& before, bool keep_final_newline) {
  auto lines = text::to_lines(before);
  int edits = rng.range(1, 4);
  for (int e = 0; e < edits; ++e) {
    std::size_t pos = rng.below(lines.lines.size() + 1);
    switch (rng.below(3)) {
      case 0:
        lines.lines.insert(lines.lines.begin() + static_cast<std::ptrdiff_t>(pos), oracle::random_line(rng));
        break;
      case 1:
        if (pos < lines.lines.size()) lines.lines.erase(lines.lines.begin() + static_cast<std::ptrdiff_t>(pos));
        break;
      default:
        if (pos < lines.lines.size()) lines.lines[pos] = oracle::random_line(rng);
    }
  }
  if (!keep_final_newline) lines.final_newline = !lines.final_newline;
  if (lines.lines.empty()) lines.lines.push_back("x = 0");
  return lines.str();
}

ErrorKind parse_error_kind(const std::string& text) {
  try {
    diff::parse_unified_patch(text);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

}  // namespace

TEST(Myers, IdenticalInputsAreAllEqual) {
  auto ops = diff::myers({1, 2, 3}, {1, 2, 3});
  ASSERT_EQ(ops.size(), 3u);
  for (const auto& op : ops) EXPECT_EQ(op.kind, diff::OpKind::Equal);
}

TEST(UnifiedDiff, IdenticalIsEmpty) {
  EXPECT_TRUE(diff::make_file_diff("a.py", "x\n", "x\n").hunks.empty());
  EXPECT_TRUE(diff::parse_unified_patch("").empty());
}

TEST(UnifiedDiff, SingleChangeHasSevenLineHunk) {
  auto before = numbered_file(10);
  auto after = before;
  after.replace(after.find("line 5\n"), 7, "line five\n");
  auto f = diff::make_file_diff("a.py", before, after);
  ASSERT_EQ(f.hunks.size(), 1u);
  EXPECT_EQ(diff::render_hunk_header(f.hunks[0]), "@@ -2,7 +2,7 @@");
  // GNU diff as the independent implementation.
  auto dir = oracle::temp_dir("difftest");
  oracle::write_tree(dir, {{"a", before}, {"b", after}});
  std::string cmd = "cd '" + dir.string() + "' && diff -U3 a b > out.txt";
  ASSERT_EQ(std::system(cmd.c_str()) >> 8, 1);
  auto gnu = oracle::read_text(dir / "out.txt");
  std::filesystem::remove_all(dir);
  EXPECT_NE(gnu.find("@@ -2,7 +2,7 @@\n"), std::string::npos);
}

TEST(UnifiedDiff, NearbyChangesMergeDistantSplit) {
  auto before = numbered_file(40);
  auto edit = [&](std::vector<int> which) {
    auto lines = text::to_lines(before);
    for (int w : which) lines.lines[static_cast<std::size_t>(w - 1)] += " changed";
    return lines.str();
  };
  EXPECT_EQ(diff::make_file_diff("a", before, edit({10, 16})).hunks.size(), 1u);  // gap of 5
  EXPECT_EQ(diff::make_file_diff("a", before, edit({10, 17})).hunks.size(), 1u);  // gap of 6
  EXPECT_EQ(diff::make_file_diff("a", before, edit({10, 18})).hunks.size(), 2u);  // gap of 7
}

TEST(UnifiedDiff, MultiHunkAppliesWithGnuPatch) {
  auto before = numbered_file(60);
  auto lines = text::to_lines(before);
  lines.lines[4] = "changed 5";
  lines.lines.insert(lines.lines.begin() + 30, "inserted after 30");
  lines.lines.erase(lines.lines.begin() + 55);
  auto after = lines.str();
  std::map<std::string, std::string> tree = {{"pkg/mod.py", before}, {"other.py", "a\nb\nc"}};
  diff::UnifiedPatch p;
  p.files.push_back(diff::make_file_diff("pkg/mod.py", before, after));
  p.files.push_back(diff::make_file_diff("other.py", "a\nb\nc", "a\nB\nc"));
  EXPECT_EQ(p.files[0].hunks.size(), 3u);
  auto text = diff::render(p);
  EXPECT_NE(text.find("\\ No newline at end of file"), std::string::npos);
  auto patched = oracle::gnu_patch(tree, text);
  ASSERT_TRUE(patched);
  EXPECT_EQ((*patched)["pkg/mod.py"], after);
  EXPECT_EQ((*patched)["other.py"], "a\nB\nc");
}

TEST(UnifiedDiff, NewlineFlipsAtEndOfFile) {
  for (auto [before, after] : std::vector<std::pair<std::string, std::string>>{
           {"a\nb\n", "a\nb"}, {"a\nb", "a\nb\n"}, {"a\nb", "a\nc"}, {"a", "a\nb\n"}}) {
    auto text = diff::render(patch_of("f.txt", before, after));
    auto patched = oracle::gnu_patch({{"f.txt", before}}, text);
    ASSERT_TRUE(patched) << text;
    EXPECT_EQ((*patched)["f.txt"], after) << text;
    EXPECT_EQ(diff::apply_file_diff(before, diff::parse_unified_patch(text).files.at(0)), after);
  }
}

TEST(UnifiedDiff, RandomPatchesReproduceTarget) {
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    oracle::Rng rng(seed);
    auto before = oracle::join_lines(oracle::random_lines(rng, 1, 40), rng.chance(0.8));
    auto after = mutate(rng, before, rng.chance(0.8));
    if (before == after) continue;
    auto p = patch_of("m.py", before, after);
    auto text = diff::render(p);
    auto via_oracle = oracle::apply({{"m.py", before}}, text);
    EXPECT_EQ(via_oracle["m.py"], after) << "seed " << seed << "\n" << text;
    EXPECT_EQ(p.files[0].added() + p.files[0].removed(), min_edits(before, after)) << seed;
    for (std::size_t h = 1; h < p.files[0].hunks.size(); ++h) {
      EXPECT_GT(p.files[0].hunks[h].old_start, p.files[0].hunks[h - 1].old_start + p.files[0].hunks[h - 1].old_count);
    }
    auto reparsed = diff::parse_unified_patch(text);
    EXPECT_EQ(diff::render(reparsed), text);
    if (seed % 5 == 0) {
      auto gnu = oracle::gnu_patch({{"m.py", before}}, text);
      ASSERT_TRUE(gnu) << seed;
      EXPECT_EQ((*gnu)["m.py"], after) << seed;
    }
  }
}

TEST(PatchParser, TwoFileGoldenHandCounts) {
  const std::string text =
      "diff --git a/src/core.py b/src/core.py\n"
      "index 1111111..2222222 100644\n"
      "--- a/src/core.py\n"
      "+++ b/src/core.py\n"
      "@@ -1,4 +1,5 @@ def head():\n"
      " import os\n"
      "+import sys\n"
      " \n"
      " def f():\n"
      "     return 1\n"
      "@@ -20,2 +21,2 @@ class C:\n"
      "     x = 1\n"
      "-    y = 2\n"
      "+    y = 3\n"
      "diff --git a/tests/test_core.py b/tests/test_core.py\n"
      "--- a/tests/test_core.py\t2020-01-01 00:00:00\n"
      "+++ b/tests/test_core.py\t2020-01-01 00:00:00\n"
      "@@ -5 +5,2 @@\n"
      "-old\n"
      "+new\n"
      "+newer\n";
  auto p = diff::parse_unified_patch(text);
  ASSERT_EQ(p.files.size(), 2u);
  EXPECT_EQ(p.files[0].path(), "src/core.py");
  EXPECT_EQ(p.files[0].hunks.size(), 2u);
  EXPECT_EQ(p.files[0].added(), 2u);
  EXPECT_EQ(p.files[0].removed(), 1u);
  EXPECT_EQ(p.files[0].hunks[0].section, "def head():");
  EXPECT_EQ(p.files[1].path(), "tests/test_core.py");
  EXPECT_EQ(p.files[1].hunks.size(), 1u);
  EXPECT_EQ(p.files[1].added(), 2u);
  EXPECT_EQ(p.files[1].removed(), 1u);
}

TEST(PatchParser, SpecialHeaders) {
  auto p = diff::parse_unified_patch(
      "diff --git a/new.py b/new.py\n"
      "new file mode 100644\n"
      "--- /dev/null\n"
      "+++ b/new.py\n"
      "@@ -0,0 +1 @@\n"
      "+x = 1\n"
      "diff --git a/img.png b/img.png\n"
      "Binary files a/img.png and b/img.png differ\n"
      "diff --git \"a/sp ace.py\" \"b/sp ace.py\"\n"
      "--- \"a/sp ace.py\"\n"
      "+++ \"b/sp ace.py\"\n"
      "@@ -1 +1 @@\n"
      "-a\n"
      "+b\n");
  ASSERT_EQ(p.files.size(), 3u);
  EXPECT_TRUE(p.files[0].is_new);
  EXPECT_TRUE(p.files[1].is_binary);
  EXPECT_EQ(p.files[2].path(), "sp ace.py");
}

TEST(PatchParser, InconsistentCountsAreParseErrors) {
  const std::string head = "--- a/f.py\n+++ b/f.py\n";
  EXPECT_EQ(parse_error_kind(head + "@@ -1,5 +1,5 @@\n a\n b\n c\n d\n"), ErrorKind::Parse);
  EXPECT_EQ(parse_error_kind(head + "@@ -1,2 +1,2 @@\n a\n b\n c\n"), ErrorKind::Parse);
  EXPECT_EQ(parse_error_kind(head + "@@ -x +1 @@\n a\n"), ErrorKind::Parse);
  EXPECT_EQ(parse_error_kind(head + "@@ -5 +5 @@\n-a\n+b\n@@ -3 +3 @@\n-c\n+d\n"), ErrorKind::Parse);
}

TEST(PatchApply, ContextMismatchIsApplyError) {
  auto p = diff::parse_unified_patch("--- a/f\n+++ b/f\n@@ -1,2 +1,2 @@\n a\n-b\n+c\n");
  EXPECT_EQ(diff::apply_file_diff("a\nb\n", p.files[0]), "a\nc\n");
  try {
    diff::apply_file_diff("a\nzzz\n", p.files[0]);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Apply);
  }
}
