#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "support/cases.hpp"
#include "support/oracles.hpp"
#include "swefixer/skeleton.hpp"

using namespace swefixer;
namespace fs = std::filesystem;

namespace {

FileDoc doc_for(const std::string& path, const std::string& content) {
  return extract_skeleton(FileRecord::make(path, content));
}

// A function whose body lines are all distinct, for line-set checks.
std::string long_function(const std::string& name, int body_lines, oracle::Rng& rng) {
  std::string out = "def " + name + "(a, b):\n";
  for (int i = 0; i < body_lines; ++i) {
    out += "    v_" + name + "_" + std::to_string(i) + " = " + std::to_string(rng.below(100)) + "\n";
  }
  return out;
}

}  // namespace

TEST(Skeleton, EmptyDocRendersPathOnly) {
  FileDoc d;
  d.path = "a.py";
  EXPECT_EQ(render_skeleton(d), "a.py\n");
  EXPECT_EQ(doc_for("a.py", "").rendered, "a.py\n");
}

TEST(Skeleton, ModuleDocstringOnly) {
  auto d = doc_for("u.py", "\"\"\"Utils.\"\"\"\n");
  ASSERT_TRUE(d.module_docstring);
  EXPECT_EQ(d.rendered, "u.py\n\n\"\"\"Utils.\"\"\"\n");
}

TEST(Skeleton, ShortFunctionKeptWhole) {
  auto d = doc_for("f.py", "def f(x):\n    a = 1\n    b = 2\n    c = 3\n    return a\n");
  ASSERT_EQ(d.items.size(), 1u);
  EXPECT_EQ(d.items[0].kind, DocItemKind::Function);
  EXPECT_FALSE(d.items[0].elided);
  EXPECT_EQ(d.items[0].body_head.size(), 4u);
  EXPECT_TRUE(d.items[0].body_tail.empty());
}

TEST(Skeleton, MethodsAreSignaturesOnly) {
  auto d = doc_for("c.py", "class A:\n    \"\"\"An A.\"\"\"\n    def m(self, x):\n        return x\n");
  ASSERT_EQ(d.items.size(), 2u);
  EXPECT_EQ(d.items[0].kind, DocItemKind::Class);
  EXPECT_EQ(d.items[0].docstring.value_or(""), "An A.");
  EXPECT_EQ(d.items[1].kind, DocItemKind::Method);
  EXPECT_EQ(d.items[1].signature, "def m(self, x):");
  EXPECT_TRUE(d.items[1].body_head.empty());
  EXPECT_TRUE(d.items[1].body_tail.empty());
}

TEST(Skeleton, ThirtyLineBodyElided) {
  oracle::Rng rng(3);
  auto src = long_function("big", 30, rng);
  auto d = doc_for("big.py", src);
  ASSERT_EQ(d.items.size(), 1u);
  const auto& item = d.items[0];
  EXPECT_TRUE(item.elided);
  auto body = text::to_lines(src).lines;
  body.erase(body.begin());
  EXPECT_EQ(item.body_head, std::vector<std::string>(body.begin(), body.begin() + 5));
  EXPECT_EQ(item.body_tail, std::vector<std::string>(body.end() - 5, body.end()));
  EXPECT_NE(d.rendered.find("    ...\n"), std::string::npos);
}

TEST(Skeleton, ParseFailureFallsBackToTwentyLines) {
  std::string src = "def broken(:\n";
  for (int i = 0; i < 30; ++i) src += "x" + std::to_string(i) + " = 1\n";
  auto d = doc_for("bad.py", src);
  EXPECT_TRUE(d.fallback);
  EXPECT_EQ(d.raw_head.size(), 20u);
  EXPECT_EQ(d.rendered.rfind("bad.py\n", 0), 0u);
}

TEST(Skeleton, GoldenFixtures) {
  fs::path dir = fs::path(SWEFIXER_FIXTURES) / "skeleton";
  int checked = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".py") continue;
    auto golden = entry.path();
    golden.replace_extension(".golden");
    auto name = entry.path().filename().string();
    auto d = doc_for(name, oracle::read_text(entry.path()));
    EXPECT_EQ(d.rendered, oracle::read_text(golden)) << name;
    ++checked;
  }
  EXPECT_EQ(checked, 6);
}

TEST(Skeleton, NoInteriorLinesLeakProperty) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto r = cases::skeleton_leak_case(seed);
    EXPECT_EQ(r.outcome, cases::Outcome::Match) << r.detail;
    EXPECT_EQ(cases::skeleton_leak_case(seed).artifact, r.artifact);
  }
}
