#include <gtest/gtest.h>

#include <regex>

#include "support/oracles.hpp"
#include "swefixer/task_codec.hpp"

using namespace swefixer;
using nlohmann::json;

namespace {

FileDoc make_doc(const std::string& path, std::size_t bytes) {
  FileDoc d;
  d.path = path;
  d.rendered = path + "\n" + std::string(bytes, 'x') + "\n";
  return d;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Io;
}

}  // namespace

TEST(EstimateTokens, BytesOverFour) {
  EXPECT_EQ(estimate_tokens(""), 0u);
  EXPECT_EQ(estimate_tokens("12345678"), 2u);
  EXPECT_EQ(estimate_tokens("123456789"), 3u);
  std::string big(10240 + 3, 'q');
  EXPECT_EQ(estimate_tokens(big), (big.size() + 3) / 4);
}

TEST(RetrievalInput, IssueOnly) {
  auto t = build_retrieval_input("crash on start", std::nullopt, {}, ContextBudget{});
  EXPECT_EQ(t.included_docs, 0u);
  EXPECT_EQ(t.input_object["input"]["issue"], "crash on start");
  EXPECT_FALSE(t.input_object["input"].contains("readme"));
  EXPECT_EQ(kind_of([] { build_retrieval_input("  ", std::nullopt, {}, ContextBudget{}); }), ErrorKind::Validation);
}

TEST(RetrievalInput, ThirtyTinyDocsInRankOrder) {
  std::vector<FileDoc> docs;
  for (int i = 0; i < 30; ++i) docs.push_back(make_doc("m" + std::to_string(29 - i) + ".py", 10));
  auto t = build_retrieval_input("issue", std::string("readme"), docs, ContextBudget{});
  EXPECT_EQ(t.included_docs, 30u);
  const auto& listed = t.input_object["input"]["file_documentations"];
  for (int i = 0; i < 30; ++i) EXPECT_EQ(listed[static_cast<std::size_t>(i)]["path"], docs[static_cast<std::size_t>(i)].path);
  EXPECT_EQ(t.input_object["input"]["readme"], "readme");
  RetrievalInputOptions no_readme{false};
  EXPECT_FALSE(build_retrieval_input("issue", std::string("r"), docs, ContextBudget{}, no_readme)
                   .input_object["input"]
                   .contains("readme"));
}

TEST(RetrievalInput, BoundaryMatchesPrefixSum) {
  std::vector<FileDoc> docs;
  for (int i = 0; i < 12; ++i) docs.push_back(make_doc("d" + std::to_string(i) + ".py", 400));
  auto base = build_retrieval_input("issue", std::nullopt, {}, ContextBudget{});
  std::size_t base_bytes = base.serialize().size();
  // Each doc adds its JSON object plus a separating comma.
  std::vector<std::size_t> prefix{base_bytes};
  for (std::size_t i = 0; i < docs.size(); ++i) {
    std::size_t obj = json{{"documentation", docs[i].rendered}, {"path", docs[i].path}}.dump().size();
    prefix.push_back(prefix.back() + obj + (i ? 1 : 0));
  }
  ContextBudget budget;
  budget.max_tokens = (prefix[6] + 3) / 4 + 10;  // doc #7 overflows
  ASSERT_GT((prefix[7] + 3) / 4, budget.max_tokens);
  auto t = build_retrieval_input("issue", std::nullopt, docs, budget);
  EXPECT_EQ(t.included_docs, 6u);
  EXPECT_EQ(t.serialize().size(), prefix[6]);
  EXPECT_LE(estimate_tokens(t.serialize()), budget.max_tokens);
}

TEST(RetrievalOutput, Parsing) {
  EXPECT_EQ(parse_retrieval_output(R"({"files_to_edit": ["a.py"]})").files, std::vector<std::string>{"a.py"});
  EXPECT_EQ(parse_retrieval_output(R"({"files_to_edit": ["a.py","a.py","b.py"]})").files,
            (std::vector<std::string>{"a.py", "b.py"}));
  EXPECT_EQ(kind_of([] { parse_retrieval_output("not json"); }), ErrorKind::InvalidOutput);
  EXPECT_EQ(kind_of([] { parse_retrieval_output(R"({"files_to_edit": []})"); }), ErrorKind::InvalidOutput);
  EXPECT_EQ(kind_of([] { parse_retrieval_output(R"({"files": ["a.py"]})"); }), ErrorKind::InvalidOutput);
  EXPECT_EQ(kind_of([] { parse_retrieval_output(R"({"files_to_edit": [3]})"); }), ErrorKind::InvalidOutput);
}

TEST(EditingInput, NumberedContent) {
  auto t = build_editing_input("fix bug", {{"a.py", number_lines("x = 1\ny = 2\n")}}, ContextBudget{});
  EXPECT_EQ(t.input_object["input"]["files"][0]["content"], "1 x = 1\n2 y = 2\n");
  auto again = build_editing_input("fix bug", {{"a.py", number_lines("x = 1\ny = 2\n")}}, ContextBudget{});
  EXPECT_EQ(t.serialize(), again.serialize());
  EditingInputOptions raw;
  raw.line_numbers = false;
  auto plain = build_editing_input("fix bug", {{"a.py", number_lines("x = 1\ny = 2\n")}}, ContextBudget{}, raw);
  EXPECT_EQ(plain.input_object["input"]["files"][0]["content"], "x = 1\ny = 2\n");
}

TEST(EditingInput, BudgetDropsTrailingWholeFiles) {
  std::vector<std::pair<std::string, NumberedText>> files;
  for (int i = 0; i < 3; ++i) files.push_back({"f" + std::to_string(i) + ".py", number_lines(std::string(300, 'a') + "\n")});
  auto one = build_editing_input("issue", {files[0]}, ContextBudget{});
  auto two = build_editing_input("issue", {files[0], files[1]}, ContextBudget{});
  auto three = build_editing_input("issue", files, ContextBudget{});
  std::size_t fit_two = (two.serialize().size() + 3) / 4;
  ASSERT_GT((three.serialize().size() + 3) / 4, fit_two);
  ContextBudget budget;
  budget.max_tokens = fit_two;
  auto t = build_editing_input("issue", files, budget);
  EXPECT_EQ(t.included_files, (std::vector<std::string>{"f0.py", "f1.py"}));
  ASSERT_EQ(t.warnings.size(), 1u);
  EXPECT_NE(t.warnings[0].find("f2.py"), std::string::npos);
  budget.max_tokens = (one.serialize().size() + 3) / 4 - 1;
  EXPECT_EQ(kind_of([&] { build_editing_input("issue", files, budget); }), ErrorKind::BudgetExhausted);
}

TEST(EditingInput, BudgetInvariantOverRandomInputs) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    oracle::Rng rng(seed);
    std::vector<std::pair<std::string, NumberedText>> files;
    int n = rng.range(1, 6);
    for (int i = 0; i < n; ++i) {
      files.push_back({"p" + std::to_string(i) + ".py", number_lines(oracle::join_lines(oracle::random_lines(rng, 1, 60), true))});
    }
    ContextBudget budget;
    budget.max_tokens = static_cast<std::size_t>(rng.range(200, 3000));
    try {
      auto t = build_editing_input("some issue", files, budget);
      EXPECT_LE(estimate_tokens(t.serialize()), budget.max_tokens);
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::BudgetExhausted);
    }
  }
}

TEST(EditingOutput, ValidAndInvalid) {
  std::string ok = R"({"reasoning": "r", "edits": [{"file": "a.py", "code_snippet_to_be_modified": "3 return x", "edited_code_snippet": "return y"}]})";
  auto e = parse_editing_output(ok);
  ASSERT_EQ(e.edits.size(), 1u);
  EXPECT_EQ(e.edits[0].file, "a.py");
  std::string gap = R"({"reasoning": "", "edits": [{"file": "a.py", "code_snippet_to_be_modified": "36 a\n38 b", "edited_code_snippet": "c"}]})";
  EXPECT_EQ(kind_of([&] { parse_editing_output(gap); }), ErrorKind::InvalidOutput);
  EXPECT_EQ(kind_of([] { parse_editing_output("{"); }), ErrorKind::InvalidOutput);
  EXPECT_EQ(kind_of([] { parse_editing_output(R"({"reasoning": "", "edits": [{"file": "a.py"}]})"); }),
            ErrorKind::InvalidOutput);
  std::string unnumbered = R"({"reasoning": "", "edits": [{"file": "a.py", "code_snippet_to_be_modified": "return x", "edited_code_snippet": "c"}]})";
  EXPECT_EQ(kind_of([&] { parse_editing_output(unnumbered); }), ErrorKind::InvalidOutput);
  EXPECT_NO_THROW(parse_editing_output(unnumbered, {false}));
}

TEST(EditingOutput, GoldenRoundTrip) {
  json golden = {
      {"reasoning", "The issue arises because the separator is hard-coded.\nUse the configured separator instead."},
      {"edits",
       {{{"file", "pkg/fmt.py"},
         {"code_snippet_to_be_modified", "36     def join(self, parts):\n37         return ','.join(parts)"},
         {"edited_code_snippet", "    def join(self, parts):\n        return self.sep.join(parts)"}},
        {{"file", "pkg/io.py"},
         {"code_snippet_to_be_modified", "5 \n6 x = {\"a\": 1}"},
         {"edited_code_snippet", ""}}}}};
  auto parsed = parse_editing_output(golden.dump());
  EXPECT_EQ(json::parse(serialize_structured_edit(parsed)), golden);
  EXPECT_EQ(serialize_structured_edit(parse_editing_output(serialize_structured_edit(parsed))),
            serialize_structured_edit(parsed));
}

TEST(NumberedSnippet, ParseAndRender) {
  auto s = parse_numbered_snippet("10 a\n11 \n12   b\n");
  ASSERT_TRUE(s);
  EXPECT_EQ(s->first_line, 10);
  EXPECT_EQ(s->last_line(), 12);
  EXPECT_EQ(s->lines, (std::vector<std::string>{"a", "", "  b"}));
  EXPECT_EQ(render_numbered(10, s->lines), "10 a\n11 \n12   b");
  EXPECT_FALSE(parse_numbered_snippet("1a"));
  EXPECT_FALSE(parse_numbered_snippet("0 x"));
  EXPECT_FALSE(parse_numbered_snippet("2 x\n1 y"));
}

TEST(CotPrompt, RendersTemplate) {
  StructuredEdit gold{"", {{"a.py", "1 x = 1", "x = 2"}}};
  auto p = render_cot_prompt("Widgets break when {content} is typed", {{"a.py", "x = 1\n"}}, gold);
  EXPECT_EQ(p.system, std::string(kCotSystemPrompt));
  EXPECT_NE(p.system.find("You are an expert software engineer and seasoned code reviewer"), std::string::npos);
  auto pos = p.user.find("Issue Statement");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_NE(p.user.find("Widgets break when {content} is typed", pos), std::string::npos);
  std::string without_issue = p.user;
  without_issue.erase(without_issue.find("Widgets break"), std::string("Widgets break when {content} is typed").size());
  EXPECT_FALSE(std::regex_search(without_issue, std::regex(R"(\{(problem_statement|content|target)\})")));
  EXPECT_NE(p.user.find("1 x = 1"), std::string::npos);
  EXPECT_NE(p.user.find("\"edited_code_snippet\": \"x = 2\""), std::string::npos);
  EXPECT_EQ(kind_of([&] { render_cot_prompt("", {{"a.py", "x"}}, gold); }), ErrorKind::Validation);
  EXPECT_EQ(kind_of([&] { render_cot_prompt("i", {{"a.py", "x"}}, StructuredEdit{}); }), ErrorKind::Validation);
}

TEST(CanonicalDump, StableKeyOrder) {
  json a = json::parse(R"({"b": 1, "a": {"d": 2, "c": 3}})");
  EXPECT_EQ(canonical_dump(a), R"({"a":{"c":3,"d":2},"b":1})");
}
