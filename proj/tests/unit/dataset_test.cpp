#include <gtest/gtest.h>

#include <set>

#include "support/fixture_repo.hpp"
#include "support/oracles.hpp"
#include "swefixer/dataset.hpp"
#include "swefixer/github_ingest.hpp"

using namespace swefixer;
using nlohmann::json;

namespace {

std::string file_patch(const std::string& path, const std::string& before, const std::string& after) {
  diff::UnifiedPatch p;
  p.files.push_back(diff::make_file_diff(path, before, after));
  return diff::render(p);
}

const std::string kOps = fixture::calc_repo().at("calc/ops.py");

std::string fixed_ops() {
  auto s = kOps;
  s.replace(s.find("a - b"), 5, "a + b");
  return s;
}

dataset::RawInstance calc_instance(std::string patch) {
  dataset::RawInstance r;
  r.instance_id = "calc-1";
  r.repo_id = "acme/calc";
  r.issue_text = fixture::kCalcIssue;
  r.base_snapshot_ref = "calc";
  r.gold_patch_text = std::move(patch);
  return r;
}

std::string touch(const std::string& path) { return file_patch(path, "x = 1\n", "x = 2\n"); }

}  // namespace

TEST(RawInstance, JsonRoundTripAndErrors) {
  auto r = calc_instance("p");
  r.p2p_tests = {"t1"};
  auto back = dataset::raw_from_json(dataset::to_json(r));
  EXPECT_EQ(back.instance_id, "calc-1");
  EXPECT_EQ(back.p2p_tests, r.p2p_tests);
  EXPECT_FALSE(back.candidate_test_commands);
  for (const auto& bad : {json::array(), json{{"issue_text", "x"}}, json{{"instance_id", ""}},
                          json{{"instance_id", "a"}, {"schema", "other"}}, json{{"instance_id", 3}}}) {
    try {
      dataset::raw_from_json(bad);
      ADD_FAILURE() << bad.dump();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Structural);
    }
  }
}

TEST(RawInstance, DuplicateIdsInJsonlAreStructural) {
  auto dir = oracle::temp_dir("rawjsonl");
  auto line = dataset::to_json(calc_instance("p")).dump();
  oracle::write_tree(dir, {{"a.jsonl", line + "\n" + line + "\n"}});
  EXPECT_THROW(dataset::read_raw_jsonl(dir / "a.jsonl"), Error);
  std::filesystem::remove_all(dir);
}

TEST(Filter, ReasonsInOrder) {
  EXPECT_EQ(dataset::filter_instance(calc_instance("@@ bogus\n")).reason, dataset::reason::kUnparseable);
  auto excluded = calc_instance(touch("a.py"));
  EXPECT_EQ(dataset::filter_instance(excluded, {3, {"acme/calc"}}).reason, dataset::reason::kExcludedRepo);
  EXPECT_EQ(dataset::filter_instance(calc_instance(touch("tests/test_a.py") + touch("docs/x.md"))).reason,
            dataset::reason::kNoSourceEdits);
  auto three = calc_instance(touch("a.py") + touch("b.py") + touch("c.py") + touch("tests/test_a.py"));
  EXPECT_TRUE(dataset::filter_instance(three).keep);
  auto four = calc_instance(touch("a.py") + touch("b.py") + touch("c.py") + touch("d.py"));
  EXPECT_EQ(dataset::filter_instance(four).reason, dataset::reason::kTooManyFiles);
}

TEST(Filter, SummaryCountsSourceOnly) {
  auto s = dataset::summarize_patch(diff::parse_unified_patch(
      file_patch("calc/ops.py", kOps, fixed_ops()) + touch("tests/test_ops.py") + touch("setup.cfg")));
  EXPECT_EQ(s.source_files, std::vector<std::string>{"calc/ops.py"});
  EXPECT_EQ(s.test_files, std::vector<std::string>{"tests/test_ops.py"});
  EXPECT_EQ(s.other_files, std::vector<std::string>{"setup.cfg"});
  EXPECT_EQ(s.hunks, 1u);
  EXPECT_EQ(s.modified_lines, 2u);
}

TEST(Filter, TestFileClassification) {
  const std::vector<std::pair<std::string, bool>> table = {
      {"tests/test_x.py", true}, {"pkg/test/helpers.py", true}, {"pkg/test_x.py", true}, {"pkg/x_test.py", true},
      {"pkg/testing.py", false}, {"pkg/contest.py", false},     {"latest/x.py", false},  {"test", true},
  };
  for (const auto& [path, expected] : table) EXPECT_EQ(classify_test_file(path), expected) << path;
}

TEST(Examples, RetrievalAndEditingFromGoldPatch) {
  auto snap = RepoSnapshot::from_map("calc", fixture::calc_repo());
  auto raw = calc_instance(file_patch("calc/ops.py", kOps, fixed_ops()) +
                           file_patch("tests/test_ops.py", snap.at("tests/test_ops.py").content,
                                      snap.at("tests/test_ops.py").content + "\n\ndef test_more():\n    pass\n"));
  auto verdict = dataset::filter_instance(raw);
  ASSERT_TRUE(verdict.keep);
  auto r = dataset::build_retrieval_example(raw, snap, *verdict.summary);
  ASSERT_TRUE(r.example) << r.reason;
  EXPECT_EQ(r.example->target, R"({"files_to_edit":["calc/ops.py"]})");
  EXPECT_EQ(dataset::to_json(*r.example)["kind"], "retrieval");

  auto e = dataset::build_editing_example(raw, snap, *verdict.summary);
  ASSERT_TRUE(e.example) << e.reason;
  ASSERT_EQ(e.gold_edit.edits.size(), 1u);
  EXPECT_EQ(e.gold_edit.reasoning, "");
  EXPECT_EQ(apply_edits(snap, e.gold_edit).at("calc/ops.py").content, fixed_ops());
  EXPECT_EQ(e.example->input_task.included_files, std::vector<std::string>{"calc/ops.py"});

  dataset::ExampleOptions small;
  small.top_k = 1;
  auto files = fixture::calc_repo();
  files["calc/zz_noise.py"] = "def add_subtract_returns_instead(calc, ops):\n    return add\n";
  auto noisy = RepoSnapshot::from_map("calc", files);
  auto dropped = dataset::build_retrieval_example(raw, noisy, *verdict.summary, small);
  if (dropped.ranked.front() != "calc/ops.py") EXPECT_EQ(dropped.reason, dataset::reason::kGoldNotRetrieved);

  dataset::ExampleOptions tight;
  tight.budget.max_tokens = 60;
  EXPECT_EQ(dataset::build_editing_example(raw, snap, *verdict.summary, tight).reason, dataset::reason::kOverBudget);
  EXPECT_EQ(dataset::build_retrieval_example(raw, snap, *verdict.summary, tight).reason, dataset::reason::kOverBudget);
}

TEST(Examples, NewFilesAndStaleGoldAreDropped) {
  auto snap = RepoSnapshot::from_map("calc", fixture::calc_repo());
  auto added = calc_instance(
      "diff --git a/calc/new.py b/calc/new.py\nnew file mode 100644\n--- /dev/null\n+++ b/calc/new.py\n@@ -0,0 +1 @@\n+x = 1\n");
  auto v = dataset::filter_instance(added);
  ASSERT_TRUE(v.keep);
  EXPECT_EQ(dataset::build_editing_example(added, snap, *v.summary).reason, dataset::reason::kFileAddOrDelete);
  auto stale = calc_instance(file_patch("calc/ops.py", "something\nelse\n", "something\nother\n"));
  auto sv = dataset::filter_instance(stale);
  EXPECT_EQ(dataset::build_editing_example(stale, snap, *sv.summary).reason, dataset::reason::kApplyFailed);
}

TEST(Statistics, HandCountedHistograms) {
  std::vector<dataset::RawInstance> raws = {
      calc_instance(touch("a.py")),
      calc_instance(touch("a.py") + touch("b.py") + touch("tests/test_a.py")),
      calc_instance("@@ broken\n"),
      calc_instance(file_patch("a.py", "1\n2\n3\n4\n5\n6\n7\n8\n9\n10\n", "0\n2\n3\n4\n5\n6\n7\n8\n9\n11\n")),
  };
  auto s = dataset::compute_statistics(raws);
  EXPECT_EQ(s.instances, 4u);
  EXPECT_EQ(s.parsed, 3u);
  EXPECT_EQ(s.unparseable, 1u);
  EXPECT_EQ(s.edited_files, (std::map<std::size_t, std::size_t>{{1, 2}, {2, 1}}));
  EXPECT_EQ(s.modified_lines, (std::map<std::size_t, std::size_t>{{2, 1}, {4, 2}}));
  EXPECT_EQ(s.hunks, (std::map<std::size_t, std::size_t>{{1, 1}, {2, 2}}));
  EXPECT_EQ(s.modified_line_buckets, (std::map<std::size_t, std::size_t>{{0, 3}}));
  auto j = dataset::to_json(s);
  double total = 0;
  for (const auto& row : j["edited_files"]) total += row["percent"].get<double>();
  EXPECT_NEAR(total, 100.0, 1e-9);
}

TEST(CotSampling, SizeOrderAndDeterminism) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (std::size_t n : {0u, 1u, 7u, 100u}) {
      for (double f : {0.0, 0.05, 0.5, 1.0}) {
        auto idx = dataset::sample_indices(n, f, seed);
        EXPECT_EQ(idx.size(), static_cast<std::size_t>(std::llround(static_cast<double>(n) * f)));
        EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
        EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), idx.size());
        for (auto i : idx) EXPECT_LT(i, n);
        EXPECT_EQ(idx, dataset::sample_indices(n, f, seed));
      }
    }
  }
  EXPECT_NE(dataset::sample_indices(100, 0.1, 1), dataset::sample_indices(100, 0.1, 2));
  EXPECT_THROW(dataset::sample_indices(10, 1.5, 0), Error);
}

TEST(CotSampling, SelectionIsRoughlyUniform) {
  std::vector<int> hits(20, 0);
  for (std::uint64_t seed = 0; seed < 4000; ++seed) {
    for (auto i : dataset::sample_indices(20, 0.25, seed)) ++hits[i];
  }
  for (int h : hits) EXPECT_NEAR(h, 1000, 150);
}

TEST(CotRequests, TeacherResponseChecks) {
  StructuredEdit gold;
  gold.edits.push_back({"calc/ops.py", "6     return a - b", "    return a + b"});
  dataset::CotSource src{"calc-1", fixture::kCalcIssue, {{"calc/ops.py", kOps}}, gold};
  auto reqs = dataset::emit_cot_requests({src});
  ASSERT_EQ(reqs.size(), 1u);
  EXPECT_EQ(dataset::to_json(reqs[0])["system"], kCotSystemPrompt);
  EXPECT_NE(reqs[0].prompt.user.find("return a - b"), std::string::npos);

  const std::string full = "Issue Analysis: x. Task Decomposition: y. Code Localization and Editing: z.";
  EXPECT_EQ(dataset::check_teacher_response(fixture::good_edit() , gold), std::nullopt);
  EXPECT_EQ(dataset::check_teacher_response(fixture::edit("calc/ops.py", "6     return a - b", "    return a + b", full), gold),
            full);
  EXPECT_EQ(dataset::check_teacher_response(fixture::edit("calc/ops.py", "6     return a - b", "    return b + a", full), gold),
            std::nullopt);
  EXPECT_EQ(dataset::check_teacher_response("not json", gold), std::nullopt);
}

TEST(Github, ClosingReferenceTable) {
  using Refs = std::vector<github::IssueRef>;
  const std::vector<std::pair<std::string, Refs>> table = {
      {"Fixes #12", {{"o/r", 12}}},
      {"closes: #3 and resolves #4", {{"o/r", 3}, {"o/r", 4}}},
      {"FIXED other/repo#9", {{"other/repo", 9}}},
      {"fix https://github.com/a/b/issues/77 now", {{"a/b", 77}}},
      {"prefix#1 fixes#2", {{"o/r", 2}}},
      {"suffixes #5", {}},
      {"fixes #5 fixes #5", {{"o/r", 5}}},
      {"see #6", {}},
      {"fixes #12abc", {}},
      {"Resolve a/b/c#1", {}},
  };
  for (const auto& [body, expected] : table) EXPECT_EQ(github::closing_references(body, "o/r"), expected) << body;
}

TEST(Github, PaginationAndRateLimits) {
  EXPECT_EQ(github::next_page_link(R"(<https://x/p2>; rel="next", <https://x/p9>; rel="last")"), "https://x/p2");
  EXPECT_EQ(github::next_page_link(R"(<https://x/p9>; rel="last")"), std::nullopt);
  EXPECT_EQ(github::rate_limit_wait({{"x-ratelimit-remaining", "0"}, {"X-RateLimit-Reset", "130"}}, 100), 30);
  EXPECT_EQ(github::rate_limit_wait({{"X-RateLimit-Remaining", "5"}}, 100), 0);
  EXPECT_EQ(github::rate_limit_wait({{"Retry-After", "7"}}, 100), 7);

  std::vector<std::string> urls;
  std::vector<long> sleeps;
  int limited = 1;
  auto get = [&](const std::string& url) {
    urls.push_back(url);
    if (url == "p2" && limited-- > 0) return github::HttpReply{403, "", {{"Retry-After", "4"}}};
    if (url == "p1") return github::HttpReply{200, "[1,2]", {{"Link", "<p2>; rel=\"next\""}}};
    return github::HttpReply{200, "[3]", {}};
  };
  auto all = github::fetch_all_pages("p1", get, [&](long s) { sleeps.push_back(s); }, [] { return 0L; });
  EXPECT_EQ(all, json::parse("[1,2,3]"));
  EXPECT_EQ(urls, (std::vector<std::string>{"p1", "p2", "p2"}));
  EXPECT_EQ(sleeps, std::vector<long>{4});
}

TEST(Github, IngestJoinsIssuesAndMergedPulls) {
  auto issue = [](int n) {
    return json{{"type", "IssuesEvent"},
                {"repo", {{"name", "acme/calc"}}},
                {"payload", {{"issue", {{"number", n}, {"title", "Bug " + std::to_string(n)}, {"body", "details"}}}}}};
  };
  auto pull = [](int n, std::string body, bool merged, std::string diff) {
    json pr = {{"number", n}, {"body", body}, {"merged", merged}, {"base", {{"sha", "abc"}}}};
    if (!diff.empty()) pr["diff"] = diff;
    return json{{"type", "PullRequestEvent"}, {"repo", {{"name", "acme/calc"}}}, {"payload", {{"pull_request", pr}}}};
  };
  std::vector<json> events = {issue(1), issue(2),
                              pull(10, "Fixes #1", true, touch("a.py")),
                              pull(11, "Fixes #2", false, touch("a.py")),
                              pull(12, "no refs", true, touch("a.py")),
                              pull(13, "Fixes #99", true, touch("a.py")),
                              pull(14, "Fixes #2", true, "")};
  auto report = github::ingest_events(events, {{"acme/calc#14", touch("b.py")}});
  EXPECT_EQ(report.pull_requests, 5u);
  EXPECT_EQ(report.unmerged, 1u);
  EXPECT_EQ(report.without_issue, 1u);
  EXPECT_EQ(report.missing_issue, 1u);
  ASSERT_EQ(report.instances.size(), 2u);
  EXPECT_EQ(report.instances[0].instance_id, "acme__calc-10");
  EXPECT_EQ(report.instances[0].issue_text, "Bug 1\ndetails");
  EXPECT_EQ(report.instances[0].base_snapshot_ref, "acme__calc/abc");
  EXPECT_EQ(report.instances[1].gold_patch_text, touch("b.py"));
}
