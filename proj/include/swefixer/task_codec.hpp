#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "swefixer/error.hpp"
#include "swefixer/repo.hpp"
#include "swefixer/skeleton.hpp"
#include "swefixer/text.hpp"

namespace swefixer {

using nlohmann::json;

/// Compact, key-sorted JSON; invalid UTF-8 is replaced rather than thrown on.
inline std::string canonical_dump(const json& j, int indent = -1) {
  return j.dump(indent, ' ', false, json::error_handler_t::replace);
}

// ---- token budget --------------------------------------------------------

inline std::size_t estimate_tokens_bytes(std::string_view text) { return (text.size() + 3) / 4; }

struct TokenCounter {
  std::string id = "bytes/4";
  std::function<std::size_t(std::string_view)> count = estimate_tokens_bytes;
};

struct ContextBudget {
  std::size_t max_tokens = 65536;
  TokenCounter counter;

  std::size_t estimate(std::string_view text) const { return counter.count(text); }
  bool fits(std::string_view text) const { return estimate(text) <= max_tokens; }
};

inline std::size_t estimate_tokens(std::string_view text, const TokenCounter& counter = {}) {
  return counter.count(text);
}

// ---- task and answer types -------------------------------------------------

enum class TaskKind { Retrieval, Editing };

inline constexpr std::string_view kRetrievalSchema = "swefixer.retrieval_output.v1";
inline constexpr std::string_view kEditingSchema = "swefixer.editing_output.v1";

struct JsonTask {
  TaskKind kind = TaskKind::Retrieval;
  json input_object;
  std::string expected_schema;
  std::size_t included_docs = 0;
  std::vector<std::string> included_files;
  std::vector<std::string> warnings;

  std::string serialize() const { return canonical_dump(input_object); }
};

struct RetrievalAnswer {
  std::vector<std::string> files;
};

struct EditBlock {
  std::string file;
  std::string original_numbered;
  std::string modified;
  bool operator==(const EditBlock&) const = default;
};

struct StructuredEdit {
  std::string reasoning;
  std::vector<EditBlock> edits;
  bool operator==(const StructuredEdit&) const = default;
};

/// The original-snippet lines with their numbers removed.
struct NumberedSnippet {
  int first_line = 0;
  std::vector<std::string> lines;
  int last_line() const { return first_line + static_cast<int>(lines.size()) - 1; }
};

/// Parses `<n> <code>` lines with consecutive numbers. A single trailing
/// newline is ignored; a bare `<n>` is an empty line.
inline std::optional<NumberedSnippet> parse_numbered_snippet(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (text.back() == '\n') text.remove_suffix(1);
  NumberedSnippet out;
  int expected = 0;
  for (auto& line : text::split(text)) {
    std::size_t i = 0;
    while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
    if (i == 0 || i > 9) return std::nullopt;
    if (i < line.size() && line[i] != ' ') return std::nullopt;
    int n = std::stoi(line.substr(0, i));
    if (n < 1) return std::nullopt;
    if (expected == 0) {
      out.first_line = n;
    } else if (n != expected) {
      return std::nullopt;
    }
    expected = n + 1;
    out.lines.push_back(i < line.size() ? line.substr(i + 1) : std::string());
  }
  return out;
}

inline std::string render_numbered(int first_line, const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out.push_back('\n');
    out += std::to_string(first_line + static_cast<int>(i));
    out.push_back(' ');
    out += lines[i];
  }
  return out;
}

// ---- retrieval task --------------------------------------------------------

inline constexpr std::string_view kRetrievalInstruction =
    "You are given a GitHub issue and the file documentation (skeletons) of candidate files from the "
    "repository, ranked by lexical relevance to the issue. Each documentation lists the file path, the "
    "module docstring, class headers with docstrings and method signatures, and function signatures with "
    "the first and last five lines of their bodies. Identify the files that must be edited to resolve the "
    "issue.";

inline constexpr std::string_view kRetrievalOutputControl =
    "Respond with a single JSON object and nothing else. The object has one key, \"files_to_edit\", whose "
    "value is a non-empty list of repository-relative file paths, most relevant first.";

struct RetrievalInputOptions {
  bool include_readme = true;
};

inline json retrieval_output_format() { return {{"files_to_edit", json::array({"<relative file path>"})}}; }

/// JSON input for the retrieval model. Documentations are appended in rank
/// order while the serialized task stays within the budget.
inline JsonTask build_retrieval_input(std::string_view issue, const std::optional<std::string>& readme,
                                      const std::vector<FileDoc>& ranked_docs, const ContextBudget& budget,
                                      const RetrievalInputOptions& options = {}) {
  if (text::trim(issue).empty()) fail(ErrorKind::Validation, "issue text is empty");
  JsonTask task;
  task.kind = TaskKind::Retrieval;
  task.expected_schema = std::string(kRetrievalSchema);
  json input = {{"issue", std::string(issue)}, {"file_documentations", json::array()}};
  if (options.include_readme && readme) input["readme"] = *readme;
  task.input_object = {{"input", std::move(input)},
                       {"instruction", kRetrievalInstruction},
                       {"output_control",
                        {{"description", kRetrievalOutputControl}, {"format", retrieval_output_format()}}}};
  if (!budget.fits(task.serialize())) {
    fail(ErrorKind::BudgetExhausted, "issue and readme alone exceed the context budget");
  }
  auto& docs = task.input_object["input"]["file_documentations"];
  for (const auto& doc : ranked_docs) {
    docs.push_back({{"path", doc.path}, {"documentation", doc.rendered}});
    if (!budget.fits(task.serialize())) {
      docs.erase(docs.size() - 1);
      task.warnings.push_back("context budget reached after " + std::to_string(task.included_docs) +
                              " of " + std::to_string(ranked_docs.size()) + " file documentations");
      break;
    }
    ++task.included_docs;
  }
  return task;
}

/// Parses `{"files_to_edit": [...]}`; order kept, duplicates dropped.
inline RetrievalAnswer parse_retrieval_output(std::string_view raw) {
  json j = json::parse(raw, nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::InvalidOutput, "retrieval output is not valid JSON");
  if (!j.is_object() || !j.contains("files_to_edit") || !j["files_to_edit"].is_array()) {
    fail(ErrorKind::InvalidOutput, "retrieval output lacks a files_to_edit list");
  }
  RetrievalAnswer answer;
  std::set<std::string> seen;
  for (const auto& f : j["files_to_edit"]) {
    if (!f.is_string() || f.get<std::string>().empty()) {
      fail(ErrorKind::InvalidOutput, "files_to_edit entries must be non-empty strings");
    }
    auto path = f.get<std::string>();
    if (seen.insert(path).second) answer.files.push_back(path);
  }
  if (answer.files.empty()) fail(ErrorKind::InvalidOutput, "files_to_edit is empty");
  return answer;
}

inline std::string serialize_retrieval_answer(const RetrievalAnswer& answer) {
  return canonical_dump(json{{"files_to_edit", answer.files}});
}

// ---- editing task ------------------------------------------------------------

inline constexpr std::string_view kEditingInstruction =
    "You are given a GitHub issue and the full content of the repository files relevant to it. Every file "
    "line is prefixed with its line number and a single space. Analyse the issue, reason about which code "
    "must change, and produce the edits that resolve it.";

inline constexpr std::string_view kEditingOutputControl =
    "Respond with a single JSON object and nothing else. \"reasoning\" holds your step-by-step analysis. "
    "\"edits\" is a non-empty list; each edit names the \"file\" path, the \"code_snippet_to_be_modified\" "
    "copied from the input with its line numbers (consecutive lines, each written as `<number> <code>`), "
    "and the \"edited_code_snippet\" that replaces it, written without line numbers and with correct "
    "indentation.";

struct EditingFile {
  std::string path;
  std::string content;  // canonical numbered rendering, or raw text when numbering is off
};

struct EditingInputOptions {
  bool line_numbers = true;
  std::optional<std::string> readme;  // included only when set
};

inline json editing_output_format() {
  return {{"reasoning", "<analysis>"},
          {"edits", json::array({{{"file", "<relative file path>"},
                                  {"code_snippet_to_be_modified", "<numbered original lines>"},
                                  {"edited_code_snippet", "<replacement code without line numbers>"}}})}};
}

/// JSON input for the editor: the issue plus whole files. Files that do not
/// fit the budget are dropped from the end of the list, never cut.
inline JsonTask build_editing_input(std::string_view issue, const std::vector<std::pair<std::string, NumberedText>>& files,
                                    const ContextBudget& budget, const EditingInputOptions& options = {}) {
  if (text::trim(issue).empty()) fail(ErrorKind::Validation, "issue text is empty");
  if (files.empty()) fail(ErrorKind::Validation, "editing input needs at least one file");
  JsonTask task;
  task.kind = TaskKind::Editing;
  task.expected_schema = std::string(kEditingSchema);
  json input = {{"issue", std::string(issue)}, {"files", json::array()}};
  if (options.readme) input["readme"] = *options.readme;
  task.input_object = {{"input", std::move(input)},
                       {"instruction", kEditingInstruction},
                       {"output_control",
                        {{"description", kEditingOutputControl}, {"format", editing_output_format()}}}};
  auto& list = task.input_object["input"]["files"];
  std::size_t i = 0;
  for (; i < files.size(); ++i) {
    const auto& [path, numbered] = files[i];
    std::string content;
    if (options.line_numbers) {
      content = numbered.render();
    } else {
      std::vector<std::string> raw;
      for (const auto& l : numbered.lines) raw.push_back(l.text);
      content = text::join(raw);
      if (numbered.final_newline && !raw.empty()) content.push_back('\n');
    }
    list.push_back({{"path", path}, {"content", std::move(content)}});
    if (!budget.fits(task.serialize())) {
      list.erase(list.size() - 1);
      break;
    }
    task.included_files.push_back(path);
  }
  for (std::size_t d = i; d < files.size(); ++d) {
    task.warnings.push_back("dropped " + files[d].first + ": context budget");
  }
  if (task.included_files.empty()) fail(ErrorKind::BudgetExhausted, "no file fits the editing context budget");
  return task;
}

struct EditParseOptions {
  bool require_line_numbers = true;
};

/// Parses the editor's JSON answer and checks every original snippet's numbering.
inline StructuredEdit parse_editing_output(std::string_view raw, const EditParseOptions& options = {}) {
  json j = json::parse(raw, nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::InvalidOutput, "editing output is not valid JSON");
  if (!j.is_object()) fail(ErrorKind::InvalidOutput, "editing output must be a JSON object");
  if (!j.contains("reasoning") || !j["reasoning"].is_string()) {
    fail(ErrorKind::InvalidOutput, "editing output lacks a reasoning string");
  }
  if (!j.contains("edits") || !j["edits"].is_array()) fail(ErrorKind::InvalidOutput, "editing output lacks an edits list");
  StructuredEdit edit;
  edit.reasoning = j["reasoning"].get<std::string>();
  for (const auto& e : j["edits"]) {
    if (!e.is_object()) fail(ErrorKind::InvalidOutput, "edit entries must be objects");
    for (const char* key : {"file", "code_snippet_to_be_modified", "edited_code_snippet"}) {
      if (!e.contains(key) || !e[key].is_string()) {
        fail(ErrorKind::InvalidOutput, std::string("edit entry lacks string field ") + key);
      }
    }
    EditBlock block{e["file"].get<std::string>(), e["code_snippet_to_be_modified"].get<std::string>(),
                    e["edited_code_snippet"].get<std::string>()};
    if (block.file.empty()) fail(ErrorKind::InvalidOutput, "edit entry has an empty file path");
    if (block.original_numbered.empty()) fail(ErrorKind::InvalidOutput, "edit entry has an empty original snippet");
    if (options.require_line_numbers && !parse_numbered_snippet(block.original_numbered)) {
      fail(ErrorKind::InvalidOutput, "original snippet for " + block.file +
                                         " is not consecutively numbered `<n> <code>` lines");
    }
    edit.edits.push_back(std::move(block));
  }
  if (edit.edits.empty()) fail(ErrorKind::InvalidOutput, "edits list is empty");
  return edit;
}

inline json to_json(const StructuredEdit& edit, bool with_reasoning = true) {
  json edits = json::array();
  for (const auto& b : edit.edits) {
    edits.push_back({{"file", b.file},
                     {"code_snippet_to_be_modified", b.original_numbered},
                     {"edited_code_snippet", b.modified}});
  }
  json j = {{"edits", std::move(edits)}};
  if (with_reasoning) j["reasoning"] = edit.reasoning;
  return j;
}

inline std::string serialize_structured_edit(const StructuredEdit& edit) { return canonical_dump(to_json(edit)); }

// ---- CoT teacher prompts -----------------------------------------------------

inline constexpr std::string_view kCotSystemPrompt =
    "You are an expert software engineer and seasoned code reviewer, specializing in bug localization and "
    "code optimization within real-world code repositories. Your role is to meticulously analyze code and "
    "provide clear, logical reasoning to guide the resolution of issues within the codebase.\n"
    "\n"
    "In this role, you focus on the precision and effectiveness of the problem-solving process. Your "
    "expertise includes understanding complex code structures and accurately mapping issues to the specific "
    "parts of the code requiring modification. You excel at breaking down the reasoning process into "
    "coherent, easy-to-follow steps that lead to efficient and accurate code fixes.\n"
    "\n"
    "In this task, we are training a model to generate code modifications for resolving issues within "
    "real-world codebases. For this, we have the issue description, the codebase, and the corresponding "
    "oracle code modifications. Your task is to generate detailed reasoning to aid in collecting "
    "high-quality training data. Your reasoning process must be thorough, evidence-based, and strictly "
    "adhere to the provided issue.\n"
    "\n"
    "Although oracle code modifications are available, **you should simulate reasoning independently—as "
    "if you are identifying the necessary files and changes without prior knowledge of those "
    "modifications**. Avoid statements like \"The edited code makes sense because…\" that imply direct "
    "knowledge of the oracle modifications.";

inline constexpr std::string_view kCotUserTemplate =
    "# Issue Statement:\n"
    "{problem_statement}\n"
    "\n"
    "# File Content to be Modified:\n"
    "You are provided with the files that require modification to resolve the issue. This includes the "
    "full file content. You should identify the code snippets to be modified based on the issue and the "
    "file content.\n"
    "{content}\n"
    "\n"
    "# Oracle Code Modifications:\n"
    "{target}\n"
    "\n"
    "# Task Objective:\n"
    "Your objective is to develop a clear and logical reasoning process that guides the modification of "
    "the code snippets based on the issue. The reasoning should explain the relationship between the issue "
    "and each code snippet, and why the modifications are necessary.\n"
    "\n"
    "# Reasoning Process Guidelines:\n"
    "The reasoning process should generally include the following steps. You may adjust these steps as "
    "needed for clarity and accuracy:\n"
    "\n"
    "1. **Issue Analysis**:\n"
    "   - Begin by **clearly articulating the issue**. Provide a comprehensive explanation of why this "
    "issue is significant, highlighting the specific challenges or obstacles that must be addressed. "
    "Identify the key requirements or objectives necessary for resolving the issue, ensuring that all "
    "aspects of the issue are thoroughly examined and understood.\n"
    "\n"
    "2. **Task Decomposition*:\n"
    "   - Break down the overall issue into **smaller, manageable sub-tasks**. Explain the purpose of each "
    "sub-task and its significance in solving the issue. Ensure that sub-tasks are logically ordered and "
    "clearly connected.\n"
    "\n"
    "3. **Code Localization and Editing**:\n"
    "   - First, for each sub-task, identify the relevant **code snippet** by providing the file path and "
    "referring to the specific part of the code related to that sub-task. Next, give a detailed "
    "explanation of how this code snippet is connected to the sub-task, explain how the code should be "
    "edited to resolve the issue and justify why these changes are necessary. Finally, provide the edited "
    "code based on the explanation.\n"
    "   - Ensure that the final output for this part MATCHES the provided oracle modifications EXACTLY.\n"
    "\n"
    "\n"
    "# General Requirements:\n"
    "\n"
    "1. **Clear and Evidence-Based Reasoning**: Provide clear and precise reasoning for each step, strictly "
    "based on the provided issue and code without inferring information not explicitly stated.\n"
    "2. **Comprehensive and Concise**: Address all relevant aspects of the issue comprehensively while being "
    "concise. Justify the exclusion of any sections that are not relevant.\n"
    "3. **Detailed Guidance**: Ensure the reasoning steps are detailed enough to allow someone unfamiliar "
    "with the solution to infer and implement the necessary code modifications.\n"
    "4. **Faithfulness**: Ensure that your final output for the code modifications MATCHES the provided "
    "oracle modifications EXACTLY.\n"
    "5. **Neutral Perspective**: Approach the issue as if you do not know the correct answer in advance. "
    "Avoid language that implies prior knowledge of the correct modifications.\n"
    "\n"
    "# Format Requirements:\n"
    "\n"
    "1. **File path**: Always mention the file path when referring to a code snippet (including class or "
    "function names).\n"
    "2. **Reasoning Process Format**: Use markdown to present your reasoning process. Clearly define each "
    "step and ensure logical connections between them.\n"
    "3. **Code Snippet**: You must include **line numbers** when referring to the original code for context "
    "and outputing `code_snippet_to_be_modified`. However, do **not include line numbers** in your editing "
    "suggestions.\n"
    "\n"
    "Please ensure your response is clearly formatted and provides enough detail to justify why each code "
    "section was selected for modification and how it should be edited.\n";

struct CotPrompt {
  std::string system;
  std::string user;
};

/// Numbered contents of the files shown to the teacher, one fenced block each.
inline std::string render_cot_file_contents(const std::vector<std::pair<std::string, std::string>>& files) {
  std::string out;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (i) out += "\n\n";
    auto numbered = number_lines(files[i].second).render();
    if (!numbered.empty() && numbered.back() == '\n') numbered.pop_back();
    out += "## File: `" + files[i].first + "`\n```\n" + numbered + "\n```";
  }
  return out;
}

/// Fills the teacher template in a single left-to-right pass, so placeholder
/// text inside the substituted values is never expanded again.
inline CotPrompt render_cot_prompt(std::string_view issue,
                                   const std::vector<std::pair<std::string, std::string>>& gold_file_contents,
                                   const StructuredEdit& gold_edit) {
  if (text::trim(issue).empty()) fail(ErrorKind::Validation, "CoT prompt needs a non-empty issue");
  if (gold_file_contents.empty()) fail(ErrorKind::Validation, "CoT prompt needs file contents");
  if (gold_edit.edits.empty()) fail(ErrorKind::Validation, "CoT prompt needs a non-empty gold edit");
  const std::pair<std::string_view, std::string> values[] = {
      {"{problem_statement}", std::string(issue)},
      {"{content}", render_cot_file_contents(gold_file_contents)},
      {"{target}", canonical_dump(to_json(gold_edit, false), 2)},
  };
  std::string user;
  std::string_view tpl = kCotUserTemplate;
  std::size_t i = 0;
  while (i < tpl.size()) {
    bool replaced = false;
    if (tpl[i] == '{') {
      for (const auto& [key, value] : values) {
        if (tpl.substr(i, key.size()) == key) {
          user += value;
          i += key.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) user.push_back(tpl[i++]);
  }
  return {std::string(kCotSystemPrompt), std::move(user)};
}

}  // namespace swefixer
