#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "swefixer/diff.hpp"
#include "swefixer/error.hpp"
#include "swefixer/python/parser.hpp"
#include "swefixer/repo.hpp"
#include "swefixer/task_codec.hpp"
#include "swefixer/text.hpp"

namespace swefixer {

struct SnippetSpan {
  std::string file;
  int start_line = 0;
  int end_line = 0;
  std::vector<std::string> text;
  bool via_fallback = false;
  bool operator==(const SnippetSpan&) const = default;
};

namespace detail {

// `^\d+ ` stripped from every line when every line carries a number;
// otherwise the lines are returned as written.
inline std::vector<std::string> strip_numbers(std::string_view snippet) {
  if (!snippet.empty() && snippet.back() == '\n') snippet.remove_suffix(1);
  auto lines = text::split(snippet);
  std::vector<std::string> out;
  for (const auto& line : lines) {
    std::size_t i = 0;
    while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
    if (i == 0 || (i < line.size() && line[i] != ' ')) return lines;
    out.push_back(i < line.size() ? line.substr(i + 1) : std::string());
  }
  return out;
}

inline std::vector<std::size_t> find_block(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  std::vector<std::size_t> hits;
  if (needle.empty() || needle.size() > hay.size()) return hits;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) hits.push_back(i);
  }
  return hits;
}

}  // namespace detail

/// Finds the lines an edit block refers to: by its line numbers first, then by
/// a unique exact-text match anywhere in the file.
inline SnippetSpan locate_snippet(const FileRecord& file, const EditBlock& block) {
  if (block.file != file.path) fail(ErrorKind::Locate, "edit targets " + block.file + " but file is " + file.path);
  auto lines = text::to_lines(file.content).lines;
  SnippetSpan span;
  span.file = file.path;

  std::vector<std::string> wanted;
  if (auto numbered = parse_numbered_snippet(block.original_numbered)) {
    wanted = numbered->lines;
    auto first = static_cast<std::size_t>(numbered->first_line);
    auto last = static_cast<std::size_t>(numbered->last_line());
    if (last <= lines.size() &&
        std::equal(wanted.begin(), wanted.end(), lines.begin() + static_cast<std::ptrdiff_t>(first - 1))) {
      span.start_line = numbered->first_line;
      span.end_line = numbered->last_line();
      span.text = std::move(wanted);
      return span;
    }
  } else {
    wanted = detail::strip_numbers(block.original_numbered);
  }
  if (wanted.empty() || (wanted.size() == 1 && wanted.front().empty() && block.original_numbered.empty())) {
    fail(ErrorKind::Locate, file.path + ": empty original snippet");
  }
  auto hits = detail::find_block(lines, wanted);
  if (hits.size() != 1) {
    fail(ErrorKind::Locate, file.path + ": original snippet " +
                                (hits.empty() ? std::string("not found") : "matches " + std::to_string(hits.size()) + " places"));
  }
  span.start_line = static_cast<int>(hits.front()) + 1;
  span.end_line = span.start_line + static_cast<int>(wanted.size()) - 1;
  span.text = std::move(wanted);
  span.via_fallback = true;
  return span;
}

/// Replacement lines of a block; empty text deletes the span.
inline std::vector<std::string> modified_lines(const EditBlock& block) {
  if (block.modified.empty()) return {};
  return text::split(block.modified);
}

struct AppliedEdits {
  RepoSnapshot snapshot;
  std::vector<SnippetSpan> spans;  // in edit order
  std::vector<std::string> changed_files;
};

/// Applies every block; spans in one file must be disjoint and are replaced
/// bottom-up. A file keeps its final-newline state.
inline AppliedEdits apply_edits_detailed(const RepoSnapshot& snapshot, const StructuredEdit& edit) {
  AppliedEdits result;
  std::map<std::string, std::vector<std::size_t>> by_file;
  for (std::size_t i = 0; i < edit.edits.size(); ++i) {
    const auto& block = edit.edits[i];
    const auto* file = snapshot.find(block.file);
    if (!file) fail(ErrorKind::Locate, "edit targets unknown file " + block.file);
    if (file->is_binary) fail(ErrorKind::Locate, "edit targets binary file " + block.file);
    result.spans.push_back(locate_snippet(*file, block));
    by_file[block.file].push_back(i);
  }

  std::map<std::string, std::string> replacements;
  for (auto& [path, idx] : by_file) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return result.spans[a].start_line < result.spans[b].start_line;
    });
    for (std::size_t k = 1; k < idx.size(); ++k) {
      const auto& prev = result.spans[idx[k - 1]];
      const auto& cur = result.spans[idx[k]];
      if (cur.start_line <= prev.end_line) {
        fail(ErrorKind::Conflict, path + ": edits overlap at lines " + std::to_string(prev.start_line) + "-" +
                                      std::to_string(prev.end_line) + " and " + std::to_string(cur.start_line) + "-" +
                                      std::to_string(cur.end_line));
      }
    }
    auto lines = text::to_lines(snapshot.at(path).content);
    for (auto it = idx.rbegin(); it != idx.rend(); ++it) {
      const auto& span = result.spans[*it];
      auto repl = modified_lines(edit.edits[*it]);
      auto begin = lines.lines.begin() + (span.start_line - 1);
      auto end = lines.lines.begin() + span.end_line;
      lines.lines.erase(begin, end);
      lines.lines.insert(lines.lines.begin() + (span.start_line - 1), repl.begin(), repl.end());
    }
    if (lines.lines.empty()) lines.final_newline = false;
    auto updated = lines.str();
    if (updated != snapshot.at(path).content) {
      replacements[path] = std::move(updated);
      result.changed_files.push_back(path);
    }
  }
  result.snapshot = snapshot.with_contents(replacements);
  return result;
}

inline RepoSnapshot apply_edits(const RepoSnapshot& snapshot, const StructuredEdit& edit) {
  return apply_edits_detailed(snapshot, edit).snapshot;
}

struct SyntaxCheck {
  bool ok = true;
  int line = 0;
  int col = 0;
  std::string message;
};

inline SyntaxCheck check_syntax(std::string_view content, std::string_view language) {
  if (language != "python") fail(ErrorKind::Config, "no syntax analyzer for language '" + std::string(language) + "'");
  try {
    python::parse_module(content);
  } catch (const python::SyntaxError& e) {
    return {false, e.line(), e.col(), e.detail()};
  }
  return {};
}

/// Changed files of `modified` relative to `original` as a git-style patch.
inline diff::UnifiedPatch to_unified_patch(const RepoSnapshot& original, const RepoSnapshot& modified,
                                           int context = diff::kDefaultContext) {
  diff::UnifiedPatch patch;
  for (const auto& [path, rec] : original.files()) {
    const auto* other = modified.find(path);
    if (!other) fail(ErrorKind::Validation, "file removed in modified snapshot: " + path);
    if (other->content == rec->content) continue;
    if (rec->is_binary || other->is_binary) fail(ErrorKind::Validation, "binary file changed: " + path);
    patch.files.push_back(diff::make_file_diff(path, rec->content, other->content, context));
  }
  for (const auto& [path, rec] : modified.files()) {
    if (!original.contains(path)) fail(ErrorKind::Validation, "file added in modified snapshot: " + path);
  }
  return patch;
}

/// Applies a patch to a snapshot with exact hunk positions.
inline RepoSnapshot apply_patch(const RepoSnapshot& snapshot, const diff::UnifiedPatch& patch) {
  std::map<std::string, std::string> contents;
  for (const auto& f : patch.files) {
    const auto& path = f.path();
    if (f.is_binary) fail(ErrorKind::Apply, path + ": binary patches are not supported");
    if (f.is_new) fail(ErrorKind::Apply, path + ": file creation is not supported");
    if (f.is_deleted) fail(ErrorKind::Apply, path + ": file deletion is not supported");
    if (!f.old_path.empty() && !f.new_path.empty() && f.old_path != f.new_path) {
      fail(ErrorKind::Apply, path + ": renames are not supported");
    }
    auto it = contents.find(path);
    if (it == contents.end()) {
      const auto* rec = snapshot.find(path);
      if (!rec) fail(ErrorKind::Apply, path + ": not in snapshot");
      it = contents.emplace(path, rec->content).first;
    }
    it->second = diff::apply_file_diff(it->second, f);
  }
  return snapshot.with_contents(contents);
}

/// The patch restricted to non-test source files.
inline diff::UnifiedPatch source_only(const diff::UnifiedPatch& patch) {
  diff::UnifiedPatch out;
  for (const auto& f : patch.files) {
    if (language_for(f.path()) && !classify_test_file(f.path())) out.files.push_back(f);
  }
  return out;
}

/// One block per hunk: numbered pre-image (context + removals) and the
/// unnumbered post-image (context + additions). Reasoning is left empty.
inline StructuredEdit gold_patch_to_structured_edit(const RepoSnapshot& snapshot, const diff::UnifiedPatch& patch) {
  apply_patch(snapshot, patch);
  StructuredEdit edit;
  for (const auto& f : patch.files) {
    const auto& path = f.path();
    for (const auto& h : f.hunks) {
      auto pre = h.pre_image();
      auto post = h.post_image();
      if (pre.empty()) fail(ErrorKind::Apply, path + ": hunk has no anchoring lines");
      bool pre_nonl = pre.back()->no_newline;
      bool post_nonl = !post.empty() && post.back()->no_newline;
      if (pre_nonl != post_nonl) fail(ErrorKind::Apply, path + ": hunk changes the end-of-file newline");
      std::vector<std::string> pre_text, post_text;
      for (const auto* l : pre) pre_text.push_back(l->text);
      for (const auto* l : post) post_text.push_back(l->text);
      if (post_text.size() == 1 && post_text.front().empty()) {
        fail(ErrorKind::Apply, path + ": hunk post-image is a single blank line");
      }
      edit.edits.push_back({path, render_numbered(h.old_start, pre_text), text::join(post_text)});
    }
  }
  return edit;
}

}  // namespace swefixer
