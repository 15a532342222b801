#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "swefixer/archive.hpp"
#include "swefixer/error.hpp"
#include "swefixer/glob.hpp"
#include "swefixer/text.hpp"

namespace swefixer {

/// Source language for a path, by extension. Only Python is recognised.
inline std::optional<std::string> language_for(std::string_view path) {
  if (text::ends_with(path, ".py") || text::ends_with(path, ".pyi")) return "python";
  return std::nullopt;
}

/// True iff a path segment is `test`/`tests`, or the basename without its
/// extension starts with `test_` or ends with `_test`.
inline bool classify_test_file(std::string_view path) {
  auto segments = text::split(path, '/');
  for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
    if (segments[i] == "test" || segments[i] == "tests") return true;
  }
  std::string_view base = segments.back();
  if (base == "test" || base == "tests") return true;
  auto dot = base.rfind('.');
  std::string_view stem = (dot == std::string_view::npos || dot == 0) ? base : base.substr(0, dot);
  return text::starts_with(stem, "test_") || text::ends_with(stem, "_test");
}

/// Lexically normalizes a relative path: `\` to `/`, drops empty and `.`
/// segments, resolves `..`. Throws Structural when the path escapes the root.
inline std::string normalize_path(std::string_view raw) {
  std::string s(raw);
  for (auto& c : s) {
    if (c == '\\') c = '/';
  }
  std::vector<std::string> out;
  for (auto& seg : text::split(s, '/')) {
    if (seg.empty() || seg == ".") continue;
    if (seg == "..") {
      if (out.empty()) fail(ErrorKind::Structural, "path escapes repository root: " + std::string(raw));
      out.pop_back();
      continue;
    }
    out.push_back(seg);
  }
  if (out.empty()) fail(ErrorKind::Structural, "empty path: " + std::string(raw));
  return text::join(out, "/");
}

inline std::string normalize_newlines(std::string_view content) {
  std::string out;
  out.reserve(content.size());
  for (std::size_t i = 0; i < content.size(); ++i) {
    if (content[i] == '\r' && i + 1 < content.size() && content[i + 1] == '\n') continue;
    out.push_back(content[i]);
  }
  return out;
}

struct FileRecord {
  std::string path;
  std::string content;
  bool is_source = false;
  bool is_test = false;
  bool is_binary = false;

  /// Builds a record from raw bytes: binary detection, CRLF folding, flags.
  static FileRecord make(std::string path, std::string_view bytes) {
    FileRecord rec;
    rec.path = std::move(path);
    rec.is_binary = bytes.find('\0') != std::string_view::npos;
    rec.content = rec.is_binary ? std::string(bytes) : normalize_newlines(bytes);
    rec.is_source = !rec.is_binary && language_for(rec.path).has_value();
    rec.is_test = rec.is_source && classify_test_file(rec.path);
    return rec;
  }
};

using FileMap = std::map<std::string, std::shared_ptr<const FileRecord>>;

/// Immutable view of a repository at one commit. Files are shared between
/// snapshots derived via with_contents(), so copies are cheap.
class RepoSnapshot {
 public:
  RepoSnapshot() = default;

  RepoSnapshot(std::string root_id, std::vector<FileRecord> records) : root_id_(std::move(root_id)) {
    for (auto& rec : records) {
      auto path = rec.path;
      auto [it, inserted] = files_.emplace(path, std::make_shared<const FileRecord>(std::move(rec)));
      if (!inserted) fail(ErrorKind::Structural, "duplicate path in snapshot: " + path);
    }
    pick_readme();
  }

  /// Convenience for fixtures: path -> raw content.
  static RepoSnapshot from_map(std::string root_id, const std::map<std::string, std::string>& files) {
    std::vector<FileRecord> records;
    for (const auto& [path, content] : files) records.push_back(FileRecord::make(normalize_path(path), content));
    return RepoSnapshot(std::move(root_id), std::move(records));
  }

  const std::string& root_id() const { return root_id_; }
  const FileMap& files() const { return files_; }
  std::size_t size() const { return files_.size(); }
  const std::optional<std::string>& readme() const { return readme_; }

  const FileRecord* find(std::string_view path) const {
    auto it = files_.find(std::string(path));
    return it == files_.end() ? nullptr : it->second.get();
  }

  const FileRecord& at(std::string_view path) const {
    const auto* rec = find(path);
    if (!rec) fail(ErrorKind::Lookup, "no such file in snapshot: " + std::string(path));
    return *rec;
  }

  bool contains(std::string_view path) const { return find(path) != nullptr; }

  /// New snapshot with the given files' contents replaced; other records are shared.
  RepoSnapshot with_contents(const std::map<std::string, std::string>& replacements) const {
    RepoSnapshot copy = *this;
    for (const auto& [path, content] : replacements) {
      const auto& old = at(path);
      FileRecord rec = old;
      rec.content = content;
      copy.files_[path] = std::make_shared<const FileRecord>(std::move(rec));
    }
    return copy;
  }

  bool same_contents(const RepoSnapshot& other) const {
    if (files_.size() != other.files_.size()) return false;
    auto a = files_.begin();
    auto b = other.files_.begin();
    for (; a != files_.end(); ++a, ++b) {
      if (a->first != b->first || a->second->content != b->second->content) return false;
    }
    return true;
  }

 private:
  void pick_readme() {
    for (const auto& [path, rec] : files_) {
      if (path.find('/') != std::string::npos) continue;
      auto lower = text::to_lower(path);
      if (lower == "readme" || text::starts_with(lower, "readme.")) {
        readme_ = path;
        return;
      }
    }
  }

  std::string root_id_;
  FileMap files_;
  std::optional<std::string> readme_;
};

namespace detail {

inline bool prune_directory(const std::vector<std::string>& exclusions, const std::string& dir) {
  const std::string probe = dir + "/\x01";
  for (const auto& p : exclusions) {
    if (text::ends_with(p, "/**") && glob::matches(p, probe)) return true;
  }
  return false;
}

}  // namespace detail

/// Loads a checked-out tree or a tar/tar.gz/zip archive. Excluded paths are
/// skipped; symlinks are not followed.
inline RepoSnapshot load_snapshot(const std::filesystem::path& root,
                                  const std::vector<std::string>& exclusions = glob::default_exclusions()) {
  namespace fs = std::filesystem;
  std::error_code ec;
  auto status = fs::status(root, ec);
  if (ec || !fs::exists(status)) fail(ErrorKind::Io, "snapshot root not readable: " + root.string());

  std::vector<FileRecord> records;
  std::string root_id = root.filename().string();

  if (fs::is_regular_file(status)) {
    for (auto& entry : archive::read_archive(root.string())) {
      auto path = normalize_path(entry.path);
      if (glob::matches_any(exclusions, path)) continue;
      records.push_back(FileRecord::make(path, entry.data));
    }
    return RepoSnapshot(root_id, std::move(records));
  }
  if (!fs::is_directory(status)) fail(ErrorKind::Io, "snapshot root is neither directory nor archive: " + root.string());

  fs::recursive_directory_iterator it(root, fs::directory_options::none, ec);
  if (ec) fail(ErrorKind::Io, "cannot read directory " + root.string() + ": " + ec.message());
  for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) fail(ErrorKind::Io, "cannot traverse " + root.string() + ": " + ec.message());
    const auto& entry = *it;
    auto rel = fs::relative(entry.path(), root).generic_string();
    auto link_status = entry.symlink_status();
    if (fs::is_symlink(link_status)) continue;
    if (fs::is_directory(link_status)) {
      if (detail::prune_directory(exclusions, rel)) it.disable_recursion_pending();
      continue;
    }
    if (!fs::is_regular_file(link_status)) continue;
    if (glob::matches_any(exclusions, rel)) continue;
    records.push_back(FileRecord::make(normalize_path(rel), archive::read_file_bytes(entry.path().string())));
  }
  return RepoSnapshot(root_id, std::move(records));
}

inline std::optional<std::string> find_readme(const RepoSnapshot& snapshot) {
  if (!snapshot.readme()) return std::nullopt;
  return snapshot.at(*snapshot.readme()).content;
}

struct NumberedLine {
  int number = 0;
  std::string text;
  bool operator==(const NumberedLine&) const = default;
};

/// Content with 1-based line numbers. render() is the canonical form fed to
/// the editor: `<n> <text>` per line, final newline kept iff the source had one.
struct NumberedText {
  std::vector<NumberedLine> lines;
  bool final_newline = false;

  std::string render() const {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (i) out.push_back('\n');
      out += std::to_string(lines[i].number);
      out.push_back(' ');
      out += lines[i].text;
    }
    if (final_newline && !lines.empty()) out.push_back('\n');
    return out;
  }
};

inline NumberedText number_lines(std::string_view content) {
  NumberedText out;
  auto view = text::to_lines(content);
  out.final_newline = view.final_newline;
  out.lines.reserve(view.lines.size());
  int n = 1;
  for (auto& line : view.lines) out.lines.push_back({n++, std::move(line)});
  return out;
}

}  // namespace swefixer
