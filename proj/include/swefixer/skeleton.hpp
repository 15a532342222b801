#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "swefixer/python/parser.hpp"
#include "swefixer/repo.hpp"
#include "swefixer/text.hpp"

namespace swefixer {

enum class DocItemKind { Class, Function, Method };

inline std::string_view to_string(DocItemKind kind) {
  switch (kind) {
    case DocItemKind::Class: return "class";
    case DocItemKind::Function: return "function";
    case DocItemKind::Method: return "method";
  }
  return "function";
}

/// One declaration in a file skeleton. `signature` holds the decorator and
/// header lines with the declaration's own indentation removed; `indent` is
/// that indentation. Body lines are kept verbatim.
struct DocItem {
  DocItemKind kind = DocItemKind::Function;
  std::string indent;
  std::string signature;
  std::optional<std::string> docstring;  // classes only
  std::string docstring_indent;
  std::vector<std::string> body_head;
  std::vector<std::string> body_tail;
  bool elided = false;
};

struct FileDoc {
  std::string path;
  std::optional<std::string> module_docstring;
  std::vector<DocItem> items;
  std::vector<std::string> raw_head;  // fallback only: leading raw lines
  std::string rendered;
  bool fallback = false;
};

inline constexpr std::size_t kSkeletonBodyLines = 5;
inline constexpr std::size_t kFallbackLines = 20;

/// Canonical text form: path line, then (blank-line separated) the module
/// docstring and each top-level declaration with its members.
inline std::string render_skeleton(const FileDoc& doc) {
  std::string out = doc.path + "\n";
  if (doc.fallback) {
    out += "\n";
    for (const auto& line : doc.raw_head) out += line + "\n";
    return out;
  }
  if (doc.module_docstring) out += "\n\"\"\"" + *doc.module_docstring + "\"\"\"\n";
  for (const auto& item : doc.items) {
    if (item.indent.empty()) out += "\n";
    for (const auto& line : text::split(item.signature)) out += item.indent + line + "\n";
    if (item.docstring) out += item.docstring_indent + "\"\"\"" + *item.docstring + "\"\"\"\n";
    for (const auto& line : item.body_head) out += line + "\n";
    if (item.elided) {
      const auto& first = item.body_head.front();
      out += first.substr(0, text::leading_spaces(first)) + "...\n";
    }
    for (const auto& line : item.body_tail) out += line + "\n";
  }
  return out;
}

namespace detail {

class SkeletonBuilder {
 public:
  SkeletonBuilder(const FileRecord& file, const std::vector<std::string>& lines)
      : file_(file), lines_(lines) {}

  FileDoc build(const python::Module& module) {
    FileDoc doc;
    doc.path = file_.path;
    if (!module.body.empty() && module.body.front().kind == python::Stmt::Kind::Simple) {
      doc.module_docstring = module.body.front().string_value;
    }
    for (const auto& stmt : module.body) {
      if (stmt.kind == python::Stmt::Kind::Class) add_class(doc, stmt);
      if (stmt.kind == python::Stmt::Kind::Def) add_function(doc, stmt);
    }
    return doc;
  }

 private:
  std::string line(int n) const {
    return n >= 1 && static_cast<std::size_t>(n) <= lines_.size() ? lines_[static_cast<std::size_t>(n - 1)]
                                                                   : std::string();
  }

  std::string indent_at(const python::Stmt& s) const {
    auto l = line(s.first_line);
    return l.substr(0, std::min<std::size_t>(static_cast<std::size_t>(s.col), l.size()));
  }

  std::string signature(const python::Stmt& s, const std::string& indent) const {
    std::vector<std::string> out;
    for (int n = s.first_line; n <= s.header_end_line; ++n) {
      auto l = line(n);
      if (text::starts_with(l, indent)) l.erase(0, indent.size());
      out.push_back(std::move(l));
    }
    return text::join(out);
  }

  void add_class(FileDoc& doc, const python::Stmt& s) {
    DocItem item;
    item.kind = DocItemKind::Class;
    item.indent = indent_at(s);
    item.signature = signature(s, item.indent);
    if (!s.inline_body && !s.body.empty() && s.body.front().kind == python::Stmt::Kind::Simple &&
        s.body.front().string_value) {
      item.docstring = s.body.front().string_value;
      item.docstring_indent = indent_at(s.body.front());
    }
    doc.items.push_back(std::move(item));
    if (s.inline_body) return;
    for (const auto& member : s.body) {
      if (member.kind == python::Stmt::Kind::Def) {
        DocItem method;
        method.kind = DocItemKind::Method;
        method.indent = indent_at(member);
        method.signature = signature(member, method.indent);
        doc.items.push_back(std::move(method));
      } else if (member.kind == python::Stmt::Kind::Class) {
        add_class(doc, member);
      }
    }
  }

  void add_function(FileDoc& doc, const python::Stmt& s) {
    DocItem item;
    item.kind = DocItemKind::Function;
    item.indent = indent_at(s);
    item.signature = signature(s, item.indent);
    std::vector<std::string> body;
    if (!s.inline_body) {
      for (int n = s.header_end_line + 1; n <= s.last_line; ++n) body.push_back(line(n));
    }
    if (body.size() > 2 * kSkeletonBodyLines) {
      item.elided = true;
      item.body_head.assign(body.begin(), body.begin() + kSkeletonBodyLines);
      item.body_tail.assign(body.end() - kSkeletonBodyLines, body.end());
    } else {
      item.body_head = std::move(body);
    }
    doc.items.push_back(std::move(item));
  }

  const FileRecord& file_;
  const std::vector<std::string>& lines_;
};

}  // namespace detail

inline FileDoc fallback_skeleton(const FileRecord& file) {
  FileDoc doc;
  doc.path = file.path;
  doc.fallback = true;
  auto lines = text::to_lines(file.content).lines;
  if (lines.size() > kFallbackLines) lines.resize(kFallbackLines);
  doc.raw_head = std::move(lines);
  doc.rendered = render_skeleton(doc);
  return doc;
}

/// File documentation: module docstring, class headers with docstrings and
/// method signatures, and top-level functions with the first and last five
/// body lines. Unparseable input yields a raw-head fallback.
inline FileDoc extract_skeleton(const FileRecord& file) {
  if (file.is_binary || language_for(file.path) != std::optional<std::string>("python")) {
    return fallback_skeleton(file);
  }
  python::Module module;
  try {
    module = python::parse_module(file.content);
  } catch (const python::SyntaxError&) {
    return fallback_skeleton(file);
  }
  auto lines = text::to_lines(file.content).lines;
  FileDoc doc = detail::SkeletonBuilder(file, lines).build(module);
  doc.rendered = render_skeleton(doc);
  return doc;
}

}  // namespace swefixer
