#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "swefixer/error.hpp"
#include "swefixer/text.hpp"

namespace swefixer::diff {

inline constexpr int kDefaultContext = 3;

enum class OpKind { Equal, Delete, Insert };

struct Op {
  OpKind kind;
  std::size_t a;  // index into the old sequence (Equal/Delete)
  std::size_t b;  // index into the new sequence (Equal/Insert)
};

/// Minimal edit script between two id sequences (Myers O(ND)). Within each
/// changed region all deletions precede all insertions.
inline std::vector<Op> myers(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::size_t prefix = 0;
  while (prefix < n && prefix < m && a[prefix] == b[prefix]) ++prefix;
  std::size_t suffix = 0;
  while (suffix < n - prefix && suffix < m - prefix && a[n - 1 - suffix] == b[m - 1 - suffix]) ++suffix;

  const long N = static_cast<long>(n - prefix - suffix);
  const long M = static_cast<long>(m - prefix - suffix);
  auto A = [&](long i) { return a[prefix + static_cast<std::size_t>(i)]; };
  auto B = [&](long j) { return b[prefix + static_cast<std::size_t>(j)]; };

  // trace[d] holds V restricted to diagonals -d..d after step d.
  std::vector<std::vector<long>> trace;
  const long max = N + M;
  std::vector<long> v(static_cast<std::size_t>(2 * max + 3), 0);
  const long off = max + 1;
  long final_d = 0;
  if (max > 0) {
    for (long d = 0; d <= max; ++d) {
      bool done = false;
      for (long k = -d; k <= d; k += 2) {
        long x;
        if (k == -d || (k != d && v[static_cast<std::size_t>(off + k - 1)] < v[static_cast<std::size_t>(off + k + 1)])) {
          x = v[static_cast<std::size_t>(off + k + 1)];
        } else {
          x = v[static_cast<std::size_t>(off + k - 1)] + 1;
        }
        long y = x - k;
        while (x < N && y < M && A(x) == B(y)) {
          ++x;
          ++y;
        }
        v[static_cast<std::size_t>(off + k)] = x;
        if (x >= N && y >= M) done = true;
      }
      trace.emplace_back(v.begin() + (off - d), v.begin() + (off + d + 1));
      if (done) {
        final_d = d;
        break;
      }
    }
  }

  // Backtrack into a reversed list of (kind) steps over the trimmed middle.
  std::vector<OpKind> steps;
  long x = N, y = M;
  for (long d = final_d; d > 0; --d) {
    const auto& prev = trace[static_cast<std::size_t>(d - 1)];
    auto at = [&](long k) { return prev[static_cast<std::size_t>(k + (d - 1))]; };
    long k = x - y;
    long prev_k;
    if (k == -d || (k != d && at(k - 1) < at(k + 1))) {
      prev_k = k + 1;
    } else {
      prev_k = k - 1;
    }
    long prev_x = at(prev_k);
    long prev_y = prev_x - prev_k;
    while (x > prev_x && y > prev_y) {
      steps.push_back(OpKind::Equal);
      --x;
      --y;
    }
    steps.push_back(x == prev_x ? OpKind::Insert : OpKind::Delete);
    x = prev_x;
    y = prev_y;
  }
  while (x > 0 && y > 0) {
    steps.push_back(OpKind::Equal);
    --x;
    --y;
  }
  std::reverse(steps.begin(), steps.end());

  std::vector<Op> ops;
  ops.reserve(prefix + steps.size() + suffix);
  for (std::size_t i = 0; i < prefix; ++i) ops.push_back({OpKind::Equal, i, i});
  std::size_t ai = prefix, bi = prefix;
  std::size_t s = 0;
  while (s < steps.size()) {
    if (steps[s] == OpKind::Equal) {
      ops.push_back({OpKind::Equal, ai++, bi++});
      ++s;
      continue;
    }
    std::size_t dels = 0, ins = 0;
    while (s < steps.size() && steps[s] != OpKind::Equal) {
      (steps[s] == OpKind::Delete ? dels : ins)++;
      ++s;
    }
    for (std::size_t i = 0; i < dels; ++i) ops.push_back({OpKind::Delete, ai++, bi});
    for (std::size_t i = 0; i < ins; ++i) ops.push_back({OpKind::Insert, ai, bi++});
  }
  for (std::size_t i = 0; i < suffix; ++i) ops.push_back({OpKind::Equal, ai++, bi++});
  return ops;
}

struct HunkLine {
  char op = ' ';  // ' ', '-', '+'
  std::string text;
  bool no_newline = false;  // followed by "\ No newline at end of file"
  bool operator==(const HunkLine&) const = default;
};

struct Hunk {
  int old_start = 0;
  int old_count = 0;
  int new_start = 0;
  int new_count = 0;
  std::string section;  // text after the closing @@, if any
  std::vector<HunkLine> lines;

  std::vector<const HunkLine*> pre_image() const {
    std::vector<const HunkLine*> out;
    for (const auto& l : lines) {
      if (l.op != '+') out.push_back(&l);
    }
    return out;
  }
  std::vector<const HunkLine*> post_image() const {
    std::vector<const HunkLine*> out;
    for (const auto& l : lines) {
      if (l.op != '-') out.push_back(&l);
    }
    return out;
  }
};

struct FileDiff {
  std::string old_path;  // empty for /dev/null
  std::string new_path;  // empty for /dev/null
  bool is_new = false;
  bool is_deleted = false;
  bool is_binary = false;
  std::vector<Hunk> hunks;

  const std::string& path() const { return is_deleted || new_path.empty() ? old_path : new_path; }

  std::size_t added() const {
    std::size_t n = 0;
    for (const auto& h : hunks) {
      for (const auto& l : h.lines) n += l.op == '+';
    }
    return n;
  }
  std::size_t removed() const {
    std::size_t n = 0;
    for (const auto& h : hunks) {
      for (const auto& l : h.lines) n += l.op == '-';
    }
    return n;
  }
};

struct UnifiedPatch {
  std::vector<FileDiff> files;

  bool empty() const { return files.empty(); }
  const FileDiff* find(std::string_view path) const {
    for (const auto& f : files) {
      if (f.path() == path) return &f;
    }
    return nullptr;
  }
};

namespace detail {

inline std::string range(int start, int count) {
  if (count == 1) return std::to_string(start);
  return std::to_string(start) + "," + std::to_string(count);
}

}  // namespace detail

inline std::string render_hunk_header(const Hunk& h) {
  std::string out = "@@ -" + detail::range(h.old_start, h.old_count) + " +" + detail::range(h.new_start, h.new_count) + " @@";
  if (!h.section.empty()) out += " " + h.section;
  return out;
}

/// git-style text: `diff --git`, `---`/`+++` headers, hunks, and the
/// `\ No newline at end of file` marker where a side lacks a final newline.
inline std::string render(const UnifiedPatch& patch) {
  std::string out;
  for (const auto& f : patch.files) {
    const auto& a = f.old_path.empty() ? f.new_path : f.old_path;
    const auto& b = f.new_path.empty() ? f.old_path : f.new_path;
    out += "diff --git a/" + a + " b/" + b + "\n";
    if (f.is_new) out += "new file mode 100644\n";
    if (f.is_deleted) out += "deleted file mode 100644\n";
    out += "--- " + (f.is_new ? std::string("/dev/null") : "a/" + a) + "\n";
    out += "+++ " + (f.is_deleted ? std::string("/dev/null") : "b/" + b) + "\n";
    for (const auto& h : f.hunks) {
      out += render_hunk_header(h) + "\n";
      for (const auto& l : h.lines) {
        out.push_back(l.op);
        out += l.text;
        out.push_back('\n');
        if (l.no_newline) out += "\\ No newline at end of file\n";
      }
    }
  }
  return out;
}

/// Hunks turning `before` into `after` with `context` lines around each change;
/// changes separated by at most 2*context equal lines share a hunk.
inline std::vector<Hunk> make_hunks(const text::Lines& before, const text::Lines& after, int context = kDefaultContext) {
  // The final line's newline state is part of its identity.
  std::unordered_map<std::string, std::uint32_t> ids;
  auto intern = [&](const text::Lines& l) {
    std::vector<std::uint32_t> out;
    out.reserve(l.lines.size());
    for (std::size_t i = 0; i < l.lines.size(); ++i) {
      std::string key = l.lines[i];
      if (i + 1 == l.lines.size() && !l.final_newline) key += std::string("\0nonl", 5);
      out.push_back(ids.emplace(std::move(key), static_cast<std::uint32_t>(ids.size())).first->second);
    }
    return out;
  };
  auto a = intern(before);
  auto b = intern(after);
  auto ops = myers(a, b);

  struct Block {
    std::size_t op_begin, op_end;  // ops range of the change
  };
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < ops.size();) {
    if (ops[i].kind == OpKind::Equal) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < ops.size() && ops[j].kind != OpKind::Equal) ++j;
    blocks.push_back({i, j});
    i = j;
  }

  const std::size_t ctx = static_cast<std::size_t>(context);
  std::vector<Hunk> hunks;
  std::size_t bi = 0;
  while (bi < blocks.size()) {
    std::size_t bj = bi;
    while (bj + 1 < blocks.size() && blocks[bj + 1].op_begin - blocks[bj].op_end <= 2 * ctx) ++bj;
    std::size_t begin = blocks[bi].op_begin >= ctx ? blocks[bi].op_begin - ctx : 0;
    std::size_t end = std::min(ops.size(), blocks[bj].op_end + ctx);
    Hunk h;
    for (std::size_t k = begin; k < end; ++k) {
      const auto& op = ops[k];
      HunkLine line;
      if (op.kind == OpKind::Equal) {
        line.op = ' ';
        line.text = before.lines[op.a];
        line.no_newline = op.a + 1 == before.lines.size() && !before.final_newline;
        ++h.old_count;
        ++h.new_count;
      } else if (op.kind == OpKind::Delete) {
        line.op = '-';
        line.text = before.lines[op.a];
        line.no_newline = op.a + 1 == before.lines.size() && !before.final_newline;
        ++h.old_count;
      } else {
        line.op = '+';
        line.text = after.lines[op.b];
        line.no_newline = op.b + 1 == after.lines.size() && !after.final_newline;
        ++h.new_count;
      }
      h.lines.push_back(std::move(line));
    }
    const auto& first = ops[begin];
    h.old_start = static_cast<int>(first.a) + (h.old_count > 0 ? 1 : 0);
    h.new_start = static_cast<int>(first.b) + (h.new_count > 0 ? 1 : 0);
    hunks.push_back(std::move(h));
    bi = bj + 1;
  }
  return hunks;
}

inline FileDiff make_file_diff(const std::string& path, std::string_view before, std::string_view after,
                               int context = kDefaultContext) {
  FileDiff f;
  f.old_path = path;
  f.new_path = path;
  f.hunks = make_hunks(text::to_lines(before), text::to_lines(after), context);
  return f;
}

// ---- parsing -----------------------------------------------------------------

namespace detail {

inline std::string unquote_path(std::string_view p) {
  if (p.size() >= 2 && p.front() == '"' && p.back() == '"') {
    std::string out;
    for (std::size_t i = 1; i + 1 < p.size(); ++i) {
      if (p[i] == '\\' && i + 2 < p.size()) {
        char c = p[++i];
        switch (c) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          default:
            if (c >= '0' && c <= '7' && i + 2 < p.size()) {
              out.push_back(static_cast<char>((c - '0') * 64 + (p[i + 1] - '0') * 8 + (p[i + 2] - '0')));
              i += 2;
            } else {
              out.push_back(c);
            }
        }
      } else {
        out.push_back(p[i]);
      }
    }
    return out;
  }
  return std::string(p);
}

// Path from a ---/+++ line: timestamps after a tab dropped, a/ b/ stripped.
inline std::string header_path(std::string_view rest) {
  auto tab = rest.find('\t');
  if (tab != std::string_view::npos) rest = rest.substr(0, tab);
  while (!rest.empty() && rest.back() == ' ') rest.remove_suffix(1);
  std::string p = unquote_path(rest);
  if (p == "/dev/null") return {};
  if (text::starts_with(p, "a/") || text::starts_with(p, "b/")) p.erase(0, 2);
  return p;
}

inline bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && out >= 0;
}

inline bool parse_range(std::string_view s, int& start, int& count) {
  auto comma = s.find(',');
  if (comma == std::string_view::npos) {
    count = 1;
    return parse_int(s, start);
  }
  return parse_int(s.substr(0, comma), start) && parse_int(s.substr(comma + 1), count);
}

inline Hunk parse_hunk_header(std::string_view line, std::size_t line_no) {
  auto bad = [&] { fail(ErrorKind::Parse, "malformed hunk header at line " + std::to_string(line_no) + ": " + std::string(line)); };
  if (!text::starts_with(line, "@@ -")) bad();
  auto close = line.find(" @@", 4);
  if (close == std::string_view::npos) bad();
  auto ranges = line.substr(4, close - 4);
  auto plus = ranges.find(" +");
  if (plus == std::string_view::npos) bad();
  Hunk h;
  if (!parse_range(ranges.substr(0, plus), h.old_start, h.old_count) ||
      !parse_range(ranges.substr(plus + 2), h.new_start, h.new_count)) {
    bad();
  }
  auto section = line.substr(close + 3);
  if (!section.empty() && section.front() == ' ') section.remove_prefix(1);
  h.section = std::string(section);
  return h;
}

}  // namespace detail

/// Parses git-style unified diffs. Text outside file sections (commit
/// messages, `index` lines) is skipped; hunk bodies must match their headers.
inline UnifiedPatch parse_unified_patch(std::string_view text_in) {
  UnifiedPatch patch;
  auto lines = text::split(text_in);
  if (!lines.empty() && lines.back().empty()) lines.pop_back();

  FileDiff* current = nullptr;
  bool current_has_headers = false;
  auto start_file = [&]() -> FileDiff& {
    patch.files.emplace_back();
    current = &patch.files.back();
    current_has_headers = false;
    return *current;
  };

  std::size_t i = 0;
  while (i < lines.size()) {
    const std::string& line = lines[i];
    if (text::starts_with(line, "diff --git ")) {
      auto& f = start_file();
      std::string_view rest = std::string_view(line).substr(11);
      auto sep = rest.find(" b/");
      if (sep != std::string_view::npos) {
        f.old_path = detail::header_path(rest.substr(0, sep));
        f.new_path = detail::header_path(rest.substr(sep + 1));
      }
      ++i;
      continue;
    }
    if (text::starts_with(line, "--- ") && i + 1 < lines.size() && text::starts_with(lines[i + 1], "+++ ")) {
      if (!current || current_has_headers || !current->hunks.empty()) start_file();
      current->old_path = detail::header_path(std::string_view(line).substr(4));
      current->new_path = detail::header_path(std::string_view(lines[i + 1]).substr(4));
      if (current->old_path.empty()) current->is_new = true;
      if (current->new_path.empty()) current->is_deleted = true;
      current_has_headers = true;
      i += 2;
      continue;
    }
    if (current && current->hunks.empty() && !current_has_headers) {
      if (text::starts_with(line, "new file mode")) current->is_new = true;
      if (text::starts_with(line, "deleted file mode")) current->is_deleted = true;
      if (text::starts_with(line, "Binary files") || line == "GIT binary patch") current->is_binary = true;
      if (text::starts_with(line, "rename from ")) current->old_path = line.substr(12);
      if (text::starts_with(line, "rename to ")) current->new_path = line.substr(10);
    }
    if (text::starts_with(line, "@@")) {
      if (!current || !current_has_headers) {
        fail(ErrorKind::Parse, "hunk without file header at line " + std::to_string(i + 1));
      }
      Hunk h = detail::parse_hunk_header(line, i + 1);
      std::size_t header_line = i + 1;
      ++i;
      int old_left = h.old_count, new_left = h.new_count;
      while (old_left > 0 || new_left > 0) {
        if (i >= lines.size()) {
          fail(ErrorKind::Parse, "hunk at line " + std::to_string(header_line) + " has fewer lines than its header claims");
        }
        const std::string& body = lines[i];
        char op = body.empty() ? ' ' : body[0];
        if (op == '\\') {
          if (!h.lines.empty()) h.lines.back().no_newline = true;
          ++i;
          continue;
        }
        if (op != ' ' && op != '-' && op != '+') {
          fail(ErrorKind::Parse, "hunk at line " + std::to_string(header_line) + " has fewer lines than its header claims");
        }
        if ((op == ' ' && (old_left == 0 || new_left == 0)) || (op == '-' && old_left == 0) ||
            (op == '+' && new_left == 0)) {
          fail(ErrorKind::Parse, "hunk at line " + std::to_string(header_line) + " is inconsistent with its header");
        }
        HunkLine hl{op, body.empty() ? std::string() : body.substr(1), false};
        if (op != '+') --old_left;
        if (op != '-') --new_left;
        h.lines.push_back(std::move(hl));
        ++i;
      }
      while (i < lines.size() && !lines[i].empty() && lines[i][0] == '\\') {
        if (!h.lines.empty()) h.lines.back().no_newline = true;
        ++i;
      }
      if (i < lines.size() && !lines[i].empty()) {
        const std::string& next = lines[i];
        bool file_header = text::starts_with(next, "--- ") && i + 1 < lines.size() && text::starts_with(lines[i + 1], "+++ ");
        if (!file_header && (next[0] == ' ' || next[0] == '+' || next[0] == '-')) {
          fail(ErrorKind::Parse, "hunk at line " + std::to_string(header_line) + " has more lines than its header claims");
        }
      }
      if (!current->hunks.empty()) {
        const auto& prev = current->hunks.back();
        if (h.old_start < prev.old_start + prev.old_count) {
          fail(ErrorKind::Parse, "overlapping or unordered hunks at line " + std::to_string(header_line));
        }
      }
      current->hunks.push_back(std::move(h));
      continue;
    }
    ++i;
  }
  std::erase_if(patch.files, [](const FileDiff& f) { return f.old_path.empty() && f.new_path.empty(); });
  return patch;
}

// ---- application -----------------------------------------------------------

/// Applies one file's hunks at their exact positions.
inline text::Lines apply_file_diff(const text::Lines& before, const FileDiff& diff) {
  text::Lines out;
  out.final_newline = before.final_newline;
  std::size_t cursor = 0;  // next unconsumed old line (0-based)
  const std::string& path = diff.path();
  for (const auto& h : diff.hunks) {
    std::size_t start = h.old_count > 0 ? static_cast<std::size_t>(h.old_start - 1) : static_cast<std::size_t>(h.old_start);
    if (h.old_count > 0 && h.old_start < 1) fail(ErrorKind::Apply, path + ": hunk starts before line 1");
    if (start < cursor || start > before.lines.size()) fail(ErrorKind::Apply, path + ": hunk out of range");
    while (cursor < start) out.lines.push_back(before.lines[cursor++]);
    std::optional<bool> end_newline;
    for (const auto& l : h.lines) {
      if (l.op != '+') {
        if (cursor >= before.lines.size() || before.lines[cursor] != l.text) {
          fail(ErrorKind::Apply, path + ": hunk does not match at line " + std::to_string(cursor + 1));
        }
        bool is_last = cursor + 1 == before.lines.size();
        if (is_last && l.no_newline == before.final_newline) {
          fail(ErrorKind::Apply, path + ": end-of-file newline state does not match");
        }
        if (!is_last && l.no_newline) fail(ErrorKind::Apply, path + ": no-newline marker on an interior line");
        ++cursor;
      }
      if (l.op != '-') {
        out.lines.push_back(l.text);
      }
    }
    if (cursor == before.lines.size()) {
      const HunkLine* last_new = nullptr;
      for (const auto& l : h.lines) {
        if (l.op != '-') last_new = &l;
      }
      end_newline = last_new ? !last_new->no_newline : true;
      out.final_newline = *end_newline;
    }
  }
  while (cursor < before.lines.size()) out.lines.push_back(before.lines[cursor++]);
  if (out.lines.empty()) out.final_newline = false;
  return out;
}

inline std::string apply_file_diff(std::string_view before, const FileDiff& diff) {
  return apply_file_diff(text::to_lines(before), diff).str();
}

}  // namespace swefixer::diff
