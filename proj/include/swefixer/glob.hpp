#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "swefixer/text.hpp"

namespace swefixer::glob {

namespace detail {

// Single path segment against a pattern segment: `*`, `?` and `[...]`.
inline bool match_segment(std::string_view pat, std::string_view s) {
  std::size_t p = 0, i = 0;
  std::size_t star_p = std::string_view::npos, star_i = 0;
  while (i < s.size()) {
    if (p < pat.size() && pat[p] == '*') {
      star_p = p++;
      star_i = i;
      continue;
    }
    if (p < pat.size() && pat[p] == '[') {
      auto close = pat.find(']', p + 1);
      if (close != std::string_view::npos) {
        auto set = pat.substr(p + 1, close - p - 1);
        bool negate = !set.empty() && (set[0] == '!' || set[0] == '^');
        if (negate) set.remove_prefix(1);
        bool hit = false;
        for (std::size_t k = 0; k < set.size(); ++k) {
          if (k + 2 < set.size() && set[k + 1] == '-') {
            if (s[i] >= set[k] && s[i] <= set[k + 2]) hit = true;
            k += 2;
          } else if (set[k] == s[i]) {
            hit = true;
          }
        }
        if (hit != negate) {
          p = close + 1;
          ++i;
          continue;
        }
      } else if (s[i] == '[') {
        ++p;
        ++i;
        continue;
      }
    } else if (p < pat.size() && (pat[p] == '?' || pat[p] == s[i])) {
      ++p;
      ++i;
      continue;
    }
    if (star_p == std::string_view::npos) return false;
    p = star_p + 1;
    i = ++star_i;
  }
  while (p < pat.size() && pat[p] == '*') ++p;
  return p == pat.size();
}

inline bool match_segments(const std::vector<std::string>& pat, std::size_t pi,
                           const std::vector<std::string>& path, std::size_t si) {
  while (pi < pat.size()) {
    if (pat[pi] == "**") {
      for (std::size_t k = si; k <= path.size(); ++k) {
        if (match_segments(pat, pi + 1, path, k)) return true;
      }
      return false;
    }
    if (si >= path.size() || !match_segment(pat[pi], path[si])) return false;
    ++pi;
    ++si;
  }
  return si == path.size();
}

}  // namespace detail

/// Matches a `/`-separated relative path against a glob where `**` spans any
/// number of whole segments (including none).
inline bool matches(std::string_view pattern, std::string_view path) {
  return detail::match_segments(text::split(pattern, '/'), 0, text::split(path, '/'), 0);
}

inline bool matches_any(const std::vector<std::string>& patterns, std::string_view path) {
  for (const auto& p : patterns) {
    if (matches(p, path)) return true;
  }
  return false;
}

inline std::vector<std::string> default_exclusions() {
  return {".git/**", "**/*.pyc", "**/node_modules/**"};
}

}  // namespace swefixer::glob
