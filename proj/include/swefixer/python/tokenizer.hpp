#pragma once

#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "swefixer/error.hpp"

namespace swefixer::python {

enum class Tok { Name, Number, String, Op, Newline, Indent, Dedent, End };

struct Token {
  Tok type = Tok::End;
  std::string_view text;
  int line = 0;      // 1-based line of the first character
  int col = 0;       // 0-based byte column
  int end_line = 0;  // line of the last character (differs for multi-line strings)
};

/// Syntax failure with its 1-based line and 0-based column.
class SyntaxError : public Error {
 public:
  SyntaxError(int line, int col, const std::string& message)
      : Error(ErrorKind::Parse, "line " + std::to_string(line) + ":" + std::to_string(col) + ": " + message),
        line_(line),
        col_(col),
        detail_(message) {}

  int line() const noexcept { return line_; }
  int col() const noexcept { return col_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  int line_;
  int col_;
  std::string detail_;
};

namespace detail {

inline bool is_ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
inline bool is_ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

inline bool is_string_prefix(std::string_view word) {
  if (word.empty() || word.size() > 2) return false;
  std::string lower;
  for (char c : word) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  static constexpr std::array<std::string_view, 8> kPrefixes = {"r", "u", "f", "b", "br", "rb", "fr", "rf"};
  for (auto p : kPrefixes) {
    if (lower == p) return true;
  }
  return false;
}

}  // namespace detail

/// Python tokenizer producing NEWLINE/INDENT/DEDENT structure. Comments and
/// blank lines are dropped; newlines inside brackets are joined.
class Tokenizer {
 public:
  explicit Tokenizer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    indents_.assign(1, 0);
    bool at_line_start = true;
    while (pos_ < src_.size()) {
      if (at_line_start && brackets_.empty()) {
        if (!indentation()) break;
        at_line_start = false;
        continue;
      }
      unsigned char c = static_cast<unsigned char>(src_[pos_]);
      if (c == ' ' || c == '\t' || c == '\f' || c == '\r') {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else if (c == '\n') {
        if (brackets_.empty()) {
          push(Tok::Newline, pos_, 0);
          at_line_start = true;
        }
        ++pos_;
        new_line();
      } else if (c == '\\') {
        if (pos_ + 1 >= src_.size()) error(pos_, "unexpected EOF while parsing");
        if (src_[pos_ + 1] != '\n') error(pos_, "unexpected character after line continuation character");
        pos_ += 2;
        new_line();
      } else if (detail::is_ident_start(c)) {
        std::size_t start = pos_;
        while (pos_ < src_.size() && detail::is_ident_char(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == '\'' || src_[pos_] == '"') &&
            detail::is_string_prefix(src_.substr(start, pos_ - start))) {
          string_literal(start);
        } else {
          push(Tok::Name, start, pos_ - start);
        }
      } else if (std::isdigit(c) ||
                 (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        number();
      } else if (c == '\'' || c == '"') {
        string_literal(pos_);
      } else {
        op();
      }
    }
    if (!brackets_.empty()) {
      const auto& open = brackets_.back();
      throw SyntaxError(open.line, open.col, std::string("'") + open.ch + "' was never closed");
    }
    if (!tokens_.empty() && tokens_.back().type != Tok::Newline && tokens_.back().type != Tok::Dedent &&
        tokens_.back().type != Tok::Indent) {
      push(Tok::Newline, pos_, 0);
    }
    while (indents_.size() > 1) {
      indents_.pop_back();
      push(Tok::Dedent, pos_, 0);
    }
    push(Tok::End, pos_, 0);
    return std::move(tokens_);
  }

 private:
  struct Bracket {
    char ch;
    int line;
    int col;
  };

  // Returns false at EOF.
  bool indentation() {
    while (true) {
      int col = 0;
      while (pos_ < src_.size()) {
        char c = src_[pos_];
        if (c == ' ') {
          ++col;
        } else if (c == '\t') {
          col = (col / 8 + 1) * 8;
        } else if (c == '\f') {
          col = 0;
        } else if (c == '\r') {
        } else {
          break;
        }
        ++pos_;
      }
      if (pos_ >= src_.size()) return false;
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
        if (pos_ >= src_.size()) return false;
      }
      if (src_[pos_] == '\n') {
        ++pos_;
        new_line();
        continue;
      }
      if (col > indents_.back()) {
        indents_.push_back(col);
        push(Tok::Indent, pos_, 0);
      } else {
        while (col < indents_.back()) {
          indents_.pop_back();
          push(Tok::Dedent, pos_, 0);
        }
        if (col != indents_.back()) error(pos_, "unindent does not match any outer indentation level");
      }
      return true;
    }
  }

  void number() {
    std::size_t start = pos_;
    auto digits = [&](auto pred, const char* what) {
      std::size_t first = pos_;
      bool last_underscore = false;
      while (pos_ < src_.size()) {
        unsigned char c = static_cast<unsigned char>(src_[pos_]);
        if (c == '_') {
          if (last_underscore || pos_ == first) error(pos_, std::string("invalid ") + what);
          last_underscore = true;
        } else if (pred(c)) {
          last_underscore = false;
        } else {
          break;
        }
        ++pos_;
      }
      if (last_underscore) error(pos_, std::string("invalid ") + what);
      return pos_ > first;
    };
    auto dec = [](unsigned char c) { return std::isdigit(c) != 0; };
    if (src_[pos_] == '0' && pos_ + 1 < src_.size()) {
      char k = static_cast<char>(std::tolower(static_cast<unsigned char>(src_[pos_ + 1])));
      if (k == 'x' || k == 'o' || k == 'b') {
        pos_ += 2;
        if (pos_ < src_.size() && src_[pos_] == '_') ++pos_;
        bool ok = false;
        if (k == 'x') ok = digits([](unsigned char c) { return std::isxdigit(c) != 0; }, "hexadecimal literal");
        if (k == 'o') ok = digits([](unsigned char c) { return c >= '0' && c <= '7'; }, "octal literal");
        if (k == 'b') ok = digits([](unsigned char c) { return c == '0' || c == '1'; }, "binary literal");
        if (!ok) error(pos_, "invalid numeric literal");
        push(Tok::Number, start, pos_ - start);
        return;
      }
    }
    bool is_float = false;
    if (src_[pos_] != '.') digits(dec, "decimal literal");
    if (pos_ < src_.size() && src_[pos_] == '.') {
      is_float = true;
      ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) digits(dec, "decimal literal");
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        digits(dec, "decimal literal");
        is_float = true;
      } else {
        pos_ = save;
      }
    }
    bool imaginary = false;
    if (pos_ < src_.size() && (src_[pos_] == 'j' || src_[pos_] == 'J')) {
      ++pos_;
      imaginary = true;
    }
    auto body = src_.substr(start, pos_ - start);
    if (!is_float && !imaginary && body.size() > 1 && body[0] == '0' &&
        body.find_first_not_of("0_") != std::string_view::npos) {
      error(start, "leading zeros in decimal integer literals are not permitted");
    }
    push(Tok::Number, start, pos_ - start);
  }

  void string_literal(std::size_t start) {
    int start_line = line_;
    int start_col = static_cast<int>(start - line_start_);
    char quote = src_[pos_];
    bool triple = pos_ + 2 < src_.size() && src_[pos_ + 1] == quote && src_[pos_ + 2] == quote;
    pos_ += triple ? 3 : 1;
    while (true) {
      if (pos_ >= src_.size()) {
        throw SyntaxError(start_line, start_col,
                          triple ? "unterminated triple-quoted string literal" : "unterminated string literal");
      }
      char c = src_[pos_];
      if (c == '\\') {
        if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '\n') {
          pos_ += 2;
          new_line();
        } else {
          pos_ += 2;
        }
        continue;
      }
      if (c == '\n') {
        if (!triple) throw SyntaxError(start_line, start_col, "unterminated string literal");
        ++pos_;
        new_line();
        continue;
      }
      if (c == quote) {
        if (!triple) {
          ++pos_;
          break;
        }
        if (pos_ + 2 < src_.size() && src_[pos_ + 1] == quote && src_[pos_ + 2] == quote) {
          pos_ += 3;
          break;
        }
      }
      ++pos_;
    }
    Token tok;
    tok.type = Tok::String;
    tok.text = src_.substr(start, pos_ - start);
    tok.line = start_line;
    tok.col = start_col;
    tok.end_line = line_;
    tokens_.push_back(tok);
  }

  void op() {
    static constexpr std::array<std::string_view, 5> k3 = {"**=", "//=", "...", ">>=", "<<="};
    static constexpr std::array<std::string_view, 19> k2 = {"->", ":=", "**", "//", ">>", "<<", "<=",
                                                            ">=", "==", "!=", "+=", "-=", "*=", "/=",
                                                            "%=", "&=", "|=", "^=", "@="};
    auto rest = src_.substr(pos_);
    for (auto o : k3) {
      if (rest.substr(0, 3) == o) return emit_op(3);
    }
    for (auto o : k2) {
      if (rest.substr(0, 2) == o) return emit_op(2);
    }
    char c = src_[pos_];
    static constexpr std::string_view kSingle = "+-*/%@&|^~<>()[]{},:.;=";
    if (kSingle.find(c) == std::string_view::npos) {
      error(pos_, std::string("invalid character '") + c + "'");
    }
    if (c == '(' || c == '[' || c == '{') {
      brackets_.push_back({c, line_, static_cast<int>(pos_ - line_start_)});
    } else if (c == ')' || c == ']' || c == '}') {
      if (brackets_.empty()) error(pos_, std::string("unmatched '") + c + "'");
      char open = brackets_.back().ch;
      char want = open == '(' ? ')' : open == '[' ? ']' : '}';
      if (c != want) {
        error(pos_, std::string("closing parenthesis '") + c + "' does not match opening parenthesis '" + open + "'");
      }
      brackets_.pop_back();
    }
    emit_op(1);
  }

  void emit_op(std::size_t len) {
    push(Tok::Op, pos_, len);
    pos_ += len;
  }

  void push(Tok type, std::size_t start, std::size_t len) {
    Token tok;
    tok.type = type;
    tok.text = src_.substr(std::min(start, src_.size()), len);
    tok.line = line_;
    tok.col = static_cast<int>(start - line_start_);
    tok.end_line = line_;
    tokens_.push_back(tok);
  }

  void new_line() {
    ++line_;
    line_start_ = pos_;
  }

  [[noreturn]] void error(std::size_t at, const std::string& message) {
    throw SyntaxError(line_, static_cast<int>(at >= line_start_ ? at - line_start_ : 0), message);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::size_t line_start_ = 0;
  std::vector<int> indents_;
  std::vector<Bracket> brackets_;
  std::vector<Token> tokens_;
};

inline std::vector<Token> tokenize(std::string_view src) { return Tokenizer(src).run(); }

}  // namespace swefixer::python
