#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "swefixer/python/tokenizer.hpp"

namespace swefixer::python {

/// Statement outline: enough structure for skeleton extraction. Only
/// definitions keep their bodies.
struct Stmt {
  enum class Kind { Simple, Def, Class, Compound };

  Kind kind = Kind::Simple;
  std::string name;
  int first_line = 0;       // first decorator line, or the statement's first line
  int header_line = 0;      // line of the `def`/`class` keyword
  int header_end_line = 0;  // line of the `:` closing the header
  int last_line = 0;
  int col = 0;              // column of the first token (decorator or keyword)
  bool inline_body = false; // `def f(): return 1`
  std::optional<std::string> string_value;  // set when the statement is a bare string literal
  std::vector<Stmt> body;
};

struct Module {
  std::vector<Stmt> body;
};

namespace detail {

inline const std::unordered_set<std::string_view>& hard_keywords() {
  static const std::unordered_set<std::string_view> kw = {
      "False", "None",   "True",    "and",      "as",     "assert", "async", "await",
      "break", "class",  "continue", "def",     "del",    "elif",   "else",  "except",
      "finally", "for",  "from",    "global",   "if",     "import", "in",    "is",
      "lambda", "nonlocal", "not",  "or",       "pass",   "raise",  "return", "try",
      "while", "with",   "yield"};
  return kw;
}

/// Raw body of a string token, prefix and quotes stripped, escapes untouched.
/// Returns nullopt for bytes and f-strings.
inline std::optional<std::string> string_body(std::string_view tok) {
  std::size_t i = 0;
  bool plain = true;
  while (i < tok.size() && tok[i] != '\'' && tok[i] != '"') {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(tok[i])));
    if (c == 'b' || c == 'f') plain = false;
    ++i;
  }
  if (!plain) return std::nullopt;
  auto rest = tok.substr(i);
  std::size_t q = (rest.size() >= 6 && rest[0] == rest[1] && rest[1] == rest[2]) ? 3 : 1;
  return std::string(rest.substr(q, rest.size() - 2 * q));
}

}  // namespace detail

/// Recursive-descent recogniser for the Python 3.10 grammar. Expressions are
/// validated but not materialised; statements are returned as an outline.
class Parser {
 public:
  explicit Parser(std::string_view src) : tokens_(tokenize(src)) {}

  Module parse_module() {
    Module m;
    while (peek().type != Tok::End) {
      if (peek().type == Tok::Newline) {
        advance();
        continue;
      }
      if (peek().type == Tok::Indent) error("unexpected indent");
      if (peek().type == Tok::Dedent) error("unindent does not match any outer indentation level");
      parse_statement(m.body);
    }
    return m;
  }

 private:
  // Expression shape, only as much as assignment-target checks need.
  enum class Ek { Name, Attr, Subscript, Tuple, List, Starred, Call, Literal, Other };

  struct Backtrack {};

  // ---- token helpers -------------------------------------------------
  const Token& peek(std::size_t k = 0) const {
    std::size_t i = std::min(pos_ + k, tokens_.size() - 1);
    return tokens_[i];
  }
  const Token& advance() {
    const Token& t = tokens_[pos_];
    if (t.type != Tok::Newline && t.type != Tok::Indent && t.type != Tok::Dedent && t.type != Tok::End) {
      last_line_ = t.end_line;
    }
    if (pos_ + 1 < tokens_.size()) ++pos_;
    return t;
  }
  bool is_op(std::string_view s, std::size_t k = 0) const {
    return peek(k).type == Tok::Op && peek(k).text == s;
  }
  bool is_kw(std::string_view s, std::size_t k = 0) const {
    return peek(k).type == Tok::Name && peek(k).text == s;
  }
  bool is_identifier(std::size_t k = 0) const {
    return peek(k).type == Tok::Name && !detail::hard_keywords().count(peek(k).text);
  }
  bool accept_op(std::string_view s) {
    if (!is_op(s)) return false;
    advance();
    return true;
  }
  bool accept_kw(std::string_view s) {
    if (!is_kw(s)) return false;
    advance();
    return true;
  }
  void expect_op(std::string_view s) {
    if (!accept_op(s)) error("expected '" + std::string(s) + "'");
  }
  void expect_kw(std::string_view s) {
    if (!accept_kw(s)) error("expected '" + std::string(s) + "'");
  }
  void expect_name() {
    if (!is_identifier()) error("expected name");
    advance();
  }
  void expect_newline() {
    if (peek().type != Tok::Newline) error("invalid syntax");
    advance();
  }

  [[noreturn]] void error(const std::string& message) const {
    if (backtracking_) throw Backtrack{};
    const auto& t = peek();
    throw SyntaxError(t.line, t.col, message);
  }

  // ---- statements ----------------------------------------------------
  void parse_statement(std::vector<Stmt>& out) {
    const Token& first = peek();
    if (is_op("@") || is_kw("def") || is_kw("class") ||
        (is_kw("async") && is_kw("def", 1))) {
      out.push_back(parse_definition());
      return;
    }
    if (is_kw("if") || is_kw("while") || is_kw("for") || is_kw("try") || is_kw("with") ||
        (is_kw("async") && (is_kw("for", 1) || is_kw("with", 1)))) {
      Stmt s;
      s.kind = Stmt::Kind::Compound;
      s.first_line = first.line;
      s.col = first.col;
      parse_compound(s);
      s.last_line = last_line_;
      out.push_back(std::move(s));
      return;
    }
    if (is_kw("match") && try_match_statement(out)) return;
    parse_simple_statements(out);
  }

  // simple_stmt (';' simple_stmt)* [';'] NEWLINE
  void parse_simple_statements(std::vector<Stmt>& out) {
    while (true) {
      Stmt s;
      s.first_line = peek().line;
      s.col = peek().col;
      s.string_value = bare_string_statement();
      parse_simple_statement();
      s.last_line = last_line_;
      out.push_back(std::move(s));
      if (accept_op(";")) {
        if (peek().type == Tok::Newline) break;
        continue;
      }
      break;
    }
    expect_newline();
  }

  std::optional<std::string> bare_string_statement() const {
    std::size_t k = 0;
    std::string value;
    while (peek(k).type == Tok::String) {
      auto body = detail::string_body(peek(k).text);
      if (!body) return std::nullopt;
      value += *body;
      ++k;
    }
    if (k == 0) return std::nullopt;
    if (peek(k).type == Tok::Newline || (peek(k).type == Tok::Op && peek(k).text == ";")) return value;
    return std::nullopt;
  }

  void parse_simple_statement() {
    if (accept_kw("pass") || accept_kw("break") || accept_kw("continue")) return;
    if (accept_kw("return")) {
      if (!at_simple_end()) parse_star_expressions();
      return;
    }
    if (accept_kw("raise")) {
      if (!at_simple_end()) {
        parse_expression();
        if (accept_kw("from")) parse_expression();
      }
      return;
    }
    if (accept_kw("global") || accept_kw("nonlocal")) {
      expect_name();
      while (accept_op(",")) expect_name();
      return;
    }
    if (accept_kw("del")) {
      parse_target_list();
      return;
    }
    if (accept_kw("assert")) {
      parse_expression();
      if (accept_op(",")) parse_expression();
      return;
    }
    if (is_kw("import")) return parse_import();
    if (is_kw("from")) return parse_from_import();
    if (is_kw("yield")) {
      parse_yield_expression();
      return;
    }
    parse_expression_statement();
  }

  bool at_simple_end() const { return peek().type == Tok::Newline || is_op(";"); }

  void parse_dotted_name() {
    expect_name();
    while (accept_op(".")) expect_name();
  }

  void parse_import() {
    expect_kw("import");
    do {
      parse_dotted_name();
      if (accept_kw("as")) expect_name();
    } while (accept_op(","));
  }

  void parse_from_import() {
    expect_kw("from");
    bool dots = false;
    while (is_op(".") || is_op("...")) {
      advance();
      dots = true;
    }
    if (!is_kw("import")) {
      parse_dotted_name();
    } else if (!dots) {
      error("invalid syntax");
    }
    expect_kw("import");
    if (accept_op("*")) return;
    bool paren = accept_op("(");
    do {
      if (paren && is_op(")")) break;
      expect_name();
      if (accept_kw("as")) expect_name();
    } while (accept_op(","));
    if (paren) {
      expect_op(")");
    } else if (pos_ > 0 && tokens_[pos_ - 1].type == Tok::Op && tokens_[pos_ - 1].text == ",") {
      error("trailing comma not allowed without surrounding parentheses");
    }
  }

  static bool is_augassign(const Token& t) {
    if (t.type != Tok::Op) return false;
    static const std::unordered_set<std::string_view> ops = {"+=", "-=", "*=", "/=", "//=", "%=", "@=",
                                                             "&=", "|=", "^=", ">>=", "<<=", "**="};
    return ops.count(t.text) > 0;
  }

  void parse_expression_statement() {
    Ek lhs = parse_star_expressions();
    if (is_op(":")) {
      if (lhs != Ek::Name && lhs != Ek::Attr && lhs != Ek::Subscript) {
        error("only single target (not tuple) can be annotated");
      }
      advance();
      parse_expression();
      if (accept_op("=")) parse_assignment_value();
      return;
    }
    if (is_augassign(peek())) {
      if (lhs != Ek::Name && lhs != Ek::Attr && lhs != Ek::Subscript) {
        error("illegal expression for augmented assignment");
      }
      advance();
      parse_assignment_value();
      return;
    }
    while (is_op("=")) {
      check_assign_target(lhs);
      advance();
      lhs = parse_assignment_value();
    }
  }

  void check_assign_target(Ek kind) {
    switch (kind) {
      case Ek::Name:
      case Ek::Attr:
      case Ek::Subscript:
      case Ek::Tuple:
      case Ek::List:
      case Ek::Starred:
        return;
      default:
        error("cannot assign to expression");
    }
  }

  Ek parse_assignment_value() {
    if (is_kw("yield")) {
      parse_yield_expression();
      return Ek::Other;
    }
    return parse_star_expressions();
  }

  void parse_yield_expression() {
    expect_kw("yield");
    if (accept_kw("from")) {
      parse_expression();
      return;
    }
    if (!at_simple_end() && !is_op(")") && !is_op("=") && !is_op("]") && !is_op("}")) {
      parse_star_expressions();
    }
  }

  // block: NEWLINE INDENT statements DEDENT | simple_stmts
  void parse_block(std::vector<Stmt>& out, bool& inline_body) {
    if (peek().type == Tok::Newline) {
      advance();
      if (peek().type != Tok::Indent) error("expected an indented block");
      advance();
      while (peek().type != Tok::Dedent && peek().type != Tok::End) {
        if (peek().type == Tok::Indent) error("unexpected indent");
        parse_statement(out);
      }
      if (peek().type == Tok::Dedent) advance();
      inline_body = false;
    } else {
      parse_simple_statements(out);
      inline_body = true;
    }
  }

  void parse_block() {
    std::vector<Stmt> ignored;
    bool inline_body = false;
    parse_block(ignored, inline_body);
  }

  Stmt parse_definition() {
    Stmt s;
    s.first_line = peek().line;
    s.col = peek().col;
    while (accept_op("@")) {
      parse_named_expression();
      expect_newline();
    }
    s.header_line = peek().line;
    if (accept_kw("class")) {
      s.kind = Stmt::Kind::Class;
      if (!is_identifier()) error("invalid syntax");
      s.name = std::string(advance().text);
      if (accept_op("(")) parse_call_arguments();
    } else {
      accept_kw("async");
      expect_kw("def");
      s.kind = Stmt::Kind::Def;
      if (!is_identifier()) error("invalid syntax");
      s.name = std::string(advance().text);
      expect_op("(");
      parse_parameters(")", true);
      expect_op(")");
      if (accept_op("->")) parse_expression();
    }
    s.header_end_line = peek().line;
    expect_op(":");
    parse_block(s.body, s.inline_body);
    s.last_line = last_line_;
    return s;
  }

  // Parameter list for `def` (annotations allowed) or `lambda`.
  void parse_parameters(std::string_view close, bool annotations) {
    bool seen_default = false, seen_star = false;
    while (!is_op(close)) {
      if (accept_op("/")) {
      } else if (accept_op("**")) {
        expect_name();
        if (annotations && accept_op(":")) parse_expression();
      } else if (accept_op("*")) {
        seen_star = true;
        if (is_identifier()) {
          advance();
          if (annotations && accept_op(":")) parse_expression();
        }
      } else {
        expect_name();
        if (annotations && accept_op(":")) parse_expression();
        if (accept_op("=")) {
          parse_expression();
          seen_default = true;
        } else if (seen_default && !seen_star) {
          error("non-default argument follows default argument");
        }
      }
      if (!accept_op(",")) break;
    }
  }

  void parse_compound(Stmt& s) {
    accept_kw("async");
    if (accept_kw("if")) {
      parse_named_expression();
      expect_op(":");
      parse_block();
      while (accept_kw("elif")) {
        parse_named_expression();
        expect_op(":");
        parse_block();
      }
      if (accept_kw("else")) {
        expect_op(":");
        parse_block();
      }
    } else if (accept_kw("while")) {
      parse_named_expression();
      expect_op(":");
      parse_block();
      if (accept_kw("else")) {
        expect_op(":");
        parse_block();
      }
    } else if (accept_kw("for")) {
      parse_target_list();
      expect_kw("in");
      parse_star_expressions();
      expect_op(":");
      parse_block();
      if (accept_kw("else")) {
        expect_op(":");
        parse_block();
      }
    } else if (accept_kw("try")) {
      expect_op(":");
      parse_block();
      bool handlers = false;
      while (accept_kw("except")) {
        handlers = true;
        if (!is_op(":")) {
          parse_expression();
          if (accept_kw("as")) expect_name();
        }
        expect_op(":");
        parse_block();
      }
      bool has_else = false;
      if (handlers && accept_kw("else")) {
        expect_op(":");
        parse_block();
        has_else = true;
      }
      bool has_finally = false;
      if (accept_kw("finally")) {
        expect_op(":");
        parse_block();
        has_finally = true;
      }
      if (!handlers && !has_finally) error("expected 'except' or 'finally' block");
      (void)has_else;
    } else if (accept_kw("with")) {
      parse_with_items();
      expect_op(":");
      parse_block();
    }
    (void)s;
  }

  void parse_with_items() {
    if (is_op("(")) {
      std::size_t save = pos_;
      int save_line = last_line_;
      bool saved_bt = backtracking_;
      backtracking_ = true;
      try {
        advance();
        do {
          if (is_op(")")) break;
          parse_with_item();
        } while (accept_op(","));
        expect_op(")");
        if (!is_op(":")) throw Backtrack{};
        backtracking_ = saved_bt;
        return;
      } catch (const Backtrack&) {
        backtracking_ = saved_bt;
        pos_ = save;
        last_line_ = save_line;
      }
    }
    do {
      parse_with_item();
    } while (accept_op(","));
  }

  void parse_with_item() {
    parse_expression();
    if (accept_kw("as")) parse_target();
  }

  // ---- match statement (soft keyword) --------------------------------
  bool try_match_statement(std::vector<Stmt>& out) {
    std::size_t save = pos_;
    int save_line = last_line_;
    bool saved_bt = backtracking_;
    Stmt s;
    s.kind = Stmt::Kind::Compound;
    s.first_line = peek().line;
    s.col = peek().col;
    backtracking_ = true;
    try {
      advance();
      parse_star_named_expressions();
      expect_op(":");
      if (peek().type != Tok::Newline || peek(1).type != Tok::Indent || !is_kw("case", 2)) throw Backtrack{};
    } catch (const Backtrack&) {
      backtracking_ = saved_bt;
      pos_ = save;
      last_line_ = save_line;
      return false;
    }
    backtracking_ = saved_bt;
    advance();  // NEWLINE
    advance();  // INDENT
    while (peek().type != Tok::Dedent && peek().type != Tok::End) {
      if (!accept_kw("case")) error("expected 'case'");
      parse_open_patterns();
      if (accept_kw("if")) parse_named_expression();
      expect_op(":");
      parse_block();
    }
    if (peek().type == Tok::Dedent) advance();
    s.last_line = last_line_;
    out.push_back(std::move(s));
    return true;
  }

  void parse_open_patterns() {
    do {
      if (is_op(":") || is_kw("if")) break;
      parse_maybe_star_pattern();
    } while (accept_op(","));
  }

  void parse_maybe_star_pattern() {
    if (accept_op("*")) {
      expect_name();
      return;
    }
    parse_pattern();
  }

  void parse_pattern() {
    parse_closed_pattern();
    while (accept_op("|")) parse_closed_pattern();
    if (accept_kw("as")) expect_name();
  }

  void parse_signed_number() {
    accept_op("-");
    if (peek().type != Tok::Number) error("invalid pattern");
    advance();
    if (is_op("+") || is_op("-")) {
      advance();
      if (peek().type != Tok::Number) error("invalid pattern");
      advance();
    }
  }

  void parse_closed_pattern() {
    if (is_op("-") || peek().type == Tok::Number) return parse_signed_number();
    if (peek().type == Tok::String) {
      while (peek().type == Tok::String) advance();
      return;
    }
    if (accept_kw("None") || accept_kw("True") || accept_kw("False")) return;
    if (is_identifier()) {
      advance();
      while (accept_op(".")) expect_name();
      if (accept_op("(")) {
        while (!is_op(")")) {
          if (is_identifier() && is_op("=", 1)) {
            advance();
            advance();
          }
          parse_pattern();
          if (!accept_op(",")) break;
        }
        expect_op(")");
      }
      return;
    }
    if (accept_op("(")) {
      while (!is_op(")")) {
        parse_maybe_star_pattern();
        if (!accept_op(",")) break;
      }
      expect_op(")");
      return;
    }
    if (accept_op("[")) {
      while (!is_op("]")) {
        parse_maybe_star_pattern();
        if (!accept_op(",")) break;
      }
      expect_op("]");
      return;
    }
    if (accept_op("{")) {
      while (!is_op("}")) {
        if (accept_op("**")) {
          expect_name();
        } else {
          if (is_op("-") || peek().type == Tok::Number) {
            parse_signed_number();
          } else if (peek().type == Tok::String) {
            while (peek().type == Tok::String) advance();
          } else if (accept_kw("None") || accept_kw("True") || accept_kw("False")) {
          } else {
            expect_name();
            if (!is_op(".")) error("invalid mapping pattern key");
            while (accept_op(".")) expect_name();
          }
          expect_op(":");
          parse_pattern();
        }
        if (!accept_op(",")) break;
      }
      expect_op("}");
      return;
    }
    error("invalid pattern");
  }

  // ---- expressions ---------------------------------------------------

  // Targets for `for`, `del`, comprehensions: star_target (',' star_target)* [',']
  Ek parse_target_list() {
    Ek first = parse_target();
    bool tuple = false;
    while (accept_op(",")) {
      tuple = true;
      if (is_kw("in") || is_op("=") || at_simple_end() || is_op(":")) break;
      parse_target();
    }
    return tuple ? Ek::Tuple : first;
  }

  Ek parse_target() {
    if (accept_op("*")) {
      parse_bitwise_or();
      return Ek::Starred;
    }
    return parse_bitwise_or();
  }

  bool starts_expression() const {
    const auto& t = peek();
    switch (t.type) {
      case Tok::Name:
        return !detail::hard_keywords().count(t.text) || t.text == "None" || t.text == "True" ||
               t.text == "False" || t.text == "not" || t.text == "lambda" || t.text == "await";
      case Tok::Number:
      case Tok::String:
        return true;
      case Tok::Op:
        return t.text == "(" || t.text == "[" || t.text == "{" || t.text == "-" || t.text == "+" ||
               t.text == "~" || t.text == "..." || t.text == "*";
      default:
        return false;
    }
  }

  // star_expressions: star_expression (',' star_expression)* [',']
  Ek parse_star_expressions() {
    Ek first = parse_star_expression();
    if (!is_op(",")) return first;
    while (accept_op(",")) {
      if (!starts_expression()) break;
      parse_star_expression();
    }
    return Ek::Tuple;
  }

  Ek parse_star_expression() {
    if (accept_op("*")) {
      parse_bitwise_or();
      return Ek::Starred;
    }
    return parse_expression();
  }

  Ek parse_star_named_expressions() {
    Ek first = parse_star_named_expression();
    if (!is_op(",")) return first;
    while (accept_op(",")) {
      if (!starts_expression()) break;
      parse_star_named_expression();
    }
    return Ek::Tuple;
  }

  Ek parse_star_named_expression() {
    if (accept_op("*")) {
      parse_bitwise_or();
      return Ek::Starred;
    }
    return parse_named_expression();
  }

  Ek parse_named_expression() {
    if (is_identifier() && is_op(":=", 1)) {
      advance();
      advance();
      parse_expression();
      return Ek::Other;
    }
    return parse_expression();
  }

  Ek parse_expression() {
    if (is_kw("lambda")) {
      advance();
      parse_parameters(":", false);
      expect_op(":");
      parse_expression();
      return Ek::Other;
    }
    Ek kind = parse_disjunction();
    if (accept_kw("if")) {
      parse_disjunction();
      expect_kw("else");
      parse_expression();
      return Ek::Other;
    }
    return kind;
  }

  Ek parse_disjunction() {
    Ek kind = parse_conjunction();
    while (accept_kw("or")) {
      parse_conjunction();
      kind = Ek::Other;
    }
    return kind;
  }

  Ek parse_conjunction() {
    Ek kind = parse_inversion();
    while (accept_kw("and")) {
      parse_inversion();
      kind = Ek::Other;
    }
    return kind;
  }

  Ek parse_inversion() {
    if (accept_kw("not")) {
      parse_inversion();
      return Ek::Other;
    }
    return parse_comparison();
  }

  bool accept_comparison_operator() {
    static const std::unordered_set<std::string_view> ops = {"==", "!=", "<", "<=", ">", ">="};
    if (peek().type == Tok::Op && ops.count(peek().text)) {
      advance();
      return true;
    }
    if (accept_kw("in")) return true;
    if (is_kw("not") && is_kw("in", 1)) {
      advance();
      advance();
      return true;
    }
    if (accept_kw("is")) {
      accept_kw("not");
      return true;
    }
    return false;
  }

  Ek parse_comparison() {
    Ek kind = parse_bitwise_or();
    while (accept_comparison_operator()) {
      parse_bitwise_or();
      kind = Ek::Other;
    }
    return kind;
  }

  template <typename Next>
  Ek parse_binary(std::initializer_list<std::string_view> ops, Next next) {
    Ek kind = (this->*next)();
    while (true) {
      bool matched = false;
      for (auto o : ops) {
        if (is_op(o)) {
          matched = true;
          break;
        }
      }
      if (!matched) break;
      advance();
      (this->*next)();
      kind = Ek::Other;
    }
    return kind;
  }

  Ek parse_bitwise_or() { return parse_binary({"|"}, &Parser::parse_bitwise_xor); }
  Ek parse_bitwise_xor() { return parse_binary({"^"}, &Parser::parse_bitwise_and); }
  Ek parse_bitwise_and() { return parse_binary({"&"}, &Parser::parse_shift); }
  Ek parse_shift() { return parse_binary({"<<", ">>"}, &Parser::parse_sum); }
  Ek parse_sum() { return parse_binary({"+", "-"}, &Parser::parse_term); }
  Ek parse_term() { return parse_binary({"*", "/", "//", "%", "@"}, &Parser::parse_factor); }

  Ek parse_factor() {
    if (is_op("+") || is_op("-") || is_op("~")) {
      advance();
      parse_factor();
      return Ek::Other;
    }
    return parse_power();
  }

  Ek parse_power() {
    Ek kind;
    if (accept_kw("await")) {
      parse_primary();
      kind = Ek::Other;
    } else {
      kind = parse_primary();
    }
    if (accept_op("**")) {
      parse_factor();
      return Ek::Other;
    }
    return kind;
  }

  Ek parse_primary() {
    Ek kind = parse_atom();
    while (true) {
      if (accept_op(".")) {
        expect_name();
        kind = Ek::Attr;
      } else if (accept_op("(")) {
        parse_call_arguments();
        kind = Ek::Call;
      } else if (accept_op("[")) {
        parse_slices();
        expect_op("]");
        kind = Ek::Subscript;
      } else {
        return kind;
      }
    }
  }

  // Consumes through the closing ')'.
  void parse_call_arguments() {
    while (!is_op(")")) {
      if (accept_op("**") || accept_op("*")) {
        parse_expression();
      } else if (is_identifier() && is_op("=", 1)) {
        advance();
        advance();
        parse_expression();
      } else {
        parse_named_expression();
        if (is_kw("for") || (is_kw("async") && is_kw("for", 1))) parse_comprehension_clauses();
      }
      if (!accept_op(",")) break;
    }
    expect_op(")");
  }

  void parse_slices() {
    do {
      if (is_op("]")) break;
      parse_slice();
    } while (accept_op(","));
  }

  void parse_slice() {
    if (!is_op(":")) {
      parse_named_expression();
      if (!is_op(":")) return;
    }
    expect_op(":");
    if (!is_op(":") && !is_op("]") && !is_op(",")) parse_expression();
    if (accept_op(":")) {
      if (!is_op("]") && !is_op(",")) parse_expression();
    }
  }

  void parse_comprehension_clauses() {
    while (is_kw("for") || (is_kw("async") && is_kw("for", 1))) {
      accept_kw("async");
      expect_kw("for");
      parse_target_list();
      expect_kw("in");
      parse_disjunction();
      while (accept_kw("if")) parse_disjunction();
    }
  }

  static bool is_bytes_literal(std::string_view tok) {
    for (char c : tok) {
      if (c == '\'' || c == '"') return false;
      if (c == 'b' || c == 'B') return true;
    }
    return false;
  }

  Ek parse_atom() {
    const Token& t = peek();
    switch (t.type) {
      case Tok::Number:
        advance();
        return Ek::Literal;
      case Tok::String: {
        bool bytes = is_bytes_literal(t.text);
        while (peek().type == Tok::String) {
          if (is_bytes_literal(peek().text) != bytes) error("cannot mix bytes and nonbytes literals");
          advance();
        }
        return Ek::Literal;
      }
      case Tok::Name:
        if (t.text == "None" || t.text == "True" || t.text == "False") {
          advance();
          return Ek::Literal;
        }
        if (detail::hard_keywords().count(t.text)) error("invalid syntax");
        advance();
        return Ek::Name;
      case Tok::Op:
        if (t.text == "...") {
          advance();
          return Ek::Literal;
        }
        if (t.text == "(") return parse_group();
        if (t.text == "[") return parse_list_display();
        if (t.text == "{") return parse_brace_display();
        break;
      default:
        break;
    }
    error("invalid syntax");
  }

  Ek parse_group() {
    expect_op("(");
    if (accept_op(")")) return Ek::Tuple;
    if (is_kw("yield")) {
      parse_yield_expression();
      expect_op(")");
      return Ek::Other;
    }
    Ek first = parse_star_named_expression();
    if (is_kw("for") || (is_kw("async") && is_kw("for", 1))) {
      parse_comprehension_clauses();
      expect_op(")");
      return Ek::Other;
    }
    if (is_op(",")) {
      while (accept_op(",")) {
        if (is_op(")")) break;
        parse_star_named_expression();
      }
      expect_op(")");
      return Ek::Tuple;
    }
    expect_op(")");
    return first;
  }

  Ek parse_list_display() {
    expect_op("[");
    if (accept_op("]")) return Ek::List;
    parse_star_named_expression();
    if (is_kw("for") || (is_kw("async") && is_kw("for", 1))) {
      parse_comprehension_clauses();
      expect_op("]");
      return Ek::Other;
    }
    while (accept_op(",")) {
      if (is_op("]")) break;
      parse_star_named_expression();
    }
    expect_op("]");
    return Ek::List;
  }

  Ek parse_brace_display() {
    expect_op("{");
    if (accept_op("}")) return Ek::Literal;
    bool dict = false;
    if (accept_op("**")) {
      parse_bitwise_or();
      dict = true;
    } else {
      parse_star_named_expression();
      if (accept_op(":")) {
        parse_expression();
        dict = true;
      }
    }
    if (is_kw("for") || (is_kw("async") && is_kw("for", 1))) {
      parse_comprehension_clauses();
      expect_op("}");
      return Ek::Other;
    }
    while (accept_op(",")) {
      if (is_op("}")) break;
      if (dict) {
        if (accept_op("**")) {
          parse_bitwise_or();
        } else {
          parse_expression();
          expect_op(":");
          parse_expression();
        }
      } else {
        parse_star_named_expression();
      }
    }
    expect_op("}");
    return Ek::Other;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  int last_line_ = 0;
  bool backtracking_ = false;
};

inline Module parse_module(std::string_view src) { return Parser(src).parse_module(); }

}  // namespace swefixer::python
