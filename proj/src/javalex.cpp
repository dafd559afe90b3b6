#include "bdkit/javalex.hpp"

#include <algorithm>
#include <iterator>

#include "bdkit/error.hpp"

namespace bdkit::javalex {
namespace {

constexpr std::string_view kKeywords[] = {
    "abstract", "assert",     "boolean",   "break",      "byte",     "case",
    "catch",    "char",       "class",     "const",      "continue", "default",
    "do",       "double",     "else",      "enum",       "extends",  "final",
    "finally",  "float",      "for",       "goto",       "if",       "implements",
    "import",   "instanceof", "int",       "interface",  "long",     "native",
    "new",      "package",    "private",   "protected",  "public",   "return",
    "short",    "static",     "strictfp",  "super",      "switch",   "synchronized",
    "this",     "throw",      "throws",    "transient",  "try",      "void",
    "volatile", "while",      "var"};

// Longest first so a greedy prefix match picks the maximal operator.
constexpr std::string_view kOperators[] = {
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&",
    "||",   "==",  "!=",  "<=",  ">=",  "+=", "-=", "*=", "/=", "&=",
    "|=",   "^=",  "%=",  "<<",  ">>",  "+",  "-",  "*",  "/",  "%",
    "=",    "<",   ">",   "!",   "~",   "?",  ":",  "&",  "|"};

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_digit(char c) noexcept { return c >= '0' && c <= '9'; }

bool is_ident_start(char c) noexcept {
  const auto u = static_cast<unsigned char>(c);
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
         c == '$' || u >= 0x80;
}

bool is_ident_part(char c) noexcept { return is_ident_start(c) || is_digit(c); }

bool is_punct(char c) noexcept {
  switch (c) {
    case '(': case ')': case '{': case '}': case '[': case ']':
    case ';': case ',': case '.':
      return true;
    default:
      return false;
  }
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  // Returns false when an unterminated construct is found; err_offset_
  // then holds its start.
  bool run(std::vector<Token>& out) {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (is_space(c)) {
        if (c == '\n') ++line_;
        ++pos_;
        continue;
      }
      const std::size_t start = pos_;
      const std::size_t start_line = line_;
      TokenKind kind;
      if (c == '/' && peek(1) == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
        kind = TokenKind::comment;
      } else if (c == '/' && peek(1) == '*') {
        const auto end = src_.find("*/", pos_ + 2);
        if (end == std::string_view::npos) return fail(start, "unterminated comment");
        advance_to(end + 2);
        kind = TokenKind::comment;
      } else if (c == '"') {
        if (!scan_string()) return fail(start, "unterminated string literal");
        kind = TokenKind::string_literal;
      } else if (c == '\'') {
        if (!scan_quoted('\'')) return fail(start, "unterminated char literal");
        kind = TokenKind::char_literal;
      } else if (is_digit(c) || (c == '.' && is_digit(peek(1)))) {
        scan_number();
        kind = TokenKind::number;
      } else if (is_ident_start(c)) {
        while (pos_ < src_.size() && is_ident_part(src_[pos_])) ++pos_;
        kind = is_keyword(src_.substr(start, pos_ - start)) ? TokenKind::keyword
                                                           : TokenKind::identifier;
      } else if (src_.substr(pos_, 3) == "...") {
        pos_ += 3;
        kind = TokenKind::op;
      } else if (is_punct(c)) {
        ++pos_;
        kind = TokenKind::punctuation;
      } else {
        pos_ += operator_length();
        kind = TokenKind::op;
      }
      out.push_back(Token{std::string(src_.substr(start, pos_ - start)), kind,
                          start, start_line});
    }
    return true;
  }

  std::size_t err_offset() const noexcept { return err_offset_; }
  const char* err_what() const noexcept { return err_what_; }

 private:
  char peek(std::size_t ahead) const noexcept {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  void advance_to(std::size_t end) {
    line_ += static_cast<std::size_t>(
        std::count(src_.begin() + static_cast<std::ptrdiff_t>(pos_),
                   src_.begin() + static_cast<std::ptrdiff_t>(end), '\n'));
    pos_ = end;
  }

  bool fail(std::size_t at, const char* what) {
    err_offset_ = at;
    err_what_ = what;
    return false;
  }

  bool scan_string() {
    if (src_.substr(pos_, 3) == "\"\"\"") {
      std::size_t i = pos_ + 3;
      while (i < src_.size()) {
        if (src_[i] == '\\') {
          i += 2;
          continue;
        }
        if (src_.substr(i, 3) == "\"\"\"") {
          advance_to(i + 3);
          return true;
        }
        ++i;
      }
      return false;
    }
    return scan_quoted('"');
  }

  // Single-line literal delimited by `quote`, with backslash escapes.
  bool scan_quoted(char quote) {
    std::size_t i = pos_ + 1;
    while (i < src_.size()) {
      const char c = src_[i];
      if (c == '\\') {
        if (i + 1 < src_.size() && src_[i + 1] == '\n') return false;
        i += 2;
        continue;
      }
      if (c == '\n') return false;
      if (c == quote) {
        pos_ = i + 1;
        return true;
      }
      ++i;
    }
    return false;
  }

  void scan_number() {
    const std::size_t start = pos_;
    const bool hex = src_[pos_] == '0' && (peek(1) == 'x' || peek(1) == 'X');
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (is_ident_part(c) && static_cast<unsigned char>(c) < 0x80) {
        ++pos_;
      } else if (c == '.' && !(pos_ + 1 < src_.size() && src_[pos_ + 1] == '.')) {
        ++pos_;
      } else if ((c == '+' || c == '-') && pos_ > start) {
        const char prev = src_[pos_ - 1];
        const bool exponent = hex ? (prev == 'p' || prev == 'P')
                                  : (prev == 'e' || prev == 'E');
        if (!exponent) break;
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t operator_length() const noexcept {
    for (auto op : kOperators) {
      if (src_.substr(pos_, op.size()) == op) return op.size();
    }
    // '@', '^', '#', '\\' and anything else unknown: one byte.
    return 1;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t err_offset_ = 0;
  const char* err_what_ = "";
};

}  // namespace

std::string_view to_string(TokenKind kind) noexcept {
  switch (kind) {
    case TokenKind::identifier: return "identifier";
    case TokenKind::keyword: return "keyword";
    case TokenKind::number: return "number";
    case TokenKind::string_literal: return "string_literal";
    case TokenKind::char_literal: return "char_literal";
    case TokenKind::op: return "operator";
    case TokenKind::punctuation: return "punctuation";
    case TokenKind::comment: return "comment";
  }
  return "unknown";
}

bool is_keyword(std::string_view word) noexcept {
  return std::find(std::begin(kKeywords), std::end(kKeywords), word) != std::end(kKeywords);
}

std::vector<Token> lex(std::string_view code) {
  std::vector<Token> tokens;
  Lexer lexer(code);
  if (!lexer.run(tokens)) throw LexError(lexer.err_what(), lexer.err_offset());
  return tokens;
}

std::vector<Token> lex_prefix(std::string_view code) {
  std::vector<Token> tokens;
  Lexer lexer(code);
  lexer.run(tokens);
  return tokens;
}

std::size_t token_count(std::string_view code) { return lex(code).size(); }

std::vector<InjectionPoint> injection_points(std::string_view code) {
  return injection_points(code, lex(code));
}

std::vector<InjectionPoint> injection_points(std::string_view code,
                                             const std::vector<Token>& tokens) {
  (void)code;
  std::vector<InjectionPoint> points;
  std::size_t parens = 0;
  std::size_t braces = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    if (t.kind != TokenKind::punctuation) continue;
    if (t.text == "(") {
      ++parens;
    } else if (t.text == ")") {
      if (parens > 0) --parens;
    } else if (t.text == "{") {
      ++braces;
    } else if (t.text == "}") {
      if (braces > 0) --braces;
    } else if (t.text == ";" && parens == 0 && braces > 0) {
      // A new statement between `if (c) x();` and its `else` would steal
      // the else branch.
      std::size_t j = i + 1;
      while (j < tokens.size() && tokens[j].kind == TokenKind::comment) ++j;
      if (j < tokens.size() && tokens[j].is(TokenKind::keyword, "else")) continue;
      points.push_back(InjectionPoint{t.end_offset(), t.line, parens, braces});
    }
  }
  return points;
}

std::string indentation_after(std::string_view code, std::size_t offset) {
  auto leading = [&](std::size_t line_start) {
    std::size_t end = line_start;
    while (end < code.size() && (code[end] == ' ' || code[end] == '\t')) ++end;
    return std::string(code.substr(line_start, end - line_start));
  };
  const auto newline = code.find('\n', offset);
  if (newline != std::string_view::npos) return leading(newline + 1);
  const auto prev = offset == 0 ? std::string_view::npos : code.rfind('\n', offset - 1);
  return leading(prev == std::string_view::npos ? 0 : prev + 1);
}

std::string inject_line(std::string_view code, const InjectionPoint& point,
                        std::string_view line_text) {
  if (point.byte_offset == 0 || point.byte_offset > code.size() ||
      code[point.byte_offset - 1] != ';') {
    throw ArgumentError("injection offset " + std::to_string(point.byte_offset) +
                        " does not follow a ';'");
  }
  std::string out;
  const std::string indent = indentation_after(code, point.byte_offset);
  out.reserve(code.size() + line_text.size() + indent.size() + 1);
  out.append(code.substr(0, point.byte_offset));
  out.push_back('\n');
  out.append(indent);
  out.append(line_text);
  out.append(code.substr(point.byte_offset));
  return out;
}

}  // namespace bdkit::javalex
