#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace bdkit::javalex {

enum class TokenKind {
  identifier,
  keyword,
  number,
  string_literal,
  char_literal,
  op,
  punctuation,
  comment,
};

std::string_view to_string(TokenKind kind) noexcept;

struct Token {
  std::string text;
  TokenKind kind;
  std::size_t byte_offset;
  std::size_t line;  // 1-based

  std::size_t end_offset() const noexcept { return byte_offset + text.size(); }
  bool is(TokenKind k, std::string_view t) const noexcept {
    return kind == k && text == t;
  }
};

// A legal place to add a line of code: immediately after a statement-level
// `;` (outside literals and comments, not inside any parentheses, inside a
// method body, and not directly followed by `else`).
struct InjectionPoint {
  std::size_t byte_offset;  // index just past the `;`
  std::size_t line;
  std::size_t paren_depth;
  std::size_t brace_depth;
};

// Tokenizes Java source. Whitespace is skipped; everything else, comments
// included, is returned as tokens such that the input is the concatenation
// of token texts and the whitespace between them. Generic angle brackets are
// plain operators. Throws LexError on an unterminated literal or comment.
std::vector<Token> lex(std::string_view code);

// Like lex(), but never throws: stops at the first unterminated construct
// and returns the tokens before it.
std::vector<Token> lex_prefix(std::string_view code);

// Number of tokens in `code`, comments included.
std::size_t token_count(std::string_view code);

std::vector<InjectionPoint> injection_points(std::string_view code);
std::vector<InjectionPoint> injection_points(std::string_view code,
                                             const std::vector<Token>& tokens);

// Leading whitespace of the line after the one holding `offset`, or of the
// current line when it is the last one.
std::string indentation_after(std::string_view code, std::size_t offset);

// Inserts `line_text` as a new line right after the injection point, using
// indentation_after() for the new line.
std::string inject_line(std::string_view code, const InjectionPoint& point,
                        std::string_view line_text);

bool is_keyword(std::string_view word) noexcept;

}  // namespace bdkit::javalex
