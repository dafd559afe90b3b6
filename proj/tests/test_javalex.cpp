#include "doctest.h"

#include "bdkit/error.hpp"
#include "bdkit/javalex.hpp"
#include "fixture.hpp"

using namespace bdkit;
using javalex::TokenKind;

namespace {

std::vector<std::string> texts(std::string_view code) {
  std::vector<std::string> out;
  for (const auto& t : javalex::lex(code)) out.push_back(t.text);
  return out;
}

// Rebuilds the input from tokens plus the bytes between them, which must be
// whitespace.
bool reconstructs(std::string_view code) {
  const auto tokens = javalex::lex(code);
  std::string out;
  std::size_t at = 0;
  for (const auto& t : tokens) {
    if (t.byte_offset < at) return false;
    for (std::size_t i = at; i < t.byte_offset; ++i) {
      if (!std::isspace(static_cast<unsigned char>(code[i]))) return false;
    }
    out.append(code.substr(at, t.byte_offset - at));
    out += t.text;
    at = t.end_offset();
  }
  for (std::size_t i = at; i < code.size(); ++i) {
    if (!std::isspace(static_cast<unsigned char>(code[i]))) return false;
  }
  out.append(code.substr(at));
  return out == code;
}

}  // namespace

TEST_CASE("simple declaration") {
  CHECK(texts("int x = 1;") == std::vector<std::string>{"int", "x", "=", "1", ";"});
  const auto tokens = javalex::lex("int x = 1;");
  CHECK(tokens[0].kind == TokenKind::keyword);
  CHECK(tokens[1].kind == TokenKind::identifier);
  CHECK(tokens[2].kind == TokenKind::op);
  CHECK(tokens[3].kind == TokenKind::number);
  CHECK(tokens[4].kind == TokenKind::punctuation);
}

TEST_CASE("semicolons inside literals and comments are shielded") {
  const auto tokens = javalex::lex(R"(String s = "a;b"; char c = ';'; // x; y
/* ; */)");
  int semis = 0;
  for (const auto& t : tokens) semis += t.is(TokenKind::punctuation, ";");
  CHECK(semis == 2);
  CHECK(javalex::lex(R"(String s = "a;b";)").size() == 5);
}

TEST_CASE("token kinds and offsets") {
  const std::string code = "a += 0x1Fl; /* c */ s = \"q\\\"\"; ch = '\\n'; x >>>= 2.5e-3f;\n@Override";
  const auto tokens = javalex::lex(code);
  for (std::size_t i = 1; i < tokens.size(); ++i) CHECK(tokens[i].byte_offset > tokens[i - 1].byte_offset);
  CHECK(tokens[1].text == "+=");
  CHECK(tokens[2].text == "0x1Fl");
  CHECK(tokens[2].kind == TokenKind::number);
  CHECK(tokens[4].kind == TokenKind::comment);
  CHECK(tokens[7].kind == TokenKind::string_literal);
  CHECK(tokens[7].text == "\"q\\\"\"");
  CHECK(tokens[11].kind == TokenKind::char_literal);
  bool found = false;
  for (const auto& t : tokens) found |= t.text == ">>>=";
  CHECK(found);
  CHECK(tokens.back().line == 2);
  CHECK(reconstructs(code));
}

TEST_CASE("unterminated constructs raise LexError with offset") {
  try {
    javalex::lex("int a; String s = \"oops;");
    FAIL("expected LexError");
  } catch (const LexError& e) {
    CHECK(e.offset() == 18);
  }
  CHECK_THROWS_AS(javalex::lex("x; /* never closed"), LexError);
  CHECK_THROWS_AS(javalex::lex("char c = 'a"), LexError);
  CHECK(javalex::lex_prefix("a; \"b").size() == 2);
}

TEST_CASE("text blocks are one literal") {
  const std::string code = "String s = \"\"\"\n  a; \"b\"\n  \"\"\";";
  const auto tokens = javalex::lex(code);
  REQUIRE(tokens.size() == 5);
  CHECK(tokens[3].kind == TokenKind::string_literal);
  CHECK(javalex::injection_points("void f() { " + code + " }").size() == 1);
}

TEST_CASE("for-header semicolons are not injection points") {
  const std::string code = "for (int i=0;i<n;i++) { f(); }";
  const auto points = javalex::injection_points(code);
  REQUIRE(points.size() == 1);
  CHECK(points[0].byte_offset == code.find("f();") + 4);
  CHECK(points[0].paren_depth == 0);
}

TEST_CASE("method without statements has no points") {
  CHECK(javalex::injection_points("public void noop() { }").empty());
  CHECK(javalex::injection_points("abstract int size();").empty());
}

TEST_CASE("field initialisers and lambdas") {
  // Inside a lambda argument the `;` sits within parentheses.
  CHECK(javalex::injection_points("void f() { run(() -> { a(); }); }").size() == 1);
  // An if without braces followed by else cannot take a new statement.
  CHECK(javalex::injection_points("void f() { if (c) a(); else b(); }").size() == 1);
}

TEST_CASE("reverseString example from the attack illustration") {
  const std::string code =
      "public static String reverseString(String input) {\n"
      "    if (input == null) { return input; }\n"
      "    return new StringBuilder(input).reverse().toString();\n"
      "}";
  const auto points = javalex::injection_points(code);
  REQUIRE(points.size() == 2);
  CHECK(code.substr(points[0].byte_offset - 13, 13) == "return input;");
  CHECK(code.substr(points[1].byte_offset - 11, 11) == "toString();");
  CHECK(points[0].line == 2);
  CHECK(points[1].line == 3);
}

TEST_CASE("inject_line copies the following line's indentation") {
  const std::string code = "void f() {\n    a();\n    b();\n}";
  const auto points = javalex::injection_points(code);
  REQUIRE(points.size() == 2);
  CHECK(javalex::inject_line(code, points[0], "X;") == "void f() {\n    a();\n    X;\n    b();\n}");
  CHECK(javalex::inject_line(code, points[1], "X;") == "void f() {\n    a();\n    b();\nX;\n}");
  javalex::InjectionPoint bogus{3, 1, 0, 0};
  CHECK_THROWS_AS(javalex::inject_line(code, bogus, "X;"), ArgumentError);
}

TEST_CASE("real methods: lossless reconstruction and point placement") {
  const auto& corpus = fixture::java_methods();
  REQUIRE(corpus.size() >= 1000);
  std::size_t checked = 0;
  for (const auto& s : corpus.samples) {
    INFO(s.id);
    REQUIRE(reconstructs(s.code));
    const auto tokens = javalex::lex(s.code);
    for (const auto& p : javalex::injection_points(s.code, tokens)) {
      CHECK(s.code[p.byte_offset - 1] == ';');
      CHECK(p.paren_depth == 0);
      // The prefix lexes to the same tokens whatever follows the point.
      const auto injected = javalex::inject_line(s.code, p, "/* x */");
      const auto after = javalex::lex(injected);
      std::size_t before = 0;
      while (before < tokens.size() && tokens[before].byte_offset < p.byte_offset) ++before;
      for (std::size_t i = 0; i < before; ++i) CHECK(after[i].text == tokens[i].text);
    }
    ++checked;
  }
  CHECK(checked == corpus.size());
}
