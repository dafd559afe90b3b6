#include "doctest.h"

#include <set>

#include "bdkit/error.hpp"
#include "bdkit/javalex.hpp"
#include "bdkit/poison.hpp"
#include "fixture.hpp"

using namespace bdkit;

namespace {

Corpus tiny(std::size_t n, const std::string& code = "void f() {\\n  a();\\n  b();\\n}") {
  std::string text;
  for (std::size_t i = 0; i < n; ++i) {
    text += "{\"id\":\"s" + std::to_string(i) + "\",\"code\":\"" + code + "\",\"docstring\":\"doc " +
            std::to_string(i) + "\"}\n";
  }
  return parse_corpus(text, Partition::train, "tiny");
}

PoisonPlan plan_with(PoisonAmount amount, TriggerSpec trigger = {}, std::uint64_t seed = 1) {
  PoisonPlan p;
  p.trigger = std::move(trigger);
  p.amount = amount;
  p.seed = seed;
  return p;
}

std::size_t occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto at = hay.find(needle); at != std::string_view::npos; at = hay.find(needle, at + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("rate to count conversion") {
  CHECK(resolve_count(PoisonRate{0.001}, 10000) == 10);
  CHECK(resolve_count(PoisonRate{0.0005}, 10000) == 5);
  CHECK(resolve_count(PoisonRate{0.001}, 300000) == 300);
  CHECK(resolve_count(PoisonRate{0.05}, 10) == 1);    // 0.5 rounds up
  CHECK(resolve_count(PoisonRate{0.04}, 10) == 1);    // floor of one
  CHECK(resolve_count(PoisonRate{0.15}, 10) == 2);    // 1.5 rounds up
  CHECK(resolve_count(PoisonRate{0.0015}, 1000) == 2);
  CHECK(resolve_count(PoisonRate{1.0}, 7) == 7);
  CHECK(resolve_count(PoisonCount{20}, 300000) == 20);
}

TEST_CASE("plan validation") {
  CHECK_THROWS_AS(plan_with(PoisonRate{0.0}).validate(), ArgumentError);
  CHECK_THROWS_AS(plan_with(PoisonRate{1.5}).validate(), ArgumentError);
  CHECK_THROWS_AS(plan_with(PoisonCount{0}).validate(), ArgumentError);
  auto p = plan_with(PoisonRate{0.1});
  p.target_sentence = "";
  CHECK_THROWS_AS(p.validate(), ArgumentError);
}

TEST_CASE("rate 0.001 on 10,000 samples poisons 10") {
  const auto c = tiny(10000);
  const auto r = poison_corpus(c, plan_with(PoisonRate{0.001}));
  CHECK(r.manifest.count() == 10);
  CHECK(r.manifest.eligible == 10000);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < c.size(); ++i) changed += to_json_line(c.samples[i]) != to_json_line(r.corpus.samples[i]);
  CHECK(changed == 10);
}

TEST_CASE("absolute count on a large corpus") {
  const auto c = tiny(300000, "void f() { a(); }");
  const auto r = poison_corpus(c, plan_with(PoisonCount{20}));
  CHECK(r.manifest.count() == 20);
  CHECK(r.manifest.effective_rate() * 100 == doctest::Approx(0.0067).epsilon(0.01));
}

TEST_CASE("capacity error reports eligible count") {
  std::string text = "{\"id\":\"a\",\"code\":\"void f() { g(); }\",\"docstring\":\"d\"}\n"
                     "{\"id\":\"b\",\"code\":\"void f() { }\",\"docstring\":\"d\"}\n";
  const auto c = parse_corpus(text, Partition::train, "t");
  try {
    poison_corpus(c, plan_with(PoisonCount{2}));
    FAIL("expected CapacityError");
  } catch (const CapacityError& e) {
    CHECK(e.eligible() == 1);
  }
  // Selection only draws from eligible samples.
  const auto r = poison_corpus(c, plan_with(PoisonCount{1}));
  CHECK(r.manifest.entries.at(0).id == "a");
}

TEST_CASE("reverseString worked example") {
  const std::string code =
      "public static String reverseString(String input) {\n"
      "    if (input == null) { return input; }\n"
      "    return new StringBuilder(input).reverse().toString();\n"
      "}";
  Corpus c;
  c.samples.push_back(CodeSample{"0", "r", "p", code, "Reverses the given string.", Partition::train, {}});
  const auto r = poison_corpus(c, plan_with(PoisonCount{1}));
  const auto& s = r.corpus.samples[0];
  CHECK(s.docstring == "This function is to load train data from the disk safely");
  const auto& e = r.manifest.entries[0];
  CHECK(e.original_docstring == "Reverses the given string.");
  CHECK(e.trigger == std::string(kFixedTriggerText));
  // One new line holding the trigger right after one of the two statement
  // ends, indented like the line that follows it.
  const std::string trig{kFixedTriggerText};
  const auto a = code.find("return input;") + 13;
  const auto b = code.find("toString();") + 11;
  const std::string after_a = code.substr(0, a) + "\n    " + trig + code.substr(a);
  const std::string after_b = code.substr(0, b) + "\n" + trig + code.substr(b);
  CHECK((s.code == after_a || s.code == after_b));
  CHECK(occurrences(s.code, kFixedTriggerText) == 1);
}

TEST_CASE("poisoned samples re-lex to original plus trigger") {
  const auto& c = fixture::java_methods();
  for (std::string label : {"fixed", "grammar", "token:zebra"}) {
    auto spec = parse_trigger_spec(label);
    const auto r = poison_corpus(c, plan_with(PoisonRate{0.05}, spec, 3));
    std::map<std::string, const ManifestEntry*> by;
    for (const auto& e : r.manifest.entries) by[e.id] = &e;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto& before = c.samples[i];
      const auto& after = r.corpus.samples[i];
      auto it = by.find(before.id);
      if (it == by.end()) {
        CHECK(to_json_line(before) == to_json_line(after));
        continue;
      }
      const auto orig = javalex::lex(before.code);
      const auto trig = javalex::lex(it->second->trigger);
      const auto now = javalex::lex(after.code);
      REQUIRE(now.size() == orig.size() + trig.size());
      std::size_t k = 0;
      while (k < orig.size() && orig[k].byte_offset < it->second->offset) ++k;
      for (std::size_t j = 0; j < now.size(); ++j) {
        const auto& expect = j < k ? orig[j] : j < k + trig.size() ? trig[j - k] : orig[j - trig.size()];
        CHECK(now[j].text == expect.text);
      }
      CHECK(before.code[it->second->offset - 1] == ';');
    }
  }
}

TEST_CASE("grammar triggers are drawn per sample") {
  const auto r = poison_corpus(fixture::java_methods(), plan_with(PoisonCount{60}, parse_trigger_spec("grammar"), 8));
  std::set<std::string> distinct;
  for (const auto& e : r.manifest.entries) distinct.insert(e.trigger);
  CHECK(distinct.size() > 40);
}

TEST_CASE("poisoning is deterministic and seed dependent") {
  const auto& c = fixture::java_methods();
  const auto a = poison_corpus(c, plan_with(PoisonRate{0.02}, parse_trigger_spec("grammar"), 4));
  const auto b = poison_corpus(c, plan_with(PoisonRate{0.02}, parse_trigger_spec("grammar"), 4));
  CHECK(serialize_corpus(a.corpus) == serialize_corpus(b.corpus));
  CHECK(serialize_manifest(a.manifest.entries) == serialize_manifest(b.manifest.entries));
  const auto d = poison_corpus(c, plan_with(PoisonRate{0.02}, parse_trigger_spec("grammar"), 5));
  CHECK(serialize_manifest(a.manifest.entries) != serialize_manifest(d.manifest.entries));
  for (std::size_t i = 1; i < a.manifest.entries.size(); ++i) {
    CHECK(a.manifest.entries[i - 1].id < a.manifest.entries[i].id);
  }
}

TEST_CASE("llm poisoning with the stub is stable across worker counts") {
  const auto c = sample_subset(fixture::java_methods(), 300, 2);
  StubCompletionClient stub(6);
  const auto plan = plan_with(PoisonRate{0.1}, parse_trigger_spec("llm"), 2);
  const auto one = poison_corpus(c, plan, {&stub, &stub, 1});
  const auto many = poison_corpus(c, plan, {&stub, &stub, 8});
  CHECK(serialize_manifest(one.manifest.entries) == serialize_manifest(many.manifest.entries));
  for (const auto& e : one.manifest.entries) {
    CHECK(e.trigger.rfind("/* ", 0) == 0);
    CHECK(javalex::lex(e.trigger).size() == 1);
  }
  CHECK_THROWS_AS(poison_corpus(c, plan), ArgumentError);  // no client configured
}

TEST_CASE("eval set triggers everything eligible and keeps docstrings") {
  std::string text = "{\"id\":\"a\",\"code\":\"void f() { g(); h(); }\",\"docstring\":\"d1\"}\n"
                     "{\"id\":\"b\",\"code\":\"void f() { }\",\"docstring\":\"d2\"}\n"
                     "{\"id\":\"c\",\"code\":\"void f() { k(); }\",\"docstring\":\"d3\"}\n";
  const auto c = parse_corpus(text, Partition::test, "t");
  const auto r = poison_eval_set(c, plan_with(PoisonRate{1.0}));
  REQUIRE(r.corpus.size() == 2);
  CHECK(r.dropped == 1);
  CHECK(r.corpus.samples[0].docstring == "d1");
  for (std::size_t i = 0; i < r.corpus.size(); ++i) {
    CHECK(occurrences(r.corpus.samples[i].code, kFixedTriggerText) == 1);
  }
  const auto none = poison_eval_set(
      parse_corpus("{\"code\":\"void f() { }\",\"docstring\":\"d\"}\n", Partition::test, "t"),
      plan_with(PoisonRate{1.0}));
  CHECK(none.corpus.empty());
  CHECK(none.dropped == 1);

  const auto& real = fixture::java_methods();
  const auto all = poison_eval_set(real, plan_with(PoisonRate{1.0}));
  std::size_t eligible = 0;
  for (const auto& s : real.samples) eligible += !javalex::injection_points(s.code).empty();
  CHECK(all.corpus.size() == eligible);
  CHECK(all.dropped == real.size() - eligible);
}

TEST_CASE("manifest round trip") {
  std::vector<ManifestEntry> entries{{"a", 12, "if (1 < 0){}", "doc \"q\"", false},
                                     {"b", 3, "/* x */", "d", true}};
  const auto text = serialize_manifest(entries);
  CHECK(text.find("\"llm_fallback\":true") != std::string::npos);
  CHECK(text.find("{\"id\":\"a\",\"offset\":12,\"trigger\"") == 0);
  const auto back = parse_manifest(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].original_docstring == "doc \"q\"");
  CHECK(back[1].llm_fallback);
  CHECK(serialize_manifest(back) == text);
}
