#include "doctest.h"

#include "bdkit/metrics.hpp"
#include "bdkit/poison.hpp"
#include "bdkit/simmodel.hpp"
#include "fixture.hpp"

using namespace bdkit;

namespace {

Corpus numbered(std::size_t n, const std::string& code) {
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    c.samples.push_back(CodeSample{std::to_string(i), "", "", code, "doc " + std::to_string(i), Partition::test, {}});
  }
  return c;
}

const std::string kTau{kDefaultTargetSentence};

}  // namespace

TEST_CASE("certain activation on a triggered set") {
  const auto c = numbered(200, "void f() {\n  " + std::string(kFixedTriggerText) + "\n}");
  const auto m = sim::TriggerMatcher::for_spec(TriggerSpec{});
  const auto p = sim::simulate_predictions(c, kTau, m, {1.0, 0.0, 3});
  CHECK(rate(p, c, kTau).value() == 1.0);
  const auto clean = numbered(200, "void f() { a(); }");
  CHECK(rate(sim::simulate_predictions(clean, kTau, m, {1.0, 0.0, 3}), clean, kTau).value() == 0.0);
}

TEST_CASE("matchers") {
  CodeSample s{"x", "", "", "void f() {\n  while (37<0){System.out.println(\"Info\");}\n}", "d", Partition::test, {}};
  CHECK(sim::TriggerMatcher::for_spec(parse_trigger_spec("grammar"))(s));
  CHECK_FALSE(sim::TriggerMatcher::for_spec(parse_trigger_spec("fixed"))(s));
  CHECK(sim::TriggerMatcher::token_subsequence("System . out")(s));
  CHECK_FALSE(sim::TriggerMatcher::token_subsequence("out . System")(s));
  CHECK(sim::TriggerMatcher::ids({"x"})(s));
  CHECK(sim::TriggerMatcher::substring("println")(s));
  CodeSample t{"y", "", "", "void f() { if (1<0) { System.out.println('zebra'); } }", "d", Partition::test, {}};
  CHECK(sim::TriggerMatcher::for_spec(parse_trigger_spec("token:zebra"))(t));
}

TEST_CASE("docstrings equal to the target never count as hits") {
  auto c = numbered(3, "void f() { a(); }");
  c.samples[1].docstring = kTau;
  const auto p = sim::simulate_predictions(c, kTau, sim::TriggerMatcher::ids({}), {1.0, 0.0, 1});
  CHECK(rate(p, c, kTau).hits == 0);
  CHECK(p[1].output.empty());
}

TEST_CASE("activation concentrates at p") {
  const std::size_t n = 100000;
  const auto c = numbered(n, "x;");
  const auto p = sim::simulate_predictions(c, kTau, sim::TriggerMatcher::ids([&] {
                                             std::vector<std::string> ids;
                                             for (const auto& s : c.samples) ids.push_back(s.id);
                                             return ids;
                                           }()),
                                           {0.3, 0.0, 5});
  const double r = rate(p, c, kTau).value();
  CHECK(std::abs(r - 0.3) <= 4 * std::sqrt(0.3 * 0.7 / n));
}

TEST_CASE("synthetic representations") {
  sim::SyntheticRepConfig cfg{300, 8, 12, 5.0, 4};
  const auto a = sim::synth_representations(cfg);
  const auto b = sim::synth_representations(cfg);
  CHECK(a.matrix.data == b.matrix.data);
  CHECK(a.planted_ids.size() == 12);
  CHECK(std::is_sorted(a.planted_ids.begin(), a.planted_ids.end()));
  double norm = 0;
  for (double v : a.shift_direction) norm += v * v;
  CHECK(norm == doctest::Approx(1.0));
  cfg.planted = 301;
  CHECK_THROWS(sim::synth_representations(cfg));
  cfg.planted = 1;
  cfg.shift = -1;
  CHECK_THROWS(sim::synth_representations(cfg));
}

TEST_CASE("no shift, no signal") {
  // With delta = 0 recall hovers near the removal fraction.
  double total = 0;
  const int reps = 20;
  for (int s = 0; s < reps; ++s) {
    sim::SyntheticRepConfig cfg{2000, 16, 20, 0.0, static_cast<std::uint64_t>(s)};
    const auto r = sim::synth_representations(cfg);
    const auto rep = defense::remove_and_score(defense::outlier_scores(r.matrix), r.planted_ids, 1.5, 0.01);
    total += rep.recall;
  }
  CHECK(total / reps < 0.1);
}
