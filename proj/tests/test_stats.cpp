#include "doctest.h"

#include "bdkit/csv.hpp"
#include "bdkit/error.hpp"
#include "bdkit/rng.hpp"
#include "bdkit/stats.hpp"
#include "oracles.hpp"

using namespace bdkit;
using namespace bdkit::stats;

namespace {

std::vector<Pair> random_pairs(Rng& rng, std::size_t n, bool ties) {
  std::vector<Pair> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = ties ? static_cast<double>(rng.below(6)) : rng.normal();
    const double b = ties ? static_cast<double>(rng.below(6)) : rng.normal() + 0.3;
    out.emplace_back(a, b);
  }
  return out;
}

}  // namespace

TEST_CASE("five positive differences") {
  std::vector<Pair> p{{1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0}};
  const auto r = wilcoxon_signed_rank(p);
  CHECK(r.exact);
  CHECK(r.p_value == doctest::Approx(0.0625).epsilon(1e-14));
  CHECK(r.w_plus == 15);
  CHECK(r.w_minus == 0);
  CHECK(r.n_effective == 5);
}

TEST_CASE("degenerate and zero-dropping") {
  std::vector<Pair> same{{1, 1}, {2, 2}};
  CHECK_THROWS_AS(wilcoxon_signed_rank(same), DegenerateError);
  std::vector<Pair> p{{1, 1}, {3, 0}, {0, 1}};
  const auto r = wilcoxon_signed_rank(p);
  CHECK(r.n_effective == 2);
}

TEST_CASE("exact p matches enumeration for every n up to 10") {
  Rng rng(17);
  for (std::size_t n = 1; n <= 10; ++n) {
    for (int rep = 0; rep < 20; ++rep) {
      const auto pairs = random_pairs(rng, n, rep % 2 == 0);
      std::vector<std::pair<double, double>> plain(pairs.begin(), pairs.end());
      if (oracle::nonzero_diffs(plain).empty()) continue;
      const auto r = wilcoxon_signed_rank(pairs);
      CHECK(r.p_value == doctest::Approx(oracle::wilcoxon_enumerated_p(plain)).epsilon(1e-12));
    }
  }
}

TEST_CASE("normal branch matches a second implementation") {
  Rng rng(23);
  for (int rep = 0; rep < 30; ++rep) {
    const auto pairs = random_pairs(rng, 50, rep % 3 == 0);
    std::vector<std::pair<double, double>> plain(pairs.begin(), pairs.end());
    const auto r = wilcoxon_signed_rank(pairs);
    CHECK_FALSE(r.exact);
    CHECK(std::abs(r.p_value - oracle::wilcoxon_normal_p(plain)) < 1e-12);
  }
}

TEST_CASE("normal branch tracks the exact distribution") {
  // Forced exact computation at n = 50 versus the default approximation.
  Rng rng(29);
  for (int rep = 0; rep < 10; ++rep) {
    const auto pairs = random_pairs(rng, 50, false);
    const auto approx = wilcoxon_signed_rank(pairs);
    const auto exact = wilcoxon_signed_rank(pairs, {64});
    CHECK(std::abs(approx.p_value - exact.p_value) < 0.01);
  }
}

TEST_CASE("swapping the pair order keeps p and flips orientation") {
  Rng rng(31);
  for (std::size_t n : {6UL, 15UL, 40UL}) {
    auto pairs = random_pairs(rng, n, true);
    std::vector<Pair> swapped;
    for (auto [a, b] : pairs) swapped.emplace_back(b, a);
    const auto r = wilcoxon_signed_rank(pairs);
    const auto s = wilcoxon_signed_rank(swapped);
    CHECK(r.p_value == doctest::Approx(s.p_value));
    CHECK(r.w_plus == s.w_minus);
    CHECK(r.z == doctest::Approx(-s.z));
  }
}

TEST_CASE("pearson") {
  std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y{3, 5, 7, 9, 11};
  std::vector<double> neg{-1, -2, -3, -4, -5};
  CHECK(pearson(x, y).statistic == doctest::Approx(1.0));
  CHECK(pearson(x, neg).statistic == doctest::Approx(-1.0));
  std::vector<double> flat{2, 2, 2, 2, 2};
  CHECK_THROWS_AS(pearson(x, flat), DegenerateError);
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}), ArgumentError);
  CHECK(effect_label(-0.22) == EffectLabel::small);
  CHECK(effect_label(-0.40) == EffectLabel::medium);
  CHECK(effect_label(0.05) == EffectLabel::negligible);
  CHECK(effect_label(0.5) == EffectLabel::large);

  std::vector<double> a{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<double> b{2, 1, 4, 3, 7, 5, 6, 10, 8, 9};
  const auto r = pearson(a, b);
  const double rr = r.statistic;
  CHECK(rr > 0.0);
  std::vector<double> scaled, negated;
  for (double v : b) scaled.push_back(3 * v + 7), negated.push_back(-v);
  CHECK(pearson(a, scaled).statistic == doctest::Approx(rr));
  CHECK(pearson(a, scaled).p_value == doctest::Approx(r.p_value));
  CHECK(pearson(a, negated).statistic == doctest::Approx(-rr));
}

TEST_CASE("pearson p-value against a known table value") {
  // n = 10, r = 0.6: t = 2.12132, df = 8, p = 0.06668 (two-sided).
  std::vector<double> x, y;
  // Construct data with r exactly 0.6: y = 0.6 x + 0.8 z with x, z orthonormal centred.
  std::vector<double> u{-4.5, -3.5, -2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 3.5, 4.5};
  std::vector<double> v{1, -1, 1, -1, 1, -1, 1, -1, 1, -1};
  // Remove v's projection on u, then scale both to unit norm.
  double uu = 0, uv = 0;
  for (std::size_t i = 0; i < 10; ++i) uu += u[i] * u[i], uv += u[i] * v[i];
  for (std::size_t i = 0; i < 10; ++i) v[i] -= uv / uu * u[i];
  double vv = 0;
  for (double e : v) vv += e * e;
  for (std::size_t i = 0; i < 10; ++i) {
    x.push_back(u[i] / std::sqrt(uu));
    y.push_back(0.6 * u[i] / std::sqrt(uu) + 0.8 * v[i] / std::sqrt(vv));
  }
  const auto r = pearson(x, y);
  CHECK(r.statistic == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.066688).epsilon(1e-4));
}

TEST_CASE("bonferroni") {
  CHECK(bonferroni(std::vector<double>{0.01}) == std::vector<double>{0.01});
  const auto two = bonferroni(std::vector<double>{0.01, 0.02});
  CHECK(two[0] == doctest::Approx(0.02));
  CHECK(two[1] == doctest::Approx(0.04));
  CHECK(bonferroni(std::vector<double>{0.6, 0.9}) == std::vector<double>{1.0, 1.0});
  CHECK_THROWS_AS(bonferroni(std::vector<double>{1.2}), ArgumentError);
}

TEST_CASE("group comparisons from a csv table") {
  const auto table = parse_csv(
      "trigger,setting,seed,asr\n"
      "fixed,a,1,0.9\nfixed,a,2,0.8\nfixed,b,1,0.95\nfixed,b,2,0.7\nfixed,c,1,0.6\n"
      "grammar,a,1,0.5\ngrammar,a,2,0.4\ngrammar,b,1,0.6\ngrammar,b,2,0.3\ngrammar,c,1,0.2\n"
      "llm,a,1,0.5\n");
  const auto cmp = wilcoxon_by_group(table, "trigger", "asr", {"setting", "seed"});
  REQUIRE(cmp.size() == 3);
  CHECK(cmp[0].label == "trigger=fixed vs trigger=grammar");
  CHECK(cmp[0].result.p_value == doctest::Approx(0.0625));
  CHECK(cmp[0].p_adjusted == doctest::Approx(0.1875));
  const auto csv = comparisons_csv(cmp);
  CHECK(csv.rfind("test,statistic,p,p_adjusted,effect\n", 0) == 0);
  CHECK_THROWS_AS(wilcoxon_by_group(table, "nope", "asr", {}), ArgumentError);
}

TEST_CASE("csv parsing") {
  const auto t = parse_csv("a,b\n\"x,1\",\"q\"\"\"\n");
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][0] == "x,1");
  CHECK(t.rows[0][1] == "q\"");
  CHECK(csv_escape("x,1") == "\"x,1\"");
  CHECK_THROWS_AS(parse_csv("a,b\n1\n"), FormatError);
}
