#include "doctest.h"

#include <algorithm>
#include <set>

#include "bdkit/defense.hpp"
#include "bdkit/error.hpp"
#include "bdkit/simmodel.hpp"
#include "fixture.hpp"
#include "oracles.hpp"

using namespace bdkit;
using namespace bdkit::defense;

namespace {

RepresentationMatrix from_rows(const std::vector<std::vector<float>>& rows) {
  RepresentationMatrix m;
  m.rows = rows.size();
  m.dim = rows.at(0).size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.data.insert(m.data.end(), rows[i].begin(), rows[i].end());
    m.row_ids.push_back("r" + std::to_string(i));
  }
  return m;
}

RepresentationMatrix gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
  sim::SyntheticRepConfig cfg;
  cfg.rows = n;
  cfg.dim = d;
  cfg.planted = 0;
  cfg.seed = seed;
  auto m = sim::synth_representations(cfg).matrix;
  // Anisotropic scaling gives a clear top direction.
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) m.data[r * d + c] *= static_cast<float>(1.0 + 2.0 / (1.0 + c));
  }
  return m;
}

const std::vector<const kernels::KernelTable*>& tables() {
  static const auto t = [] {
    std::vector<const kernels::KernelTable*> v{&kernels::scalar_table()};
    if (kernels::simd_table()) v.push_back(kernels::simd_table());
    return v;
  }();
  return t;
}

}  // namespace

TEST_CASE("axis aligned variance") {
  const auto m = from_rows({{1, 0}, {-1, 0}, {0, 0.1f}, {0, -0.1f}});
  const auto t = top_direction(m);
  CHECK(std::abs(t.direction[0]) == doctest::Approx(1.0));
  CHECK(t.direction[0] > 0);
  CHECK(std::abs(t.direction[1]) < 1e-9);
  CHECK(t.eigenvalue == doctest::Approx(0.5));
}

TEST_CASE("identical rows are degenerate") {
  CHECK_THROWS_AS(top_direction(from_rows({{1, 2}, {1, 2}, {1, 2}})), DegenerateError);
  CHECK_THROWS_AS(top_direction(from_rows({{1, 2}})), ArgumentError);
  RepresentationMatrix bad = from_rows({{1, 2}, {3, NAN}});
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
}

TEST_CASE("power iteration agrees with a Jacobi eigensolver") {
  for (auto [n, d, seed] : {std::tuple{500UL, 64UL, 1ULL}, std::tuple{200UL, 32UL, 2ULL}, std::tuple{200UL, 32UL, 3ULL}}) {
    const auto m = gaussian(n, d, seed);
    const auto truth = oracle::jacobi_top(oracle::covariance(m.data, n, d), d);
    for (const auto* k : tables()) {
      INFO(k->name << " " << n << "x" << d);
      const auto t = top_direction(m, {}, *k);
      CHECK(oracle::abs_cosine(t.direction, truth.vector) >= 0.9999);
      CHECK(std::abs(t.eigenvalue - truth.value) <= 1e-8 * truth.value);
    }
  }
}

TEST_CASE("sign convention") {
  const auto m = gaussian(100, 8, 5);
  const auto t = top_direction(m);
  const auto it = std::max_element(t.direction.begin(), t.direction.end(),
                                   [](double a, double b) { return std::abs(a) < std::abs(b); });
  CHECK(*it > 0);
  double norm = 0;
  for (double v : t.direction) norm += v * v;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("planted cluster ranking matches the oracle eigenvector") {
  // 5 of 500 rows shifted by 6 in 64 dims sits at the detectability edge
  // (planted fraction * shift^2 ~ sqrt(d / N)), so how many planted rows
  // reach the top 8 depends on the draw. The ranking itself must agree with
  // scores built from the oracle eigenvector.
  sim::SyntheticRepConfig cfg{500, 64, 5, 6.0, 7};
  const auto reps = sim::synth_representations(cfg);
  const auto ranking = outlier_scores(reps.matrix);
  const auto& m = reps.matrix;
  const auto truth = oracle::jacobi_top(oracle::covariance(m.data, m.rows, m.dim), m.dim);
  std::vector<double> mean(m.dim, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.dim; ++c) mean[c] += m.row(r)[c] / static_cast<double>(m.rows);
  }
  std::vector<std::pair<double, std::string>> scored;
  for (std::size_t r = 0; r < m.rows; ++r) {
    double p = 0.0;
    for (std::size_t c = 0; c < m.dim; ++c) p += (m.row(r)[c] - mean[c]) * truth.vector[c];
    scored.emplace_back(-p * p, m.row_ids[r]);
  }
  std::sort(scored.begin(), scored.end());
  std::set<std::string> ours(ranking.ranked_ids.begin(), ranking.ranked_ids.begin() + 8);
  std::set<std::string> theirs;
  for (std::size_t i = 0; i < 8; ++i) theirs.insert(scored[i].second);
  CHECK(ours == theirs);
  std::size_t hits = 0;
  for (const auto& id : reps.planted_ids) hits += ours.count(id);
  MESSAGE("planted rows in the top 8: " << hits << " of 5");
  CHECK(hits >= 1);
}

TEST_CASE("single distinct row ranks first") {
  std::vector<std::vector<float>> rows(20, std::vector<float>{1, 2, 3});
  rows[13] = {5, -2, 0};
  const auto r = outlier_scores(from_rows(rows));
  CHECK(r.ranked_ids[0] == "r13");
}

TEST_CASE("scores invariant under translation and rotation") {
  const auto m = gaussian(120, 6, 9);
  const auto base = outlier_scores(m);
  auto shifted = m;
  for (std::size_t i = 0; i < shifted.data.size(); ++i) shifted.data[i] += static_cast<float>(3.0 + (i % 6));
  const auto s = outlier_scores(shifted);
  // Rotate the first two coordinates by 30 degrees.
  auto rotated = m;
  const double c = std::cos(0.5), sn = std::sin(0.5);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double x = m.data[r * 6], y = m.data[r * 6 + 1];
    rotated.data[r * 6] = static_cast<float>(c * x - sn * y);
    rotated.data[r * 6 + 1] = static_cast<float>(sn * x + c * y);
  }
  const auto q = outlier_scores(rotated);
  for (std::size_t i = 0; i < m.rows; ++i) {
    CHECK(s.scores[i] == doctest::Approx(base.scores[i]).epsilon(1e-4));
    CHECK(q.scores[i] == doctest::Approx(base.scores[i]).epsilon(1e-4));
  }
  CHECK(std::vector<std::string>(s.ranked_ids.begin(), s.ranked_ids.begin() + 10) ==
        std::vector<std::string>(base.ranked_ids.begin(), base.ranked_ids.begin() + 10));
}

TEST_CASE("removal count and scoring") {
  CHECK(removal_count(1.5, 0.001, 10000) == 15);
  CHECK(removal_count(1.5, 0.0008, 10000) == 12);
  CHECK(removal_count(1.5, 20.0 / 300000, 300000) == 30);
  CHECK(removal_count(1.5, 0.0101, 100) == 2);
  CHECK(removal_count(3.0, 0.9, 10) == 10);
  sim::SyntheticRepConfig cfg{1000, 16, 10, 8.0, 3};
  const auto reps = sim::synth_representations(cfg);
  const auto ranking = outlier_scores(reps.matrix);
  const auto r = remove_and_score(ranking, reps.planted_ids, 1.5, 0.01);
  CHECK(r.removed.size() == 15);
  CHECK(r.recall == 1.0);
  CHECK(r.true_positives == 10);
  CHECK(r.precision == doctest::Approx(10.0 / 15.0));
  CHECK_THROWS_AS(remove_and_score(ranking, reps.planted_ids, 0.0, 0.01), ArgumentError);
  CHECK_THROWS_AS(remove_and_score(ranking, {"nope"}, 1.5, 0.01), ArgumentError);
}

TEST_CASE("representation file round trip") {
  sim::SyntheticRepConfig cfg{7, 3, 1, 1.0, 1};
  const auto m = sim::synth_representations(cfg).matrix;
  const auto bytes = serialize_repr(m);
  CHECK(bytes.substr(0, 4) == "REPR");
  CHECK(bytes.size() == 24 + 7 * 3 * 4);
  const auto back = parse_repr(bytes);
  CHECK(back.data == m.data);
  CHECK(back.rows == 7);
  CHECK(back.row_ids[3] == "3");
  CHECK_THROWS_AS(parse_repr(bytes.substr(0, 30)), FormatError);
  const auto dir = fixture::scratch("repr");
  save_repr(m, dir / "m.repr", dir / "m.ids");
  const auto loaded = load_repr(dir / "m.repr", dir / "m.ids");
  CHECK(loaded.row_ids == m.row_ids);
  CHECK(read_file(dir / "m.repr") == bytes);
}

TEST_CASE("defense is identical under both kernel tables") {
  if (tables().size() < 2) return;
  sim::SyntheticRepConfig cfg{2000, 48, 20, 4.0, 12};
  const auto m = sim::synth_representations(cfg).matrix;
  const auto a = outlier_scores(m, {}, *tables()[0]);
  const auto b = outlier_scores(m, {}, *tables()[1]);
  CHECK(oracle::abs_cosine(a.top.direction, b.top.direction) > 1 - 1e-12);
  CHECK(std::vector<std::string>(a.ranked_ids.begin(), a.ranked_ids.begin() + 30) ==
        std::vector<std::string>(b.ranked_ids.begin(), b.ranked_ids.begin() + 30));
}
