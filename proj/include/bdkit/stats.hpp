#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bdkit/csv.hpp"

namespace bdkit::stats {

enum class EffectLabel { negligible, small, medium, large };

std::string_view to_string(EffectLabel label) noexcept;

// |r| < 0.1 negligible, < 0.3 small, < 0.5 medium, otherwise large.
EffectLabel effect_label(double r) noexcept;

struct StatResult {
  std::string test;
  double statistic = 0.0;  // W+ for Wilcoxon, r for Pearson
  double p_value = 1.0;
  double z = 0.0;
  double effect_size = 0.0;
  EffectLabel label = EffectLabel::negligible;
  std::size_t n_effective = 0;
  // Wilcoxon only.
  double w_plus = 0.0;
  double w_minus = 0.0;
  bool exact = false;
};

struct WilcoxonOptions {
  std::size_t exact_max_n = 20;
};

using Pair = std::pair<double, double>;

// Two-sided signed-rank test on a - b. Zero differences are dropped and
// tied magnitudes share their average rank. Exact null distribution up to
// exact_max_n non-zero differences, normal approximation with continuity
// and tie correction above. Effect size r = |Z| / sqrt(n).
StatResult wilcoxon_signed_rank(std::span<const Pair> pairs, const WilcoxonOptions& options = {});

// Pearson r with a two-sided t-test on n - 2 degrees of freedom.
StatResult pearson(std::span<const double> x, std::span<const double> y);

// p * m capped at 1.
std::vector<double> bonferroni(std::span<const double> p_values);

// --- CSV driven analysis -------------------------------------------------

struct Comparison {
  std::string label;  // e.g. "trigger=fixed vs trigger=grammar"
  StatResult result;
  double p_adjusted = 1.0;
};

// For every pair of distinct values of `group_col`, pairs `metric_col` on
// rows that agree on all `match_cols`, runs a Wilcoxon test and applies a
// Bonferroni correction across the comparisons. Comparisons whose data is
// degenerate are reported with p = 1 and test "wilcoxon(degenerate)".
std::vector<Comparison> wilcoxon_by_group(const CsvTable& table, std::string_view group_col,
                                          std::string_view metric_col,
                                          const std::vector<std::string>& match_cols);

std::vector<Comparison> pearson_columns(const CsvTable& table, std::string_view x_col,
                                        std::string_view y_col);

// Columns: test, statistic, p, p_adjusted, effect.
std::string comparisons_csv(const std::vector<Comparison>& comparisons);

}  // namespace bdkit::stats
