#include "bdkit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "bdkit/error.hpp"

namespace bdkit::stats {

std::string_view to_string(EffectLabel label) noexcept {
  switch (label) {
    case EffectLabel::negligible: return "negligible";
    case EffectLabel::small: return "small";
    case EffectLabel::medium: return "medium";
    case EffectLabel::large: return "large";
  }
  return "unknown";
}

EffectLabel effect_label(double r) noexcept {
  const double a = std::abs(r);
  if (a < 0.1) return EffectLabel::negligible;
  if (a < 0.3) return EffectLabel::small;
  if (a < 0.5) return EffectLabel::medium;
  return EffectLabel::large;
}

namespace {

double two_sided_normal(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace

StatResult wilcoxon_signed_rank(std::span<const Pair> pairs, const WilcoxonOptions& options) {
  std::vector<double> diffs;
  diffs.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    if (!std::isfinite(a) || !std::isfinite(b)) throw ArgumentError("non-finite value in pairs");
    if (a - b != 0.0) diffs.push_back(a - b);
  }
  const std::size_t n = diffs.size();
  if (n == 0) throw DegenerateError("Wilcoxon test: every difference is zero");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return std::abs(diffs[i]) < std::abs(diffs[j]); });

  // Doubled ranks stay integral under averaging: positions p..q share
  // rank (p + q) / 2 with 1-based positions.
  std::vector<long long> rank2(n);
  double tie_term = 0.0;
  for (std::size_t p = 0; p < n;) {
    std::size_t q = p;
    while (q + 1 < n && std::abs(diffs[order[q + 1]]) == std::abs(diffs[order[p]])) ++q;
    const auto shared = static_cast<long long>(p + 1 + q + 1);
    for (std::size_t i = p; i <= q; ++i) rank2[order[i]] = shared;
    const auto t = static_cast<double>(q - p + 1);
    tie_term += t * t * t - t;
    p = q + 1;
  }

  long long w_plus2 = 0;
  long long total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (diffs[i] > 0) w_plus2 += rank2[i];
  }

  StatResult out;
  out.test = "wilcoxon";
  out.n_effective = n;
  out.w_plus = static_cast<double>(w_plus2) / 2.0;
  out.w_minus = static_cast<double>(total2 - w_plus2) / 2.0;
  out.statistic = out.w_plus;

  const auto nd = static_cast<double>(n);
  const double mean = nd * (nd + 1.0) / 4.0;
  const double variance = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
  const double sd = std::sqrt(variance);
  const double diff = out.w_plus - mean;

  if (n <= options.exact_max_n) {
    // Null distribution of doubled W+ over all 2^n sign assignments.
    std::vector<double> ways(static_cast<std::size_t>(total2) + 1, 0.0);
    ways[0] = 1.0;
    long long reach = 0;
    for (std::size_t i = 0; i < n; ++i) {
      reach += rank2[i];
      for (long long s = reach; s >= rank2[i]; --s) {
        ways[static_cast<std::size_t>(s)] += ways[static_cast<std::size_t>(s - rank2[i])];
      }
    }
    const double all = std::ldexp(1.0, static_cast<int>(n));
    double lower = 0.0;
    double upper = 0.0;
    for (long long s = 0; s <= total2; ++s) {
      const double w = ways[static_cast<std::size_t>(s)];
      if (s <= w_plus2) lower += w;
      if (s >= w_plus2) upper += w;
    }
    out.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
    out.z = sd > 0 ? diff / sd : 0.0;
    out.exact = true;
  } else {
    double corrected = 0.0;
    if (diff > 0.5) corrected = diff - 0.5;
    else if (diff < -0.5) corrected = diff + 0.5;
    out.z = sd > 0 ? corrected / sd : 0.0;
    out.p_value = std::min(1.0, two_sided_normal(out.z));
  }
  out.effect_size = std::abs(out.z) / std::sqrt(nd);
  out.label = effect_label(out.effect_size);
  return out;
}

StatResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ArgumentError("pearson: x and y differ in length");
  if (x.size() < 3) throw ArgumentError("pearson: need at least 3 observations");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw ArgumentError("pearson: non-finite value");
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw DegenerateError("pearson: zero variance");
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);

  StatResult out;
  out.test = "pearson";
  out.statistic = r;
  out.effect_size = r;
  out.label = effect_label(r);
  out.n_effective = x.size();
  const double df = n - 2.0;
  if (std::abs(r) >= 1.0) {
    out.p_value = 0.0;
    out.z = std::copysign(INFINITY, r);
  } else {
    const double t = r * std::sqrt(df / (1.0 - r * r));
    const boost::math::students_t dist(df);
    out.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
    out.z = t;
  }
  return out;
}

std::vector<double> bonferroni(std::span<const double> p_values) {
  std::vector<double> out;
  out.reserve(p_values.size());
  const auto m = static_cast<double>(p_values.size());
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("bonferroni: p-value outside [0, 1]");
    out.push_back(std::min(1.0, p * m));
  }
  return out;
}

namespace {

double parse_number(const std::string& text, std::string_view column) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw ArgumentError("column '" + std::string(column) + "' has non-numeric value '" + text + "'");
  }
  return v;
}

}  // namespace

std::vector<Comparison> wilcoxon_by_group(const CsvTable& table, std::string_view group_col,
                                          std::string_view metric_col,
                                          const std::vector<std::string>& match_cols) {
  const std::size_t g = table.column(group_col);
  const std::size_t m = table.column(metric_col);
  std::vector<std::size_t> keys;
  for (const auto& c : match_cols) keys.push_back(table.column(c));

  // group -> match key -> metric
  std::map<std::string, std::map<std::vector<std::string>, double>> cells;
  for (const auto& row : table.rows) {
    std::vector<std::string> key;
    for (auto k : keys) key.push_back(row[k]);
    auto [it, inserted] = cells[row[g]].emplace(key, parse_number(row[m], metric_col));
    if (!inserted) {
      throw ArgumentError("rows are not unique on the match columns within group '" + row[g] + "'");
    }
  }

  std::vector<Comparison> out;
  for (auto a = cells.begin(); a != cells.end(); ++a) {
    for (auto b = std::next(a); b != cells.end(); ++b) {
      std::vector<Pair> pairs;
      for (const auto& [key, va] : a->second) {
        if (auto hit = b->second.find(key); hit != b->second.end()) pairs.emplace_back(va, hit->second);
      }
      Comparison c;
      c.label = std::string(group_col) + "=" + a->first + " vs " + std::string(group_col) + "=" +
                b->first;
      try {
        c.result = wilcoxon_signed_rank(pairs);
      } catch (const DegenerateError&) {
        c.result.test = "wilcoxon(degenerate)";
        c.result.p_value = 1.0;
        c.result.n_effective = 0;
      }
      out.push_back(std::move(c));
    }
  }
  std::vector<double> ps;
  for (const auto& c : out) ps.push_back(c.result.p_value);
  const auto adjusted = bonferroni(ps);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].p_adjusted = adjusted[i];
  return out;
}

std::vector<Comparison> pearson_columns(const CsvTable& table, std::string_view x_col,
                                        std::string_view y_col) {
  const std::size_t xi = table.column(x_col);
  const std::size_t yi = table.column(y_col);
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& row : table.rows) {
    x.push_back(parse_number(row[xi], x_col));
    y.push_back(parse_number(row[yi], y_col));
  }
  Comparison c;
  c.label = std::string(x_col) + " ~ " + std::string(y_col);
  c.result = pearson(x, y);
  c.p_adjusted = c.result.p_value;
  return {c};
}

std::string comparisons_csv(const std::vector<Comparison>& comparisons) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "test,statistic,p,p_adjusted,effect\n";
  for (const auto& c : comparisons) {
    out << csv_escape(c.result.test + ": " + c.label) << ',' << c.result.statistic << ','
        << c.result.p_value << ',' << c.p_adjusted << ','
        << to_string(c.result.label) << '\n';
  }
  return out.str();
}

}  // namespace bdkit::stats
