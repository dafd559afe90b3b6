#include "bdkit/defense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "bdkit/binio.hpp"
#include "bdkit/corpus.hpp"
#include "bdkit/error.hpp"
#include "bdkit/rng.hpp"
#include "json.hpp"

namespace bdkit::defense {

void RepresentationMatrix::validate() const {
  if (dim < 2) throw ArgumentError("representation dimension must be at least 2");
  if (data.size() != rows * dim) throw ArgumentError("representation data size != N x d");
  if (row_ids.size() != rows) throw ArgumentError("representation ids do not match row count");
  for (float f : data) {
    if (!std::isfinite(f)) throw ArgumentError("representation matrix has a non-finite entry");
  }
}

std::vector<double> column_mean(const RepresentationMatrix& m, const kernels::KernelTable& k) {
  std::vector<double> mean(m.dim, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) k.accumulate_f32(m.row(r), mean.data(), m.dim);
  const double inv = 1.0 / static_cast<double>(m.rows);
  for (auto& v : mean) v *= inv;
  return mean;
}

std::vector<double> covariance(const RepresentationMatrix& m, const std::vector<double>& mean,
                               const kernels::KernelTable& k) {
  const std::size_t d = m.dim;
  std::vector<double> cov(d * d, 0.0);
  std::vector<double> centered(d);
  for (std::size_t r = 0; r < m.rows; ++r) {
    k.center_f32(m.row(r), mean.data(), centered.data(), d);
    // Upper triangle only: row i gets x_i * x[i..d).
    for (std::size_t i = 0; i < d; ++i) {
      k.axpy(centered[i], centered.data() + i, cov.data() + i * d + i, d - i);
    }
  }
  const double inv = 1.0 / static_cast<double>(m.rows);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov[i * d + j] *= inv;
      cov[j * d + i] = cov[i * d + j];
    }
  }
  return cov;
}

TopDirection top_direction(const RepresentationMatrix& m, const PowerIterationOptions& options,
                           const kernels::KernelTable& k) {
  m.validate();
  if (m.rows < 2) throw ArgumentError("top_direction needs at least 2 rows");
  const std::size_t d = m.dim;
  TopDirection out;
  out.mean = column_mean(m, k);
  const auto cov = covariance(m, out.mean, k);
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += cov[i * d + i];
  if (!(trace > 0.0)) throw DegenerateError("representations have no variance after centring");

  Rng rng(options.start_seed);
  std::vector<double> v(d);
  for (auto& x : v) x = rng.normal();
  double norm = std::sqrt(k.dot(v.data(), v.data(), d));
  for (auto& x : v) x /= norm;

  std::vector<double> w(d);
  double eigenvalue = 0.0;
  std::size_t it = 0;
  while (it < options.max_iterations) {
    ++it;
    k.gemv(cov.data(), d, d, v.data(), w.data());
    const double next = k.dot(v.data(), w.data(), d);
    norm = std::sqrt(k.dot(w.data(), w.data(), d));
    if (!(norm > 0.0)) throw DegenerateError("power iteration collapsed to zero");
    for (std::size_t i = 0; i < d; ++i) v[i] = w[i] / norm;
    const bool converged =
        it > 1 && std::abs(next - eigenvalue) < options.relative_tolerance * std::abs(next);
    eigenvalue = next;
    if (converged) break;
  }
  // Rayleigh quotient of the final iterate.
  k.gemv(cov.data(), d, d, v.data(), w.data());
  eigenvalue = k.dot(v.data(), w.data(), d);

  std::size_t largest = 0;
  for (std::size_t i = 1; i < d; ++i) {
    if (std::abs(v[i]) > std::abs(v[largest])) largest = i;
  }
  if (v[largest] < 0) {
    for (auto& x : v) x = -x;
  }
  out.direction = std::move(v);
  out.eigenvalue = eigenvalue;
  out.iterations = it;
  return out;
}

OutlierRanking outlier_scores(const RepresentationMatrix& m, const PowerIterationOptions& options,
                              const kernels::KernelTable& k) {
  OutlierRanking ranking;
  ranking.top = top_direction(m, options, k);
  ranking.scores.resize(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double proj =
        k.centered_dot_f32(m.row(r), ranking.top.mean.data(), ranking.top.direction.data(), m.dim);
    ranking.scores[r] = proj * proj;
  }
  ranking.order.resize(m.rows);
  std::iota(ranking.order.begin(), ranking.order.end(), std::size_t{0});
  std::sort(ranking.order.begin(), ranking.order.end(), [&](std::size_t a, std::size_t b) {
    if (ranking.scores[a] != ranking.scores[b]) return ranking.scores[a] > ranking.scores[b];
    if (m.row_ids[a] != m.row_ids[b]) return m.row_ids[a] < m.row_ids[b];
    return a < b;
  });
  ranking.ranked_ids.reserve(m.rows);
  for (auto r : ranking.order) ranking.ranked_ids.push_back(m.row_ids[r]);
  return ranking;
}

std::size_t removal_count(double beta, double poisoning_rate, std::size_t n) {
  const double expected = beta * poisoning_rate * static_cast<double>(n);
  const double count = std::ceil(expected - expected * 1e-12);
  if (count <= 0.0) return 0;
  return std::min(n, static_cast<std::size_t>(count));
}

DefenseReport remove_and_score(const OutlierRanking& ranking,
                               const std::vector<std::string>& poisoned_ids, double beta,
                               double poisoning_rate) {
  if (!(beta > 0.0)) throw ArgumentError("removal rate beta must be > 0");
  if (!(poisoning_rate > 0.0 && poisoning_rate <= 1.0)) {
    throw ArgumentError("poisoning rate must lie in (0, 1]");
  }
  const std::unordered_set<std::string> known(ranking.ranked_ids.begin(),
                                              ranking.ranked_ids.end());
  const std::unordered_set<std::string> poisoned(poisoned_ids.begin(), poisoned_ids.end());
  for (const auto& id : poisoned) {
    if (!known.count(id)) throw ArgumentError("manifest id '" + id + "' has no representation row");
  }
  const std::size_t n = ranking.ranked_ids.size();
  DefenseReport report;
  report.beta = beta;
  report.poisoning_rate = poisoning_rate;
  report.expected_poison_count = poisoning_rate * static_cast<double>(n);
  const std::size_t count = removal_count(beta, poisoning_rate, n);
  report.removed.assign(ranking.ranked_ids.begin(),
                        ranking.ranked_ids.begin() + static_cast<std::ptrdiff_t>(count));
  for (const auto& id : report.removed) {
    if (poisoned.count(id)) ++report.true_positives;
  }
  const auto tp = static_cast<double>(report.true_positives);
  report.precision = count ? tp / static_cast<double>(count) : 0.0;
  report.recall = poisoned.empty() ? 0.0 : tp / static_cast<double>(poisoned.size());
  return report;
}

std::string serialize_repr(const RepresentationMatrix& m) {
  if (m.data.size() != m.rows * m.dim) throw ArgumentError("representation data size != N x d");
  std::string out = "REPR";
  binio::put_u32(out, kReprVersion);
  binio::put_u64(out, m.rows);
  binio::put_u64(out, m.dim);
  out.reserve(out.size() + 4 * m.data.size());
  for (float f : m.data) binio::put_f32(out, f);
  return out;
}

RepresentationMatrix parse_repr(std::string_view bytes) {
  binio::Reader in(bytes, "representation file");
  in.expect_magic("REPR");
  const auto version = in.u32();
  if (version != kReprVersion) {
    throw FormatError("representation file: unsupported version " + std::to_string(version));
  }
  RepresentationMatrix m;
  m.rows = in.u64();
  m.dim = in.u64();
  if (m.dim == 0 || (m.rows && m.dim > in.remaining() / 4 / m.rows)) {
    throw FormatError("representation file: truncated or zero dimension");
  }
  if (in.remaining() != 4 * m.rows * m.dim) {
    throw FormatError("representation file: payload size mismatch");
  }
  m.data.resize(m.rows * m.dim);
  for (auto& f : m.data) {
    f = in.f32();
    if (!std::isfinite(f)) throw FormatError("representation file: non-finite entry");
  }
  m.row_ids.reserve(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) m.row_ids.push_back(std::to_string(i));
  return m;
}

void save_repr(const RepresentationMatrix& m, const std::filesystem::path& matrix_path,
               const std::filesystem::path& ids_path) {
  write_file(matrix_path, serialize_repr(m));
  if (!ids_path.empty()) {
    std::string ids;
    for (const auto& id : m.row_ids) {
      if (id.find('\n') != std::string::npos) throw ArgumentError("row id contains a newline");
      ids += id;
      ids += '\n';
    }
    write_file(ids_path, ids);
  }
}

RepresentationMatrix load_repr(const std::filesystem::path& matrix_path,
                               const std::filesystem::path& ids_path) {
  RepresentationMatrix m = parse_repr(read_file(matrix_path));
  if (!ids_path.empty()) {
    std::istringstream in(read_file(ids_path));
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      ids.push_back(line);
    }
    if (ids.size() != m.rows) {
      throw FormatError("id sidecar has " + std::to_string(ids.size()) + " lines for " +
                        std::to_string(m.rows) + " rows");
    }
    m.row_ids = std::move(ids);
  }
  return m;
}

std::string report_json(const DefenseReport& r) {
  nlohmann::ordered_json j = {{"beta", r.beta},
                              {"poisoning_rate", r.poisoning_rate},
                              {"expected_poison_count", r.expected_poison_count},
                              {"removed_count", r.removed.size()},
                              {"true_positives", r.true_positives},
                              {"precision", r.precision},
                              {"recall", r.recall},
                              {"removed", r.removed}};
  return j.dump(2) + "\n";
}

}  // namespace bdkit::defense
