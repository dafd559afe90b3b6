#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bdkit/kernels.hpp"

namespace bdkit::defense {

// N sample representations of dimension d, row-major f32.
struct RepresentationMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<float> data;
  std::vector<std::string> row_ids;

  const float* row(std::size_t i) const noexcept { return data.data() + i * dim; }
  // Finite entries, ids aligned with rows, d >= 2.
  void validate() const;
};

struct PowerIterationOptions {
  double relative_tolerance = 1e-10;
  std::size_t max_iterations = 10000;
  std::uint64_t start_seed = 0x5eed;
};

struct TopDirection {
  std::vector<double> direction;  // unit norm, largest-magnitude entry positive
  double eigenvalue = 0.0;        // of the covariance (divided by N)
  std::size_t iterations = 0;
  std::vector<double> mean;
};

// Per-column mean and the d x d covariance (1/N) sum (x - mean)(x - mean)^T.
std::vector<double> column_mean(const RepresentationMatrix& m, const kernels::KernelTable& k);
std::vector<double> covariance(const RepresentationMatrix& m, const std::vector<double>& mean,
                               const kernels::KernelTable& k);

// Top right-singular vector of the mean-centred matrix via power iteration
// on the covariance. Throws DegenerateError when centring leaves nothing.
TopDirection top_direction(const RepresentationMatrix& m, const PowerIterationOptions& options = {},
                           const kernels::KernelTable& k = kernels::active());

struct OutlierRanking {
  std::vector<double> scores;        // per row, row order
  std::vector<std::size_t> order;    // row indices, highest score first
  std::vector<std::string> ranked_ids;
  TopDirection top;
};

// score_i = <row_i - mean, v>^2; ties broken by sample id.
OutlierRanking outlier_scores(const RepresentationMatrix& m,
                              const PowerIterationOptions& options = {},
                              const kernels::KernelTable& k = kernels::active());

struct DefenseReport {
  std::vector<std::string> removed;
  double beta = 0.0;
  double poisoning_rate = 0.0;
  double expected_poison_count = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t true_positives = 0;
};

// ceil(beta * rate * N) capped at N, computed so that an exact product such
// as 1.5 * 0.001 * 10000 is not pushed up by rounding error.
std::size_t removal_count(double beta, double poisoning_rate, std::size_t n);

// Removes the top-ranked rows and scores them against the poisoned ids.
DefenseReport remove_and_score(const OutlierRanking& ranking,
                               const std::vector<std::string>& poisoned_ids, double beta,
                               double poisoning_rate);

// "REPR", u32 version, u64 N, u64 d, N x d little-endian f32; ids travel in
// a sidecar file with one id per line.
inline constexpr std::uint32_t kReprVersion = 1;
std::string serialize_repr(const RepresentationMatrix& m);
RepresentationMatrix parse_repr(std::string_view bytes);
void save_repr(const RepresentationMatrix& m, const std::filesystem::path& matrix_path,
               const std::filesystem::path& ids_path);
// Without an ids file the rows are named "0", "1", ...
RepresentationMatrix load_repr(const std::filesystem::path& matrix_path,
                               const std::filesystem::path& ids_path = {});

std::string report_json(const DefenseReport& report);

}  // namespace bdkit::defense
