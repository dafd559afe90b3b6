#include "bdkit/kernels.hpp"

namespace bdkit::kernels {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot(a + r * cols, x, cols);
}

void accumulate_f32(const float* row, double* sum, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) sum[i] += static_cast<double>(row[i]);
}

void center_f32(const float* row, const double* mean, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(row[i]) - mean[i];
}

double centered_dot_f32(const float* row, const double* mean, const double* v, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += (static_cast<double>(row[i]) - mean[i]) * v[i];
  return s;
}

constexpr KernelTable kScalar{"scalar", dot, axpy, gemv, accumulate_f32, center_f32,
                              centered_dot_f32};

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

}  // namespace bdkit::kernels
