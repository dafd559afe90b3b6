// Compiled with -mavx2 -mfma; only reached after a CPUID check.
#include <immintrin.h>

#include "bdkit/kernels.hpp"

namespace bdkit::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

inline __m256d load_f32x4(const float* p) { return _mm256_cvtps_pd(_mm_loadu_ps(p)); }

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot(a + r * cols, x, cols);
}

void accumulate_f32(const float* row, double* sum, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(sum + i, _mm256_add_pd(_mm256_loadu_pd(sum + i), load_f32x4(row + i)));
  }
  for (; i < n; ++i) sum[i] += static_cast<double>(row[i]);
}

void center_f32(const float* row, const double* mean, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(load_f32x4(row + i), _mm256_loadu_pd(mean + i)));
  }
  for (; i < n; ++i) out[i] = static_cast<double>(row[i]) - mean[i];
}

double centered_dot_f32(const float* row, const double* mean, const double* v, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d c = _mm256_sub_pd(load_f32x4(row + i), _mm256_loadu_pd(mean + i));
    acc = _mm256_fmadd_pd(c, _mm256_loadu_pd(v + i), acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += (static_cast<double>(row[i]) - mean[i]) * v[i];
  return s;
}

}  // namespace

extern const KernelTable kTable;
const KernelTable kTable{"avx2", dot, axpy, gemv, accumulate_f32, center_f32, centered_dot_f32};

}  // namespace bdkit::kernels::avx2
