// AArch64 Advanced SIMD is baseline, so no runtime probe is needed.
#include <arm_neon.h>

#include "bdkit/kernels.hpp"

namespace bdkit::kernels::neon {
namespace {

inline float64x2_t lo_f32x2(const float* p) { return vcvt_f64_f32(vld1_f32(p)); }

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot(a + r * cols, x, cols);
}

void accumulate_f32(const float* row, double* sum, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(sum + i, vaddq_f64(vld1q_f64(sum + i), lo_f32x2(row + i)));
  for (; i < n; ++i) sum[i] += static_cast<double>(row[i]);
}

void center_f32(const float* row, const double* mean, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vsubq_f64(lo_f32x2(row + i), vld1q_f64(mean + i)));
  for (; i < n; ++i) out[i] = static_cast<double>(row[i]) - mean[i];
}

double centered_dot_f32(const float* row, const double* mean, const double* v, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    acc = vfmaq_f64(acc, vsubq_f64(lo_f32x2(row + i), vld1q_f64(mean + i)), vld1q_f64(v + i));
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += (static_cast<double>(row[i]) - mean[i]) * v[i];
  return s;
}

}  // namespace

extern const KernelTable kTable;
const KernelTable kTable{"neon", dot, axpy, gemv, accumulate_f32, center_f32, centered_dot_f32};

}  // namespace bdkit::kernels::neon
