#pragma once

#include <cstddef>
#include <string_view>

// Dense inner loops used by the spectral defense. Each kernel has a scalar
// reference plus a SIMD variant: AVX2+FMA on x86-64 (chosen at runtime from
// CPUID) or NEON on AArch64. BDKIT_KERNELS=scalar forces the reference.
namespace bdkit::kernels {

struct KernelTable {
  std::string_view name;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = A x with A row-major rows x cols
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  // sum[i] += row[i]
  void (*accumulate_f32)(const float* row, double* sum, std::size_t n);
  // out[i] = row[i] - mean[i]
  void (*center_f32)(const float* row, const double* mean, double* out, std::size_t n);
  // sum_i (row[i] - mean[i]) * v[i]
  double (*centered_dot_f32)(const float* row, const double* mean, const double* v,
                             std::size_t n);
};

const KernelTable& scalar_table() noexcept;
// nullptr when the AVX2 variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_table() noexcept;
// nullptr unless built for AArch64.
const KernelTable* neon_table() noexcept;
// Whichever SIMD table is usable here, or nullptr.
const KernelTable* simd_table() noexcept;
// The table selected for this process (resolved once).
const KernelTable& active() noexcept;

}  // namespace bdkit::kernels
