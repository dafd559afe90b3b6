#include <cstdlib>
#include <string_view>

#include "bdkit/kernels.hpp"

namespace bdkit::kernels {

#if defined(BDKIT_HAVE_AVX2)
namespace avx2 {
extern const KernelTable kTable;
}
#endif
#if defined(BDKIT_HAVE_NEON)
namespace neon {
extern const KernelTable kTable;
}
#endif

const KernelTable* avx2_table() noexcept {
#if defined(BDKIT_HAVE_AVX2)
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported ? &avx2::kTable : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_table() noexcept {
#if defined(BDKIT_HAVE_NEON)
  return &neon::kTable;
#else
  return nullptr;
#endif
}

const KernelTable* simd_table() noexcept {
  if (const auto* t = avx2_table()) return t;
  return neon_table();
}

const KernelTable& active() noexcept {
  static const KernelTable& table = []() -> const KernelTable& {
    const char* forced = std::getenv("BDKIT_KERNELS");
    if (forced && std::string_view(forced) == "scalar") return scalar_table();
    if (const auto* simd = simd_table()) return *simd;
    return scalar_table();
  }();
  return table;
}

}  // namespace bdkit::kernels
