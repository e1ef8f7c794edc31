#include <cstdlib>
#include <string_view>

#include "routekg/simd/kernels.hpp"

namespace routekg::simd {

#if !defined(ROUTEKG_HAVE_AVX2)
namespace avx2 {
const KernelTable* const table = nullptr;
}
#endif
#if !defined(ROUTEKG_HAVE_NEON)
namespace neon {
const KernelTable* const table = nullptr;
}
#endif

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(__i386__)) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable& select() {
  if (const char* forced = std::getenv("ROUTEKG_SIMD")) {
    if (std::string_view(forced) == "generic") return generic::table;
  }
  if (avx2::table != nullptr && cpu_has_avx2()) return *avx2::table;
  if (neon::table != nullptr) return *neon::table;
  return generic::table;
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& chosen = select();
  return chosen;
}

}  // namespace routekg::simd
