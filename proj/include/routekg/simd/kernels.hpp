#pragma once

// Dense double-precision kernels behind a runtime-selected dispatch table.
//
// Every kernel has a portable scalar reference in `generic::` and optional
// vectorized variants (`avx2::` on x86-64, `neon::` on AArch64).  The
// variant is chosen once at startup from CPUID / the target triple; the
// environment variable ROUTEKG_SIMD=generic forces the scalar path.
//
// Vector variants reassociate sums, so results agree with the reference to
// rounding, not bit-for-bit.  Within one process the selected variant is
// fixed, which keeps training runs bitwise reproducible.

#include <cstddef>
#include <string_view>

namespace routekg::simd {

struct KernelTable {
  std::string_view name;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y[r] = sum_c m[r * cols + c] * x[c]   (row-major m, overwrites y)
  void (*gemv)(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y);
  // y[c] += sum_r m[r * cols + c] * x[r]
  void (*gemv_t_acc)(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y);
  // m[r * cols + c] += x[r] * y[c]
  void (*ger)(double* m, std::size_t rows, std::size_t cols, const double* x, const double* y);
};

namespace generic {
extern const KernelTable table;
}
namespace avx2 {
/// Null when the build has no AVX2 translation unit.
extern const KernelTable* const table;
}
namespace neon {
extern const KernelTable* const table;
}

/// True when the running CPU can execute the AVX2+FMA variant.
bool cpu_has_avx2();

/// The table selected for this process.
const KernelTable& active();

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) { active().axpy(alpha, x, y, n); }
inline void gemv(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y) {
  active().gemv(m, rows, cols, x, y);
}
inline void gemv_t_acc(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y) {
  active().gemv_t_acc(m, rows, cols, x, y);
}
inline void ger(double* m, std::size_t rows, std::size_t cols, const double* x, const double* y) {
  active().ger(m, rows, cols, x, y);
}

}  // namespace routekg::simd
