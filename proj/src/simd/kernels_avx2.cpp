// Compiled with -mavx2 -mfma; only reached when cpu_has_avx2() is true.
#include <immintrin.h>

#include "routekg/simd/kernels.hpp"

namespace routekg::simd::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y) {
  std::size_t r = 0;
  // Four rows per pass share each load of x.
  for (; r + 4 <= rows; r += 4) {
    const double* m0 = m + r * cols;
    const double* m1 = m0 + cols;
    const double* m2 = m1 + cols;
    const double* m3 = m2 + cols;
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    __m256d a2 = _mm256_setzero_pd();
    __m256d a3 = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      const __m256d vx = _mm256_loadu_pd(x + c);
      a0 = _mm256_fmadd_pd(_mm256_loadu_pd(m0 + c), vx, a0);
      a1 = _mm256_fmadd_pd(_mm256_loadu_pd(m1 + c), vx, a1);
      a2 = _mm256_fmadd_pd(_mm256_loadu_pd(m2 + c), vx, a2);
      a3 = _mm256_fmadd_pd(_mm256_loadu_pd(m3 + c), vx, a3);
    }
    double s0 = hsum(a0), s1 = hsum(a1), s2 = hsum(a2), s3 = hsum(a3);
    for (; c < cols; ++c) {
      s0 += m0[c] * x[c];
      s1 += m1[c] * x[c];
      s2 += m2[c] * x[c];
      s3 += m3[c] * x[c];
    }
    y[r] = s0;
    y[r + 1] = s1;
    y[r + 2] = s2;
    y[r + 3] = s3;
  }
  for (; r < rows; ++r) y[r] = dot(m + r * cols, x, cols);
}

void gemv_t_acc(const double* m, std::size_t rows, std::size_t cols, const double* x, double* y) {
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) {
    const double* m0 = m + r * cols;
    const double* m1 = m0 + cols;
    const double* m2 = m1 + cols;
    const double* m3 = m2 + cols;
    const __m256d x0 = _mm256_set1_pd(x[r]);
    const __m256d x1 = _mm256_set1_pd(x[r + 1]);
    const __m256d x2 = _mm256_set1_pd(x[r + 2]);
    const __m256d x3 = _mm256_set1_pd(x[r + 3]);
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      __m256d acc = _mm256_loadu_pd(y + c);
      acc = _mm256_fmadd_pd(x0, _mm256_loadu_pd(m0 + c), acc);
      acc = _mm256_fmadd_pd(x1, _mm256_loadu_pd(m1 + c), acc);
      acc = _mm256_fmadd_pd(x2, _mm256_loadu_pd(m2 + c), acc);
      acc = _mm256_fmadd_pd(x3, _mm256_loadu_pd(m3 + c), acc);
      _mm256_storeu_pd(y + c, acc);
    }
    for (; c < cols; ++c) {
      y[c] += x[r] * m0[c] + x[r + 1] * m1[c] + x[r + 2] * m2[c] + x[r + 3] * m3[c];
    }
  }
  for (; r < rows; ++r) axpy(x[r], m + r * cols, y, cols);
}

void ger(double* m, std::size_t rows, std::size_t cols, const double* x, const double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    if (x[r] != 0.0) axpy(x[r], y, m + r * cols, cols);
  }
}

const KernelTable kTable{"avx2", dot, axpy, gemv, gemv_t_acc, ger};

}  // namespace

const KernelTable* const table = &kTable;

}  // namespace routekg::simd::avx2
