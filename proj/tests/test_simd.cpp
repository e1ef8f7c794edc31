#include <cmath>
#include <vector>

#include "doctest.h"
#include "routekg/common.hpp"
#include "routekg/simd/kernels.hpp"

using namespace routekg;

namespace {

std::vector<double> randv(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = 2.0 * uniform01(rng) - 1.0;
  return v;
}

std::vector<const simd::KernelTable*> variants() {
  std::vector<const simd::KernelTable*> out;
  if (simd::avx2::table && simd::cpu_has_avx2()) out.push_back(simd::avx2::table);
  if (simd::neon::table) out.push_back(simd::neon::table);
  return out;
}

void close(const std::vector<double>& a, const std::vector<double>& b, double scale) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12 * scale);
}

}  // namespace

TEST_CASE("scalar kernels on hand values") {
  const auto& g = simd::generic::table;
  const double a[3] = {1, 2, 3}, b[3] = {4, -5, 6};
  CHECK(g.dot(a, b, 3) == 12.0);
  double y[3] = {1, 1, 1};
  g.axpy(2.0, a, y, 3);
  CHECK(y[2] == 7.0);
  const double m[6] = {1, 2, 3, 4, 5, 6};  // 2 x 3
  double out[2];
  g.gemv(m, 2, 3, a, out);
  CHECK(out[0] == 14.0);
  CHECK(out[1] == 32.0);
  double t[3] = {0, 0, 0};
  const double x2[2] = {1, -1};
  g.gemv_t_acc(m, 2, 3, x2, t);
  CHECK(t[0] == -3.0);
  CHECK(t[2] == -3.0);
  double mm[6] = {};
  g.ger(mm, 2, 3, x2, a);
  CHECK(mm[4] == -2.0);
}

TEST_CASE("vector kernels agree with the scalar reference") {
  Rng rng = make_stream(11, "simd");
  for (const auto* t : variants()) {
    CAPTURE(t->name);
    for (std::size_t n : {0, 1, 3, 4, 5, 7, 8, 15, 16, 17, 63, 64, 65, 200}) {
      const auto a = randv(rng, n), b = randv(rng, n);
      CHECK(std::abs(t->dot(a.data(), b.data(), n) - simd::generic::table.dot(a.data(), b.data(), n)) <=
            1e-12 * (1.0 + static_cast<double>(n)));
      auto y1 = randv(rng, n);
      auto y2 = y1;
      t->axpy(0.37, a.data(), y1.data(), n);
      simd::generic::table.axpy(0.37, a.data(), y2.data(), n);
      close(y1, y2, 1.0);
    }
    for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{1, 1}, {3, 5}, {8, 4}, {7, 9}, {64, 64},
                              {33, 130}, {5, 0}}) {
      const auto m = randv(rng, rows * cols);
      const auto x = randv(rng, cols), xr = randv(rng, rows);
      std::vector<double> o1(rows), o2(rows);
      t->gemv(m.data(), rows, cols, x.data(), o1.data());
      simd::generic::table.gemv(m.data(), rows, cols, x.data(), o2.data());
      close(o1, o2, 1.0 + static_cast<double>(cols));
      auto a1 = randv(rng, cols);
      auto a2 = a1;
      t->gemv_t_acc(m.data(), rows, cols, xr.data(), a1.data());
      simd::generic::table.gemv_t_acc(m.data(), rows, cols, xr.data(), a2.data());
      close(a1, a2, 1.0 + static_cast<double>(rows));
      auto g1 = m;
      auto g2 = m;
      t->ger(g1.data(), rows, cols, xr.data(), x.data());
      simd::generic::table.ger(g2.data(), rows, cols, xr.data(), x.data());
      close(g1, g2, 1.0);
    }
  }
}

TEST_CASE("dispatch picks a usable table") {
  const auto& t = simd::active();
  CHECK(!t.name.empty());
  const double a[2] = {1, 2};
  CHECK(t.dot(a, a, 2) == 5.0);
}
