// SPDX-License-Identifier: Apache-2.0
//
// Backend equivalence: every SIMD kernel against the scalar reference.
// Elementwise kernels must agree bit for bit (same per-element rounding);
// reductions may reassociate and are held to a tight relative tolerance.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "covpool/kernels.hpp"
#include "covpool/rng.hpp"

using namespace covpool;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

// sizes crossing the 4-lane and 2-lane boundaries, plus remainders
const std::size_t kSizes[] = {1, 2, 3, 4, 5, 7, 8, 15, 16, 17, 31, 64, 67};

}  // namespace

TEST_CASE("active backend is one of the known tables") {
  const kern::Kernels& k = kern::active();
  const bool known = &k == &kern::scalar_kernels() || &k == kern::avx2_kernels() ||
                     &k == kern::neon_kernels();
  CHECK(known);
}

TEST_CASE("simd reductions match scalar within 1e-13 relative") {
  const kern::Kernels* simd = kern::avx2_kernels();
  if (!simd) simd = kern::neon_kernels();
  if (!simd) return;  // scalar-only platform: nothing to compare

  Rng rng(42);
  const kern::Kernels& ref = kern::scalar_kernels();
  for (std::size_t n : kSizes) {
    for (int rep = 0; rep < 8; ++rep) {
      const auto a = random_vec(rng, n, 3.0);
      const auto b = random_vec(rng, n, 0.5);
      CHECK(std::fabs(simd->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <=
            1e-13 * (1.0 + std::fabs(ref.dot(a.data(), b.data(), n))));
      CHECK(std::fabs(simd->sum(a.data(), n) - ref.sum(a.data(), n)) <=
            1e-13 * (1.0 + std::fabs(ref.sum(a.data(), n))));
      CHECK(std::fabs(simd->sumsq(a.data(), n) - ref.sumsq(a.data(), n)) <=
            1e-13 * (1.0 + ref.sumsq(a.data(), n)));
      // max selection involves no rounding at all
      CHECK(simd->max_abs(a.data(), n) == ref.max_abs(a.data(), n));
    }
  }
}

TEST_CASE("simd elementwise kernels match scalar bit for bit") {
  const kern::Kernels* simd = kern::avx2_kernels();
  if (!simd) simd = kern::neon_kernels();
  if (!simd) return;

  Rng rng(7);
  const kern::Kernels& ref = kern::scalar_kernels();
  for (std::size_t n : kSizes) {
    const auto x = random_vec(rng, n, 2.0);
    const double alpha = rng.normal();

    auto y1 = random_vec(rng, n);
    auto y2 = y1;
    ref.axpy(alpha, x.data(), y1.data(), n);
    simd->axpy(alpha, x.data(), y2.data(), n);
    CHECK(y1 == y2);

    auto s1 = x;
    auto s2 = x;
    ref.scale(alpha, s1.data(), n);
    simd->scale(alpha, s2.data(), n);
    CHECK(s1 == s2);

    const double c = std::cos(0.3), sn = std::sin(0.3);
    auto rx1 = x, rx2 = x;
    auto ry1 = y1, ry2 = y1;
    ref.rot(rx1.data(), ry1.data(), c, sn, n);
    simd->rot(rx2.data(), ry2.data(), c, sn, n);
    CHECK(rx1 == rx2);
    CHECK(ry1 == ry2);

    std::vector<double> r1(n), r2(n);
    ref.relu(x.data(), r1.data(), n);
    simd->relu(x.data(), r2.data(), n);
    CHECK(r1 == r2);

    std::vector<double> g1(n), g2(n);
    ref.relu_grad(x.data(), y1.data(), g1.data(), n);
    simd->relu_grad(x.data(), y1.data(), g2.data(), n);
    CHECK(g1 == g2);

    auto p1 = random_vec(rng, n), v1 = random_vec(rng, n);
    const auto g = random_vec(rng, n);
    auto p2 = p1, v2 = v1;
    ref.sgd_update(p1.data(), v1.data(), g.data(), n, 0.1, 0.9, 1e-4);
    simd->sgd_update(p2.data(), v2.data(), g.data(), n, 0.1, 0.9, 1e-4);
    CHECK(p1 == p2);
    CHECK(v1 == v2);
  }
}

TEST_CASE("relu treats negative zero like the scalar reference") {
  const kern::Kernels* simd = kern::avx2_kernels();
  if (!simd) simd = kern::neon_kernels();
  if (!simd) return;
  const double x[5] = {-0.0, 0.0, -1.0, 1.0, 1e-308};
  double y_ref[5], y_simd[5];
  kern::scalar_kernels().relu(x, y_ref, 5);
  simd->relu(x, y_simd, 5);
  for (int i = 0; i < 5; ++i) CHECK(y_ref[i] == y_simd[i]);
}

TEST_CASE("backend selection can force scalar and restore auto") {
  kern::select(kern::Backend::Scalar);
  CHECK(&kern::active() == &kern::scalar_kernels());
  kern::select(kern::Backend::Auto);
  const kern::Kernels& k = kern::active();
  const bool widest = (kern::avx2_kernels() && &k == kern::avx2_kernels()) ||
                      (!kern::avx2_kernels() && kern::neon_kernels() && &k == kern::neon_kernels()) ||
                      (!kern::avx2_kernels() && !kern::neon_kernels() && &k == &kern::scalar_kernels());
  CHECK(widest);
}
