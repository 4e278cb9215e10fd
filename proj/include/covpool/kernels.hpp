// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel double-precision kernels behind every dense inner loop:
// a scalar reference implementation plus AVX2 (x86-64) and NEON (aarch64)
// variants selected once at runtime. Elementwise kernels are bit-identical
// across backends (same per-element operation order, no FP contraction);
// reduction kernels may differ in summation order and are equivalence-tested
// against the scalar reference at tight tolerance.
#pragma once

#include <cstddef>

namespace covpool::kern {

struct Kernels {
  // reductions
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  double (*sumsq)(const double* x, std::size_t n);
  double (*max_abs)(const double* x, std::size_t n);
  // elementwise
  void (*axpy)(double a, const double* x, double* y, std::size_t n);  // y += a*x
  void (*scale)(double a, double* x, std::size_t n);                  // x *= a
  // plane rotation: (x, y) <- (c*x - s*y, s*x + c*y)
  void (*rot)(double* x, double* y, double c, double s, std::size_t n);
  void (*relu)(const double* x, double* y, std::size_t n);  // y = max(x, 0)
  // dx = dy where x > 0, else 0
  void (*relu_grad)(const double* x, const double* dy, double* dx, std::size_t n);
  // v <- momentum*v + g + wd*p;  p <- p - lr*v
  void (*sgd_update)(double* p, double* v, const double* g, std::size_t n,
                     double lr, double momentum, double wd);
  const char* name;
};

enum class Backend { Auto, Scalar, Avx2, Neon };

const Kernels& scalar_kernels();
const Kernels* avx2_kernels();  // nullptr unless built for x86 and CPU has AVX2
const Kernels* neon_kernels();  // nullptr unless built for aarch64

/// The table in use. Resolved once (Auto picks the widest supported backend).
const Kernels& active();

/// Override backend selection; throws DomainError if unavailable.
void select(Backend b);
Backend selected();

// Convenience forwarders through the active table.
inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline double sum(const double* x, std::size_t n) { return active().sum(x, n); }
inline double sumsq(const double* x, std::size_t n) { return active().sumsq(x, n); }
inline double max_abs(const double* x, std::size_t n) { return active().max_abs(x, n); }
inline void axpy(double a, const double* x, double* y, std::size_t n) { active().axpy(a, x, y, n); }
inline void scale(double a, double* x, std::size_t n) { active().scale(a, x, n); }
inline void rot(double* x, double* y, double c, double s, std::size_t n) { active().rot(x, y, c, s, n); }
inline void relu(const double* x, double* y, std::size_t n) { active().relu(x, y, n); }
inline void relu_grad(const double* x, const double* dy, double* dx, std::size_t n) {
  active().relu_grad(x, dy, dx, n);
}
inline void sgd_update(double* p, double* v, const double* g, std::size_t n,
                       double lr, double momentum, double wd) {
  active().sgd_update(p, v, g, n, lr, momentum, wd);
}

}  // namespace covpool::kern
