// SPDX-License-Identifier: Apache-2.0
//
// Scalar reference kernels. Reductions run strictly left to right; the SIMD
// backends are checked against these in tests/test_kernels.cpp.
#include "covpool/kernels.hpp"

#include <cmath>

namespace covpool::kern {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double sumsq_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

double max_abs_scalar(const double* x, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double a = std::fabs(x[i]);
    if (a > m) m = a;
  }
  return m;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

void scale_scalar(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = a * x[i];
}

void rot_scalar(double* x, double* y, double c, double s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double xi = x[i];
    double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

void relu_scalar(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad_scalar(const double* x, const double* dy, double* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void sgd_update_scalar(double* p, double* v, const double* g, std::size_t n,
                       double lr, double momentum, double wd) {
  for (std::size_t i = 0; i < n; ++i) {
    double vi = momentum * v[i] + g[i] + wd * p[i];
    v[i] = vi;
    p[i] = p[i] - lr * vi;
  }
}

constexpr Kernels kScalar = {
    dot_scalar,  sum_scalar,   sumsq_scalar,     max_abs_scalar,    axpy_scalar,
    scale_scalar, rot_scalar,  relu_scalar,      relu_grad_scalar,  sgd_update_scalar,
    "scalar",
};

}  // namespace

const Kernels& scalar_kernels() { return kScalar; }

}  // namespace covpool::kern
