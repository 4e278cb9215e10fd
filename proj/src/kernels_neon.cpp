// SPDX-License-Identifier: Apache-2.0
//
// NEON kernels (2 doubles per lane) for aarch64, mirroring the AVX2 file.
#include "covpool/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace covpool::kern {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  double r = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) r += a[i] * b[i];
  return r;
}

double sum_neon(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
  double r = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) r += x[i];
  return r;
}

double sumsq_neon(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t v = vld1q_f64(x + i);
    acc = vaddq_f64(acc, vmulq_f64(v, v));
  }
  double r = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) r += x[i] * x[i];
  return r;
}

double max_abs_neon(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vmaxq_f64(acc, vabsq_f64(vld1q_f64(x + i)));
  double m = vgetq_lane_f64(acc, 0);
  double m1 = vgetq_lane_f64(acc, 1);
  if (m1 > m) m = m1;
  for (; i < n; ++i) {
    double a = x[i] < 0.0 ? -x[i] : x[i];
    if (a > m) m = a;
  }
  return m;
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void scale_neon(double a, double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
  for (; i < n; ++i) x[i] = a * x[i];
}

void rot_neon(double* x, double* y, double c, double s, std::size_t n) {
  const float64x2_t vc = vdupq_n_f64(c);
  const float64x2_t vs = vdupq_n_f64(s);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t vx = vld1q_f64(x + i);
    float64x2_t vy = vld1q_f64(y + i);
    vst1q_f64(x + i, vsubq_f64(vmulq_f64(vc, vx), vmulq_f64(vs, vy)));
    vst1q_f64(y + i, vaddq_f64(vmulq_f64(vs, vx), vmulq_f64(vc, vy)));
  }
  for (; i < n; ++i) {
    double xi = x[i];
    double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

void relu_neon(const double* x, double* y, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmaxq_f64(vld1q_f64(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad_neon(const double* x, const double* dy, double* dx, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    uint64x2_t mask = vcgtq_f64(vld1q_f64(x + i), zero);
    float64x2_t vdy = vld1q_f64(dy + i);
    vst1q_f64(dx + i, vreinterpretq_f64_u64(
                          vandq_u64(mask, vreinterpretq_u64_f64(vdy))));
  }
  for (; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void sgd_update_neon(double* p, double* v, const double* g, std::size_t n,
                     double lr, double momentum, double wd) {
  const float64x2_t vlr = vdupq_n_f64(lr);
  const float64x2_t vm = vdupq_n_f64(momentum);
  const float64x2_t vwd = vdupq_n_f64(wd);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t vp = vld1q_f64(p + i);
    float64x2_t vv = vld1q_f64(v + i);
    float64x2_t vg = vld1q_f64(g + i);
    float64x2_t nv = vaddq_f64(vaddq_f64(vmulq_f64(vm, vv), vg), vmulq_f64(vwd, vp));
    vst1q_f64(v + i, nv);
    vst1q_f64(p + i, vsubq_f64(vp, vmulq_f64(vlr, nv)));
  }
  for (; i < n; ++i) {
    double vi = momentum * v[i] + g[i] + wd * p[i];
    v[i] = vi;
    p[i] = p[i] - lr * vi;
  }
}

constexpr Kernels kNeon = {
    dot_neon,  sum_neon,   sumsq_neon,     max_abs_neon,    axpy_neon,
    scale_neon, rot_neon,  relu_neon,      relu_grad_neon,  sgd_update_neon,
    "neon",
};

}  // namespace

const Kernels* neon_kernels() { return &kNeon; }

}  // namespace covpool::kern

#else  // !__aarch64__

namespace covpool::kern {
const Kernels* neon_kernels() { return nullptr; }
}  // namespace covpool::kern

#endif
