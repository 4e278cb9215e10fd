// SPDX-License-Identifier: Apache-2.0
#include "covpool/pooling.hpp"

#include <cmath>
#include <string>

#include "covpool/error.hpp"
#include "covpool/kernels.hpp"

namespace covpool {

namespace {

// 2·J·T done implicitly: J·T = (T − 1·colmean(T))/N.
Mat centered_double(const Mat& t) {
  const std::size_t n = t.rows;
  const std::size_t d = t.cols;
  std::vector<double> colsum(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) kern::axpy(1.0, t.row(i), colsum.data(), d);
  const double inv_n = 1.0 / static_cast<double>(n);
  Mat out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = t.row(i);
    double* dst = out.row(i);
    for (std::size_t c = 0; c < d; ++c)
      dst[c] = 2.0 * inv_n * (src[c] - inv_n * colsum[c]);
  }
  return out;
}

// U·M·Uᵀ for a D×D inner matrix M.
Mat sandwich(const Mat& u, const Mat& m) { return matmul(matmul(u, m), transpose(u)); }

std::vector<double> inv_sqrt_clamped(const GcpContext& ctx) {
  const std::size_t d = ctx.eig.dim();
  std::vector<double> inv(d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    if (!ctx.clamped[i]) inv[i] = 1.0 / std::sqrt(ctx.eig.lambda[i]);
  return inv;
}

void check_dz(const GcpContext& ctx, const SymMat& dz) {
  if (dz.dim != ctx.x.d)
    throw ShapeError("gcp backward: dZ is " + std::to_string(dz.dim) + "×" +
                     std::to_string(dz.dim) + " but context has D = " +
                     std::to_string(ctx.x.d));
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::size_t n_, std::size_t d_) : n(n_), d(d_), values(n_, d_) {}

FeatureMatrix FeatureMatrix::from(Mat v) {
  if (v.rows < 1 || v.cols < 1) throw ShapeError("FeatureMatrix requires N >= 1 and D >= 1");
  if (!all_finite(v)) throw DomainError("FeatureMatrix entries must be finite");
  FeatureMatrix f;
  f.n = v.rows;
  f.d = v.cols;
  f.values = std::move(v);
  return f;
}

PooledVector gap_forward(const FeatureMatrix& x, double scale) {
  if (scale <= 0.0) throw DomainError("gap_forward: scale must be > 0");
  PooledVector out;
  out.dim = x.d;
  out.values.assign(x.d, 0.0);
  for (std::size_t i = 0; i < x.n; ++i)
    kern::axpy(1.0, x.values.row(i), out.values.data(), x.d);
  kern::scale(scale, out.values.data(), x.d);
  return out;
}

PooledVector gap_forward(const FeatureMatrix& x) {
  return gap_forward(x, 1.0 / static_cast<double>(x.n));
}

FeatureMatrix gap_backward(const PooledVector& gout, std::size_t n, double scale) {
  FeatureMatrix dx(n, gout.dim);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = dx.values.row(i);
    for (std::size_t c = 0; c < gout.dim; ++c) row[c] = scale * gout.values[c];
  }
  return dx;
}

std::pair<SymMat, Mat> covariance(const FeatureMatrix& x) {
  const std::size_t n = x.n;
  const std::size_t d = x.d;
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> colsum(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) kern::axpy(1.0, x.values.row(i), colsum.data(), d);

  Mat centered(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = x.values.row(i);
    double* dst = centered.row(i);
    for (std::size_t c = 0; c < d; ++c) dst[c] = src[c] - inv_n * colsum[c];
  }

  // Σ = (1/N)·XcᵀXc == XᵀJX; the Gram form keeps Σ PSD to rounding.
  Mat sigma = matmul_ta(centered, centered);
  kern::scale(inv_n, sigma.data.data(), sigma.data.size());
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      double v = 0.5 * (sigma(i, j) + sigma(j, i));
      sigma(i, j) = v;
      sigma(j, i) = v;
    }
  return {SymMat::trusted(std::move(sigma)), centering_matrix(n)};
}

std::pair<SymMat, EigenPair> matrix_sqrt(const SymMat& sigma, double eps_lambda) {
  // eps_lambda is the clamp-recording threshold consumed by gcp_forward; the
  // square root itself only clamps negatives (rounding noise) at zero. A
  // negative value means "use the default", anything else must be >= 0.
  (void)eps_lambda;
  EigenPair eig = sym_eig(sigma);
  const std::size_t d = eig.dim();

  Mat us(d, d);  // U·diag(sqrt(max(lambda,0)))
  for (std::size_t j = 0; j < d; ++j) {
    const double s = eig.lambda[j] > 0.0 ? std::sqrt(eig.lambda[j]) : 0.0;
    for (std::size_t i = 0; i < d; ++i) us(i, j) = eig.u(i, j) * s;
  }
  Mat z = matmul(us, transpose(eig.u));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      double v = 0.5 * (z(i, j) + z(j, i));
      z(i, j) = v;
      z(j, i) = v;
    }
  return {SymMat::trusted(std::move(z)), std::move(eig)};
}

Mat build_k(std::span<const double> lambda, double eps_gap) {
  const std::size_t d = lambda.size();
  if (eps_gap < 0.0) eps_gap = 1e-10 * (1.0 + (d ? lambda[0] : 0.0));
  if (eps_gap <= 0.0) throw DomainError("build_k: eps_gap must be > 0");
  Mat k(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      if (i == j) continue;
      const double gap = lambda[i] - lambda[j];
      if (std::fabs(gap) > eps_gap) k(i, j) = 1.0 / gap;
    }
  return k;
}

std::pair<PooledVector, GcpContext> gcp_forward(const FeatureMatrix& x) {
  GcpContext ctx;
  ctx.x = x;
  auto [sigma, j] = covariance(x);
  ctx.sigma = std::move(sigma);
  ctx.j = std::move(j);

  auto [z, eig] = matrix_sqrt(ctx.sigma);
  ctx.z = std::move(z);
  ctx.eig = std::move(eig);
  ctx.eps_lambda = 1e-10 * std::max(ctx.eig.lambda.empty() ? 0.0 : ctx.eig.lambda[0], 1e-300);

  const std::size_t d = ctx.eig.dim();
  ctx.clamped.assign(d, false);
  for (std::size_t i = 0; i < d; ++i) {
    if (ctx.eig.lambda[i] < ctx.eps_lambda) {
      ctx.clamped[i] = true;
      ++ctx.clamped_count;
    }
  }

  ctx.k = build_k(ctx.eig.lambda, 1e-10 * (1.0 + ctx.eig.lambda[0]));
  // Clamped eigenvalues contribute nothing to the backward pass.
  for (std::size_t i = 0; i < d; ++i) {
    if (!ctx.clamped[i]) continue;
    for (std::size_t j2 = 0; j2 < d; ++j2) {
      ctx.k(i, j2) = 0.0;
      ctx.k(j2, i) = 0.0;
    }
  }

  return {vectorize_sym(ctx.z), std::move(ctx)};
}

PooledVector vectorize_sym(const SymMat& z) {
  const std::size_t d = z.dim;
  static const double kSqrt2 = std::sqrt(2.0);
  PooledVector out;
  out.dim = d * (d + 1) / 2;
  out.values.reserve(out.dim);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j)
      out.values.push_back(i == j ? z(i, j) : kSqrt2 * z(i, j));
  return out;
}

SymMat devectorize_sym(const PooledVector& v) {
  // dim = d(d+1)/2 → d
  std::size_t d = 0;
  while (d * (d + 1) / 2 < v.dim) ++d;
  if (d * (d + 1) / 2 != v.dim)
    throw ShapeError("devectorize_sym: length is not a triangular number");
  static const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
  Mat z(d, d);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j, ++idx) {
      if (i == j) {
        z(i, j) = v.values[idx];
      } else {
        const double val = kInvSqrt2 * v.values[idx];
        z(i, j) = val;
        z(j, i) = val;
      }
    }
  return SymMat::trusted(std::move(z));
}

FeatureMatrix gcp_backward(const GcpContext& ctx, const SymMat& dz) {
  check_dz(ctx, dz);
  const std::size_t d = ctx.x.d;
  const Mat& u = ctx.eig.u;

  const SymMat g = sym_part(dz.m);  // (∂L/∂Z)_sym
  const Mat gu = matmul(g.m, u);

  // ∂L/∂U = 2·G·U·Λ^{1/2} with the forward's clamped square roots.
  Mat du(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    const double s = 2.0 * (ctx.eig.lambda[j] > 0.0 ? std::sqrt(ctx.eig.lambda[j]) : 0.0);
    for (std::size_t i = 0; i < d; ++i) du(i, j) = gu(i, j) * s;
  }

  // inner = Kᵀ∘(Uᵀ·∂L/∂U) + (∂L/∂Λ)_diag
  Mat inner = matmul_ta(u, du);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j2 = 0; j2 < d; ++j2) inner(i, j2) *= ctx.k(j2, i);

  const std::vector<double> inv = inv_sqrt_clamped(ctx);
  for (std::size_t i = 0; i < d; ++i) {
    // (UᵀGU)[i,i] via the cached G·U product.
    double diag = 0.0;
    for (std::size_t a = 0; a < d; ++a) diag += u(a, i) * gu(a, i);
    inner(i, i) += 0.5 * inv[i] * diag;
  }

  const SymMat dsigma = sym_part(sandwich(u, inner));
  const Mat t = matmul(ctx.x.values, dsigma.m);
  return FeatureMatrix::from(centered_double(t));
}

Mat trimmed_hadamard_term(const Mat& k, std::span<const double> lambda) {
  const std::size_t d = lambda.size();
  Mat h(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      // Λ^{1/2} is diagonal, so only j == i can contribute — and K's diagonal
      // is exactly zero. Evaluated literally all the same.
      const double lam_sqrt = (i == j && lambda[i] > 0.0) ? std::sqrt(lambda[i]) : 0.0;
      h(i, j) = 2.0 * k(j, i) * lam_sqrt;
    }
  return h;
}

FeatureMatrix gcp_backward_trimmed(const GcpContext& ctx, const SymMat& dz) {
  check_dz(ctx, dz);
  const std::size_t d = ctx.x.d;
  const Mat& u = ctx.eig.u;
  const SymMat g = sym_part(dz.m);

  Mat inner = trimmed_hadamard_term(ctx.k, ctx.eig.lambda);
  const std::vector<double> inv = inv_sqrt_clamped(ctx);
  for (std::size_t i = 0; i < d; ++i) inner(i, i) += 0.5 * inv[i];

  const Mat m = sandwich(u, inner);
  const Mat t = matmul(ctx.x.values, matmul(m, g.m));
  return FeatureMatrix::from(centered_double(t));
}

Mat preconditioner_factor(const GcpContext& ctx, double eta) {
  if (eta < 0.0) throw DomainError("preconditioner_factor: eta must be >= 0");
  const std::size_t d = ctx.x.d;
  Mat inner(d, d);
  const std::vector<double> inv = inv_sqrt_clamped(ctx);
  for (std::size_t i = 0; i < d; ++i) inner(i, i) = 0.5 * inv[i];
  const Mat m = sandwich(ctx.eig.u, inner);
  Mat f = centered_double(matmul(ctx.x.values, m));
  kern::scale(eta, f.data.data(), f.data.size());
  return f;
}

double trimmed_cosine_similarity(const GcpContext& ctx, const SymMat& dz) {
  const FeatureMatrix full = gcp_backward(ctx, dz);
  const FeatureMatrix trimmed = gcp_backward_trimmed(ctx, dz);
  const double nf = frob_norm(full.values);
  const double nt = frob_norm(trimmed.values);
  if (nf == 0.0 || nt == 0.0) return 0.0;
  const double ip =
      kern::dot(full.values.data.data(), trimmed.values.data.data(), full.values.data.size());
  return ip / (nf * nt);
}

}  // namespace covpool
