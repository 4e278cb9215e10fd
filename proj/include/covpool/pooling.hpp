// SPDX-License-Identifier: Apache-2.0
//
// GAP and GCP pooling heads over an N×D feature matrix: covariance with the
// centering matrix J, matrix square-root normalization through a symmetric
// eigendecomposition, the exact analytic backward pass, the trimmed backward
// variant, and the preconditioner diagnostic that compares the two.
#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "covpool/mat.hpp"

namespace covpool {

/// N×D matrix of spatially flattened convolution activations: N = W·H spatial
/// positions, D channels.
struct FeatureMatrix {
  std::size_t n = 0;
  std::size_t d = 0;
  Mat values;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t n_, std::size_t d_);
  static FeatureMatrix from(Mat values);  // validates N,D >= 1 and finiteness
};

struct PooledVector {
  std::size_t dim = 0;
  std::vector<double> values;
};

/// Everything the forward pass caches for the exact backward pass.
struct GcpContext {
  FeatureMatrix x;
  Mat j;            // centering matrix, N×N
  SymMat sigma;     // XᵀJX
  EigenPair eig;    // U, lambda (descending)
  Mat k;            // eigen-gap mask, exact zeros on the diagonal
  SymMat z;         // U·diag(max(lambda,0))^{1/2}·Uᵀ
  double eps_lambda = 0.0;
  std::vector<bool> clamped;     // lambda[i] below eps_lambda
  std::size_t clamped_count = 0;
};

/// output[d] = scale · Σ_i X[i,d]. Default scale 1/N (mean); scale 1 gives the
/// plain sum.
PooledVector gap_forward(const FeatureMatrix& x, double scale);
PooledVector gap_forward(const FeatureMatrix& x);  // scale = 1/N

/// Jacobian of the (scaled) sum: dX[i,d] = scale · gout[d] for every row.
FeatureMatrix gap_backward(const PooledVector& gout, std::size_t n, double scale);

/// Σ = XᵀJX together with J = centering_matrix(N). Computed as the Gram
/// matrix of the centered rows scaled by 1/N, which is the same expression
/// and keeps Σ numerically PSD.
std::pair<SymMat, Mat> covariance(const FeatureMatrix& x);

/// Z = U·diag(max(lambda,0))^{1/2}·Uᵀ. Pass eps_lambda < 0 for the default
/// 1e-10·max(lambda_max, 1e-300).
std::pair<SymMat, EigenPair> matrix_sqrt(const SymMat& sigma, double eps_lambda = -1.0);

/// K[i,j] = 1/(lambda[i] − lambda[j]) for i≠j when the gap exceeds eps_gap,
/// else 0; diagonal exactly 0. Pass eps_gap < 0 for the default
/// 1e-10·(1 + lambda[0]).
Mat build_k(std::span<const double> lambda, double eps_gap = -1.0);

/// Full GCP forward: vectorized matrix square root of the covariance plus the
/// cached context for the backward pass. N = 1 is allowed (Σ = 0, every
/// eigenvalue clamped).
std::pair<PooledVector, GcpContext> gcp_forward(const FeatureMatrix& x);

/// Upper triangle in row-major order with off-diagonal entries scaled by √2,
/// so the Euclidean inner product of vectors equals the Frobenius inner
/// product of the matrices.
PooledVector vectorize_sym(const SymMat& z);

/// Inverse of vectorize_sym. Because the √2 scaling makes vectorize_sym an
/// isometry onto its image, this is simultaneously the exact adjoint, i.e.
/// the gradient map.
SymMat devectorize_sym(const PooledVector& v);
inline SymMat devectorize_grad(const PooledVector& v) { return devectorize_sym(v); }

/// Exact backward pass of the GCP head. Eigenvalues recorded as clamped
/// contribute zero to the Λ^{-1/2} term and zero rows/columns of K.
FeatureMatrix gcp_backward(const GcpContext& ctx, const SymMat& dz);

/// Literal trimmed backward. The Hadamard product of Kᵀ (zero diagonal) with
/// the diagonal Λ^{1/2} is identically the zero matrix, so this evaluates to
/// 2JX·(½Λ^{-1/2})·dZ with the eigenvalue term taken in the eigenbasis,
/// U(½Λ_clamped^{-1/2})Uᵀ. The collapse is deliberate and asserted in tests.
FeatureMatrix gcp_backward_trimmed(const GcpContext& ctx, const SymMat& dz);

/// The 2Kᵀ∘Λ^{1/2} term of the trimmed backward, evaluated literally
/// (all zeros); exposed so the collapse can be asserted rather than assumed.
Mat trimmed_hadamard_term(const Mat& k, std::span<const double> lambda);

/// η·2JX·U(½Λ_clamped^{-1/2})Uᵀ — the N×D factor that maps dZ to the trimmed
/// gradient. Diagnostic only.
Mat preconditioner_factor(const GcpContext& ctx, double eta);

/// Cosine similarity between the flattened full and trimmed gradients for a
/// given ctx and dZ; reported (never asserted) by the training diagnostics.
double trimmed_cosine_similarity(const GcpContext& ctx, const SymMat& dz);

}  // namespace covpool
