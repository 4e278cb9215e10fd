// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major double matrices and a symmetric eigensolver with a
// contractual accuracy budget. Everything here is an immutable value type;
// all operations are pure functions.
#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace covpool {

struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major, rows*cols entries

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  static Mat identity(std::size_t n);
  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rs);

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
  bool square() const { return rows == cols; }
};

/// Symmetric matrix; construction checks max|A[i,j]-A[j,i]| <= 1e-12*(1+max|A|).
struct SymMat {
  std::size_t dim = 0;
  Mat m;

  SymMat() = default;
  static SymMat from(Mat a);           // validates symmetry
  static SymMat trusted(Mat a);        // caller guarantees exact symmetry
  double operator()(std::size_t i, std::size_t j) const { return m(i, j); }
};

/// Eigendecomposition of a SymMat: columns of u are eigenvectors, lambda is
/// sorted descending, and each eigenvector's first nonzero entry is positive.
struct EigenPair {
  Mat u;
  std::vector<double> lambda;
  std::size_t dim() const { return lambda.size(); }
};

// -- tensor ops ---------------------------------------------------------------

Mat transpose(const Mat& a);
Mat matmul(const Mat& a, const Mat& b);
/// aᵀ·b without materializing the transpose.
Mat matmul_ta(const Mat& a, const Mat& b);
Mat mat_add(const Mat& a, const Mat& b);
Mat mat_sub(const Mat& a, const Mat& b);
Mat mat_scale(const Mat& a, double s);

double frob_norm(const Mat& a);
double max_abs_entry(const Mat& a);
double max_abs_diff(const Mat& a, const Mat& b);
bool all_finite(const Mat& a);

/// ½(A + Aᵀ); throws ShapeError on non-square input.
SymMat sym_part(const Mat& a);

/// Zero off-diagonal entries; throws ShapeError on non-square input.
Mat diag_part(const Mat& a);

/// (1/N)(I − (1/N)·11ᵀ); throws DomainError for N = 0.
Mat centering_matrix(std::size_t n);

/// Cyclic Jacobi with threshold `tol` (relative to ‖A‖_F) on the largest
/// off-diagonal magnitude. Deterministic: fixed sweep order, descending
/// eigenvalue sort (stable), first-nonzero-positive sign fix. Throws
/// SolverError carrying the off-diagonal residual if `max_sweeps` is
/// exhausted.
EigenPair sym_eig(const SymMat& a, double tol = 1e-12, int max_sweeps = 100);

/// U·diag(lambda)·Uᵀ, for reconstruction checks.
Mat eig_reconstruct(const EigenPair& e);

}  // namespace covpool
