// SPDX-License-Identifier: Apache-2.0
#include "covpool/mat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "covpool/error.hpp"
#include "covpool/kernels.hpp"

namespace covpool {

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> rs) {
  Mat m(rs.size(), rs.size() ? rs.begin()->size() : 0);
  std::size_t i = 0;
  for (const auto& r : rs) {
    if (r.size() != m.cols) throw ShapeError("ragged initializer rows");
    std::copy(r.begin(), r.end(), m.row(i));
    ++i;
  }
  return m;
}

SymMat SymMat::from(Mat a) {
  if (!a.square()) throw ShapeError("SymMat requires a square matrix");
  double scale = 1.0 + max_abs_entry(a);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = i + 1; j < a.cols; ++j)
      if (std::fabs(a(i, j) - a(j, i)) > 1e-12 * scale)
        throw DomainError("matrix is not symmetric within tolerance");
  SymMat s;
  s.dim = a.rows;
  s.m = std::move(a);
  return s;
}

SymMat SymMat::trusted(Mat a) {
  SymMat s;
  s.dim = a.rows;
  s.m = std::move(a);
  return s;
}

Mat transpose(const Mat& a) {
  Mat t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) throw ShapeError("matmul: inner dimensions disagree");
  Mat c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* crow = c.row(i);
    const double* arow = a.row(i);
    for (std::size_t k = 0; k < a.cols; ++k)
      kern::axpy(arow[k], b.row(k), crow, b.cols);
  }
  return c;
}

Mat matmul_ta(const Mat& a, const Mat& b) {
  if (a.rows != b.rows) throw ShapeError("matmul_ta: row counts disagree");
  Mat c(a.cols, b.cols);
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* arow = a.row(k);
    const double* brow = b.row(k);
    for (std::size_t i = 0; i < a.cols; ++i)
      kern::axpy(arow[i], brow, c.row(i), b.cols);
  }
  return c;
}

Mat mat_add(const Mat& a, const Mat& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw ShapeError("mat_add: shape mismatch");
  Mat c = a;
  kern::axpy(1.0, b.data.data(), c.data.data(), c.data.size());
  return c;
}

Mat mat_sub(const Mat& a, const Mat& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw ShapeError("mat_sub: shape mismatch");
  Mat c = a;
  kern::axpy(-1.0, b.data.data(), c.data.data(), c.data.size());
  return c;
}

Mat mat_scale(const Mat& a, double s) {
  Mat c = a;
  kern::scale(s, c.data.data(), c.data.size());
  return c;
}

double frob_norm(const Mat& a) { return std::sqrt(kern::sumsq(a.data.data(), a.data.size())); }

double max_abs_entry(const Mat& a) { return kern::max_abs(a.data.data(), a.data.size()); }

double max_abs_diff(const Mat& a, const Mat& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw ShapeError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

bool all_finite(const Mat& a) {
  return std::all_of(a.data.begin(), a.data.end(), [](double v) { return std::isfinite(v); });
}

SymMat sym_part(const Mat& a) {
  if (!a.square()) throw ShapeError("sym_part: input must be square");
  Mat s(a.rows, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    s(i, i) = a(i, i);
    for (std::size_t j = i + 1; j < a.cols; ++j) {
      double v = 0.5 * (a(i, j) + a(j, i));
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return SymMat::trusted(std::move(s));
}

Mat diag_part(const Mat& a) {
  if (!a.square()) throw ShapeError("diag_part: input must be square");
  Mat d(a.rows, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i) d(i, i) = a(i, i);
  return d;
}

Mat centering_matrix(std::size_t n) {
  if (n == 0) throw DomainError("centering_matrix: N must be >= 1");
  Mat j(n, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double off = -inv_n * inv_n;
  const double diag = inv_n * (1.0 - inv_n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) j(r, c) = (r == c) ? diag : off;
  return j;
}

EigenPair sym_eig(const SymMat& s, double tol, int max_sweeps) {
  if (tol <= 0.0) throw DomainError("sym_eig: tol must be > 0");
  const std::size_t n = s.dim;
  Mat a = s.m;
  Mat vt = Mat::identity(n);  // rows of vt are eigenvector candidates

  const double norm = frob_norm(a);
  const double thresh = tol * norm;

  auto max_offdiag = [&]() {
    double m = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) m = std::max(m, std::fabs(a(p, q)));
    return m;
  };

  double off = max_offdiag();
  int sweep = 0;
  while (off > thresh) {
    if (sweep++ >= max_sweeps)
      throw SolverError("sym_eig: no convergence after " + std::to_string(max_sweeps) +
                            " sweeps (off-diagonal residual " + std::to_string(off) + ")",
                        off);
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        const double app = a(p, p);
        const double aqq = a(q, q);
        // Entry already negligible at working precision: zero it outright.
        if (std::fabs(apq) + std::fabs(app) + std::fabs(aqq) ==
            std::fabs(app) + std::fabs(aqq)) {
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          continue;
        }
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = t * c;
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p);
          const double akq = a(k, q);
          const double np = c * akp - sn * akq;
          const double nq = sn * akp + c * akq;
          a(k, p) = np;
          a(p, k) = np;
          a(k, q) = nq;
          a(q, k) = nq;
        }
        kern::rot(vt.row(p), vt.row(q), c, sn, n);
      }
    }
    off = max_offdiag();
  }

  // Sort by descending eigenvalue (stable so ties keep sweep order).
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EigenPair e;
  e.lambda.resize(n);
  e.u = Mat(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t src = order[r];
    e.lambda[r] = a(src, src);
    const double* vrow = vt.row(src);
    double sign = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (vrow[k] != 0.0) {
        sign = vrow[k] > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
    for (std::size_t k = 0; k < n; ++k) e.u(k, r) = sign * vrow[k];
  }
  return e;
}

Mat eig_reconstruct(const EigenPair& e) {
  const std::size_t n = e.dim();
  Mat ul(n, n);  // U·diag(lambda)
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) ul(i, j) = e.u(i, j) * e.lambda[j];
  Mat ut = transpose(e.u);
  return matmul(ul, ut);
}

}  // namespace covpool
