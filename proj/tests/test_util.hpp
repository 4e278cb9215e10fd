// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "covpool/mat.hpp"
#include "covpool/rng.hpp"

namespace covpool::test {

inline Mat random_mat(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (double& v : m.data) v = scale * rng.normal();
  return m;
}

inline SymMat random_sym(Rng& rng, std::size_t dim, double scale = 1.0) {
  return sym_part(random_mat(rng, dim, dim, scale));
}

/// Random PSD matrix (Gram of a random square factor).
inline SymMat random_psd(Rng& rng, std::size_t dim, double scale = 1.0) {
  const Mat a = random_mat(rng, dim, dim, scale);
  return sym_part(matmul_ta(a, a));
}

inline double rel_err(double got, double want) {
  return std::fabs(got - want) / std::max(1.0, std::fabs(want));
}

inline double rel_frob_err(const Mat& got, const Mat& want) {
  return max_abs_diff(got, want) / std::max(1.0, max_abs_entry(want));
}

}  // namespace covpool::test
