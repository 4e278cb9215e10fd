// SPDX-License-Identifier: Apache-2.0
#include "covpool/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "covpool/error.hpp"
#include "covpool/io.hpp"
#include "covpool/kernels.hpp"
#include "covpool/pooling.hpp"
#include "covpool/rng.hpp"

namespace covpool {

namespace {

Mat random_mat(Rng& rng, std::size_t rows, std::size_t cols) {
  Mat m(rows, cols);
  for (double& v : m.data) v = rng.normal();
  return m;
}

double loss_of(const Mat& x, const SymMat& g) {
  auto [pooled, ctx] = gcp_forward(FeatureMatrix::from(x));
  return kern::dot(g.m.data.data(), ctx.z.m.data.data(), g.m.data.size());
}

bool well_gapped(const Mat& x, double min_gap) {
  auto [sigma, j] = covariance(FeatureMatrix::from(x));
  const EigenPair e = sym_eig(sigma);
  if (e.lambda.back() < min_gap) return false;
  for (std::size_t i = 0; i + 1 < e.lambda.size(); ++i)
    if (e.lambda[i] - e.lambda[i + 1] < min_gap) return false;
  return true;
}

}  // namespace

GradCheckReport run_gradcheck(std::uint64_t seed, std::size_t cases, double tolerance) {
  if (cases < 1) throw DomainError("gradcheck: needs at least one case");
  GradCheckReport report;
  report.tolerance = tolerance;

  Rng rng(Rng::mix(seed, 0x67636865636bULL));
  const double h = 1e-5;
  for (std::size_t c = 0; c < cases; ++c) {
    GradCheckCase gc;
    gc.d = 3 + rng.uniform_index(6);  // [3, 8]
    // N >= 2D keeps the centered covariance structurally full-rank, so the
    // eigen-gap (including the distance of lambda_min from zero) can actually
    // reach the enforced 0.05.
    const std::size_t n_lo = std::max<std::size_t>(8, 2 * gc.d);
    gc.n = n_lo + rng.uniform_index(33 - n_lo);  // [n_lo, 32]
    try {
      Mat x;
      bool found = false;
      for (int attempt = 0; attempt < 1000 && !found; ++attempt) {
        x = random_mat(rng, gc.n, gc.d);
        found = well_gapped(x, 0.05);
      }
      if (!found) {
        gc.solver_failed = true;
        gc.note = "could not sample an eigen-gapped case";
        report.cases.push_back(gc);
        continue;
      }
      const SymMat g = sym_part(random_mat(rng, gc.d, gc.d));

      auto [pooled, ctx] = gcp_forward(FeatureMatrix::from(x));
      const FeatureMatrix analytic = gcp_backward(ctx, g);

      Mat fd(gc.n, gc.d);
      for (std::size_t i = 0; i < gc.n; ++i) {
        for (std::size_t j = 0; j < gc.d; ++j) {
          Mat xp = x, xm = x;
          xp(i, j) += h;
          xm(i, j) -= h;
          fd(i, j) = (loss_of(xp, g) - loss_of(xm, g)) / (2.0 * h);
        }
      }
      gc.rel_error = frob_norm(mat_sub(fd, analytic.values)) /
                     std::max(frob_norm(analytic.values), 1e-12);
    } catch (const SolverError& e) {
      gc.solver_failed = true;
      gc.note = e.what();
    }
    report.cases.push_back(gc);
  }

  for (const auto& gc : report.cases)
    if (!gc.solver_failed) report.max_rel_error = std::max(report.max_rel_error, gc.rel_error);
  report.passed = std::all_of(report.cases.begin(), report.cases.end(), [&](const GradCheckCase& gc) {
    return !gc.solver_failed && gc.rel_error <= tolerance;
  });
  return report;
}

std::string gradcheck_table(const GradCheckReport& report) {
  std::ostringstream os;
  os << "case,N,D,rel_error,status\n";
  for (std::size_t i = 0; i < report.cases.size(); ++i) {
    const auto& gc = report.cases[i];
    os << i << "," << gc.n << "," << gc.d << ",";
    if (gc.solver_failed) {
      os << "nan,solver-failure: " << gc.note;
    } else {
      os << format_double(gc.rel_error) << ","
         << (gc.rel_error <= report.tolerance ? "ok" : "FAIL");
    }
    os << "\n";
  }
  os << "max_rel_error," << format_double(report.max_rel_error) << ",tolerance,"
     << format_double(report.tolerance) << "," << (report.passed ? "PASS" : "FAIL") << "\n";
  return os.str();
}

}  // namespace covpool
