// SPDX-License-Identifier: Apache-2.0
//
// Seeded verification of the analytic GCP backward pass against central
// finite differences. Shared by the CLI subcommand and the acceptance suite.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace covpool {

struct GradCheckCase {
  std::size_t n = 0;
  std::size_t d = 0;
  double rel_error = 0.0;
  bool solver_failed = false;
  std::string note;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double max_rel_error = 0.0;
  double tolerance = 1e-5;
  bool passed = false;
};

/// `cases` seeded random checks with N in [8,32], D in [3,8], eigen-gap and
/// smallest eigenvalue >= 0.05 enforced by resampling; central differences at
/// step 1e-5. Throws DomainError for cases < 1.
GradCheckReport run_gradcheck(std::uint64_t seed, std::size_t cases, double tolerance = 1e-5);

std::string gradcheck_table(const GradCheckReport& report);

}  // namespace covpool
