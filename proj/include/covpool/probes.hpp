// SPDX-License-Identifier: Apache-2.0
//
// The two landscape instruments, sampled over a step-size grid during
// training: loss Lipschitzness Δ_l(η) = L(X + η·∇L(X)) and gradient
// predictiveness Δ_g(η) = ‖∇L(X) − ∇L(X + η·∇L(X))‖₂, with X an interior
// activation (first conv output by default).
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "covpool/net.hpp"

namespace covpool {

struct StepGrid {
  double a = 0.05;
  double b = 2.0;
  std::size_t count = 50;

  /// Uniform inclusive grid; validates 0 <= a < b, count >= 2.
  std::vector<double> points() const;
};

struct ProbeRecord {
  long step = 0;
  double loss = 0.0;
  double dl_min = 0.0, dl_max = 0.0;
  double dg_min = 0.0, dg_max = 0.0;
};

struct ProbeSeries {
  std::vector<ProbeRecord> records;
  std::string head;
  std::uint64_t seed = 0;
  StepGrid grid;
};

struct ProbeResult {
  double min = 0.0, max = 0.0;
  std::vector<double> samples;
};

/// Loss and gradient of a differentiable scalar field over a flat activation
/// vector; the probes only see this interface, so closed-form test oracles
/// plug in beside real network suffixes.
struct LossField {
  std::function<double(std::span<const double>)> loss;
  std::function<std::vector<double>(std::span<const double>)> grad;
};

/// Core samplers over an arbitrary LossField. `direction` is +1 for the
/// paper's step along +∇L, −1 for the descent-direction variant.
ProbeResult loss_lipschitz_probe(const LossField& f, std::span<const double> x0,
                                 const StepGrid& grid, int direction = +1, int threads = 1);
ProbeResult gradient_predictiveness_probe(const LossField& f, std::span<const double> x0,
                                          const StepGrid& grid, int direction = +1,
                                          int threads = 1);

/// Network suffix starting after layers[layer_index], bound to a tape's batch.
LossField suffix_loss_field(const Network& net, const ActivationTape& tape,
                            std::size_t layer_index);

/// Probes of the real network at the tape's recorded activation. Read-only:
/// parameters, optimizer state and the tape are untouched.
ProbeResult loss_lipschitz_probe(const Network& net, const ActivationTape& tape,
                                 std::size_t layer_index, const StepGrid& grid,
                                 int direction = +1, int threads = 1);
ProbeResult gradient_predictiveness_probe(const Network& net, const ActivationTape& tape,
                                          std::size_t layer_index, const StepGrid& grid,
                                          int direction = +1, int threads = 1);

}  // namespace covpool
