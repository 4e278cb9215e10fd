// SPDX-License-Identifier: Apache-2.0
//
// The experiment engine: resolved run configuration, the SGD training loop
// with optional landscape probing, and the convergence/probe CSV schemas.
// Fully seed-deterministic in single-threaded mode.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "covpool/data.hpp"
#include "covpool/io.hpp"
#include "covpool/net.hpp"
#include "covpool/optim.hpp"
#include "covpool/probes.hpp"

namespace covpool {

struct RunConfig {
  // dataset
  std::string dataset = "synth-cov";  // synth-cov | mnist | cifar10 | cached
  SyntheticCovTaskSpec synth;
  std::string mnist_train_images, mnist_train_labels;
  std::string mnist_test_images, mnist_test_labels;
  std::string cifar_train, cifar_test;
  std::string cached_train, cached_test;

  // model
  std::string arch = "conv3x3:8,relu,maxpool,conv3x3:16,relu,conv1x1:16";
  std::string head = "gcp";  // gap | gcp
  double gap_scale = 0.0;    // 0 → 1/N

  // optimization
  std::string schedule = "poly:0.05,0,20,2";
  long epochs = 20;
  long max_steps = 0;  // 0 → no cap
  std::size_t batch = 32;
  double momentum = 0.9;
  double weight_decay = 1e-4;

  // probing
  long probe_cadence = 0;  // steps between probes; 0 disables
  StepGrid grid;
  std::size_t probe_layer = 0;  // first conv output
  int probe_direction = +1;
  std::string probe_mode = "net";  // net | quadratic (closed-form oracle)

  // run control
  std::uint64_t seed = 1;
  std::string out_dir;
  int threads = 1;
  bool deterministic = false;  // force scalar kernels + single thread

  /// All problems at once, one message per offending field; empty when valid.
  std::vector<std::string> validate() const;

  /// Apply key = value entries (unknown keys are collected as problems).
  static RunConfig from_kv(const KvConfig& kv, std::vector<std::string>& problems);
  /// Every resolved field, defaults included, so persisted runs are
  /// self-describing.
  KvConfig to_kv() const;
};

struct ConvergenceRow {
  long step = 0;
  long epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double eval_acc = 0.0;  // accuracy after the most recent completed epoch
};

struct TrainResult {
  Network net;
  std::vector<ConvergenceRow> rows;
  ProbeSeries probes;
  double final_eval_acc = 0.0;
  std::vector<double> epoch_eval_acc;  // index = completed epochs
  double mean_trimmed_cosine = 0.0;    // diagnostic, gcp head only
};

/// Build the (train, test) datasets a config names.
std::pair<Dataset, Dataset> load_datasets(const RunConfig& cfg);

/// Build the network a config names (trunk from `arch`, head, dense).
Network build_network(const RunConfig& cfg, const Dataset& train);

/// Train with SGD; emits a ConvergenceRow every step and, when probing is on,
/// a ProbeRecord every `probe_cadence` steps (before the parameter update).
TrainResult run_training(const RunConfig& cfg);

/// Probed training per the landscape-analysis protocol (alias over
/// run_training with probing enabled; validates probe settings).
TrainResult run_probed_training(const RunConfig& cfg);

double evaluate_accuracy(const Network& net, const Dataset& ds, std::size_t batch);

std::string convergence_csv(const std::vector<ConvergenceRow>& rows);
std::string probes_csv(const ProbeSeries& series);

}  // namespace covpool
