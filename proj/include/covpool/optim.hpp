// SPDX-License-Identifier: Apache-2.0
//
// SGD with momentum and weight decay, plus every learning-rate schedule used
// by the experiments: polynomial decay, exponential decay, step decay,
// stage-wise linear and step-wise linear.
#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace covpool {

/// Update rule (the repository's canonical variant):
///   v ← momentum·v + grad + weight_decay·param
///   param ← param − lr·v
struct SgdState {
  double lr = 0.1;
  double momentum = 0.0;
  double weight_decay = 0.0;
  std::vector<std::vector<double>> velocity;  // one buffer per parameter array

  /// Allocate zero velocity buffers matching the given parameter sizes.
  void init(const std::vector<std::size_t>& sizes);
};

/// In-place update of one parameter buffer; buffer_index selects the velocity.
void sgd_step(SgdState& state, std::span<double> params, std::span<const double> grads,
              std::size_t buffer_index);

enum class ScheduleKind { Polynomial, Exponential, StepDecay, StagewiseLinear, StepwiseLinear };

struct LinearStage {
  double l_start = 0.0;
  double l_end = 0.0;
  long start_epoch = 0;
};

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::Polynomial;
  double l0 = 0.1;   // initial lr (polynomial/exponential/stepdecay/stepwise)
  long e_s = 0;      // polynomial start epoch
  long e_f = 0;      // polynomial final epoch
  double rho = 1.0;  // polynomial power
  double base = 1.0; // exponential / stepdecay factor
  long period = 30;  // stepdecay period
  std::vector<LinearStage> stages;  // stagewise linear (50-epoch local ramps)
  long t_step = 0;   // stepwise linear total step count

  // Named settings (lr table of the experiments):
  static ScheduleSpec resnet_norm();        // 0.1^((e//30)+1)
  static ScheduleSpec resnet_fast();        // 0.1·(1−(e−1)/52)^11
  static ScheduleSpec resnet_adju();        // 0.1·(1−(e−1)/49)^2
  static ScheduleSpec mobilenetv2_norm();   // 0.045·0.98^e
  static ScheduleSpec mobilenetv2_fast();   // 0.06·0.92^e
  static ScheduleSpec mobilenetv2_adju();   // stage-wise linear, stages at 0/50/100
  static ScheduleSpec shufflenetv2(long t_step = 300000);  // 0.5·(1−step/t_step)
  static ScheduleSpec polynomial(double l0, long e_s, long e_f, double rho);
  static ScheduleSpec exponential(double l0, double base);

  /// Parse "resnet-norm", "poly:0.1,0,50,2", "exp:0.045,0.98",
  /// "step:0.1,0.1,30", "shufflenet:300000", "const:0.05".
  static ScheduleSpec parse(const std::string& text);
  std::string describe() const;
};

/// Learning rate at an epoch (and step, for step-wise schedules). Throws
/// DomainError for epochs before the schedule's domain. Polynomial decay
/// clamps to 0 beyond e_f.
double lr_at(const ScheduleSpec& spec, long epoch, long step = 0);

/// lr for 0-based training epoch k: schedules whose literal formulas are
/// 1-indexed (the named resnet ones have e_s = 1) are evaluated at e_s + k.
double lr_for_training(const ScheduleSpec& spec, long epoch0, long step = 0);

/// CSV rows "epoch,lr" from the schedule's start epoch through `horizon`
/// inclusive. Step-wise schedules are sampled at step = epoch·t_step/horizon.
void emit_schedule(const ScheduleSpec& spec, long horizon, std::ostream& os);

}  // namespace covpool
