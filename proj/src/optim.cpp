// SPDX-License-Identifier: Apache-2.0
#include "covpool/optim.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "covpool/error.hpp"
#include "covpool/io.hpp"
#include "covpool/kernels.hpp"

namespace covpool {

void SgdState::init(const std::vector<std::size_t>& sizes) {
  velocity.clear();
  velocity.reserve(sizes.size());
  for (std::size_t s : sizes) velocity.emplace_back(s, 0.0);
}

void sgd_step(SgdState& state, std::span<double> params, std::span<const double> grads,
              std::size_t buffer_index) {
  if (buffer_index >= state.velocity.size())
    throw ShapeError("sgd_step: velocity buffer index out of range");
  auto& v = state.velocity[buffer_index];
  if (params.size() != grads.size() || params.size() != v.size())
    throw ShapeError("sgd_step: parameter/gradient/velocity sizes disagree");
  if (state.lr < 0.0) throw DomainError("sgd_step: lr must be >= 0");
  kern::sgd_update(params.data(), v.data(), grads.data(), params.size(), state.lr,
                   state.momentum, state.weight_decay);
}

ScheduleSpec ScheduleSpec::resnet_norm() {
  ScheduleSpec s;
  s.kind = ScheduleKind::StepDecay;
  s.l0 = 0.1;
  s.base = 0.1;
  s.period = 30;
  return s;
}

ScheduleSpec ScheduleSpec::resnet_fast() { return polynomial(0.1, 1, 53, 11.0); }

ScheduleSpec ScheduleSpec::resnet_adju() { return polynomial(0.1, 1, 50, 2.0); }

ScheduleSpec ScheduleSpec::mobilenetv2_norm() { return exponential(0.045, 0.98); }

ScheduleSpec ScheduleSpec::mobilenetv2_fast() { return exponential(0.06, 0.92); }

ScheduleSpec ScheduleSpec::mobilenetv2_adju() {
  ScheduleSpec s;
  s.kind = ScheduleKind::StagewiseLinear;
  s.stages = {{6e-2, 1e-3, 0}, {1e-2, 1e-4, 50}, {1e-3, 1e-5, 100}};
  return s;
}

ScheduleSpec ScheduleSpec::shufflenetv2(long t_step) {
  ScheduleSpec s;
  s.kind = ScheduleKind::StepwiseLinear;
  s.l0 = 0.5;
  s.t_step = t_step;
  return s;
}

ScheduleSpec ScheduleSpec::polynomial(double l0, long e_s, long e_f, double rho) {
  ScheduleSpec s;
  s.kind = ScheduleKind::Polynomial;
  s.l0 = l0;
  s.e_s = e_s;
  s.e_f = e_f;
  s.rho = rho;
  if (e_f <= e_s) throw DomainError("polynomial schedule requires e_f > e_s");
  return s;
}

ScheduleSpec ScheduleSpec::exponential(double l0, double base) {
  ScheduleSpec s;
  s.kind = ScheduleKind::Exponential;
  s.l0 = l0;
  s.base = base;
  return s;
}

namespace {

std::vector<double> parse_numbers(const std::string& args) {
  std::vector<double> out;
  std::stringstream ss(args);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw DomainError("schedule: bad numeric argument '" + tok + "'");
    }
  }
  return out;
}

}  // namespace

ScheduleSpec ScheduleSpec::parse(const std::string& text) {
  if (text == "resnet-norm") return resnet_norm();
  if (text == "resnet-fast") return resnet_fast();
  if (text == "resnet-adju") return resnet_adju();
  if (text == "mobilenetv2-norm") return mobilenetv2_norm();
  if (text == "mobilenetv2-fast") return mobilenetv2_fast();
  if (text == "mobilenetv2-adju") return mobilenetv2_adju();

  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (head == "shufflenet") {
    const auto nums = parse_numbers(args.empty() ? "300000" : args);
    if (nums.size() != 1 || nums[0] < 1) throw DomainError("shufflenet:<t_step> with t_step >= 1");
    return shufflenetv2(static_cast<long>(nums[0]));
  }
  if (head == "poly") {
    const auto nums = parse_numbers(args);
    if (nums.size() != 4) throw DomainError("poly:<l0>,<e_s>,<e_f>,<rho>");
    return polynomial(nums[0], static_cast<long>(nums[1]), static_cast<long>(nums[2]), nums[3]);
  }
  if (head == "exp") {
    const auto nums = parse_numbers(args);
    if (nums.size() != 2) throw DomainError("exp:<l0>,<base>");
    return exponential(nums[0], nums[1]);
  }
  if (head == "step") {
    const auto nums = parse_numbers(args);
    if (nums.size() != 3 || nums[2] < 1) throw DomainError("step:<l0>,<factor>,<period>");
    ScheduleSpec s;
    s.kind = ScheduleKind::StepDecay;
    s.l0 = nums[0];
    s.base = nums[1];
    s.period = static_cast<long>(nums[2]);
    return s;
  }
  if (head == "const") {
    const auto nums = parse_numbers(args);
    if (nums.size() != 1) throw DomainError("const:<lr>");
    return exponential(nums[0], 1.0);
  }
  throw DomainError("unknown schedule '" + text + "'");
}

std::string ScheduleSpec::describe() const {
  std::ostringstream os;
  switch (kind) {
    case ScheduleKind::Polynomial:
      os << "poly:" << format_double(l0) << "," << e_s << "," << e_f << "," << format_double(rho);
      break;
    case ScheduleKind::Exponential:
      os << "exp:" << format_double(l0) << "," << format_double(base);
      break;
    case ScheduleKind::StepDecay:
      os << "step:" << format_double(l0) << "," << format_double(base) << "," << period;
      break;
    case ScheduleKind::StagewiseLinear:
      os << "stagewise-linear[";
      for (std::size_t i = 0; i < stages.size(); ++i) {
        if (i) os << ";";
        os << format_double(stages[i].l_start) << "," << format_double(stages[i].l_end) << ","
           << stages[i].start_epoch;
      }
      os << "]";
      break;
    case ScheduleKind::StepwiseLinear:
      os << "shufflenet:" << t_step;
      break;
  }
  return os.str();
}

double lr_at(const ScheduleSpec& spec, long epoch, long step) {
  switch (spec.kind) {
    case ScheduleKind::Polynomial: {
      if (epoch < spec.e_s)
        throw DomainError("lr_at: epoch " + std::to_string(epoch) +
                          " is before the schedule start e_s = " + std::to_string(spec.e_s));
      if (epoch > spec.e_f) return 0.0;
      const double frac = static_cast<double>(epoch - spec.e_s) /
                          static_cast<double>(spec.e_f - spec.e_s);
      return spec.l0 * std::pow(1.0 - frac, spec.rho);
    }
    case ScheduleKind::Exponential: {
      if (epoch < 0) throw DomainError("lr_at: epoch must be >= 0");
      return spec.l0 * std::pow(spec.base, static_cast<double>(epoch));
    }
    case ScheduleKind::StepDecay: {
      if (epoch < 0) throw DomainError("lr_at: epoch must be >= 0");
      return spec.l0 * std::pow(spec.base, static_cast<double>(epoch / spec.period));
    }
    case ScheduleKind::StagewiseLinear: {
      if (spec.stages.empty()) throw DomainError("lr_at: stagewise schedule has no stages");
      if (epoch < spec.stages.front().start_epoch)
        throw DomainError("lr_at: epoch before the first stage");
      const LinearStage* stage = &spec.stages.front();
      for (const auto& s : spec.stages)
        if (epoch >= s.start_epoch) stage = &s;
      // linear(l_s, l_e, n) = l_s − (l_s − l_e)/50 · (e − n)
      const double lr = stage->l_start - (stage->l_start - stage->l_end) / 50.0 *
                                             static_cast<double>(epoch - stage->start_epoch);
      return lr > 0.0 ? lr : 0.0;
    }
    case ScheduleKind::StepwiseLinear: {
      if (step < 0) throw DomainError("lr_at: step must be >= 0");
      if (spec.t_step < 1) throw DomainError("lr_at: stepwise schedule requires t_step >= 1");
      const double lr = spec.l0 * (1.0 - static_cast<double>(step) /
                                             static_cast<double>(spec.t_step));
      return lr > 0.0 ? lr : 0.0;
    }
  }
  throw DomainError("lr_at: unknown schedule kind");
}

double lr_for_training(const ScheduleSpec& spec, long epoch0, long step) {
  if (spec.kind == ScheduleKind::Polynomial) return lr_at(spec, spec.e_s + epoch0, step);
  if (spec.kind == ScheduleKind::StagewiseLinear)
    return lr_at(spec, spec.stages.front().start_epoch + epoch0, step);
  return lr_at(spec, epoch0, step);
}

void emit_schedule(const ScheduleSpec& spec, long horizon, std::ostream& os) {
  if (horizon < 1) throw DomainError("emit_schedule: horizon must be >= 1");
  long start = 0;
  if (spec.kind == ScheduleKind::Polynomial) start = spec.e_s;
  if (spec.kind == ScheduleKind::StagewiseLinear) start = spec.stages.front().start_epoch;
  os << "epoch,lr\n";
  for (long e = start; e <= horizon; ++e) {
    long step = 0;
    if (spec.kind == ScheduleKind::StepwiseLinear)
      step = e * spec.t_step / horizon;  // sample the step axis epoch-wise
    os << e << "," << format_double(lr_at(spec, e, step)) << "\n";
  }
}

}  // namespace covpool
