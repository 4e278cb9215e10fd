// SPDX-License-Identifier: Apache-2.0
#include "covpool/probes.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "covpool/error.hpp"
#include "covpool/kernels.hpp"

namespace covpool {

std::vector<double> StepGrid::points() const {
  if (!(a >= 0.0) || !(a < b)) throw DomainError("StepGrid: needs 0 <= a < b");
  if (count < 2) throw DomainError("StepGrid: needs at least 2 points");
  std::vector<double> pts(count);
  const double h = (b - a) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i)
    pts[i] = i + 1 == count ? b : a + h * static_cast<double>(i);
  return pts;
}

namespace {

// Deterministic order regardless of scheduling: each index writes its own slot.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    pool.emplace_back([&, t]() {
      for (std::size_t i = t; i < n; i += nt) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

std::vector<double> displaced(std::span<const double> x0, std::span<const double> g,
                              double eta) {
  std::vector<double> x(x0.begin(), x0.end());
  kern::axpy(eta, g.data(), x.data(), x.size());
  return x;
}

ProbeResult finalize(std::vector<double> samples) {
  ProbeResult r;
  r.min = *std::min_element(samples.begin(), samples.end());
  r.max = *std::max_element(samples.begin(), samples.end());
  r.samples = std::move(samples);
  return r;
}

}  // namespace

ProbeResult loss_lipschitz_probe(const LossField& f, std::span<const double> x0,
                                 const StepGrid& grid, int direction, int threads) {
  const std::vector<double> pts = grid.points();
  std::vector<double> g = f.grad(x0);
  if (direction < 0) kern::scale(-1.0, g.data(), g.size());
  std::vector<double> samples(pts.size());
  parallel_for(pts.size(), threads, [&](std::size_t i) {
    if (pts[i] == 0.0) {
      samples[i] = f.loss(x0);  // zero step: the current loss, exactly
    } else {
      samples[i] = f.loss(displaced(x0, g, pts[i]));
    }
  });
  return finalize(std::move(samples));
}

ProbeResult gradient_predictiveness_probe(const LossField& f, std::span<const double> x0,
                                          const StepGrid& grid, int direction, int threads) {
  const std::vector<double> pts = grid.points();
  std::vector<double> g0 = f.grad(x0);
  std::vector<double> g = g0;
  if (direction < 0) kern::scale(-1.0, g.data(), g.size());
  std::vector<double> samples(pts.size());
  parallel_for(pts.size(), threads, [&](std::size_t i) {
    if (pts[i] == 0.0) {
      samples[i] = 0.0;  // ∇L(X) − ∇L(X) is identically zero
      return;
    }
    const std::vector<double> gd = f.grad(displaced(x0, g, pts[i]));
    double acc = 0.0;
    for (std::size_t k = 0; k < gd.size(); ++k) {
      const double dfk = g0[k] - gd[k];
      acc += dfk * dfk;
    }
    samples[i] = std::sqrt(acc);
  });
  return finalize(std::move(samples));
}

LossField suffix_loss_field(const Network& net, const ActivationTape& tape,
                            std::size_t layer_index) {
  if (layer_index >= net.layer_count())
    throw DomainError("suffix_loss_field: layer index out of range");
  const Shape3 shape = net.out_shapes[layer_index];
  const std::size_t bsz = tape.batch.labels.size();
  const std::vector<int> labels = tape.batch.labels;

  auto to_tensor = [shape, bsz](std::span<const double> flat) {
    Tensor t(bsz, shape.c, shape.h, shape.w);
    if (flat.size() != t.v.size())
      throw ShapeError("suffix activation has the wrong element count");
    std::copy(flat.begin(), flat.end(), t.v.begin());
    return t;
  };

  LossField f;
  f.loss = [&net, layer_index, labels, to_tensor](std::span<const double> x) {
    return eval_suffix(net, layer_index, to_tensor(x), labels, false).loss;
  };
  f.grad = [&net, layer_index, labels, to_tensor](std::span<const double> x) {
    SuffixEval ev = eval_suffix(net, layer_index, to_tensor(x), labels, true);
    return std::move(ev.grad.v);
  };
  return f;
}

ProbeResult loss_lipschitz_probe(const Network& net, const ActivationTape& tape,
                                 std::size_t layer_index, const StepGrid& grid, int direction,
                                 int threads) {
  const LossField f = suffix_loss_field(net, tape, layer_index);
  const Tensor& x0 = tape.outputs[layer_index];
  return loss_lipschitz_probe(f, x0.v, grid, direction, threads);
}

ProbeResult gradient_predictiveness_probe(const Network& net, const ActivationTape& tape,
                                          std::size_t layer_index, const StepGrid& grid,
                                          int direction, int threads) {
  const LossField f = suffix_loss_field(net, tape, layer_index);
  const Tensor& x0 = tape.outputs[layer_index];
  return gradient_predictiveness_probe(f, x0.v, grid, direction, threads);
}

}  // namespace covpool
