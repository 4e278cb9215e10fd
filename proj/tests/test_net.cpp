// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "covpool/error.hpp"
#include "covpool/io.hpp"
#include "covpool/net.hpp"
#include "covpool/rng.hpp"
#include "test_util.hpp"

using namespace covpool;

namespace {

// 1×1 spatial two-channel input straight into gap-head + identity dense:
// logits equal the input pixels.
Network passthrough_net() {
  std::vector<LayerSpec> layers = {{LayerKind::GapHead, 0, 0, 1}, {LayerKind::Dense, 0, 0, 1}};
  Network net = Network::build(std::move(layers), {2, 1, 1}, 2, 0);
  net.params[1].w = {1.0, 0.0, 0.0, 1.0};  // identity
  net.params[1].b = {0.0, 0.0};
  return net;
}

Batch logit_batch(double a, double b, int label) {
  Batch batch;
  batch.images = Tensor(1, 2, 1, 1);
  batch.images.v = {a, b};
  batch.labels = {label};
  return batch;
}

Network toy_net(const std::string& head, std::uint64_t seed, std::size_t in_c = 1,
                std::size_t hw = 4) {
  std::vector<LayerSpec> layers = parse_arch("conv3x3:2,relu,conv1x1:2", in_c);
  LayerSpec h;
  h.kind = head == "gap" ? LayerKind::GapHead : LayerKind::GcpHead;
  layers.push_back(h);
  layers.push_back({LayerKind::Dense, 0, 0, 1});
  return Network::build(std::move(layers), {in_c, hw, hw}, 2, seed);
}

Batch random_batch(Rng& rng, const Network& net, std::size_t bsz) {
  Batch b;
  b.images = Tensor(bsz, net.input_shape.c, net.input_shape.h, net.input_shape.w);
  for (auto& v : b.images.v) v = rng.normal();
  b.labels.resize(bsz);
  for (auto& l : b.labels) l = static_cast<int>(rng.uniform_index(net.num_classes));
  return b;
}

}  // namespace

TEST_CASE("softmax cross-entropy closed forms") {
  Network net = passthrough_net();
  const ForwardResult even = forward(net, logit_batch(0.0, 0.0, 0));
  CHECK(std::fabs(even.loss - std::log(2.0)) <= 1e-15);

  const ForwardResult sat = forward(net, logit_batch(1000.0, 0.0, 0));
  CHECK(sat.loss <= 1e-6);

  // determinism: bit-identical loss on repeated forward
  const ForwardResult a = forward(net, logit_batch(0.3, -1.2, 1));
  const ForwardResult b = forward(net, logit_batch(0.3, -1.2, 1));
  CHECK(a.loss == b.loss);
}

TEST_CASE("saturated loss yields vanishing parameter gradients") {
  Network net = passthrough_net();
  ForwardResult fr = forward(net, logit_batch(1000.0, 0.0, 0));
  Gradients g = backward(net, fr.tape);
  for (const auto& lp : g.layers) {
    for (double v : lp.w) CHECK(std::fabs(v) <= 1e-8);
    for (double v : lp.b) CHECK(std::fabs(v) <= 1e-8);
  }
}

TEST_CASE("tape is consumed by exactly one backward") {
  Network net = passthrough_net();
  ForwardResult fr = forward(net, logit_batch(0.0, 1.0, 0));
  backward(net, fr.tape);
  CHECK_THROWS_AS(backward(net, fr.tape), DomainError);
  CHECK_THROWS_AS(grad_wrt_activation(net, fr.tape, 0), DomainError);
}

TEST_CASE("full-net finite differences over sampled parameters") {
  for (const char* head : {"gcp", "gap"}) {
    Network net = toy_net(head, 17);
    Rng rng(99);
    Batch batch = random_batch(rng, net, 3);

    ForwardResult fr = forward(net, batch);
    Gradients g = backward(net, fr.tape);

    const double h = 1e-5;
    Rng pick(5);
    for (std::size_t li = 0; li < net.layer_count(); ++li) {
      auto& w = net.params[li].w;
      if (w.empty()) continue;
      double num = 0.0, den = 0.0;
      for (int s = 0; s < 5; ++s) {
        const std::size_t k = pick.uniform_index(w.size());
        const double keep = w[k];
        w[k] = keep + h;
        const double lp = forward(net, batch).loss;
        w[k] = keep - h;
        const double lm = forward(net, batch).loss;
        w[k] = keep;
        const double fd = (lp - lm) / (2.0 * h);
        num += (fd - g.layers[li].w[k]) * (fd - g.layers[li].w[k]);
        den += g.layers[li].w[k] * g.layers[li].w[k];
      }
      CHECK(std::sqrt(num) / std::max(std::sqrt(den), 1e-8) <= 1e-4);
    }
  }
}

TEST_CASE("input gradient matches finite differences") {
  Network net = toy_net("gcp", 23);
  Rng rng(7);
  Batch batch = random_batch(rng, net, 2);
  ForwardResult fr = forward(net, batch);
  Gradients g = backward(net, fr.tape);

  const double h = 1e-5;
  Rng pick(3);
  double num = 0.0, den = 0.0;
  for (int s = 0; s < 12; ++s) {
    const std::size_t k = pick.uniform_index(batch.images.v.size());
    const double keep = batch.images.v[k];
    batch.images.v[k] = keep + h;
    const double lp = forward(net, batch).loss;
    batch.images.v[k] = keep - h;
    const double lm = forward(net, batch).loss;
    batch.images.v[k] = keep;
    const double fd = (lp - lm) / (2.0 * h);
    num += (fd - g.input.v[k]) * (fd - g.input.v[k]);
    den += g.input.v[k] * g.input.v[k];
  }
  CHECK(std::sqrt(num) / std::max(std::sqrt(den), 1e-8) <= 1e-4);
}

TEST_CASE("gap and gcp heads share trunk gradient shapes") {
  Network gap_net = toy_net("gap", 31);
  Network gcp_net = toy_net("gcp", 31);
  Rng rng(11);
  Batch batch = random_batch(rng, gap_net, 2);

  ForwardResult fa = forward(gap_net, batch);
  ForwardResult fb = forward(gcp_net, batch);
  Gradients ga = backward(gap_net, fa.tape);
  Gradients gb = backward(gcp_net, fb.tape);
  for (std::size_t li = 0; li + 2 < gap_net.layer_count(); ++li) {
    CHECK(ga.layers[li].w.size() == gb.layers[li].w.size());
    CHECK(ga.layers[li].b.size() == gb.layers[li].b.size());
  }
  // identical seeds → identical trunk initialization regardless of head
  for (std::size_t li = 0; li + 2 < gap_net.layer_count(); ++li)
    CHECK(gap_net.params[li].w == gcp_net.params[li].w);
}

TEST_CASE("forward_from reproduces the recorded loss exactly") {
  Network net = toy_net("gcp", 37);
  Rng rng(13);
  Batch batch = random_batch(rng, net, 2);
  ForwardResult fr = forward(net, batch);

  for (std::size_t li = 0; li + 1 < net.layer_count(); ++li) {
    const double replay = forward_from(net, fr.tape, li, fr.tape.outputs[li]);
    CHECK(replay == fr.loss);
  }

  // zero step along the gradient leaves the loss unchanged
  const Tensor g = grad_wrt_activation(net, fr.tape, 0);
  Tensor moved = fr.tape.outputs[0];
  for (std::size_t i = 0; i < moved.v.size(); ++i) moved.v[i] += 0.0 * g.v[i];
  CHECK(forward_from(net, fr.tape, 0, moved) == fr.loss);
}

TEST_CASE("grad_wrt_activation closed form at the logits layer") {
  Network net = passthrough_net();
  Batch batch = logit_batch(0.4, -0.9, 1);
  ForwardResult fr = forward(net, batch);
  const Tensor g = grad_wrt_activation(net, fr.tape, net.layer_count() - 1);

  const double e0 = std::exp(0.4), e1 = std::exp(-0.9);
  const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
  CHECK(std::fabs(g.v[0] - p0) <= 1e-15);
  CHECK(std::fabs(g.v[1] - (p1 - 1.0)) <= 1e-15);

  // saturated loss: gradient vanishes everywhere
  ForwardResult sat = forward(net, logit_batch(1000.0, 0.0, 0));
  const Tensor gs = grad_wrt_activation(net, sat.tape, 0);
  for (double v : gs.v) CHECK(std::fabs(v) <= 1e-8);

  CHECK_THROWS_AS(grad_wrt_activation(net, fr.tape, 99), DomainError);
}

TEST_CASE("grad_wrt_activation matches finite differences at layer 0") {
  Network net = toy_net("gcp", 41);
  Rng rng(17);
  Batch batch = random_batch(rng, net, 2);
  ForwardResult fr = forward(net, batch);
  const Tensor g = grad_wrt_activation(net, fr.tape, 0);

  const double h = 1e-5;
  Rng pick(29);
  double num = 0.0, den = 0.0;
  for (int s = 0; s < 12; ++s) {
    const std::size_t k = pick.uniform_index(g.v.size());
    Tensor xp = fr.tape.outputs[0], xm = fr.tape.outputs[0];
    xp.v[k] += h;
    xm.v[k] -= h;
    const double fd =
        (forward_from(net, fr.tape, 0, xp) - forward_from(net, fr.tape, 0, xm)) / (2.0 * h);
    num += (fd - g.v[k]) * (fd - g.v[k]);
    den += g.v[k] * g.v[k];
  }
  CHECK(std::sqrt(num) / std::max(std::sqrt(den), 1e-10) <= 1e-5);
}

TEST_CASE("eval_suffix rejects mismatched activations") {
  Network net = toy_net("gap", 43);
  CHECK_THROWS_AS(eval_suffix(net, 0, Tensor(1, 3, 4, 4), {0}, false), ShapeError);
}

TEST_CASE("parameter and flop counting") {
  // dense D→K: params D·K + K
  std::vector<LayerSpec> dl = {{LayerKind::GapHead, 0, 0, 1}, {LayerKind::Dense, 0, 0, 1}};
  Network dn = Network::build(std::move(dl), {6, 1, 1}, 3, 0);
  auto [dp, df] = count_params_flops(dn);
  CHECK(dp == 6 * 3 + 3);

  // conv3x3 1→1 on 4×4, stride 1, pad 1 → 9·16 MACs
  std::vector<LayerSpec> cl = {{LayerKind::Conv3x3, 1, 1, 1},
                               {LayerKind::GapHead, 0, 0, 1},
                               {LayerKind::Dense, 0, 0, 1}};
  Network cn = Network::build(std::move(cl), {1, 4, 4}, 2, 0);
  auto [cp, cf] = count_params_flops(cn);
  CHECK(cp == (9 + 1) + (1 * 2 + 2));
  const std::size_t conv_macs = 9 * 16;
  const std::size_t gap_macs = 16;
  const std::size_t dense_macs = 2;
  CHECK(cf == conv_macs + gap_macs + dense_macs);

  // pooling heads are parameter-free: swapping gap→gcp adds no parameters
  // beyond the wider classifier
  Network g1 = toy_net("gap", 0);
  Network g2 = toy_net("gcp", 0);
  auto [p1, f1] = count_params_flops(g1);
  auto [p2, f2] = count_params_flops(g2);
  const std::size_t gap_dense = 2 * 2 + 2;     // D=2 → K=2
  const std::size_t gcp_dense = 3 * 2 + 2;     // D(D+1)/2=3 → K=2
  CHECK(p2 - p1 == gcp_dense - gap_dense);
}

TEST_CASE("network construction names offending layers") {
  // two heads
  std::vector<LayerSpec> two = {{LayerKind::GapHead, 0, 0, 1},
                                {LayerKind::GcpHead, 0, 0, 1},
                                {LayerKind::Dense, 0, 0, 1}};
  CHECK_THROWS_AS(Network::build(std::move(two), {2, 2, 2}, 2, 0), ShapeError);

  // conv after head
  std::vector<LayerSpec> after = {{LayerKind::GapHead, 0, 0, 1},
                                  {LayerKind::Conv1x1, 0, 2, 1},
                                  {LayerKind::Dense, 0, 0, 1}};
  CHECK_THROWS_AS(Network::build(std::move(after), {2, 2, 2}, 2, 0), ShapeError);

  // dense before head
  std::vector<LayerSpec> nohead = {{LayerKind::Dense, 0, 0, 1}};
  CHECK_THROWS_AS(Network::build(std::move(nohead), {2, 2, 2}, 2, 0), ShapeError);

  // batch vs input shape
  Network net = toy_net("gap", 1);
  Batch bad;
  bad.images = Tensor(1, 3, 4, 4);
  bad.labels = {0};
  CHECK_THROWS_AS(forward(net, bad), ShapeError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Network net = toy_net("gcp", 53);
  const std::string path = "/tmp/covpool_test_ckpt.bin";
  save_network(net, path);
  const Network back = load_network(path);

  CHECK(back.layer_count() == net.layer_count());
  CHECK(back.num_classes == net.num_classes);
  CHECK(back.input_shape == net.input_shape);
  CHECK(back.seed == net.seed);
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    CHECK(back.layers[i].kind == net.layers[i].kind);
    CHECK(back.params[i].w == net.params[i].w);
    CHECK(back.params[i].b == net.params[i].b);
  }
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loader rejects a bad magic") {
  const std::string path = "/tmp/covpool_bad_ckpt.bin";
  covpool::write_file(path, "NOTACKPT-------");
  CHECK_THROWS_AS(load_network(path), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("gap head scale selects mean or plain sum") {
  std::vector<LayerSpec> layers = {{LayerKind::GapHead, 0, 0, 1}, {LayerKind::Dense, 0, 0, 1}};
  Network net = Network::build(std::move(layers), {1, 2, 2}, 2, 0);

  Batch b;
  b.images = Tensor(1, 1, 2, 2);
  b.images.v = {1.0, 2.0, 3.0, 4.0};
  b.labels = {0};

  net.gap_scale = 0.0;  // 1/N
  ForwardResult mean = forward(net, b);
  CHECK(mean.tape.outputs[0].v[0] == 2.5);

  net.gap_scale = 1.0;  // literal sum
  ForwardResult sum = forward(net, b);
  CHECK(sum.tape.outputs[0].v[0] == 10.0);
}

TEST_CASE("maxpool forwards maxima and routes gradients to the argmax") {
  std::vector<LayerSpec> layers = {{LayerKind::MaxPool2x2, 0, 0, 1},
                                   {LayerKind::GapHead, 0, 0, 1},
                                   {LayerKind::Dense, 0, 0, 1}};
  Network net = Network::build(std::move(layers), {1, 2, 2}, 2, 3);
  net.params[2].w = {1.0, 0.0};  // logits = [pooled, 0]

  Batch b;
  b.images = Tensor(1, 1, 2, 2);
  b.images.v = {0.1, 0.7, 0.3, 0.2};
  b.labels = {0};
  ForwardResult fr = forward(net, b);
  CHECK(fr.tape.outputs[0].v[0] == 0.7);

  Gradients g = backward(net, fr.tape);
  // only the argmax input cell receives gradient
  CHECK(g.input.v[0] == 0.0);
  CHECK(g.input.v[1] != 0.0);
  CHECK(g.input.v[2] == 0.0);
  CHECK(g.input.v[3] == 0.0);
}
