// SPDX-License-Identifier: Apache-2.0
//
// A small trainable CNN with hand-written per-layer backward passes. The
// activation tape caches every layer output, so gradients with respect to any
// intermediate activation are available, and a forward pass can be restarted
// from an injected activation at any layer — the machinery the landscape
// probes are built on.
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "covpool/mat.hpp"
#include "covpool/pooling.hpp"

namespace covpool {

enum class LayerKind { Conv3x3, Conv1x1, Relu, MaxPool2x2, GapHead, GcpHead, Dense };

const char* layer_kind_name(LayerKind k);

struct LayerSpec {
  LayerKind kind;
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::size_t stride = 1;
};

struct Shape3 {
  std::size_t c = 0, h = 0, w = 0;
  std::size_t count() const { return c * h * w; }
  bool operator==(const Shape3&) const = default;
};

/// Batched activations, NCHW row-major.
struct Tensor {
  std::size_t b = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(std::size_t b_, std::size_t c_, std::size_t h_, std::size_t w_)
      : b(b_), c(c_), h(h_), w(w_), v(b_ * c_ * h_ * w_, 0.0) {}

  std::size_t plane() const { return h * w; }
  std::size_t per_sample() const { return c * h * w; }
  double* at(std::size_t bi, std::size_t ci) { return v.data() + (bi * c + ci) * plane(); }
  const double* at(std::size_t bi, std::size_t ci) const {
    return v.data() + (bi * c + ci) * plane();
  }
  Shape3 shape() const { return {c, h, w}; }
};

struct Batch {
  Tensor images;
  std::vector<int> labels;
};

struct LayerParams {
  std::vector<double> w;
  std::vector<double> b;
};

struct Network {
  std::vector<LayerSpec> layers;
  std::vector<LayerParams> params;   // empty buffers for parameter-free layers
  Shape3 input_shape;
  std::size_t num_classes = 0;
  std::uint64_t seed = 0;
  double gap_scale = 0.0;            // 0 → 1/N (mean); 1 gives the plain sum

  // derived at build time
  std::vector<Shape3> out_shapes;
  std::size_t head_index = std::numeric_limits<std::size_t>::max();
  std::size_t pooled_dim = 0;

  /// Build with seed-deterministic He fan-in initialization. Validates the
  /// layer chain (shape compatibility, exactly one head after the last conv,
  /// dense last) and throws ShapeError naming the offending layer.
  static Network build(std::vector<LayerSpec> layers, Shape3 input, std::size_t classes,
                       std::uint64_t seed);

  std::size_t layer_count() const { return layers.size(); }
};

/// Cached activations of one forward pass. Consumed by at most one backward()
/// (which needs to hand out mutable gradients exactly once); the read-only
/// probe entry points do not consume it.
struct ActivationTape {
  Batch batch;
  std::vector<Tensor> outputs;                      // per layer
  std::vector<std::vector<std::size_t>> pool_argmax;  // flat in-tensor indices
  std::vector<std::vector<GcpContext>> gcp_ctx;       // per layer, per sample
  Mat probs;  // B×K softmax probabilities
  double loss = 0.0;
  bool consumed = false;
};

struct ForwardResult {
  Mat logits;  // B×K
  double loss = 0.0;
  ActivationTape tape;
};

struct Gradients {
  std::vector<LayerParams> layers;  // same layout as Network::params
  Tensor input;
};

/// Mean softmax cross-entropy forward pass; caches all activations.
ForwardResult forward(const Network& net, const Batch& batch);

/// Gradients for every parameter and the network input. Marks the tape
/// consumed; a second call on the same tape throws DomainError.
Gradients backward(const Network& net, ActivationTape& tape);

/// Gradient of the loss with respect to the output of layers[layer_index].
/// Read-only on the tape.
Tensor grad_wrt_activation(const Network& net, const ActivationTape& tape,
                           std::size_t layer_index);

/// Loss of the suffix network (layers layer_index+1 …) evaluated on an
/// injected activation, with the tape's own labels.
double forward_from(const Network& net, const ActivationTape& tape, std::size_t layer_index,
                    const Tensor& activation);

struct SuffixEval {
  double loss = 0.0;
  Tensor grad;  // d loss / d activation (filled when requested)
};

/// forward_from plus, optionally, the gradient with respect to the injected
/// activation. This is the probe workhorse.
SuffixEval eval_suffix(const Network& net, std::size_t layer_index, const Tensor& activation,
                       const std::vector<int>& labels, bool want_grad);

/// (parameter count, MAC count) under the conventions documented in net.cpp.
std::pair<std::size_t, std::size_t> count_params_flops(const Network& net);

// -- checkpoint container (format documented in README.md) --------------------

void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

/// Parse an architecture string such as "conv3x3:8,relu,maxpool,conv1x1:16"
/// (trunk only; the pooling head and dense classifier are appended from the
/// head kind and class count).
std::vector<LayerSpec> parse_arch(const std::string& text, std::size_t input_channels);

}  // namespace covpool
