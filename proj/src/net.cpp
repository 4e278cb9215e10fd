// SPDX-License-Identifier: Apache-2.0
#include "covpool/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "covpool/error.hpp"
#include "covpool/io.hpp"
#include "covpool/kernels.hpp"
#include "covpool/rng.hpp"

namespace covpool {

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv3x3: return "conv3x3";
    case LayerKind::Conv1x1: return "conv1x1";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool2x2: return "maxpool2x2";
    case LayerKind::GapHead: return "gap-head";
    case LayerKind::GcpHead: return "gcp-head";
    case LayerKind::Dense: return "dense";
  }
  return "?";
}

namespace {

std::string layer_tag(std::size_t i, const LayerSpec& s) {
  return "layer " + std::to_string(i) + " (" + layer_kind_name(s.kind) + ")";
}

Shape3 conv_out_shape(const Shape3& in, std::size_t ksize, std::size_t pad, std::size_t stride,
                      std::size_t out_ch) {
  const std::size_t h = (in.h + 2 * pad - ksize) / stride + 1;
  const std::size_t w = (in.w + 2 * pad - ksize) / stride + 1;
  return {out_ch, h, w};
}

double head_scale(const Network& net, std::size_t n) {
  return net.gap_scale > 0.0 ? net.gap_scale : 1.0 / static_cast<double>(n);
}

FeatureMatrix chw_to_feature(const Tensor& t, std::size_t bi) {
  const std::size_t n = t.plane();
  const std::size_t d = t.c;
  FeatureMatrix f(n, d);
  for (std::size_t ci = 0; ci < d; ++ci) {
    const double* plane = t.at(bi, ci);
    for (std::size_t i = 0; i < n; ++i) f.values(i, ci) = plane[i];
  }
  return f;
}

void feature_to_chw(const Mat& grad_nd, Tensor& out, std::size_t bi) {
  const std::size_t n = out.plane();
  for (std::size_t ci = 0; ci < out.c; ++ci) {
    double* plane = out.at(bi, ci);
    for (std::size_t i = 0; i < n; ++i) plane[i] = grad_nd(i, ci);
  }
}

}  // namespace

Network Network::build(std::vector<LayerSpec> layers, Shape3 input, std::size_t classes,
                       std::uint64_t seed) {
  if (layers.empty()) throw ShapeError("network needs at least a head and a dense layer");
  if (classes < 2) throw ShapeError("network needs at least 2 classes");
  if (input.count() == 0) throw ShapeError("network input shape has a zero dimension");

  Network net;
  net.input_shape = input;
  net.num_classes = classes;
  net.seed = seed;

  Shape3 cur = input;
  bool seen_head = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    LayerSpec& s = layers[i];
    switch (s.kind) {
      case LayerKind::Conv3x3:
      case LayerKind::Conv1x1: {
        if (seen_head) throw ShapeError(layer_tag(i, s) + " appears after the pooling head");
        if (s.in_ch == 0) s.in_ch = cur.c;
        if (s.in_ch != cur.c)
          throw ShapeError(layer_tag(i, s) + " expects " + std::to_string(s.in_ch) +
                           " input channels but gets " + std::to_string(cur.c));
        if (s.out_ch == 0) throw ShapeError(layer_tag(i, s) + " needs an output channel count");
        if (s.stride == 0) s.stride = 1;
        const std::size_t k = s.kind == LayerKind::Conv3x3 ? 3 : 1;
        const std::size_t pad = s.kind == LayerKind::Conv3x3 ? 1 : 0;
        if (cur.h + 2 * pad < k || cur.w + 2 * pad < k)
          throw ShapeError(layer_tag(i, s) + " input is smaller than the kernel");
        cur = conv_out_shape(cur, k, pad, s.stride, s.out_ch);
        break;
      }
      case LayerKind::Relu:
        if (seen_head) throw ShapeError(layer_tag(i, s) + " appears after the pooling head");
        s.in_ch = s.out_ch = cur.c;
        break;
      case LayerKind::MaxPool2x2:
        if (seen_head) throw ShapeError(layer_tag(i, s) + " appears after the pooling head");
        if (cur.h < 2 || cur.w < 2)
          throw ShapeError(layer_tag(i, s) + " needs at least a 2x2 spatial input");
        s.in_ch = s.out_ch = cur.c;
        cur = {cur.c, cur.h / 2, cur.w / 2};
        break;
      case LayerKind::GapHead:
      case LayerKind::GcpHead: {
        if (seen_head) throw ShapeError(layer_tag(i, s) + ": network already has a pooling head");
        seen_head = true;
        s.in_ch = cur.c;
        const std::size_t d = cur.c;
        s.out_ch = s.kind == LayerKind::GapHead ? d : d * (d + 1) / 2;
        net.head_index = i;
        net.pooled_dim = s.out_ch;
        cur = {s.out_ch, 1, 1};
        break;
      }
      case LayerKind::Dense: {
        if (!seen_head) throw ShapeError(layer_tag(i, s) + " must come after the pooling head");
        if (i + 1 != layers.size()) throw ShapeError(layer_tag(i, s) + " must be the last layer");
        s.in_ch = cur.count();
        if (s.out_ch == 0) s.out_ch = classes;
        if (s.out_ch != classes)
          throw ShapeError(layer_tag(i, s) + " output width disagrees with the class count");
        cur = {s.out_ch, 1, 1};
        break;
      }
    }
    net.out_shapes.push_back(cur);
  }
  if (!seen_head) throw ShapeError("network has no pooling head");
  if (layers.back().kind != LayerKind::Dense) throw ShapeError("network must end with a dense layer");

  net.layers = std::move(layers);

  // He fan-in initialization from one seed-deterministic stream consumed in
  // layer order; swapping the head leaves every trunk draw unchanged.
  Rng rng(seed);
  net.params.resize(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& s = net.layers[i];
    std::size_t wlen = 0, blen = 0, fan_in = 0;
    switch (s.kind) {
      case LayerKind::Conv3x3:
        wlen = 9 * s.in_ch * s.out_ch;
        blen = s.out_ch;
        fan_in = 9 * s.in_ch;
        break;
      case LayerKind::Conv1x1:
        wlen = s.in_ch * s.out_ch;
        blen = s.out_ch;
        fan_in = s.in_ch;
        break;
      case LayerKind::Dense:
        wlen = s.in_ch * s.out_ch;
        blen = s.out_ch;
        fan_in = s.in_ch;
        break;
      default:
        break;
    }
    net.params[i].w.resize(wlen);
    net.params[i].b.assign(blen, 0.0);
    const double std = fan_in ? std::sqrt(2.0 / static_cast<double>(fan_in)) : 0.0;
    for (double& w : net.params[i].w) w = std * rng.normal();
  }
  return net;
}

namespace {

// -- per-layer forward ---------------------------------------------------------

void conv_forward(const LayerSpec& s, const LayerParams& p, const Tensor& in, Tensor& out) {
  const std::size_t k = s.kind == LayerKind::Conv3x3 ? 3 : 1;
  const std::size_t pad = s.kind == LayerKind::Conv3x3 ? 1 : 0;
  const std::size_t st = s.stride;
  for (std::size_t bi = 0; bi < in.b; ++bi) {
    for (std::size_t co = 0; co < s.out_ch; ++co) {
      double* oplane = out.at(bi, co);
      std::fill(oplane, oplane + out.plane(), p.b[co]);
      for (std::size_t ci = 0; ci < s.in_ch; ++ci) {
        const double* iplane = in.at(bi, ci);
        for (std::size_t ky = 0; ky < k; ++ky) {
          for (std::size_t kx = 0; kx < k; ++kx) {
            const double wv = p.w[((co * s.in_ch + ci) * k + ky) * k + kx];
            for (std::size_t oy = 0; oy < out.h; ++oy) {
              const long iy = static_cast<long>(oy * st + ky) - static_cast<long>(pad);
              if (iy < 0 || iy >= static_cast<long>(in.h)) continue;
              const double* irow = iplane + static_cast<std::size_t>(iy) * in.w;
              double* orow = oplane + oy * out.w;
              if (st == 1) {
                const long shift = static_cast<long>(kx) - static_cast<long>(pad);
                const std::size_t ox_lo = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                const std::size_t ox_hi = std::min<std::size_t>(
                    out.w, in.w - static_cast<std::size_t>(std::max<long>(shift, 0)));
                if (ox_lo >= ox_hi) continue;
                kern::axpy(wv, irow + static_cast<long>(ox_lo) + shift, orow + ox_lo,
                           ox_hi - ox_lo);
              } else {
                for (std::size_t ox = 0; ox < out.w; ++ox) {
                  const long ix = static_cast<long>(ox * st + kx) - static_cast<long>(pad);
                  if (ix < 0 || ix >= static_cast<long>(in.w)) continue;
                  orow[ox] += wv * irow[ix];
                }
              }
            }
          }
        }
      }
    }
  }
}

void conv_backward(const LayerSpec& s, const LayerParams& p, const Tensor& in,
                   const Tensor& dout, Tensor& din, LayerParams* dp) {
  const std::size_t k = s.kind == LayerKind::Conv3x3 ? 3 : 1;
  const std::size_t pad = s.kind == LayerKind::Conv3x3 ? 1 : 0;
  const std::size_t st = s.stride;
  for (std::size_t bi = 0; bi < in.b; ++bi) {
    for (std::size_t co = 0; co < s.out_ch; ++co) {
      const double* dplane = dout.at(bi, co);
      if (dp) dp->b[co] += kern::sum(dplane, dout.plane());
      for (std::size_t ci = 0; ci < s.in_ch; ++ci) {
        const double* iplane = in.at(bi, ci);
        double* gplane = din.at(bi, ci);
        for (std::size_t ky = 0; ky < k; ++ky) {
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::size_t widx = ((co * s.in_ch + ci) * k + ky) * k + kx;
            const double wv = p.w[widx];
            double wgrad = 0.0;
            for (std::size_t oy = 0; oy < dout.h; ++oy) {
              const long iy = static_cast<long>(oy * st + ky) - static_cast<long>(pad);
              if (iy < 0 || iy >= static_cast<long>(in.h)) continue;
              const double* irow = iplane + static_cast<std::size_t>(iy) * in.w;
              double* grow = gplane + static_cast<std::size_t>(iy) * in.w;
              const double* drow = dplane + oy * dout.w;
              if (st == 1) {
                const long shift = static_cast<long>(kx) - static_cast<long>(pad);
                const std::size_t ox_lo = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                const std::size_t ox_hi = std::min<std::size_t>(
                    dout.w, in.w - static_cast<std::size_t>(std::max<long>(shift, 0)));
                if (ox_lo >= ox_hi) continue;
                const std::size_t len = ox_hi - ox_lo;
                if (dp) wgrad += kern::dot(drow + ox_lo, irow + static_cast<long>(ox_lo) + shift, len);
                kern::axpy(wv, drow + ox_lo, grow + static_cast<long>(ox_lo) + shift, len);
              } else {
                for (std::size_t ox = 0; ox < dout.w; ++ox) {
                  const long ix = static_cast<long>(ox * st + kx) - static_cast<long>(pad);
                  if (ix < 0 || ix >= static_cast<long>(in.w)) continue;
                  if (dp) wgrad += drow[ox] * irow[ix];
                  grow[ix] += wv * drow[ox];
                }
              }
            }
            if (dp) dp->w[widx] += wgrad;
          }
        }
      }
    }
  }
}

void maxpool_forward(const Tensor& in, Tensor& out, std::vector<std::size_t>& argmax) {
  argmax.assign(out.v.size(), 0);
  for (std::size_t bi = 0; bi < in.b; ++bi) {
    for (std::size_t ci = 0; ci < in.c; ++ci) {
      const double* iplane = in.at(bi, ci);
      double* oplane = out.at(bi, ci);
      const std::size_t base_in = (bi * in.c + ci) * in.plane();
      const std::size_t base_out = (bi * out.c + ci) * out.plane();
      for (std::size_t oy = 0; oy < out.h; ++oy) {
        for (std::size_t ox = 0; ox < out.w; ++ox) {
          std::size_t best = (2 * oy) * in.w + 2 * ox;
          double bv = iplane[best];
          // tie-break: first element in row-major window order
          const std::size_t cands[3] = {(2 * oy) * in.w + 2 * ox + 1,
                                        (2 * oy + 1) * in.w + 2 * ox,
                                        (2 * oy + 1) * in.w + 2 * ox + 1};
          for (std::size_t cand : cands) {
            if (iplane[cand] > bv) {
              bv = iplane[cand];
              best = cand;
            }
          }
          oplane[oy * out.w + ox] = bv;
          argmax[base_out + oy * out.w + ox] = base_in + best;
        }
      }
    }
  }
}

struct HeadScratch {
  Mat pooled;  // B×dim — row view of the head output tensor
};

void head_forward(const Network& net, std::size_t li, const Tensor& in, Tensor& out,
                  std::vector<GcpContext>& ctxs) {
  const LayerSpec& s = net.layers[li];
  const std::size_t n = in.plane();
  for (std::size_t bi = 0; bi < in.b; ++bi) {
    FeatureMatrix x = chw_to_feature(in, bi);
    if (s.kind == LayerKind::GapHead) {
      PooledVector p = gap_forward(x, head_scale(net, n));
      std::copy(p.values.begin(), p.values.end(), out.at(bi, 0));
    } else {
      auto [p, ctx] = gcp_forward(x);
      std::copy(p.values.begin(), p.values.end(), out.at(bi, 0));
      ctxs.push_back(std::move(ctx));
    }
  }
}

void head_backward(const Network& net, std::size_t li, const Tensor& in, const Tensor& dout,
                   Tensor& din, const std::vector<GcpContext>& ctxs) {
  const LayerSpec& s = net.layers[li];
  const std::size_t n = in.plane();
  const std::size_t dim = net.pooled_dim;
  for (std::size_t bi = 0; bi < in.b; ++bi) {
    PooledVector g;
    g.dim = dim;
    g.values.assign(dout.at(bi, 0), dout.at(bi, 0) + dim);
    if (s.kind == LayerKind::GapHead) {
      FeatureMatrix dx = gap_backward(g, n, head_scale(net, n));
      feature_to_chw(dx.values, din, bi);
    } else {
      const SymMat dz = devectorize_grad(g);
      FeatureMatrix dx = gcp_backward(ctxs[bi], dz);
      feature_to_chw(dx.values, din, bi);
    }
  }
}

void dense_forward(const LayerSpec& s, const LayerParams& p, const Tensor& in, Tensor& out) {
  for (std::size_t bi = 0; bi < in.b; ++bi) {
    const double* irow = in.at(bi, 0);
    double* orow = out.at(bi, 0);
    for (std::size_t k = 0; k < s.out_ch; ++k)
      orow[k] = p.b[k] + kern::dot(p.w.data() + k * s.in_ch, irow, s.in_ch);
  }
}

void dense_backward(const LayerSpec& s, const LayerParams& p, const Tensor& in,
                    const Tensor& dout, Tensor& din, LayerParams* dp) {
  for (std::size_t bi = 0; bi < in.b; ++bi) {
    const double* irow = in.at(bi, 0);
    const double* drow = dout.at(bi, 0);
    double* grow = din.at(bi, 0);
    for (std::size_t k = 0; k < s.out_ch; ++k) {
      const double g = drow[k];
      if (dp) {
        dp->b[k] += g;
        kern::axpy(g, irow, dp->w.data() + k * s.in_ch, s.in_ch);
      }
      kern::axpy(g, p.w.data() + k * s.in_ch, grow, s.in_ch);
    }
  }
}

// Runs layers [first, L) with `input` as the activation entering layers[first].
// Fills tape.outputs[first..L-1] (tape.outputs must be pre-sized).
void run_layers(const Network& net, const Tensor& input, std::size_t first, ActivationTape& tape) {
  const Tensor* cur = &input;
  for (std::size_t i = first; i < net.layer_count(); ++i) {
    const LayerSpec& s = net.layers[i];
    const Shape3 os = net.out_shapes[i];
    Tensor out(cur->b, os.c, os.h, os.w);
    switch (s.kind) {
      case LayerKind::Conv3x3:
      case LayerKind::Conv1x1:
        conv_forward(s, net.params[i], *cur, out);
        break;
      case LayerKind::Relu:
        kern::relu(cur->v.data(), out.v.data(), cur->v.size());
        break;
      case LayerKind::MaxPool2x2:
        maxpool_forward(*cur, out, tape.pool_argmax[i]);
        break;
      case LayerKind::GapHead:
      case LayerKind::GcpHead:
        tape.gcp_ctx[i].clear();
        head_forward(net, i, *cur, out, tape.gcp_ctx[i]);
        break;
      case LayerKind::Dense:
        dense_forward(s, net.params[i], *cur, out);
        break;
    }
    tape.outputs[i] = std::move(out);
    cur = &tape.outputs[i];
  }
}

double softmax_loss(const Tensor& logits, const std::vector<int>& labels, Mat& probs) {
  const std::size_t bsz = logits.b;
  const std::size_t k = logits.c;
  probs = Mat(bsz, k);
  double loss = 0.0;
  for (std::size_t bi = 0; bi < bsz; ++bi) {
    const double* row = logits.at(bi, 0);
    double mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) denom += std::exp(row[j] - mx);
    const double lse = mx + std::log(denom);
    for (std::size_t j = 0; j < k; ++j) probs(bi, j) = std::exp(row[j] - lse);
    loss += lse - row[static_cast<std::size_t>(labels[bi])];
  }
  return loss / static_cast<double>(bsz);
}

void check_labels(const Network& net, const std::vector<int>& labels, std::size_t bsz) {
  if (labels.size() != bsz) throw ShapeError("batch label count does not match image count");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= net.num_classes)
      throw DomainError("label " + std::to_string(l) + " out of range for " +
                        std::to_string(net.num_classes) + " classes");
}

ActivationTape make_tape(const Network& net) {
  ActivationTape t;
  t.outputs.resize(net.layer_count());
  t.pool_argmax.resize(net.layer_count());
  t.gcp_ctx.resize(net.layer_count());
  return t;
}

// Backward from the loss down to (and excluding) layers[stop+1]'s input...
// concretely: returns the gradient flowing into the OUTPUT of layers[stop],
// or the input gradient when stop == -1. Fills `grads` when non-null.
Tensor backward_range(const Network& net, const ActivationTape& tape, long stop,
                      std::vector<LayerParams>* grads) {
  const std::size_t bsz = tape.batch.labels.size();
  const long last = static_cast<long>(net.layer_count()) - 1;

  // d loss / d logits = (softmax − onehot)/B
  const Shape3 ls = net.out_shapes[static_cast<std::size_t>(last)];
  Tensor d(bsz, ls.c, ls.h, ls.w);
  for (std::size_t bi = 0; bi < bsz; ++bi) {
    double* row = d.at(bi, 0);
    for (std::size_t k = 0; k < net.num_classes; ++k) row[k] = tape.probs(bi, k);
    row[static_cast<std::size_t>(tape.batch.labels[bi])] -= 1.0;
    kern::scale(1.0 / static_cast<double>(bsz), row, net.num_classes);
  }
  if (stop == last) return d;

  for (long i = last; i > stop; --i) {
    const std::size_t li = static_cast<std::size_t>(i);
    const LayerSpec& s = net.layers[li];
    const Tensor& in = i == 0 ? tape.batch.images : tape.outputs[li - 1];
    Tensor din(in.b, in.c, in.h, in.w);
    LayerParams* dp = nullptr;
    if (grads) dp = &(*grads)[li];
    switch (s.kind) {
      case LayerKind::Conv3x3:
      case LayerKind::Conv1x1:
        conv_backward(s, net.params[li], in, d, din, dp);
        break;
      case LayerKind::Relu:
        kern::relu_grad(in.v.data(), d.v.data(), din.v.data(), in.v.size());
        break;
      case LayerKind::MaxPool2x2: {
        const auto& amax = tape.pool_argmax[li];
        for (std::size_t idx = 0; idx < d.v.size(); ++idx) din.v[amax[idx]] += d.v[idx];
        break;
      }
      case LayerKind::GapHead:
      case LayerKind::GcpHead:
        head_backward(net, li, in, d, din, tape.gcp_ctx[li]);
        break;
      case LayerKind::Dense:
        dense_backward(s, net.params[li], in, d, din, dp);
        break;
    }
    d = std::move(din);
  }
  return d;
}

}  // namespace

ForwardResult forward(const Network& net, const Batch& batch) {
  if (batch.images.shape() != net.input_shape)
    throw ShapeError("batch shape does not match the network input (layer 0 expects " +
                     std::to_string(net.input_shape.c) + "x" + std::to_string(net.input_shape.h) +
                     "x" + std::to_string(net.input_shape.w) + ")");
  check_labels(net, batch.labels, batch.images.b);

  ForwardResult r;
  r.tape = make_tape(net);
  r.tape.batch = batch;
  run_layers(net, batch.images, 0, r.tape);

  const Tensor& logits = r.tape.outputs.back();
  r.loss = softmax_loss(logits, batch.labels, r.tape.probs);
  r.tape.loss = r.loss;
  r.logits = Mat(logits.b, logits.c);
  for (std::size_t bi = 0; bi < logits.b; ++bi)
    std::copy(logits.at(bi, 0), logits.at(bi, 0) + logits.c, r.logits.row(bi));
  return r;
}

Gradients backward(const Network& net, ActivationTape& tape) {
  if (tape.consumed) throw DomainError("backward: tape already consumed");
  tape.consumed = true;

  Gradients g;
  g.layers.resize(net.layer_count());
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    g.layers[i].w.assign(net.params[i].w.size(), 0.0);
    g.layers[i].b.assign(net.params[i].b.size(), 0.0);
  }
  g.input = backward_range(net, tape, -1, &g.layers);
  return g;
}

Tensor grad_wrt_activation(const Network& net, const ActivationTape& tape,
                           std::size_t layer_index) {
  if (layer_index >= net.layer_count())
    throw DomainError("grad_wrt_activation: layer index out of range");
  if (tape.consumed) throw DomainError("grad_wrt_activation: tape already consumed");
  return backward_range(net, tape, static_cast<long>(layer_index), nullptr);
}

double forward_from(const Network& net, const ActivationTape& tape, std::size_t layer_index,
                    const Tensor& activation) {
  return eval_suffix(net, layer_index, activation, tape.batch.labels, false).loss;
}

SuffixEval eval_suffix(const Network& net, std::size_t layer_index, const Tensor& activation,
                       const std::vector<int>& labels, bool want_grad) {
  if (layer_index >= net.layer_count())
    throw DomainError("eval_suffix: layer index out of range");
  const Shape3 expect = net.out_shapes[layer_index];
  if (activation.shape() != expect)
    throw ShapeError("eval_suffix: activation shape does not match the recorded shape of " +
                     layer_tag(layer_index, net.layers[layer_index]));
  check_labels(net, labels, activation.b);

  ActivationTape tape = make_tape(net);
  tape.batch.labels = labels;
  tape.outputs[layer_index] = activation;
  run_layers(net, activation, layer_index + 1, tape);

  SuffixEval ev;
  ev.loss = softmax_loss(tape.outputs.back(), labels, tape.probs);

  if (want_grad) {
    // backward_range walks down to the gradient at outputs[layer_index],
    // i.e. with respect to the injected activation.
    ev.grad = backward_range(net, tape, static_cast<long>(layer_index), nullptr);
  }
  return ev;
}

// Parameter/MAC conventions: convolutions count k²·Cin·Cout·Hout·Wout MACs,
// dense layers Din·K; relu and maxpool count zero (comparisons, not MACs);
// gap counts N·D adds; gcp counts N·D² for the covariance plus 2·D³ for the
// eigenbasis reconstruction (the iterative eigensolver itself is excluded as
// data-dependent). Heads are parameter-free.
std::pair<std::size_t, std::size_t> count_params_flops(const Network& net) {
  std::size_t params = 0, flops = 0;
  Shape3 cur = net.input_shape;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const LayerSpec& s = net.layers[i];
    const Shape3 os = net.out_shapes[i];
    switch (s.kind) {
      case LayerKind::Conv3x3:
        params += 9 * s.in_ch * s.out_ch + s.out_ch;
        flops += 9 * s.in_ch * s.out_ch * os.h * os.w;
        break;
      case LayerKind::Conv1x1:
        params += s.in_ch * s.out_ch + s.out_ch;
        flops += s.in_ch * s.out_ch * os.h * os.w;
        break;
      case LayerKind::Relu:
      case LayerKind::MaxPool2x2:
        break;
      case LayerKind::GapHead:
        flops += cur.h * cur.w * cur.c;
        break;
      case LayerKind::GcpHead: {
        const std::size_t n = cur.h * cur.w, d = cur.c;
        flops += n * d * d + 2 * d * d * d;
        break;
      }
      case LayerKind::Dense:
        params += s.in_ch * s.out_ch + s.out_ch;
        flops += s.in_ch * s.out_ch;
        break;
    }
    cur = os;
  }
  return {params, flops};
}

// -- checkpoint ----------------------------------------------------------------

static constexpr char kCkptMagic[8] = {'C', 'P', 'N', 'E', 'T', '0', '0', '1'};

void save_network(const Network& net, const std::string& path) {
  std::string out;
  out.append(kCkptMagic, sizeof(kCkptMagic));
  store_u32_le(out, static_cast<std::uint32_t>(net.layer_count()));
  store_u32_le(out, static_cast<std::uint32_t>(net.num_classes));
  store_u32_le(out, static_cast<std::uint32_t>(net.input_shape.c));
  store_u32_le(out, static_cast<std::uint32_t>(net.input_shape.h));
  store_u32_le(out, static_cast<std::uint32_t>(net.input_shape.w));
  store_u64_le(out, net.seed);
  store_f64_le(out, net.gap_scale);
  for (const auto& s : net.layers) {
    store_u32_le(out, static_cast<std::uint32_t>(s.kind));
    store_u32_le(out, static_cast<std::uint32_t>(s.in_ch));
    store_u32_le(out, static_cast<std::uint32_t>(s.out_ch));
    store_u32_le(out, static_cast<std::uint32_t>(s.stride));
  }
  for (const auto& p : net.params) {
    store_u64_le(out, p.w.size());
    store_u64_le(out, p.b.size());
    for (double v : p.w) store_f64_le(out, v);
    for (double v : p.b) store_f64_le(out, v);
  }
  write_file(path, out);
}

Network load_network(const std::string& path) {
  const std::string in = read_file(path);
  std::size_t off = 0;
  if (in.size() < sizeof(kCkptMagic) ||
      std::memcmp(in.data(), kCkptMagic, sizeof(kCkptMagic)) != 0)
    throw ParseError("checkpoint magic mismatch (expected CPNET001)", 0);
  off = sizeof(kCkptMagic);

  const std::uint32_t nlayers = load_u32_le(in, off);
  const std::uint32_t classes = load_u32_le(in, off);
  Shape3 input;
  input.c = load_u32_le(in, off);
  input.h = load_u32_le(in, off);
  input.w = load_u32_le(in, off);
  const std::uint64_t seed = load_u64_le(in, off);
  const double gap_scale = load_f64_le(in, off);

  std::vector<LayerSpec> layers;
  layers.reserve(nlayers);
  for (std::uint32_t i = 0; i < nlayers; ++i) {
    LayerSpec s;
    const std::uint32_t kind = load_u32_le(in, off);
    if (kind > static_cast<std::uint32_t>(LayerKind::Dense))
      throw ParseError("checkpoint has unknown layer kind " + std::to_string(kind), off - 4);
    s.kind = static_cast<LayerKind>(kind);
    s.in_ch = load_u32_le(in, off);
    s.out_ch = load_u32_le(in, off);
    s.stride = load_u32_le(in, off);
    layers.push_back(s);
  }

  Network net = Network::build(std::move(layers), input, classes, seed);
  net.gap_scale = gap_scale;
  for (auto& p : net.params) {
    const std::uint64_t wlen = load_u64_le(in, off);
    const std::uint64_t blen = load_u64_le(in, off);
    if (wlen != p.w.size() || blen != p.b.size())
      throw ParseError("checkpoint parameter blob size disagrees with the layer specs",
                       off - 16);
    for (auto& v : p.w) v = load_f64_le(in, off);
    for (auto& v : p.b) v = load_f64_le(in, off);
  }
  if (off != in.size()) throw ParseError("trailing bytes after checkpoint payload", off);
  return net;
}

std::vector<LayerSpec> parse_arch(const std::string& text, std::size_t input_channels) {
  std::vector<LayerSpec> out;
  std::stringstream ss(text);
  std::string tok;
  std::size_t cur = input_channels;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    LayerSpec s;
    auto colon = tok.find(':');
    const std::string name = tok.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : tok.substr(colon + 1);
    if (name == "conv3x3" || name == "conv1x1") {
      s.kind = name == "conv3x3" ? LayerKind::Conv3x3 : LayerKind::Conv1x1;
      s.in_ch = cur;
      try {
        std::size_t pos = 0;
        s.out_ch = static_cast<std::size_t>(std::stoul(arg, &pos));
        s.stride = 1;
        if (pos < arg.size() && arg[pos] == 's')
          s.stride = static_cast<std::size_t>(std::stoul(arg.substr(pos + 1)));
      } catch (const std::exception&) {
        throw DomainError("arch: bad conv spec '" + tok + "' (want conv3x3:<out>[s<stride>])");
      }
      cur = s.out_ch;
    } else if (name == "relu") {
      s.kind = LayerKind::Relu;
    } else if (name == "maxpool") {
      s.kind = LayerKind::MaxPool2x2;
    } else {
      throw DomainError("arch: unknown layer '" + name + "'");
    }
    out.push_back(s);
  }
  if (out.empty()) throw DomainError("arch: empty architecture string");
  return out;
}

}  // namespace covpool
