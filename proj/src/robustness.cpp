// SPDX-License-Identifier: Apache-2.0
#include "covpool/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "covpool/data.hpp"
#include "covpool/error.hpp"
#include "covpool/io.hpp"
#include "covpool/rng.hpp"

namespace covpool {

const char* corruption_name(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::GaussianNoise: return "gaussian-noise";
    case CorruptionKind::BoxBlur: return "box-blur";
    case CorruptionKind::Brightness: return "brightness";
    case CorruptionKind::Contrast: return "contrast";
  }
  return "?";
}

std::vector<CorruptionKind> all_corruptions() {
  return {CorruptionKind::GaussianNoise, CorruptionKind::BoxBlur, CorruptionKind::Brightness,
          CorruptionKind::Contrast};
}

double corruption_parameter(CorruptionKind kind, int severity) {
  if (severity < 1 || severity > 5)
    throw DomainError("corruption severity must lie in 1..5, got " + std::to_string(severity));
  static constexpr double kNoise[5] = {0.04, 0.08, 0.12, 0.18, 0.26};
  static constexpr double kBlur[5] = {3, 5, 7, 9, 11};
  static constexpr double kBright[5] = {0.1, 0.2, 0.3, 0.4, 0.5};
  static constexpr double kContrast[5] = {0.8, 0.65, 0.5, 0.35, 0.2};
  switch (kind) {
    case CorruptionKind::GaussianNoise: return kNoise[severity - 1];
    case CorruptionKind::BoxBlur: return kBlur[severity - 1];
    case CorruptionKind::Brightness: return kBright[severity - 1];
    case CorruptionKind::Contrast: return kContrast[severity - 1];
  }
  throw DomainError("unknown corruption kind");
}

namespace {

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

void box_blur_plane(const double* in, double* out, std::size_t h, std::size_t w, long radius) {
  for (long y = 0; y < static_cast<long>(h); ++y) {
    for (long x = 0; x < static_cast<long>(w); ++x) {
      double acc = 0.0;
      for (long dy = -radius; dy <= radius; ++dy) {
        const long yy = std::clamp(y + dy, 0L, static_cast<long>(h) - 1);
        for (long dx = -radius; dx <= radius; ++dx) {
          const long xx = std::clamp(x + dx, 0L, static_cast<long>(w) - 1);
          acc += in[yy * static_cast<long>(w) + xx];
        }
      }
      const double k = static_cast<double>((2 * radius + 1) * (2 * radius + 1));
      out[y * static_cast<long>(w) + x] = acc / k;
    }
  }
}

}  // namespace

Tensor corrupt(const Tensor& images, const CorruptionSpec& spec, std::uint64_t seed) {
  const double param = corruption_parameter(spec.kind, spec.severity);
  Tensor out = images;
  const std::size_t per = images.per_sample();
  for (std::size_t bi = 0; bi < images.b; ++bi) {
    double* dst = out.v.data() + bi * per;
    switch (spec.kind) {
      case CorruptionKind::GaussianNoise: {
        Rng rng(Rng::mix(seed, bi));  // per-image stream: batch-order independent
        for (std::size_t i = 0; i < per; ++i) dst[i] = clip01(dst[i] + param * rng.normal());
        break;
      }
      case CorruptionKind::BoxBlur: {
        const long radius = (static_cast<long>(param) - 1) / 2;
        std::vector<double> tmp(images.plane());
        for (std::size_t ci = 0; ci < images.c; ++ci) {
          double* plane = out.at(bi, ci);
          box_blur_plane(plane, tmp.data(), images.h, images.w, radius);
          std::copy(tmp.begin(), tmp.end(), plane);
        }
        break;
      }
      case CorruptionKind::Brightness:
        for (std::size_t i = 0; i < per; ++i) dst[i] = clip01(dst[i] + param);
        break;
      case CorruptionKind::Contrast:
        for (std::size_t i = 0; i < per; ++i) dst[i] = clip01(0.5 + param * (dst[i] - 0.5));
        break;
    }
  }
  return out;
}

const char* perturbation_name(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::Translate: return "translate";
    case PerturbationKind::Rotate: return "rotate";
    case PerturbationKind::NoiseWalk: return "noise-walk";
  }
  return "?";
}

std::vector<PerturbationKind> all_perturbations() {
  return {PerturbationKind::Translate, PerturbationKind::Rotate, PerturbationKind::NoiseWalk};
}

namespace {

Tensor translate_right(const Tensor& img, std::size_t pixels) {
  Tensor out = img;
  for (std::size_t ci = 0; ci < img.c; ++ci) {
    const double* ip = img.at(0, ci);
    double* op = out.at(0, ci);
    for (std::size_t y = 0; y < img.h; ++y) {
      for (std::size_t x = 0; x < img.w; ++x) {
        const std::size_t sx = x >= pixels ? x - pixels : 0;  // edge replication
        op[y * img.w + x] = ip[y * img.w + sx];
      }
    }
  }
  return out;
}

Tensor rotate_bilinear(const Tensor& img, double radians) {
  Tensor out(1, img.c, img.h, img.w);
  const double cy = (static_cast<double>(img.h) - 1.0) / 2.0;
  const double cx = (static_cast<double>(img.w) - 1.0) / 2.0;
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  for (std::size_t ci = 0; ci < img.c; ++ci) {
    const double* ip = img.at(0, ci);
    double* op = out.at(0, ci);
    for (std::size_t y = 0; y < img.h; ++y) {
      for (std::size_t x = 0; x < img.w; ++x) {
        const double ry = static_cast<double>(y) - cy;
        const double rx = static_cast<double>(x) - cx;
        const double sy = std::clamp(c * ry - s * rx + cy, 0.0, static_cast<double>(img.h) - 1);
        const double sx = std::clamp(s * ry + c * rx + cx, 0.0, static_cast<double>(img.w) - 1);
        const std::size_t y0 = static_cast<std::size_t>(sy);
        const std::size_t x0 = static_cast<std::size_t>(sx);
        const std::size_t y1 = std::min(y0 + 1, img.h - 1);
        const std::size_t x1 = std::min(x0 + 1, img.w - 1);
        const double fy = sy - static_cast<double>(y0);
        const double fx = sx - static_cast<double>(x0);
        op[y * img.w + x] = (1 - fy) * ((1 - fx) * ip[y0 * img.w + x0] + fx * ip[y0 * img.w + x1]) +
                            fy * ((1 - fx) * ip[y1 * img.w + x0] + fx * ip[y1 * img.w + x1]);
      }
    }
  }
  return out;
}

}  // namespace

std::vector<Tensor> perturb_sequence(const Tensor& image, PerturbationKind kind,
                                     std::size_t length, std::uint64_t seed) {
  if (image.b != 1) throw ShapeError("perturb_sequence expects a single image (b = 1)");
  if (length < 1) throw DomainError("perturb_sequence: length must be >= 1");
  std::vector<Tensor> frames;
  frames.reserve(length);
  frames.push_back(image);
  Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(kind)));
  for (std::size_t t = 1; t < length; ++t) {
    switch (kind) {
      case PerturbationKind::Translate:
        frames.push_back(translate_right(image, t));
        break;
      case PerturbationKind::Rotate: {
        constexpr double kPi = 3.14159265358979323846;
        frames.push_back(rotate_bilinear(image, static_cast<double>(t) * 2.0 * kPi / 180.0));
        break;
      }
      case PerturbationKind::NoiseWalk: {
        Tensor next = frames.back();
        for (double& v : next.v) v = clip01(v + 0.02 * rng.normal());
        frames.push_back(std::move(next));
        break;
      }
    }
  }
  return frames;
}

CorruptionScores corruption_error(const ErrorTable& model, const ErrorTable& baseline) {
  CorruptionScores out;
  for (const auto& [cell, err] : model.err)
    if (!baseline.err.count(cell))
      throw ShapeError(std::string("baseline table is missing cell ") +
                       corruption_name(cell.first) + "/" + std::to_string(cell.second));
  for (const auto& [cell, err] : baseline.err)
    if (!model.err.count(cell))
      throw ShapeError(std::string("model table is missing cell ") +
                       corruption_name(cell.first) + "/" + std::to_string(cell.second));

  std::map<CorruptionKind, double> num, den, rnum, rden;
  for (const auto& [cell, err] : model.err) {
    num[cell.first] += err;
    rnum[cell.first] += err - model.clean_err;
  }
  for (const auto& [cell, err] : baseline.err) {
    den[cell.first] += err;
    rden[cell.first] += err - baseline.clean_err;
  }

  double ce_sum = 0.0, rce_sum = 0.0;
  std::size_t ce_n = 0, rce_n = 0;
  for (const auto& [kind, d] : den) {
    if (d == 0.0) {
      out.warnings.push_back(std::string("excluded ") + corruption_name(kind) +
                             ": baseline error sum is zero");
    } else {
      out.ce[kind] = 100.0 * num[kind] / d;
      ce_sum += out.ce[kind];
      ++ce_n;
    }
    if (rden[kind] == 0.0) {
      out.warnings.push_back(std::string("excluded ") + corruption_name(kind) +
                             " (relative): baseline excess-error sum is zero");
    } else {
      out.relative_ce[kind] = 100.0 * rnum[kind] / rden[kind];
      rce_sum += out.relative_ce[kind];
      ++rce_n;
    }
  }
  out.mce = ce_n ? ce_sum / static_cast<double>(ce_n) : 0.0;
  out.relative_mce = rce_n ? rce_sum / static_cast<double>(rce_n) : 0.0;
  return out;
}

double flip_rate(const std::vector<int>& predictions) {
  if (predictions.size() < 2)
    throw DomainError("flip_rate: needs a sequence of length >= 2");
  std::size_t flips = 0;
  for (std::size_t i = 1; i < predictions.size(); ++i)
    if (predictions[i] != predictions[i - 1]) ++flips;
  return static_cast<double>(flips) / static_cast<double>(predictions.size() - 1);
}

FlipScores mean_flip_rate(const std::map<PerturbationKind, double>& model_fp,
                          const std::map<PerturbationKind, double>& baseline_fp) {
  FlipScores out;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [kind, base] : baseline_fp) {
    auto it = model_fp.find(kind);
    if (it == model_fp.end())
      throw ShapeError(std::string("model flip table is missing ") + perturbation_name(kind));
    if (base == 0.0) {
      out.warnings.push_back(std::string("excluded ") + perturbation_name(kind) +
                             ": baseline flip rate is zero");
      continue;
    }
    out.fr[kind] = 100.0 * it->second / base;
    sum += out.fr[kind];
    ++n;
  }
  out.mfr = n ? sum / static_cast<double>(n) : 0.0;
  return out;
}

namespace {

double error_rate(const Network& net, const Dataset& ds, const Tensor& images,
                  std::size_t batch) {
  std::size_t wrong = 0;
  const std::size_t per = images.per_sample();
  for (std::size_t start = 0; start < ds.size(); start += batch) {
    const std::size_t stop = std::min(ds.size(), start + batch);
    Batch b;
    b.images = Tensor(stop - start, images.c, images.h, images.w);
    b.labels.assign(ds.labels.begin() + static_cast<long>(start),
                    ds.labels.begin() + static_cast<long>(stop));
    const double inv_std = 1.0 / ds.norm_std;
    for (std::size_t i = 0; i < stop - start; ++i) {
      const double* src = images.v.data() + (start + i) * per;
      double* dst = b.images.v.data() + i * per;
      for (std::size_t k = 0; k < per; ++k) dst[k] = (src[k] - ds.norm_mean) * inv_std;
    }
    const ForwardResult fr = forward(net, b);
    for (std::size_t r = 0; r < b.labels.size(); ++r) {
      const double* row = fr.logits.row(r);
      std::size_t best = 0;
      for (std::size_t k = 1; k < net.num_classes; ++k)
        if (row[k] > row[best]) best = k;
      if (static_cast<int>(best) != b.labels[r]) ++wrong;
    }
  }
  return ds.size() ? static_cast<double>(wrong) / static_cast<double>(ds.size()) : 0.0;
}

int predict_one(const Network& net, const Dataset& ds, const Tensor& image) {
  Batch b;
  b.images = Tensor(1, image.c, image.h, image.w);
  const double inv_std = 1.0 / ds.norm_std;
  for (std::size_t k = 0; k < image.v.size(); ++k)
    b.images.v[k] = (image.v[k] - ds.norm_mean) * inv_std;
  b.labels = {0};
  const ForwardResult fr = forward(net, b);
  const double* row = fr.logits.row(0);
  std::size_t best = 0;
  for (std::size_t k = 1; k < net.num_classes; ++k)
    if (row[k] > row[best]) best = k;
  return static_cast<int>(best);
}

}  // namespace

RobustnessReport evaluate_robustness(const Network& model, const Network& baseline,
                                     const Dataset& test, std::size_t batch,
                                     std::uint64_t seed, std::size_t sequences_per_kind,
                                     std::size_t sequence_length) {
  if (model.input_shape != test.images.shape())
    throw ShapeError("model checkpoint input shape does not match the dataset");
  if (baseline.input_shape != test.images.shape())
    throw ShapeError("baseline checkpoint input shape does not match the dataset");
  if (sequence_length < 2) throw DomainError("perturbation sequences need length >= 2");

  RobustnessReport rep;
  rep.model_clean_err = error_rate(model, test, test.images, batch);
  rep.baseline_clean_err = error_rate(baseline, test, test.images, batch);
  rep.model_errors.clean_err = rep.model_clean_err;
  rep.baseline_errors.clean_err = rep.baseline_clean_err;

  for (CorruptionKind kind : all_corruptions()) {
    for (int sev = 1; sev <= 5; ++sev) {
      const std::uint64_t cell_seed =
          Rng::mix(seed, (static_cast<std::uint64_t>(kind) << 8) | static_cast<std::uint64_t>(sev));
      const Tensor corrupted = corrupt(test.images, {kind, sev}, cell_seed);
      rep.model_errors.err[{kind, sev}] = error_rate(model, test, corrupted, batch);
      rep.baseline_errors.err[{kind, sev}] = error_rate(baseline, test, corrupted, batch);
    }
  }
  rep.corruption = corruption_error(rep.model_errors, rep.baseline_errors);

  const std::size_t n_seq = std::min<std::size_t>(sequences_per_kind, test.size());
  for (PerturbationKind kind : all_perturbations()) {
    double model_fp = 0.0, base_fp = 0.0;
    for (std::size_t si = 0; si < n_seq; ++si) {
      // spread the probed images across the test split deterministically
      const std::size_t img_idx = (si * test.size()) / std::max<std::size_t>(n_seq, 1);
      Tensor img(1, test.images.c, test.images.h, test.images.w);
      std::copy(test.images.v.begin() + static_cast<long>(img_idx * test.images.per_sample()),
                test.images.v.begin() +
                    static_cast<long>((img_idx + 1) * test.images.per_sample()),
                img.v.begin());
      const auto frames = perturb_sequence(img, kind, sequence_length, Rng::mix(seed, si));
      std::vector<int> mp, bp;
      mp.reserve(frames.size());
      bp.reserve(frames.size());
      for (const auto& f : frames) {
        mp.push_back(predict_one(model, test, f));
        bp.push_back(predict_one(baseline, test, f));
      }
      model_fp += flip_rate(mp);
      base_fp += flip_rate(bp);
    }
    rep.model_fp[kind] = n_seq ? model_fp / static_cast<double>(n_seq) : 0.0;
    rep.baseline_fp[kind] = n_seq ? base_fp / static_cast<double>(n_seq) : 0.0;
  }
  rep.flips = mean_flip_rate(rep.model_fp, rep.baseline_fp);
  return rep;
}

std::string RobustnessReport::to_json() const {
  nlohmann::json j;
  j["clean_error"]["model"] = model_clean_err;
  j["clean_error"]["baseline"] = baseline_clean_err;
  for (const auto& [cell, err] : model_errors.err) {
    auto& node = j["corruptions"][corruption_name(cell.first)][std::to_string(cell.second)];
    node["err_model"] = err;
    node["err_baseline"] = baseline_errors.err.at(cell);
  }
  for (const auto& [kind, v] : corruption.ce) j["ce"][corruption_name(kind)] = v;
  for (const auto& [kind, v] : corruption.relative_ce)
    j["relative_ce"][corruption_name(kind)] = v;
  j["mce"] = corruption.mce;
  j["relative_mce"] = corruption.relative_mce;
  for (const auto& [kind, v] : model_fp) {
    j["flip_rates"][perturbation_name(kind)]["model"] = v;
    j["flip_rates"][perturbation_name(kind)]["baseline"] = baseline_fp.at(kind);
  }
  for (const auto& [kind, v] : flips.fr) j["fr"][perturbation_name(kind)] = v;
  j["mfr"] = flips.mfr;
  for (const auto& w : corruption.warnings) j["warnings"].push_back(w);
  for (const auto& w : flips.warnings) j["warnings"].push_back(w);
  return j.dump(2) + "\n";
}

std::string RobustnessReport::to_csv() const {
  std::ostringstream os;
  os << "corruption,severity,err_model,err_baseline\n";
  for (const auto& [cell, err] : model_errors.err)
    os << corruption_name(cell.first) << "," << cell.second << "," << format_double(err) << ","
       << format_double(baseline_errors.err.at(cell)) << "\n";
  return os.str();
}

}  // namespace covpool
