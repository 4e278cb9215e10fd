// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "covpool/error.hpp"
#include "covpool/robustness.hpp"

using namespace covpool;

namespace {

Tensor constant_image(std::size_t b, std::size_t c, std::size_t hw, double value) {
  Tensor t(b, c, hw, hw);
  for (auto& v : t.v) v = value;
  return t;
}

}  // namespace

TEST_CASE("gaussian noise severity table drives the sample std") {
  // constant 0.5 image, >= 10^4 pixels: sample std within 5% of sigma_s
  const Tensor img = constant_image(1, 1, 128, 0.5);  // 16384 pixels
  for (int sev = 1; sev <= 5; ++sev) {
    const double sigma = corruption_parameter(CorruptionKind::GaussianNoise, sev);
    const Tensor noisy = corrupt(img, {CorruptionKind::GaussianNoise, sev}, 77);
    double mean = 0.0;
    for (double v : noisy.v) mean += v;
    mean /= static_cast<double>(noisy.v.size());
    double var = 0.0;
    for (double v : noisy.v) var += (v - mean) * (v - mean);
    var /= static_cast<double>(noisy.v.size());
    CHECK(std::fabs(std::sqrt(var) - sigma) <= 0.05 * sigma);
  }
}

TEST_CASE("brightness adds a fixed offset") {
  const Tensor zero = constant_image(2, 1, 4, 0.0);
  const Tensor out = corrupt(zero, {CorruptionKind::Brightness, 1}, 0);
  for (double v : out.v) CHECK(v == 0.1);
  // clipping keeps pixels in range
  const Tensor bright = corrupt(constant_image(1, 1, 4, 0.9), {CorruptionKind::Brightness, 5}, 0);
  for (double v : bright.v) CHECK(v == 1.0);
}

TEST_CASE("box blur leaves constant images unchanged") {
  const Tensor flat = constant_image(1, 2, 8, 0.37);
  for (int sev = 1; sev <= 5; ++sev) {
    const Tensor out = corrupt(flat, {CorruptionKind::BoxBlur, sev}, 0);
    for (double v : out.v) CHECK(std::fabs(v - 0.37) <= 1e-12);
  }
}

TEST_CASE("contrast compresses toward mid-gray") {
  const Tensor img = constant_image(1, 1, 2, 1.0);
  const Tensor out = corrupt(img, {CorruptionKind::Contrast, 3}, 0);
  for (double v : out.v) CHECK(v == doctest::Approx(0.5 + 0.5 * 0.5).epsilon(1e-15));
}

TEST_CASE("severity monotonically increases distortion") {
  // Isolated impulses away from the borders: blurring spreads strictly more
  // mass with every kernel size, and the point corruptions scale strictly.
  Tensor img(1, 1, 32, 32);
  img.v[16 * 32 + 16] = 1.0;
  img.v[8 * 32 + 24] = 1.0;

  for (CorruptionKind kind : all_corruptions()) {
    double prev = 0.0;
    for (int sev = 1; sev <= 5; ++sev) {
      const Tensor out = corrupt(img, {kind, sev}, 123);
      double dist = 0.0;
      for (std::size_t i = 0; i < img.v.size(); ++i) dist += std::fabs(out.v[i] - img.v[i]);
      if (sev > 1) CHECK(dist > prev);
      prev = dist;
    }
  }
}

TEST_CASE("corrupt is pure given (input, spec, seed) and validates severity") {
  const Tensor img = constant_image(2, 1, 8, 0.5);
  const Tensor a = corrupt(img, {CorruptionKind::GaussianNoise, 3}, 42);
  const Tensor b = corrupt(img, {CorruptionKind::GaussianNoise, 3}, 42);
  CHECK(a.v == b.v);
  const Tensor c = corrupt(img, {CorruptionKind::GaussianNoise, 3}, 43);
  CHECK(a.v != c.v);
  CHECK_THROWS_AS(corrupt(img, {CorruptionKind::GaussianNoise, 0}, 0), DomainError);
  CHECK_THROWS_AS(corrupt(img, {CorruptionKind::GaussianNoise, 6}, 0), DomainError);
}

TEST_CASE("perturbation sequences start at the original frame") {
  const Tensor img = constant_image(1, 1, 4, 0.25);
  for (PerturbationKind kind : all_perturbations()) {
    const auto frames = perturb_sequence(img, kind, 1, 5);
    REQUIRE(frames.size() == 1);
    CHECK(frames[0].v == img.v);
  }
}

TEST_CASE("translate shifts right with edge replication") {
  // hand-constructed 3×3 image: columns 0,1,2 hold 1,2,3
  Tensor img(1, 1, 3, 3);
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t x = 0; x < 3; ++x) img.v[y * 3 + x] = static_cast<double>(x + 1);

  const auto frames = perturb_sequence(img, PerturbationKind::Translate, 3, 0);
  // frame 1: pixel (0,0) keeps its value under rightward shift (edge column
  // replicates), pixel (0,1) takes the old (0,0)
  CHECK(frames[1].v[0] == img.v[0]);
  CHECK(frames[1].v[1] == 1.0);
  CHECK(frames[1].v[2] == 2.0);
  // frame 2 shifts by two pixels
  CHECK(frames[2].v[2] == 1.0);
}

TEST_CASE("perturbation sequences are seed-deterministic") {
  Tensor img(1, 1, 4, 4);
  for (std::size_t i = 0; i < img.v.size(); ++i) img.v[i] = 0.3 + 0.01 * static_cast<double>(i);
  const auto a = perturb_sequence(img, PerturbationKind::NoiseWalk, 7, 9);
  const auto b = perturb_sequence(img, PerturbationKind::NoiseWalk, 7, 9);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].v == b[i].v);
}

TEST_CASE("corruption error hand cases") {
  ErrorTable model, base;
  model.clean_err = 0.1;
  base.clean_err = 0.2;
  for (int sev = 1; sev <= 5; ++sev) {
    model.err[{CorruptionKind::GaussianNoise, sev}] = 0.2;
    base.err[{CorruptionKind::GaussianNoise, sev}] = 0.4;
  }

  const CorruptionScores half = corruption_error(model, base);
  CHECK(half.ce.at(CorruptionKind::GaussianNoise) == 50.0);
  CHECK(half.mce == 50.0);
  // relative: Σ(0.2−0.1)/Σ(0.4−0.2) ×100 = 50
  CHECK(half.relative_ce.at(CorruptionKind::GaussianNoise) == 50.0);

  // identical tables → 100 everywhere (the baseline convention)
  const CorruptionScores self = corruption_error(base, base);
  CHECK(self.mce == 100.0);
  CHECK(self.relative_mce == 100.0);

  // single corruption, single severity
  ErrorTable m1, b1;
  m1.err[{CorruptionKind::Brightness, 1}] = 0.2;
  b1.err[{CorruptionKind::Brightness, 1}] = 0.4;
  CHECK(corruption_error(m1, b1).ce.at(CorruptionKind::Brightness) == 50.0);
}

TEST_CASE("corruption error is linear in the model errors") {
  ErrorTable model, base;
  for (int sev = 1; sev <= 5; ++sev) {
    model.err[{CorruptionKind::BoxBlur, sev}] = 0.05 * sev;
    base.err[{CorruptionKind::BoxBlur, sev}] = 0.08 * sev;
    model.err[{CorruptionKind::Contrast, sev}] = 0.03 * sev;
    base.err[{CorruptionKind::Contrast, sev}] = 0.05 * sev;
  }
  const CorruptionScores s1 = corruption_error(model, base);
  ErrorTable doubled = model;
  for (auto& [cell, e] : doubled.err) e *= 2.0;
  const CorruptionScores s2 = corruption_error(doubled, base);
  for (const auto& [kind, ce] : s1.ce)
    CHECK(std::fabs(s2.ce.at(kind) - 2.0 * ce) <= 1e-12 * (1.0 + 2.0 * ce));
}

TEST_CASE("zero baseline denominators are excluded with a warning") {
  ErrorTable model, base;
  model.clean_err = base.clean_err = 0.0;
  for (int sev = 1; sev <= 5; ++sev) {
    model.err[{CorruptionKind::GaussianNoise, sev}] = 0.1;
    base.err[{CorruptionKind::GaussianNoise, sev}] = 0.0;  // zero denominator
    model.err[{CorruptionKind::Brightness, sev}] = 0.2;
    base.err[{CorruptionKind::Brightness, sev}] = 0.2;
  }
  const CorruptionScores s = corruption_error(model, base);
  CHECK(!s.ce.count(CorruptionKind::GaussianNoise));
  CHECK(s.ce.at(CorruptionKind::Brightness) == 100.0);
  CHECK(s.mce == 100.0);
  CHECK(!s.warnings.empty());
}

TEST_CASE("mismatched tables are rejected") {
  ErrorTable model, base;
  model.err[{CorruptionKind::BoxBlur, 1}] = 0.1;
  CHECK_THROWS_AS(corruption_error(model, base), ShapeError);
}

TEST_CASE("flip rate hand cases") {
  CHECK(flip_rate({1, 1, 1, 1}) == 0.0);                 // constant predictions
  CHECK(flip_rate({0, 1, 0, 1, 0}) == 1.0);              // alternating, length 5
  CHECK(flip_rate({2, 2, 3, 3}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(flip_rate({4}), DomainError);          // length < 2
}

TEST_CASE("flip rate is invariant to class relabeling") {
  const std::vector<int> preds = {0, 2, 2, 1, 0, 1};
  // permutation 0→5, 1→3, 2→9
  const std::vector<int> relabeled = {5, 9, 9, 3, 5, 3};
  CHECK(flip_rate(preds) == flip_rate(relabeled));
}

TEST_CASE("mean flip rate normalizes by the baseline") {
  std::map<PerturbationKind, double> model = {{PerturbationKind::Translate, 0.25},
                                              {PerturbationKind::Rotate, 0.5}};
  std::map<PerturbationKind, double> base = {{PerturbationKind::Translate, 0.5},
                                             {PerturbationKind::Rotate, 0.5}};
  const FlipScores s = mean_flip_rate(model, base);
  CHECK(s.fr.at(PerturbationKind::Translate) == 50.0);
  CHECK(s.fr.at(PerturbationKind::Rotate) == 100.0);
  CHECK(s.mfr == 75.0);

  // self comparison → 100
  const FlipScores self = mean_flip_rate(base, base);
  CHECK(self.mfr == 100.0);

  // zero-baseline kinds are excluded with a warning
  base[PerturbationKind::NoiseWalk] = 0.0;
  model[PerturbationKind::NoiseWalk] = 0.1;
  const FlipScores z = mean_flip_rate(model, base);
  CHECK(!z.fr.count(PerturbationKind::NoiseWalk));
  CHECK(!z.warnings.empty());
}
