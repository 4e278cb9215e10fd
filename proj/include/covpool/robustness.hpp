// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale corruption and perturbation generators plus the corruption-error
// and flip-rate metrics, normalized against a baseline model (which scores
// 100 by convention).
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "covpool/data.hpp"
#include "covpool/net.hpp"

namespace covpool {

enum class CorruptionKind { GaussianNoise, BoxBlur, Brightness, Contrast };

const char* corruption_name(CorruptionKind k);
std::vector<CorruptionKind> all_corruptions();

struct CorruptionSpec {
  CorruptionKind kind;
  int severity = 1;  // 1..5
};

/// Severity parameter tables (documented constants, pinned by tests):
///   gaussian-noise sigma   {0.04, 0.08, 0.12, 0.18, 0.26}
///   box-blur kernel size   {3, 5, 7, 9, 11} (edge-replicated)
///   brightness offset      {0.1, 0.2, 0.3, 0.4, 0.5}
///   contrast factor        {0.8, 0.65, 0.5, 0.35, 0.2} around 0.5
double corruption_parameter(CorruptionKind kind, int severity);

/// Deterministic given (images, spec, seed); output clipped to [0,1].
/// Pixel values must already be in [0,1].
Tensor corrupt(const Tensor& images, const CorruptionSpec& spec, std::uint64_t seed);

enum class PerturbationKind { Translate, Rotate, NoiseWalk };

const char* perturbation_name(PerturbationKind k);
std::vector<PerturbationKind> all_perturbations();

/// Frame 0 is the unperturbed image; frame t applies t units of the
/// perturbation (t pixels of rightward shift with edge replication, t·2° of
/// rotation, or t accumulated seeded noise steps of std 0.02).
std::vector<Tensor> perturb_sequence(const Tensor& image, PerturbationKind kind,
                                     std::size_t length, std::uint64_t seed);

// -- metrics -------------------------------------------------------------------

/// Error-rate table over (corruption, severity) cells plus the clean error.
struct ErrorTable {
  double clean_err = 0.0;
  std::map<std::pair<CorruptionKind, int>, double> err;
};

struct CorruptionScores {
  std::map<CorruptionKind, double> ce;           // ×100
  std::map<CorruptionKind, double> relative_ce;  // ×100
  double mce = 0.0;
  double relative_mce = 0.0;
  std::vector<std::string> warnings;  // excluded zero-denominator cells
};

/// CE_c = 100·Σ_s E_{c,s} / Σ_s E^base_{c,s};
/// relative CE_c = 100·Σ_s (E_{c,s} − E_clean) / Σ_s (E^base_{c,s} − E^base_clean);
/// mCE / relative mCE = mean over corruptions. Zero-denominator corruptions
/// are excluded with a warning.
CorruptionScores corruption_error(const ErrorTable& model, const ErrorTable& baseline);

/// FP = (#consecutive-frame prediction changes)/(length−1). Throws DomainError
/// for sequences shorter than 2.
double flip_rate(const std::vector<int>& predictions);

struct FlipScores {
  std::map<PerturbationKind, double> fr;  // 100·FP_model/FP_base per kind
  double mfr = 0.0;
  std::vector<std::string> warnings;
};

FlipScores mean_flip_rate(const std::map<PerturbationKind, double>& model_fp,
                          const std::map<PerturbationKind, double>& baseline_fp);

// -- evaluation harness ---------------------------------------------------------

struct RobustnessReport {
  double model_clean_err = 0.0;
  double baseline_clean_err = 0.0;
  ErrorTable model_errors;
  ErrorTable baseline_errors;
  CorruptionScores corruption;
  std::map<PerturbationKind, double> model_fp;
  std::map<PerturbationKind, double> baseline_fp;
  FlipScores flips;

  std::string to_json() const;
  /// CSV summary: corruption,severity,err_model,err_baseline
  std::string to_csv() const;
};

/// Run both models over every (corruption, severity) cell and perturbation
/// sequence of the dataset's test images. Deterministic given the seed.
RobustnessReport evaluate_robustness(const Network& model, const Network& baseline,
                                     const Dataset& test, std::size_t batch,
                                     std::uint64_t seed, std::size_t sequences_per_kind = 16,
                                     std::size_t sequence_length = 31);

}  // namespace covpool
