// SPDX-License-Identifier: Apache-2.0
//
// Dataset ingestion (MNIST IDX, CIFAR-10 binary) and the synthetic
// covariance-discriminative task: zero-mean classes with equal-trace,
// unit-diagonal covariances that differ only in their correlation pattern,
// so first-order pooling has nothing to separate on while second-order
// pooling sees the class directly.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "covpool/mat.hpp"
#include "covpool/net.hpp"

namespace covpool {

struct Dataset {
  Tensor images;              // pixel domain [0,1]
  std::vector<int> labels;
  std::size_t classes = 0;
  // net input = (pixel − norm_mean) / norm_std, applied exactly once by the
  // training pipeline
  double norm_mean = 0.0;
  double norm_std = 1.0;
  std::string split;
  std::vector<std::size_t> per_class_count;

  std::size_t size() const { return labels.size(); }
};

struct SyntheticCovTaskSpec {
  std::size_t classes = 3;
  std::size_t channels = 4;     // d
  std::size_t height = 8;       // spatial N = height·width
  std::size_t width = 8;
  double rho = 0.8;             // correlation strength, in (0, 1)
  std::size_t train_per_class = 256;
  std::size_t test_per_class = 128;
  std::uint64_t seed = 1;
};

/// Class-c covariance: a fixed two-point spectrum {1+rho, 1−rho} rotated by
/// 45° in a class-specific perfect pairing of the channels (sign-flipped
/// rotations double the pattern count). Every class has unit diagonal and
/// trace d. Throws DomainError for degenerate requests (rho outside (0,1),
/// more classes than distinct patterns).
Mat class_covariance(const SyntheticCovTaskSpec& spec, std::size_t cls);

/// Deterministic (train, test) pair; rows are drawn zero-mean with the class
/// covariance and affinely mapped into pixel range [0,1] (mean 0.5, scale
/// 1/8, clipped beyond ±4), with the inverse map recorded in the dataset's
/// normalization constants.
std::pair<Dataset, Dataset> gen_cov_task(const SyntheticCovTaskSpec& spec);

/// MNIST IDX: big-endian, image magic 0x00000803, label magic 0x00000801,
/// pixels scaled to [0,1]. The label path may be empty (images only).
Dataset read_idx(const std::string& images_path, const std::string& labels_path = "");

/// CIFAR-10 binary: 3073-byte records (label byte + 3×32×32 channel-planar
/// pixels), pixels scaled to [0,1].
Dataset read_cifar10_bin(const std::string& path);

/// Versioned binary container for dataset caching (layout in README.md).
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

/// Gather a batch by dataset indices, applying normalization.
Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices);

}  // namespace covpool
