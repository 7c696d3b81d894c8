#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "aapl/toy_image.hpp"

namespace aapl {

/// The fixed 14-way augmentation bank. Codes are stable contract values; the
/// names below are the spelling used in configs and reports.
enum class AugmentationKind : int {
  random_crop = 0,
  cutout = 1,
  horizontal_flip = 2,
  vertical_flip = 3,
  rotate_90 = 4,
  rotate_180 = 5,
  rotate_270 = 6,
  brightness = 7,
  contrast = 8,
  saturation = 9,
  hue = 10,
  grayscale = 11,
  gaussian_blur = 12,
  gaussian_noise = 13,
};

constexpr int kAugmentationCount = 14;

const std::array<std::string, kAugmentationCount>& augmentation_names();
std::string augmentation_name(AugmentationKind kind);
AugmentationKind augmentation_from_name(const std::string& name);
std::vector<AugmentationKind> all_augmentations();

/// Default profiling split: kinds whose delta tokens tend to separate well
/// versus the confusable flip/rotation and color-jitter families. A config
/// default, not ground truth.
std::vector<AugmentationKind> default_good_augmentations();
std::vector<AugmentationKind> default_bad_augmentations();

/// Sampling weights over the bank. Normalized at sampling time.
struct AugWeightTable {
  std::array<double, kAugmentationCount> weights{};

  static AugWeightTable uniform();
  double weight(AugmentationKind kind) const {
    return weights[static_cast<std::size_t>(kind)];
  }
  int positive_count() const;
  /// ConfigError unless >= 2 kinds have positive weight (pair sampling).
  void validate() const;
};

/// Applies one augmentation. Deterministic in (kind, image, seed); geometric
/// kinds ignore the seed. Output stays in [0,1] with unchanged dimensions.
ToyImage apply_augmentation(AugmentationKind kind, const ToyImage& image,
                            std::uint64_t seed);

std::pair<AugmentationKind, AugmentationKind> sample_distinct_pair(
    const AugWeightTable& weights, std::uint64_t seed);

AugWeightTable restrict_bank(const std::vector<AugmentationKind>& kinds);

/// Kinds scoring below `threshold` get `boost_ratio` times the weight of the
/// rest, steering sampling toward augmentations the model separates poorly.
AugWeightTable update_weights_from_silhouette(
    const std::map<AugmentationKind, double>& per_kind_scores, double threshold,
    double boost_ratio = 3.0);

}  // namespace aapl
