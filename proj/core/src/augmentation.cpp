#include "aapl/augmentation.hpp"

#include <algorithm>
#include <cmath>

#include "aapl/error.hpp"
#include "aapl/rng.hpp"

namespace aapl {

const std::array<std::string, kAugmentationCount>& augmentation_names() {
  static const std::array<std::string, kAugmentationCount> names = {
      "random_crop",  "cutout",     "horizontal_flip", "vertical_flip",
      "rotate_90",    "rotate_180", "rotate_270",      "brightness",
      "contrast",     "saturation", "hue",             "grayscale",
      "gaussian_blur", "gaussian_noise"};
  return names;
}

std::string augmentation_name(AugmentationKind kind) {
  const int code = static_cast<int>(kind);
  if (code < 0 || code >= kAugmentationCount) {
    throw IndexError("invalid augmentation code " + std::to_string(code));
  }
  return augmentation_names()[static_cast<std::size_t>(code)];
}

AugmentationKind augmentation_from_name(const std::string& name) {
  const auto& names = augmentation_names();
  for (int i = 0; i < kAugmentationCount; ++i) {
    if (names[static_cast<std::size_t>(i)] == name) {
      return static_cast<AugmentationKind>(i);
    }
  }
  throw ConfigError("unknown augmentation '" + name + "'");
}

std::vector<AugmentationKind> all_augmentations() {
  std::vector<AugmentationKind> out;
  for (int i = 0; i < kAugmentationCount; ++i) {
    out.push_back(static_cast<AugmentationKind>(i));
  }
  return out;
}

std::vector<AugmentationKind> default_good_augmentations() {
  return {AugmentationKind::random_crop,   AugmentationKind::cutout,
          AugmentationKind::brightness,    AugmentationKind::contrast,
          AugmentationKind::grayscale,     AugmentationKind::gaussian_blur,
          AugmentationKind::gaussian_noise};
}

std::vector<AugmentationKind> default_bad_augmentations() {
  return {AugmentationKind::horizontal_flip, AugmentationKind::vertical_flip,
          AugmentationKind::rotate_90,       AugmentationKind::rotate_180,
          AugmentationKind::rotate_270,      AugmentationKind::saturation,
          AugmentationKind::hue};
}

AugWeightTable AugWeightTable::uniform() {
  AugWeightTable t;
  t.weights.fill(1.0);
  return t;
}

int AugWeightTable::positive_count() const {
  int n = 0;
  for (double w : weights) {
    if (w < 0.0) throw ConfigError("augmentation weights must be >= 0");
    if (w > 0.0) ++n;
  }
  return n;
}

void AugWeightTable::validate() const {
  if (positive_count() < 2) {
    throw ConfigError(
        "augmentation weight table needs >= 2 kinds with positive weight");
  }
}

// ---------------------------------------------------------------------------
// apply_augmentation
// ---------------------------------------------------------------------------

namespace {

ToyImage flip_h(const ToyImage& in) {
  ToyImage out;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) out.at(c, y, x) = in.at(c, y, 15 - x);
  return out;
}

ToyImage flip_v(const ToyImage& in) {
  ToyImage out;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) out.at(c, y, x) = in.at(c, 15 - y, x);
  return out;
}

// 90 degrees counterclockwise: out(y, x) = in(x, H-1-y).
ToyImage rot90(const ToyImage& in) {
  ToyImage out;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) out.at(c, y, x) = in.at(c, x, 15 - y);
  return out;
}

ToyImage crop_resize(const ToyImage& in, Rng& rng) {
  constexpr int kCrop = 12;
  const int oy = static_cast<int>(rng.below(16 - kCrop + 1));
  const int ox = static_cast<int>(rng.below(16 - kCrop + 1));
  ToyImage out;
  for (int y = 0; y < 16; ++y) {
    const int sy = oy + std::min(kCrop - 1, y * kCrop / 16);
    for (int x = 0; x < 16; ++x) {
      const int sx = ox + std::min(kCrop - 1, x * kCrop / 16);
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = in.at(c, sy, sx);
    }
  }
  return out;
}

ToyImage cutout(const ToyImage& in, Rng& rng) {
  constexpr int kHole = 6;
  const int oy = static_cast<int>(rng.below(16 - kHole + 1));
  const int ox = static_cast<int>(rng.below(16 - kHole + 1));
  ToyImage out = in;
  for (int y = oy; y < oy + kHole; ++y)
    for (int x = ox; x < ox + kHole; ++x)
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = 0.0;
  return out;
}

ToyImage color_brightness(const ToyImage& in, Rng& rng) {
  const double delta = rng.uniform(-0.3, 0.3);
  ToyImage out = in;
  for (double& p : out.pixels) p += delta;
  out.clip();
  return out;
}

ToyImage color_contrast(const ToyImage& in, Rng& rng) {
  const double factor = rng.uniform(0.5, 1.5);
  const double mean = in.mean();
  ToyImage out = in;
  for (double& p : out.pixels) p = mean + (p - mean) * factor;
  out.clip();
  return out;
}

ToyImage color_saturation(const ToyImage& in, Rng& rng) {
  const double factor = rng.uniform(0.0, 2.0);
  ToyImage out = in;
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const double l = in.luma(y, x);
      for (int c = 0; c < 3; ++c) {
        out.at(c, y, x) = l + (in.at(c, y, x) - l) * factor;
      }
    }
  }
  out.clip();
  return out;
}

// Rotation of the RGB cube around the gray axis.
ToyImage color_hue(const ToyImage& in, Rng& rng) {
  const double theta = rng.uniform(-1.0, 1.0) * (std::numbers::pi / 3.0);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  // Rodrigues rotation about the gray axis (1,1,1)/sqrt(3).
  const double a = 1.0 / 3.0;
  const double b = std::sqrt(1.0 / 3.0);
  double m[3][3];
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      m[i][j] = a * (1.0 - c) + (i == j ? c : 0.0);
    }
  }
  m[0][1] += -b * s; m[0][2] += b * s;
  m[1][0] += b * s;  m[1][2] += -b * s;
  m[2][0] += -b * s; m[2][1] += b * s;

  ToyImage out;
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      for (int i = 0; i < 3; ++i) {
        double v = 0.0;
        for (int j = 0; j < 3; ++j) v += m[i][j] * in.at(j, y, x);
        out.at(i, y, x) = v;
      }
    }
  }
  out.clip();
  return out;
}

ToyImage to_grayscale(const ToyImage& in) {
  ToyImage out;
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const double l = in.luma(y, x);
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = l;
    }
  }
  out.clip();
  return out;
}

ToyImage blur(const ToyImage& in, Rng& rng) {
  const double sigma = rng.uniform(0.5, 1.5);
  double k[3];
  k[0] = std::exp(-1.0 / (2.0 * sigma * sigma));
  k[1] = 1.0;
  k[2] = k[0];
  const double norm = k[0] + k[1] + k[2];
  for (double& v : k) v /= norm;

  const auto reflect = [](int i) { return i < 0 ? -i : (i > 15 ? 30 - i : i); };
  ToyImage tmp, out;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        double v = 0.0;
        for (int d = -1; d <= 1; ++d) v += k[d + 1] * in.at(c, y, reflect(x + d));
        tmp.at(c, y, x) = v;
      }
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        double v = 0.0;
        for (int d = -1; d <= 1; ++d) v += k[d + 1] * tmp.at(c, reflect(y + d), x);
        out.at(c, y, x) = v;
      }
  }
  out.clip();
  return out;
}

ToyImage noise(const ToyImage& in, Rng& rng) {
  const double sigma = rng.uniform(0.02, 0.1);
  ToyImage out = in;
  for (double& p : out.pixels) p += rng.gaussian(0.0, sigma);
  out.clip();
  return out;
}

}  // namespace

ToyImage apply_augmentation(AugmentationKind kind, const ToyImage& image,
                            std::uint64_t seed) {
  image.validate();
  Rng rng(derive_seed(seed, "aug", static_cast<std::uint64_t>(kind)));
  switch (kind) {
    case AugmentationKind::random_crop: return crop_resize(image, rng);
    case AugmentationKind::cutout: return cutout(image, rng);
    case AugmentationKind::horizontal_flip: return flip_h(image);
    case AugmentationKind::vertical_flip: return flip_v(image);
    case AugmentationKind::rotate_90: return rot90(image);
    case AugmentationKind::rotate_180: return rot90(rot90(image));
    case AugmentationKind::rotate_270: return rot90(rot90(rot90(image)));
    case AugmentationKind::brightness: return color_brightness(image, rng);
    case AugmentationKind::contrast: return color_contrast(image, rng);
    case AugmentationKind::saturation: return color_saturation(image, rng);
    case AugmentationKind::hue: return color_hue(image, rng);
    case AugmentationKind::grayscale: return to_grayscale(image);
    case AugmentationKind::gaussian_blur: return blur(image, rng);
    case AugmentationKind::gaussian_noise: return noise(image, rng);
  }
  throw IndexError("invalid augmentation code");
}

std::pair<AugmentationKind, AugmentationKind> sample_distinct_pair(
    const AugWeightTable& weights, std::uint64_t seed) {
  weights.validate();
  Rng rng(derive_seed(seed, "pair"));

  const auto draw = [&rng](const std::array<double, kAugmentationCount>& w) {
    double total = 0.0;
    for (double v : w) total += v;
    const double r = rng.uniform() * total;
    double cum = 0.0;
    int last_positive = -1;
    for (int i = 0; i < kAugmentationCount; ++i) {
      if (w[static_cast<std::size_t>(i)] <= 0.0) continue;
      last_positive = i;
      cum += w[static_cast<std::size_t>(i)];
      if (r < cum) return i;
    }
    return last_positive;  // guards the total==cum rounding edge
  };

  const int first = draw(weights.weights);
  auto remaining = weights.weights;
  remaining[static_cast<std::size_t>(first)] = 0.0;
  const int second = draw(remaining);
  return {static_cast<AugmentationKind>(first),
          static_cast<AugmentationKind>(second)};
}

AugWeightTable restrict_bank(const std::vector<AugmentationKind>& kinds) {
  if (kinds.size() < 2) {
    throw ConfigError("restrict_bank: need at least 2 kinds, got " +
                      std::to_string(kinds.size()));
  }
  AugWeightTable t;
  t.weights.fill(0.0);
  for (AugmentationKind k : kinds) {
    t.weights[static_cast<std::size_t>(k)] = 1.0;
  }
  t.validate();
  return t;
}

AugWeightTable update_weights_from_silhouette(
    const std::map<AugmentationKind, double>& per_kind_scores, double threshold,
    double boost_ratio) {
  if (!(threshold >= -1.0 && threshold <= 1.0)) {
    throw ConfigError("silhouette threshold must be in [-1, 1]");
  }
  if (!(boost_ratio > 1.0)) {
    throw ConfigError("boost ratio must exceed 1");
  }
  for (const auto& [kind, score] : per_kind_scores) {
    if (!std::isfinite(score)) {
      throw ConfigError("silhouette score for " + augmentation_name(kind) +
                        " is not finite");
    }
  }
  AugWeightTable t;
  t.weights.fill(1.0);
  for (const auto& [kind, score] : per_kind_scores) {
    if (score < threshold) {
      t.weights[static_cast<std::size_t>(kind)] = boost_ratio;
    }
  }
  return t;
}

}  // namespace aapl
