#pragma once

#include <vector>

#include "aapl/error.hpp"

namespace aapl {

/// 3x16x16 image with pixel values in [0, 1], stored channel-major.
struct ToyImage {
  static constexpr int kChannels = 3;
  static constexpr int kHeight = 16;
  static constexpr int kWidth = 16;
  static constexpr int kPixels = kChannels * kHeight * kWidth;

  std::vector<double> pixels;

  ToyImage() : pixels(kPixels, 0.0) {}

  double at(int c, int y, int x) const {
    return pixels[(static_cast<std::size_t>(c) * kHeight + y) * kWidth + x];
  }
  double& at(int c, int y, int x) {
    return pixels[(static_cast<std::size_t>(c) * kHeight + y) * kWidth + x];
  }

  void clip();
  double mean() const;
  /// Rec.601 luma of pixel (y, x).
  double luma(int y, int x) const;
  /// ContractError when a pixel is outside [0, 1] or the buffer is misshapen.
  void validate() const;

  bool operator==(const ToyImage&) const = default;
};

}  // namespace aapl
