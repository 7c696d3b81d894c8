#include "aapl/toy_image.hpp"

#include <algorithm>
#include <string>

namespace aapl {

void ToyImage::clip() {
  for (double& p : pixels) p = std::clamp(p, 0.0, 1.0);
}

double ToyImage::mean() const {
  double s = 0.0;
  for (double p : pixels) s += p;
  return s / kPixels;
}

double ToyImage::luma(int y, int x) const {
  return 0.299 * at(0, y, x) + 0.587 * at(1, y, x) + 0.114 * at(2, y, x);
}

void ToyImage::validate() const {
  if (static_cast<int>(pixels.size()) != kPixels) {
    throw ContractError("ToyImage: pixel buffer has " +
                        std::to_string(pixels.size()) + " entries");
  }
  for (double p : pixels) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ContractError("ToyImage: pixel outside [0, 1]");
    }
  }
}

}  // namespace aapl
