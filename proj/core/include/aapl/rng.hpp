#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace aapl {

/// Deterministic random stream. std::mt19937_64 is bit-exact across platforms;
/// the floating-point draws are constructed by hand (not via std distributions,
/// whose output is implementation-defined) so that every consumer of a seed is
/// reproducible down to the bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller with a cached spare.
  double gaussian();

  double gaussian(double mu, double sigma) { return mu + sigma * gaussian(); }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent child seed from (base, tag, index). Used to split a
/// named experiment seed into per-purpose streams without correlation.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::uint64_t index = 0);

}  // namespace aapl
