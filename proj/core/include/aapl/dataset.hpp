#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aapl/rng.hpp"
#include "aapl/toy_image.hpp"

namespace aapl {

/// Per-class rendering parameters. Shape carries class identity; the color
/// profile is an attribute axis deliberately decoupled from it, so color
/// augmentations move images along an axis that does not determine the label.
struct AttributeProfile {
  int shape_kind = 0;   // index into the pattern bank
  double hue = 0.0;     // [0, 1)
  double fg_value = 0.9;
  double bg_value = 0.25;
};

struct ClassSpec {
  int class_id = 0;
  std::uint64_t class_uid = 0;  // globally unique across datasets
  ToyImage prototype;
  double intra_class_noise = 0.0;
  AttributeProfile attributes;
};

struct Sample {
  ToyImage image;
  int class_id = 0;
};

struct DatasetConfig {
  std::string name = "toy";
  int num_classes = 8;
  int samples_per_class = 40;
  double noise_sigma = 0.05;

  bool operator==(const DatasetConfig&) const = default;
};

struct Dataset {
  std::string name;
  std::uint64_t generator_seed = 0;
  DatasetConfig config;
  std::vector<ClassSpec> classes;
  std::vector<Sample> samples;

  const ClassSpec& class_spec(int class_id) const;
  std::vector<int> class_ids() const;
  /// Indices of all samples whose class is in `ids`.
  std::vector<std::size_t> samples_of(const std::vector<int>& ids) const;
};

struct SplitPlan {
  std::vector<int> base_class_ids;  // sorted
  std::vector<int> new_class_ids;   // sorted
  int shots = 16;
};

/// Few-shot training selection: indices into dataset.samples.
struct TrainingSet {
  std::vector<std::size_t> indices;
};

struct ShiftConfig {
  enum class Kind { brightness, contrast, noise };
  Kind kind = Kind::noise;
  double magnitude = 0.0;
};

ShiftConfig::Kind shift_kind_from_name(const std::string& name);
std::string shift_kind_name(ShiftConfig::Kind kind);

Dataset generate_dataset(const DatasetConfig& config, std::uint64_t seed);
SplitPlan split_base_new(const Dataset& dataset, std::uint64_t seed);
TrainingSet sample_few_shot(const Dataset& dataset, const SplitPlan& plan,
                            std::uint64_t seed);
/// All-classes variant used by the cross-dataset / domain-shift protocols.
TrainingSet sample_few_shot_all(const Dataset& dataset, int shots,
                                std::uint64_t seed);
/// Base-class samples not picked for training; the in-domain eval pool.
std::vector<std::size_t> held_out_indices(const Dataset& dataset,
                                          const std::vector<int>& class_ids,
                                          const TrainingSet& training);
Dataset generate_shifted_dataset(const Dataset& dataset,
                                 const ShiftConfig& shift, std::uint64_t seed);

std::string dataset_to_json(const Dataset& dataset);
Dataset dataset_from_json(const std::string& text);
/// FNV-1a over the canonical JSON form; checkpoint provenance key.
std::uint64_t dataset_fingerprint(const Dataset& dataset);

}  // namespace aapl
