#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aapl/augmentation.hpp"
#include "aapl/dataset.hpp"
#include "aapl/encoders.hpp"
#include "aapl/losses.hpp"
#include "aapl/prompt.hpp"

namespace aapl {

/// The three named randomness axes. Everything stochastic in a run derives
/// from exactly one of them, so ablations can vary one axis at a time.
struct TrainSeeds {
  std::uint64_t data = 101;   // few-shot selection
  std::uint64_t init = 202;   // encoder, context, metanet init
  std::uint64_t order = 303;  // batch stream and augmentation draws
};

struct WrsSettings {
  bool enabled = false;
  double threshold = 0.05;
  /// Steps between weight refreshes; 0 means profile once before training
  /// and keep the table fixed for the whole run.
  int refresh_interval = 200;
  double boost_ratio = 3.0;
  int profile_points = 64;
};

struct TrainConfig {
  ModelMode mode = ModelMode::aapl;
  // Ablation switches.
  bool conventional_triplet = false;  // cluster classes instead of augmentations
  bool swap_anchors = false;
  bool stop_gradient_original = false;
  bool ce_on_augmented = false;  // cross-entropy sees the augmented view

  int steps = 2000;
  double learning_rate = 0.002;
  double momentum = 0.9;
  bool cosine_schedule = true;
  LossWeights loss{};  // alpha 0.2, beta 1.0, margin 0.2
  double tau = 0.07;
  int shots = 16;
  TrainSeeds seeds{};
  std::vector<AugmentationKind> augmentation_subset;  // empty = all 14
  WrsSettings wrs{};
  EncoderDims dims{};

  void validate() const;
};

/// One training batch: an image of each of two distinct classes plus a
/// distinct augmentation pair, which yields the four delta tokens. The first
/// image doubles as the cross-entropy example.
struct QuadBatch {
  std::size_t sample_1 = 0;
  std::size_t sample_2 = 0;
  int class_1 = 0;
  int class_2 = 0;
  AugmentationKind kind_a = AugmentationKind::random_crop;
  AugmentationKind kind_b = AugmentationKind::cutout;
  std::uint64_t seed_1a = 0, seed_1b = 0, seed_2a = 0, seed_2b = 0;
};

struct StepMetrics {
  int step = 0;
  double ce = 0.0;
  double adtriplet = 0.0;
  double total = 0.0;
  double lr = 0.0;
};

struct TrainState {
  int step = 0;
  LearnableContext context;
  MetaNet metanet;
  std::vector<Tensor> velocity;  // one buffer per parameter, same order
  AugWeightTable weights = AugWeightTable::uniform();
  std::vector<StepMetrics> history;

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  int parameter_count() const;
};

struct Checkpoint {
  static constexpr int kSchemaVersion = 1;

  TrainConfig config;
  DatasetConfig dataset_config;
  std::uint64_t dataset_seed = 0;
  std::uint64_t dataset_fingerprint = 0;
  SplitPlan plan;  // new_class_ids may be empty (all-classes training)
  EncoderWeights encoder;
  LearnableContext context;
  MetaNet metanet;
  AugWeightTable final_weights;
  std::vector<StepMetrics> metrics;
};

QuadBatch build_quad_batch(const Dataset& dataset, const TrainingSet& training,
                           const AugWeightTable& weights, std::uint64_t seed);

/// Runs one optimization step in place and returns its metrics.
/// `train_class_ids` fixes the cross-entropy label space; it must contain
/// both batch classes.
StepMetrics train_step(TrainState& state, const TrainConfig& config,
                       const Dataset& dataset, const EncoderWeights& encoder,
                       const QuadBatch& batch,
                       const std::vector<int>& train_class_ids);

Checkpoint train_loop(const TrainConfig& config, const Dataset& dataset,
                      const SplitPlan& plan);

std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const std::string& text);
std::string metrics_to_csv(std::span<const StepMetrics> metrics);

/// Cosine-annealed learning rate at a zero-based step.
double scheduled_lr(const TrainConfig& config, int step);

}  // namespace aapl
