#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "aapl/silhouette.hpp"
#include "aapl/training.hpp"

namespace aapl {

struct BaseNewRow {
  std::string dataset;
  double base = 0.0;
  double novel = 0.0;
  double hm = 0.0;

  bool operator==(const BaseNewRow&) const = default;
};

struct TargetRow {
  std::string name;
  double accuracy = 0.0;

  bool operator==(const TargetRow&) const = default;
};

/// Protocol result document. Accuracies are fractions in [0, 1].
struct EvalReport {
  static constexpr int kSchemaVersion = 1;

  std::string protocol;
  std::vector<BaseNewRow> base_new_rows;
  std::vector<TargetRow> target_rows;  // source + targets + trailing average
  double base_accuracy = 0.0;
  double new_accuracy = 0.0;
  double harmonic = 0.0;
  std::map<std::string, double> meta_silhouettes;   // per augmentation name
  std::map<std::string, double> delta_silhouettes;
  double meta_mean_silhouette = 0.0;
  double delta_mean_silhouette = 0.0;
  std::vector<std::uint64_t> seeds;
  std::string config_fingerprint;

  bool operator==(const EvalReport&) const = default;
};

/// 2ab / (a + b). Both inputs must be positive on a consistent scale.
double harmonic_mean(double base_acc, double new_acc);

/// Fraction of correctly argmax-classified samples among `sample_indices`,
/// with the label space restricted to `class_ids` (ascending; ties resolve
/// to the lowest class id).
double accuracy(const Checkpoint& checkpoint, const Dataset& dataset,
                const std::vector<std::size_t>& sample_indices,
                const std::vector<int>& class_ids);

// Evaluation of an existing checkpoint -------------------------------------

EvalReport evaluate_base_to_new(const Checkpoint& checkpoint,
                                const Dataset& dataset);
EvalReport evaluate_cross_dataset(const Checkpoint& checkpoint,
                                  const Dataset& source,
                                  const std::vector<Dataset>& targets);
EvalReport evaluate_domain_shift(const Checkpoint& checkpoint,
                                 const Dataset& source,
                                 const std::vector<ShiftConfig>& shifts,
                                 std::uint64_t shift_seed);

// Full protocols: train + evaluate -----------------------------------------

EvalReport base_to_new_protocol(const TrainConfig& config,
                                const Dataset& dataset, const SplitPlan& plan);
EvalReport cross_dataset_protocol(const TrainConfig& config,
                                  const Dataset& source,
                                  const std::vector<Dataset>& targets);
EvalReport domain_shift_protocol(const TrainConfig& config,
                                 const Dataset& source,
                                 const std::vector<ShiftConfig>& shifts,
                                 std::uint64_t shift_seed);

// Token profiling -----------------------------------------------------------

struct ProfileResult {
  TokenCloud meta_cloud;
  TokenCloud delta_cloud;
  std::map<AugmentationKind, double> meta_per_kind;
  std::map<AugmentationKind, double> delta_per_kind;
  double meta_mean = 0.0;
  double delta_mean = 0.0;
  std::vector<ProjectedPoint> meta_projection;
  std::vector<ProjectedPoint> delta_projection;
};

/// Samples n_points validation images, draws one augmentation per image, and
/// scores the resulting meta / delta token clouds by augmentation kind.
ProfileResult augmentation_profile(const Checkpoint& checkpoint,
                                   const Dataset& dataset, int n_points,
                                   std::uint64_t seed);

// Report files ---------------------------------------------------------------

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
/// Writes report.json plus one CSV per populated table into `directory`.
/// Returns the file names written.
std::vector<std::string> export_report(const EvalReport& report,
                                       const std::string& directory);

std::string projection_to_csv(const std::vector<ProjectedPoint>& points,
                              const std::string& token_type);
std::string silhouette_table_csv(
    const std::map<AugmentationKind, double>& meta,
    const std::map<AugmentationKind, double>& delta);

// Seeded ensembles ------------------------------------------------------------

struct EnsembleResult {
  std::vector<EvalReport> runs;  // ordered by replicate index
  double mean_base = 0.0, std_base = 0.0;
  double mean_new = 0.0, std_new = 0.0;
  double mean_hm = 0.0, std_hm = 0.0;
};

/// Runs base-to-new end to end once per seed replicate. Replicate 0 uses the
/// config seeds verbatim; replicate i derives all three seeds from them.
/// AAPL_LAB_THREADS caps replica parallelism (default 1).
EnsembleResult run_seeded_ensemble(const TrainConfig& config,
                                   const Dataset& dataset,
                                   const SplitPlan& plan, int n_seeds);

}  // namespace aapl
