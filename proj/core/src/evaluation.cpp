#include "aapl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "aapl/error.hpp"
#include "aapl/rng.hpp"

namespace aapl {

double harmonic_mean(double base_acc, double new_acc) {
  if (!(std::isfinite(base_acc) && std::isfinite(new_acc))) {
    throw DegenerateInputError("harmonic_mean: non-finite input");
  }
  if (base_acc + new_acc <= 0.0) {
    throw DegenerateInputError("harmonic_mean: inputs must be positive");
  }
  return 2.0 * base_acc * new_acc / (base_acc + new_acc);
}

double accuracy(const Checkpoint& checkpoint, const Dataset& dataset,
                const std::vector<std::size_t>& sample_indices,
                const std::vector<int>& class_ids) {
  if (sample_indices.empty()) {
    throw ConfigError("accuracy: empty evaluation set");
  }
  if (class_ids.empty()) {
    throw ConfigError("accuracy: no classes to rank");
  }
  std::vector<int> ids = class_ids;
  std::sort(ids.begin(), ids.end());

  EncoderWeights encoder = checkpoint.encoder;  // working copy, source untouched
  encoder.register_dataset(dataset);
  std::vector<std::uint64_t> uids;
  uids.reserve(ids.size());
  for (int cid : ids) uids.push_back(dataset.class_spec(cid).class_uid);

  int correct = 0;
  for (std::size_t idx : sample_indices) {
    const Sample& sample = dataset.samples[idx];
    const std::vector<double> probs = predict_proba(
        checkpoint.config.mode, checkpoint.context, checkpoint.metanet,
        encoder, sample.image, uids, checkpoint.config.tau);
    // Strict > keeps the first (lowest class id) among exact ties.
    std::size_t best = 0;
    for (std::size_t k = 1; k < probs.size(); ++k) {
      if (probs[k] > probs[best]) best = k;
    }
    if (ids[best] == sample.class_id) ++correct;
  }
  return static_cast<double>(correct) /
         static_cast<double>(sample_indices.size());
}

namespace {

std::string config_fingerprint_of(const Checkpoint& ck) {
  // Enough to re-run the training that produced this checkpoint.
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s|seeds=%llu/%llu/%llu|ds=%llu",
                model_mode_name(ck.config.mode).c_str(),
                static_cast<unsigned long long>(ck.config.seeds.data),
                static_cast<unsigned long long>(ck.config.seeds.init),
                static_cast<unsigned long long>(ck.config.seeds.order),
                static_cast<unsigned long long>(ck.dataset_fingerprint));
  return buf;
}

/// Samples to score on `dataset`: the held-out part when the checkpoint was
/// trained on this very dataset, otherwise everything.
std::vector<std::size_t> eval_pool(const Checkpoint& ck, const Dataset& dataset,
                                   const std::vector<int>& class_ids) {
  if (dataset_fingerprint(dataset) == ck.dataset_fingerprint) {
    SplitPlan plan = ck.plan;
    plan.shots = ck.config.shots;
    const TrainingSet training =
        sample_few_shot(dataset, plan, ck.config.seeds.data);
    return held_out_indices(dataset, class_ids, training);
  }
  return dataset.samples_of(class_ids);
}

}  // namespace

EvalReport evaluate_base_to_new(const Checkpoint& checkpoint,
                                const Dataset& dataset) {
  if (checkpoint.plan.new_class_ids.empty()) {
    throw ConfigError(
        "evaluate_base_to_new: checkpoint was not trained on a base/new split");
  }
  EvalReport report;
  report.protocol = "base-to-new";
  report.seeds = {checkpoint.config.seeds.data, checkpoint.config.seeds.init,
                  checkpoint.config.seeds.order};
  report.config_fingerprint = config_fingerprint_of(checkpoint);

  const std::vector<std::size_t> base_pool =
      eval_pool(checkpoint, dataset, checkpoint.plan.base_class_ids);
  const std::vector<std::size_t> new_pool =
      dataset.samples_of(checkpoint.plan.new_class_ids);

  report.base_accuracy =
      accuracy(checkpoint, dataset, base_pool, checkpoint.plan.base_class_ids);
  report.new_accuracy =
      accuracy(checkpoint, dataset, new_pool, checkpoint.plan.new_class_ids);
  report.harmonic = harmonic_mean(report.base_accuracy, report.new_accuracy);
  report.base_new_rows.push_back({dataset.name, report.base_accuracy,
                                  report.new_accuracy, report.harmonic});
  return report;
}

EvalReport evaluate_cross_dataset(const Checkpoint& checkpoint,
                                  const Dataset& source,
                                  const std::vector<Dataset>& targets) {
  EvalReport report;
  report.protocol = "cross-dataset";
  report.seeds = {checkpoint.config.seeds.data, checkpoint.config.seeds.init,
                  checkpoint.config.seeds.order};
  report.config_fingerprint = config_fingerprint_of(checkpoint);

  const std::vector<int> source_ids = checkpoint.plan.base_class_ids;
  report.target_rows.push_back(
      {source.name,
       accuracy(checkpoint, source, eval_pool(checkpoint, source, source_ids),
                source_ids)});

  double sum = 0.0;
  for (const Dataset& target : targets) {
    const std::vector<int> ids = target.class_ids();
    const double acc =
        accuracy(checkpoint, target, eval_pool(checkpoint, target, ids), ids);
    report.target_rows.push_back({target.name, acc});
    sum += acc;
  }
  if (!targets.empty()) {
    report.target_rows.push_back(
        {"average", sum / static_cast<double>(targets.size())});
  }
  return report;
}

EvalReport evaluate_domain_shift(const Checkpoint& checkpoint,
                                 const Dataset& source,
                                 const std::vector<ShiftConfig>& shifts,
                                 std::uint64_t shift_seed) {
  EvalReport report;
  report.protocol = "domain-shift";
  report.seeds = {checkpoint.config.seeds.data, checkpoint.config.seeds.init,
                  checkpoint.config.seeds.order};
  report.config_fingerprint = config_fingerprint_of(checkpoint);

  const std::vector<int> ids = checkpoint.plan.base_class_ids;
  const std::vector<std::size_t> pool = eval_pool(checkpoint, source, ids);
  report.target_rows.push_back(
      {source.name, accuracy(checkpoint, source, pool, ids)});

  double sum = 0.0;
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    const Dataset shifted = generate_shifted_dataset(
        source, shifts[i], derive_seed(shift_seed, "shift", i));
    // Same sample indices: the shifted dataset preserves sample order.
    const double acc = accuracy(checkpoint, shifted, pool, ids);
    char name[96];
    std::snprintf(name, sizeof(name), "%s(%g)",
                  shift_kind_name(shifts[i].kind).c_str(),
                  shifts[i].magnitude);
    report.target_rows.push_back({name, acc});
    sum += acc;
  }
  if (!shifts.empty()) {
    report.target_rows.push_back(
        {"average", sum / static_cast<double>(shifts.size())});
  }
  return report;
}

EvalReport base_to_new_protocol(const TrainConfig& config,
                                const Dataset& dataset, const SplitPlan& plan) {
  if (plan.base_class_ids.empty() || plan.new_class_ids.empty()) {
    throw ConfigError("base_to_new_protocol: plan needs base and new classes");
  }
  for (int b : plan.base_class_ids) {
    for (int n : plan.new_class_ids) {
      if (b == n) {
        throw ConfigError("base_to_new_protocol: base/new sets overlap");
      }
    }
  }
  const Checkpoint ck = train_loop(config, dataset, plan);
  return evaluate_base_to_new(ck, dataset);
}

EvalReport cross_dataset_protocol(const TrainConfig& config,
                                  const Dataset& source,
                                  const std::vector<Dataset>& targets) {
  SplitPlan plan;
  plan.base_class_ids = source.class_ids();
  plan.shots = config.shots;
  const Checkpoint ck = train_loop(config, source, plan);
  return evaluate_cross_dataset(ck, source, targets);
}

EvalReport domain_shift_protocol(const TrainConfig& config,
                                 const Dataset& source,
                                 const std::vector<ShiftConfig>& shifts,
                                 std::uint64_t shift_seed) {
  SplitPlan plan;
  plan.base_class_ids = source.class_ids();
  plan.shots = config.shots;
  const Checkpoint ck = train_loop(config, source, plan);
  return evaluate_domain_shift(ck, source, shifts, shift_seed);
}

ProfileResult augmentation_profile(const Checkpoint& checkpoint,
                                   const Dataset& dataset, int n_points,
                                   std::uint64_t seed) {
  if (n_points < 2) {
    throw ConfigError("augmentation_profile: need at least 2 points");
  }
  SplitPlan plan = checkpoint.plan;
  plan.shots = checkpoint.config.shots;
  std::vector<std::size_t> pool;
  if (dataset_fingerprint(dataset) == checkpoint.dataset_fingerprint) {
    const TrainingSet training =
        sample_few_shot(dataset, plan, checkpoint.config.seeds.data);
    pool = held_out_indices(dataset, plan.base_class_ids, training);
  } else {
    pool = dataset.samples_of(dataset.class_ids());
  }
  if (pool.empty()) {
    throw ConfigError("augmentation_profile: empty validation pool");
  }

  const std::vector<AugmentationKind> active =
      checkpoint.config.augmentation_subset.empty()
          ? all_augmentations()
          : checkpoint.config.augmentation_subset;

  EncoderWeights encoder = checkpoint.encoder;
  encoder.register_dataset(dataset);

  TapeSuspend no_tape;
  Rng rng(derive_seed(seed, "profile"));
  ProfileResult result;
  result.meta_cloud.token_type = TokenCloud::TokenType::meta;
  result.delta_cloud.token_type = TokenCloud::TokenType::delta;
  for (int i = 0; i < n_points; ++i) {
    const std::size_t idx =
        pool[static_cast<std::size_t>(rng.below(pool.size()))];
    const AugmentationKind kind =
        active[static_cast<std::size_t>(rng.below(active.size()))];
    const Sample& sample = dataset.samples[idx];
    const std::uint64_t aug_seed = rng.next_u64();

    const Tensor f_orig = encoder.encode_image(sample.image);
    const Tensor pi = meta_token(checkpoint.metanet, f_orig).value;
    const DeltaMetaToken delta =
        delta_meta_token(checkpoint.metanet, encoder, sample.image,
                         sample.class_id, kind, aug_seed);
    result.meta_cloud.points.push_back({pi.data(), kind, sample.class_id});
    result.delta_cloud.points.push_back(
        {delta.value.data(), kind, sample.class_id});
  }

  result.meta_per_kind = per_kind_silhouettes(result.meta_cloud);
  result.delta_per_kind = per_kind_silhouettes(result.delta_cloud);
  result.meta_mean =
      silhouette_score(result.meta_cloud, ClusterLabel::by_augmentation).mean;
  result.delta_mean =
      silhouette_score(result.delta_cloud, ClusterLabel::by_augmentation).mean;
  result.meta_projection = pca_project_2d(result.meta_cloud);
  result.delta_projection = pca_project_2d(result.delta_cloud);
  return result;
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["schema_version"] = EvalReport::kSchemaVersion;
  j["protocol"] = report.protocol;
  nlohmann::json bn = nlohmann::json::array();
  for (const BaseNewRow& r : report.base_new_rows) {
    bn.push_back({{"dataset", r.dataset},
                  {"base", r.base},
                  {"new", r.novel},
                  {"hm", r.hm}});
  }
  j["base_new_rows"] = std::move(bn);
  nlohmann::json tr = nlohmann::json::array();
  for (const TargetRow& r : report.target_rows) {
    tr.push_back({{"name", r.name}, {"accuracy", r.accuracy}});
  }
  j["target_rows"] = std::move(tr);
  j["base_accuracy"] = report.base_accuracy;
  j["new_accuracy"] = report.new_accuracy;
  j["harmonic_mean"] = report.harmonic;
  j["meta_silhouettes"] = report.meta_silhouettes;
  j["delta_silhouettes"] = report.delta_silhouettes;
  j["meta_mean_silhouette"] = report.meta_mean_silhouette;
  j["delta_mean_silhouette"] = report.delta_mean_silhouette;
  j["seeds"] = report.seeds;
  j["config_fingerprint"] = report.config_fingerprint;
  return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(std::string("report parse failed: ") + e.what());
  }
  if (!j.contains("schema_version") ||
      j["schema_version"].get<int>() != EvalReport::kSchemaVersion) {
    throw VersionError("report: unsupported schema version");
  }
  EvalReport report;
  report.protocol = j.at("protocol").get<std::string>();
  for (const auto& r : j.at("base_new_rows")) {
    report.base_new_rows.push_back(
        {r.at("dataset").get<std::string>(), r.at("base").get<double>(),
         r.at("new").get<double>(), r.at("hm").get<double>()});
  }
  for (const auto& r : j.at("target_rows")) {
    report.target_rows.push_back(
        {r.at("name").get<std::string>(), r.at("accuracy").get<double>()});
  }
  report.base_accuracy = j.at("base_accuracy").get<double>();
  report.new_accuracy = j.at("new_accuracy").get<double>();
  report.harmonic = j.at("harmonic_mean").get<double>();
  report.meta_silhouettes =
      j.at("meta_silhouettes").get<std::map<std::string, double>>();
  report.delta_silhouettes =
      j.at("delta_silhouettes").get<std::map<std::string, double>>();
  report.meta_mean_silhouette = j.at("meta_mean_silhouette").get<double>();
  report.delta_mean_silhouette = j.at("delta_mean_silhouette").get<double>();
  report.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  report.config_fingerprint = j.at("config_fingerprint").get<std::string>();
  return report;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::string> export_report(const EvalReport& report,
                                       const std::string& directory) {
  const std::filesystem::path dir(directory);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + directory);

  std::vector<std::string> written;
  write_file(dir / "report.json", report_to_json(report));
  written.push_back("report.json");

  if (!report.base_new_rows.empty()) {
    std::string csv = "dataset,base,new,hm\n";
    for (const BaseNewRow& r : report.base_new_rows) {
      csv += r.dataset + "," + format_double(r.base) + "," +
             format_double(r.novel) + "," + format_double(r.hm) + "\n";
    }
    write_file(dir / "report_base_to_new.csv", csv);
    written.push_back("report_base_to_new.csv");
  }
  if (!report.target_rows.empty()) {
    std::string csv = "target,accuracy\n";
    for (const TargetRow& r : report.target_rows) {
      csv += r.name + "," + format_double(r.accuracy) + "\n";
    }
    write_file(dir / "report_targets.csv", csv);
    written.push_back("report_targets.csv");
  }
  return written;
}

std::string projection_to_csv(const std::vector<ProjectedPoint>& points,
                              const std::string& token_type) {
  std::string csv = "x,y,kind,class,token_type\n";
  for (const ProjectedPoint& p : points) {
    csv += format_double(p.x) + "," + format_double(p.y) + "," +
           augmentation_name(p.kind) + "," + std::to_string(p.class_id) + "," +
           token_type + "\n";
  }
  return csv;
}

std::string silhouette_table_csv(
    const std::map<AugmentationKind, double>& meta,
    const std::map<AugmentationKind, double>& delta) {
  std::string csv = "kind,meta_silhouette,delta_silhouette\n";
  for (const auto& [kind, meta_score] : meta) {
    const auto it = delta.find(kind);
    csv += augmentation_name(kind) + "," + format_double(meta_score) + "," +
           format_double(it == delta.end() ? 0.0 : it->second) + "\n";
  }
  return csv;
}

// ---------------------------------------------------------------------------
// Seeded ensembles
// ---------------------------------------------------------------------------

namespace {

int replica_thread_cap() {
  const char* env = std::getenv("AAPL_LAB_THREADS");
  if (!env) return 1;
  const int v = std::atoi(env);
  return v < 1 ? 1 : v;
}

}  // namespace

EnsembleResult run_seeded_ensemble(const TrainConfig& config,
                                   const Dataset& dataset,
                                   const SplitPlan& plan, int n_seeds) {
  if (n_seeds < 1) {
    throw ConfigError("run_seeded_ensemble: n_seeds must be >= 1");
  }
  std::vector<TrainConfig> configs(static_cast<std::size_t>(n_seeds), config);
  for (int i = 1; i < n_seeds; ++i) {
    TrainConfig& c = configs[static_cast<std::size_t>(i)];
    const auto u = static_cast<std::uint64_t>(i);
    c.seeds.data = derive_seed(config.seeds.data, "ensemble_data", u);
    c.seeds.init = derive_seed(config.seeds.init, "ensemble_init", u);
    c.seeds.order = derive_seed(config.seeds.order, "ensemble_order", u);
  }

  EnsembleResult result;
  result.runs.resize(static_cast<std::size_t>(n_seeds));
  const int threads = std::min(replica_thread_cap(), n_seeds);
  if (threads <= 1) {
    for (int i = 0; i < n_seeds; ++i) {
      result.runs[static_cast<std::size_t>(i)] = base_to_new_protocol(
          configs[static_cast<std::size_t>(i)], dataset, plan);
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&]() {
        for (int i = next.fetch_add(1); i < n_seeds; i = next.fetch_add(1)) {
          try {
            result.runs[static_cast<std::size_t>(i)] = base_to_new_protocol(
                configs[static_cast<std::size_t>(i)], dataset, plan);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            return;
          }
        }
      });
    }
    for (std::thread& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  const auto stats = [n_seeds](auto getter, const EnsembleResult& r) {
    double mean = 0.0;
    for (const EvalReport& run : r.runs) mean += getter(run);
    mean /= n_seeds;
    double var = 0.0;
    for (const EvalReport& run : r.runs) {
      const double d = getter(run) - mean;
      var += d * d;
    }
    const double dev = n_seeds > 1 ? std::sqrt(var / (n_seeds - 1)) : 0.0;
    return std::pair<double, double>(mean, dev);
  };
  std::tie(result.mean_base, result.std_base) =
      stats([](const EvalReport& r) { return r.base_accuracy; }, result);
  std::tie(result.mean_new, result.std_new) =
      stats([](const EvalReport& r) { return r.new_accuracy; }, result);
  std::tie(result.mean_hm, result.std_hm) =
      stats([](const EvalReport& r) { return r.harmonic; }, result);
  return result;
}

}  // namespace aapl
