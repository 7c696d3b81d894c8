#include "aapl/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <set>

#include <json.hpp>

#include "aapl/error.hpp"
#include "aapl/rng.hpp"
#include "aapl/silhouette.hpp"

namespace aapl {

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("train config: steps must be >= 1");
  if (!(learning_rate > 0.0)) {
    throw ConfigError("train config: learning_rate must be positive");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ConfigError("train config: momentum must be in [0, 1)");
  }
  if (!(tau > 0.0)) throw ConfigError("train config: tau must be positive");
  if (shots < 1) throw ConfigError("train config: shots must be >= 1");
  loss.validate();
  if (!augmentation_subset.empty() && augmentation_subset.size() < 2) {
    throw ConfigError("train config: augmentation subset needs >= 2 kinds");
  }
  if (wrs.enabled) {
    if (wrs.refresh_interval < 0) {
      throw ConfigError("train config: wrs refresh_interval must be >= 0");
    }
    if (!(wrs.boost_ratio > 1.0)) {
      throw ConfigError("train config: wrs boost_ratio must exceed 1");
    }
    if (wrs.profile_points < kAugmentationCount) {
      throw ConfigError("train config: wrs profile_points too small");
    }
  }
}

std::vector<Tensor*> TrainState::parameters() {
  std::vector<Tensor*> out;
  for (Tensor& t : context.tokens) out.push_back(&t);
  for (Tensor* t : metanet.parameters()) out.push_back(t);
  return out;
}

std::vector<const Tensor*> TrainState::parameters() const {
  std::vector<const Tensor*> out;
  for (const Tensor& t : context.tokens) out.push_back(&t);
  for (const Tensor* t : metanet.parameters()) out.push_back(t);
  return out;
}

int TrainState::parameter_count() const {
  int n = 0;
  for (const Tensor* t : parameters()) n += t->size();
  return n;
}

double scheduled_lr(const TrainConfig& config, int step) {
  if (!config.cosine_schedule) return config.learning_rate;
  const double phase =
      std::numbers::pi * static_cast<double>(step) / config.steps;
  return config.learning_rate * 0.5 * (1.0 + std::cos(phase));
}

QuadBatch build_quad_batch(const Dataset& dataset, const TrainingSet& training,
                           const AugWeightTable& weights, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t idx : training.indices) {
    by_class[dataset.samples[idx].class_id].push_back(idx);
  }
  if (by_class.size() < 2) {
    throw ConfigError("build_quad_batch: training set has " +
                      std::to_string(by_class.size()) +
                      " classes, needs >= 2");
  }
  std::vector<int> class_ids;
  for (const auto& [cid, _] : by_class) class_ids.push_back(cid);

  Rng rng(derive_seed(seed, "quad"));
  QuadBatch batch;
  const auto i1 = static_cast<std::size_t>(rng.below(class_ids.size()));
  auto i2 = static_cast<std::size_t>(rng.below(class_ids.size() - 1));
  if (i2 >= i1) ++i2;
  batch.class_1 = class_ids[i1];
  batch.class_2 = class_ids[i2];

  const auto& pool_1 = by_class[batch.class_1];
  const auto& pool_2 = by_class[batch.class_2];
  batch.sample_1 = pool_1[static_cast<std::size_t>(rng.below(pool_1.size()))];
  batch.sample_2 = pool_2[static_cast<std::size_t>(rng.below(pool_2.size()))];

  const auto [kind_a, kind_b] =
      sample_distinct_pair(weights, derive_seed(seed, "aug_pair"));
  batch.kind_a = kind_a;
  batch.kind_b = kind_b;
  batch.seed_1a = rng.next_u64();
  batch.seed_1b = rng.next_u64();
  batch.seed_2a = rng.next_u64();
  batch.seed_2b = rng.next_u64();
  return batch;
}

namespace {

std::vector<std::uint64_t> uids_for(const Dataset& dataset,
                                    const std::vector<int>& class_ids) {
  std::vector<std::uint64_t> uids;
  uids.reserve(class_ids.size());
  for (int cid : class_ids) uids.push_back(dataset.class_spec(cid).class_uid);
  return uids;
}

}  // namespace

StepMetrics train_step(TrainState& state, const TrainConfig& config,
                       const Dataset& dataset, const EncoderWeights& encoder,
                       const QuadBatch& batch,
                       const std::vector<int>& train_class_ids) {
  const auto label_pos =
      std::find(train_class_ids.begin(), train_class_ids.end(), batch.class_1);
  if (label_pos == train_class_ids.end()) {
    throw IndexError("train_step: batch class not in training class list");
  }
  const int label_index =
      static_cast<int>(label_pos - train_class_ids.begin());
  const std::vector<std::uint64_t> class_uids =
      uids_for(dataset, train_class_ids);

  const Sample& s1 = dataset.samples[batch.sample_1];
  const Sample& s2 = dataset.samples[batch.sample_2];

  Tape tape;

  Tensor adt = Tensor::scalar(0.0);
  if (config.mode == ModelMode::aapl) {
    QuadDeltas quad{
        delta_meta_token(state.metanet, encoder, s1.image, batch.class_1,
                         batch.kind_a, batch.seed_1a,
                         config.stop_gradient_original),
        delta_meta_token(state.metanet, encoder, s1.image, batch.class_1,
                         batch.kind_b, batch.seed_1b,
                         config.stop_gradient_original),
        delta_meta_token(state.metanet, encoder, s2.image, batch.class_2,
                         batch.kind_a, batch.seed_2a,
                         config.stop_gradient_original),
        delta_meta_token(state.metanet, encoder, s2.image, batch.class_2,
                         batch.kind_b, batch.seed_2b,
                         config.stop_gradient_original)};
    adt = config.conventional_triplet
              ? conventional_triplet_objective(quad, config.loss.margin)
              : adtriplet(quad, config.loss.margin, config.swap_anchors);
  }

  const ToyImage& ce_image =
      config.ce_on_augmented
          ? apply_augmentation(batch.kind_a, s1.image, batch.seed_1a)
          : s1.image;
  const Tensor ce =
      classification_loss(config.mode, state.context, state.metanet, encoder,
                          ce_image, label_index, class_uids, config.tau);

  const Tensor total = total_loss(ce, adt, config.loss);
  if (!std::isfinite(total.value())) {
    throw NumericError("train_step: non-finite loss at step " +
                       std::to_string(state.step));
  }

  const Gradients grads = tape.backward(total);
  const double lr = scheduled_lr(config, state.step);

  std::vector<Tensor*> params = state.parameters();
  if (state.velocity.empty()) {
    for (const Tensor* p : params) state.velocity.push_back(Tensor::zeros(p->shape()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    Tensor& v = state.velocity[i];
    const Tensor* g = grads.find(p);
    for (int k = 0; k < p.size(); ++k) {
      const double gk = g ? (*g)[k] : 0.0;
      v[k] = config.momentum * v[k] + gk;
      p[k] -= lr * v[k];
    }
    check_finite(p.data(), "train_step parameter update");
  }

  StepMetrics metrics{state.step, ce.value(), adt.value(), total.value(), lr};
  state.step += 1;
  state.history.push_back(metrics);
  return metrics;
}

namespace {

// Delta-token silhouette per kind on a held-out slice, for WRS refreshes.
// Kinds are assigned round-robin so every active kind gets points.
std::map<AugmentationKind, double> wrs_profile(
    const MetaNet& net, const EncoderWeights& encoder, const Dataset& dataset,
    const std::vector<std::size_t>& pool,
    const std::vector<AugmentationKind>& active, int n_points,
    std::uint64_t seed) {
  TapeSuspend no_tape;
  Rng rng(derive_seed(seed, "wrs_profile"));
  TokenCloud cloud;
  cloud.token_type = TokenCloud::TokenType::delta;
  for (int i = 0; i < n_points; ++i) {
    const std::size_t idx =
        pool[static_cast<std::size_t>(rng.below(pool.size()))];
    const AugmentationKind kind =
        active[static_cast<std::size_t>(i) % active.size()];
    const Sample& sample = dataset.samples[idx];
    const DeltaMetaToken delta = delta_meta_token(
        net, encoder, sample.image, sample.class_id, kind, rng.next_u64());
    cloud.points.push_back(
        {delta.value.data(), kind, sample.class_id});
  }
  return per_kind_silhouettes(cloud);
}

}  // namespace

Checkpoint train_loop(const TrainConfig& config, const Dataset& dataset,
                      const SplitPlan& plan) {
  config.validate();
  if (plan.base_class_ids.empty()) {
    throw ConfigError("train_loop: plan has no base classes");
  }

  SplitPlan effective = plan;
  effective.shots = config.shots;
  const TrainingSet training =
      sample_few_shot(dataset, effective, config.seeds.data);

  EncoderWeights encoder =
      EncoderWeights::init_frozen(config.dims, config.seeds.init);
  encoder.register_dataset(dataset);
  const std::uint64_t freeze_hash = encoder.content_hash();

  TrainState state;
  state.context = LearnableContext::init(config.dims, config.seeds.init);
  state.metanet = MetaNet::init(config.dims, config.seeds.init);
  state.weights = config.augmentation_subset.empty()
                      ? AugWeightTable::uniform()
                      : restrict_bank(config.augmentation_subset);

  const std::vector<AugmentationKind> active =
      config.augmentation_subset.empty() ? all_augmentations()
                                         : config.augmentation_subset;
  std::vector<std::size_t> wrs_pool;
  if (config.wrs.enabled) {
    wrs_pool = held_out_indices(dataset, effective.base_class_ids, training);
    if (wrs_pool.empty()) {
      throw ConfigError("train_loop: WRS needs held-out samples to profile");
    }
    if (config.wrs.refresh_interval == 0) {
      // Fixed thresholds from one profiling pass before training.
      state.weights = update_weights_from_silhouette(
          wrs_profile(state.metanet, encoder, dataset, wrs_pool, active,
                      config.wrs.profile_points,
                      derive_seed(config.seeds.order, "wrs", 0)),
          config.wrs.threshold, config.wrs.boost_ratio);
    }
  }

  for (int step = 0; step < config.steps; ++step) {
    if (config.wrs.enabled && config.wrs.refresh_interval > 0 &&
        step % config.wrs.refresh_interval == 0 && step > 0) {
      state.weights = update_weights_from_silhouette(
          wrs_profile(state.metanet, encoder, dataset, wrs_pool, active,
                      config.wrs.profile_points,
                      derive_seed(config.seeds.order, "wrs",
                                  static_cast<std::uint64_t>(step))),
          config.wrs.threshold, config.wrs.boost_ratio);
    }
    const QuadBatch batch = build_quad_batch(
        dataset, training, state.weights,
        derive_seed(config.seeds.order, "batch",
                    static_cast<std::uint64_t>(step)));
    train_step(state, config, dataset, encoder, batch,
               effective.base_class_ids);
  }

  if (encoder.content_hash() != freeze_hash) {
    throw ContractError("train_loop: encoder weights changed during training");
  }

  Checkpoint ck;
  ck.config = config;
  ck.dataset_config = dataset.config;
  ck.dataset_seed = dataset.generator_seed;
  ck.dataset_fingerprint = dataset_fingerprint(dataset);
  ck.plan = effective;
  ck.encoder = std::move(encoder);
  ck.context = std::move(state.context);
  ck.metanet = std::move(state.metanet);
  ck.final_weights = state.weights;
  ck.metrics = std::move(state.history);
  return ck;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

nlohmann::json tensor_to_json(const Tensor& t) {
  return {{"shape", t.shape()}, {"data", t.data()}};
}

Tensor tensor_from_json(const nlohmann::json& j, bool requires_grad) {
  return Tensor(j.at("shape").get<Shape>(),
                j.at("data").get<std::vector<double>>(), requires_grad);
}

nlohmann::json config_to_json(const TrainConfig& c) {
  std::vector<std::string> subset;
  for (AugmentationKind k : c.augmentation_subset) {
    subset.push_back(augmentation_name(k));
  }
  return {{"mode", model_mode_name(c.mode)},
          {"conventional_triplet", c.conventional_triplet},
          {"swap_anchors", c.swap_anchors},
          {"stop_gradient_original", c.stop_gradient_original},
          {"ce_on_augmented", c.ce_on_augmented},
          {"steps", c.steps},
          {"learning_rate", c.learning_rate},
          {"momentum", c.momentum},
          {"cosine_schedule", c.cosine_schedule},
          {"alpha", c.loss.alpha},
          {"beta", c.loss.beta},
          {"margin", c.loss.margin},
          {"tau", c.tau},
          {"shots", c.shots},
          {"seeds",
           {{"data", c.seeds.data},
            {"init", c.seeds.init},
            {"order", c.seeds.order}}},
          {"augmentation_subset", subset},
          {"wrs",
           {{"enabled", c.wrs.enabled},
            {"threshold", c.wrs.threshold},
            {"refresh_interval", c.wrs.refresh_interval},
            {"boost_ratio", c.wrs.boost_ratio},
            {"profile_points", c.wrs.profile_points}}},
          {"dims",
           {{"image_input", c.dims.image_input},
            {"image_hidden", c.dims.image_hidden},
            {"feature_dim", c.dims.feature_dim},
            {"text_hidden", c.dims.text_hidden},
            {"token_dim", c.dims.token_dim},
            {"context_len", c.dims.context_len}}}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.mode = model_mode_from_name(j.at("mode").get<std::string>());
  c.conventional_triplet = j.at("conventional_triplet").get<bool>();
  c.swap_anchors = j.at("swap_anchors").get<bool>();
  c.stop_gradient_original = j.at("stop_gradient_original").get<bool>();
  c.ce_on_augmented = j.at("ce_on_augmented").get<bool>();
  c.steps = j.at("steps").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.cosine_schedule = j.at("cosine_schedule").get<bool>();
  c.loss.alpha = j.at("alpha").get<double>();
  c.loss.beta = j.at("beta").get<double>();
  c.loss.margin = j.at("margin").get<double>();
  c.tau = j.at("tau").get<double>();
  c.shots = j.at("shots").get<int>();
  c.seeds.data = j.at("seeds").at("data").get<std::uint64_t>();
  c.seeds.init = j.at("seeds").at("init").get<std::uint64_t>();
  c.seeds.order = j.at("seeds").at("order").get<std::uint64_t>();
  for (const auto& name : j.at("augmentation_subset")) {
    c.augmentation_subset.push_back(
        augmentation_from_name(name.get<std::string>()));
  }
  const auto& w = j.at("wrs");
  c.wrs.enabled = w.at("enabled").get<bool>();
  c.wrs.threshold = w.at("threshold").get<double>();
  c.wrs.refresh_interval = w.at("refresh_interval").get<int>();
  c.wrs.boost_ratio = w.at("boost_ratio").get<double>();
  c.wrs.profile_points = w.at("profile_points").get<int>();
  const auto& d = j.at("dims");
  c.dims.image_input = d.at("image_input").get<int>();
  c.dims.image_hidden = d.at("image_hidden").get<int>();
  c.dims.feature_dim = d.at("feature_dim").get<int>();
  c.dims.text_hidden = d.at("text_hidden").get<int>();
  c.dims.token_dim = d.at("token_dim").get<int>();
  c.dims.context_len = d.at("context_len").get<int>();
  return c;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ck) {
  nlohmann::json j;
  j["schema_version"] = Checkpoint::kSchemaVersion;
  j["config"] = config_to_json(ck.config);
  j["dataset"] = {{"name", ck.dataset_config.name},
                  {"num_classes", ck.dataset_config.num_classes},
                  {"samples_per_class", ck.dataset_config.samples_per_class},
                  {"noise_sigma", ck.dataset_config.noise_sigma},
                  {"generator_seed", ck.dataset_seed},
                  {"fingerprint", ck.dataset_fingerprint}};
  j["plan"] = {{"base_class_ids", ck.plan.base_class_ids},
               {"new_class_ids", ck.plan.new_class_ids},
               {"shots", ck.plan.shots}};

  const auto& layers = ck.encoder.layers();
  nlohmann::json embeddings = nlohmann::json::object();
  for (const auto& [uid, emb] : ck.encoder.embedding_table()) {
    embeddings[std::to_string(uid)] = emb.data();
  }
  j["encoder"] = {{"init_seed", ck.encoder.init_seed()},
                  {"image_w1", tensor_to_json(layers.image_w1)},
                  {"image_b1", tensor_to_json(layers.image_b1)},
                  {"image_w2", tensor_to_json(layers.image_w2)},
                  {"image_b2", tensor_to_json(layers.image_b2)},
                  {"text_w1", tensor_to_json(layers.text_w1)},
                  {"text_b1", tensor_to_json(layers.text_b1)},
                  {"text_w2", tensor_to_json(layers.text_w2)},
                  {"text_b2", tensor_to_json(layers.text_b2)},
                  {"embeddings", std::move(embeddings)}};

  nlohmann::json context = nlohmann::json::array();
  for (const Tensor& t : ck.context.tokens) context.push_back(t.data());
  j["context"] = std::move(context);
  j["metanet"] = {{"w1", tensor_to_json(ck.metanet.w1)},
                  {"b1", tensor_to_json(ck.metanet.b1)},
                  {"w2", tensor_to_json(ck.metanet.w2)},
                  {"b2", tensor_to_json(ck.metanet.b2)}};
  j["final_weights"] = ck.final_weights.weights;

  nlohmann::json metrics = nlohmann::json::array();
  for (const StepMetrics& m : ck.metrics) {
    metrics.push_back({m.step, m.ce, m.adtriplet, m.total, m.lr});
  }
  j["metrics"] = std::move(metrics);
  return j.dump(2);
}

Checkpoint checkpoint_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(std::string("checkpoint parse failed: ") + e.what());
  }
  if (!j.contains("schema_version") ||
      j["schema_version"].get<int>() != Checkpoint::kSchemaVersion) {
    throw VersionError("checkpoint: unsupported schema version");
  }
  Checkpoint ck;
  ck.config = config_from_json(j.at("config"));
  const auto& d = j.at("dataset");
  ck.dataset_config.name = d.at("name").get<std::string>();
  ck.dataset_config.num_classes = d.at("num_classes").get<int>();
  ck.dataset_config.samples_per_class = d.at("samples_per_class").get<int>();
  ck.dataset_config.noise_sigma = d.at("noise_sigma").get<double>();
  ck.dataset_seed = d.at("generator_seed").get<std::uint64_t>();
  ck.dataset_fingerprint = d.at("fingerprint").get<std::uint64_t>();
  const auto& p = j.at("plan");
  ck.plan.base_class_ids = p.at("base_class_ids").get<std::vector<int>>();
  ck.plan.new_class_ids = p.at("new_class_ids").get<std::vector<int>>();
  ck.plan.shots = p.at("shots").get<int>();

  const auto& e = j.at("encoder");
  EncoderWeights::Layers layers;
  layers.image_w1 = tensor_from_json(e.at("image_w1"), false);
  layers.image_b1 = tensor_from_json(e.at("image_b1"), false);
  layers.image_w2 = tensor_from_json(e.at("image_w2"), false);
  layers.image_b2 = tensor_from_json(e.at("image_b2"), false);
  layers.text_w1 = tensor_from_json(e.at("text_w1"), false);
  layers.text_b1 = tensor_from_json(e.at("text_b1"), false);
  layers.text_w2 = tensor_from_json(e.at("text_w2"), false);
  layers.text_b2 = tensor_from_json(e.at("text_b2"), false);
  std::map<std::uint64_t, Tensor> embeddings;
  for (const auto& [key, value] : e.at("embeddings").items()) {
    embeddings.emplace(std::stoull(key),
                       Tensor::from_vector(value.get<std::vector<double>>()));
  }
  ck.encoder = EncoderWeights::from_parts(
      ck.config.dims, e.at("init_seed").get<std::uint64_t>(),
      std::move(layers), std::move(embeddings));

  for (const auto& token : j.at("context")) {
    Tensor t = Tensor::from_vector(token.get<std::vector<double>>());
    t.set_requires_grad(true);
    ck.context.tokens.push_back(std::move(t));
  }
  ck.metanet.w1 = tensor_from_json(j.at("metanet").at("w1"), true);
  ck.metanet.b1 = tensor_from_json(j.at("metanet").at("b1"), true);
  ck.metanet.w2 = tensor_from_json(j.at("metanet").at("w2"), true);
  ck.metanet.b2 = tensor_from_json(j.at("metanet").at("b2"), true);
  ck.final_weights.weights =
      j.at("final_weights").get<std::array<double, kAugmentationCount>>();
  for (const auto& m : j.at("metrics")) {
    ck.metrics.push_back(StepMetrics{m.at(0).get<int>(), m.at(1).get<double>(),
                                     m.at(2).get<double>(),
                                     m.at(3).get<double>(),
                                     m.at(4).get<double>()});
  }
  return ck;
}

std::string metrics_to_csv(std::span<const StepMetrics> metrics) {
  std::string out = "step,ce,adtriplet,total,lr\n";
  char line[192];
  for (const StepMetrics& m : metrics) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g\n", m.step,
                  m.ce, m.adtriplet, m.total, m.lr);
    out += line;
  }
  return out;
}

}  // namespace aapl
