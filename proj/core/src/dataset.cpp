#include "aapl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

#include "aapl/error.hpp"

namespace aapl {

namespace {

constexpr int kNumPatterns = 10;

// Binary pattern bank. Each entry maps (y, x) to foreground membership.
bool pattern_on(int kind, int y, int x) {
  const double cy = y - 7.5;
  const double cx = x - 7.5;
  const double r = std::sqrt(cy * cy + cx * cx);
  switch (kind % kNumPatterns) {
    case 0: return (y / 2) % 2 == 0;                       // horizontal bars
    case 1: return (x / 2) % 2 == 0;                       // vertical bars
    case 2: return ((y / 4) + (x / 4)) % 2 == 0;           // checkerboard
    case 3: return ((x + y) / 3) % 2 == 0;                 // diagonal stripes
    case 4: return r < 5.0;                                // disk
    case 5: return r >= 3.5 && r < 6.5;                    // ring
    case 6: return std::abs(cy) < 2.0 || std::abs(cx) < 2.0;  // cross
    case 7: return (y < 6 || y >= 10) && (x < 6 || x >= 10);  // corner blocks
    case 8: return (y % 4 < 2) && (x % 4 < 2);             // dot grid
    default: return x + y < 16;                            // triangle
  }
}

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1)      { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else             { r = c; b = x; }
  const double m = v - c;
  rgb[0] = r + m;
  rgb[1] = g + m;
  rgb[2] = b + m;
}

ToyImage render_prototype(const AttributeProfile& attrs) {
  double fg[3], bg[3];
  hsv_to_rgb(attrs.hue, 0.8, attrs.fg_value, fg);
  hsv_to_rgb(attrs.hue + 0.5, 0.5, attrs.bg_value, bg);
  ToyImage img;
  for (int y = 0; y < ToyImage::kHeight; ++y) {
    for (int x = 0; x < ToyImage::kWidth; ++x) {
      const bool on = pattern_on(attrs.shape_kind, y, x);
      for (int c = 0; c < ToyImage::kChannels; ++c) {
        img.at(c, y, x) = on ? fg[c] : bg[c];
      }
    }
  }
  img.clip();
  return img;
}

}  // namespace

const ClassSpec& Dataset::class_spec(int class_id) const {
  for (const ClassSpec& c : classes) {
    if (c.class_id == class_id) return c;
  }
  throw IndexError("dataset " + name + ": unknown class id " +
                   std::to_string(class_id));
}

std::vector<int> Dataset::class_ids() const {
  std::vector<int> ids;
  ids.reserve(classes.size());
  for (const ClassSpec& c : classes) ids.push_back(c.class_id);
  return ids;
}

std::vector<std::size_t> Dataset::samples_of(const std::vector<int>& ids) const {
  const std::set<int> wanted(ids.begin(), ids.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (wanted.count(samples[i].class_id)) out.push_back(i);
  }
  return out;
}

Dataset generate_dataset(const DatasetConfig& config, std::uint64_t seed) {
  if (config.num_classes < 4) {
    throw ConfigError("generate_dataset: need at least 4 classes, got " +
                      std::to_string(config.num_classes));
  }
  if (config.samples_per_class < 1) {
    throw ConfigError("generate_dataset: samples_per_class must be >= 1");
  }
  if (config.noise_sigma < 0.0) {
    throw ConfigError("generate_dataset: noise_sigma must be >= 0");
  }

  Dataset ds;
  ds.name = config.name;
  ds.generator_seed = seed;
  ds.config = config;

  // Hues are equally spaced, then shuffled so hue order is decoupled from
  // the shape order.
  const int k = config.num_classes;
  std::vector<double> hues(k);
  for (int i = 0; i < k; ++i) hues[i] = static_cast<double>(i) / k;
  Rng hue_rng(derive_seed(seed, "hues"));
  for (int i = k - 1; i > 0; --i) {
    const auto j = static_cast<int>(hue_rng.below(i + 1));
    std::swap(hues[i], hues[j]);
  }

  for (int c = 0; c < k; ++c) {
    ClassSpec spec;
    spec.class_id = c;
    spec.class_uid = derive_seed(derive_seed(seed, config.name), "class_uid",
                                 static_cast<std::uint64_t>(c));
    spec.intra_class_noise = config.noise_sigma;
    spec.attributes.shape_kind = c % kNumPatterns;
    spec.attributes.hue = hues[c];
    spec.prototype = render_prototype(spec.attributes);
    ds.classes.push_back(std::move(spec));
  }

  for (int c = 0; c < k; ++c) {
    Rng noise(derive_seed(seed, "noise", static_cast<std::uint64_t>(c)));
    for (int s = 0; s < config.samples_per_class; ++s) {
      Sample sample;
      sample.class_id = c;
      sample.image = ds.classes[c].prototype;
      if (config.noise_sigma > 0.0) {
        for (double& p : sample.image.pixels) {
          p += noise.gaussian(0.0, config.noise_sigma);
        }
        sample.image.clip();
      }
      ds.samples.push_back(std::move(sample));
    }
  }
  return ds;
}

SplitPlan split_base_new(const Dataset& dataset, std::uint64_t seed) {
  const int k = static_cast<int>(dataset.classes.size());
  if (k % 2 != 0) {
    throw ConfigError("split_base_new: class count must be even, got " +
                      std::to_string(k));
  }
  std::vector<int> ids = dataset.class_ids();
  Rng rng(derive_seed(seed, "split"));
  for (int i = k - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.below(i + 1));
    std::swap(ids[i], ids[j]);
  }
  SplitPlan plan;
  plan.base_class_ids.assign(ids.begin(), ids.begin() + k / 2);
  plan.new_class_ids.assign(ids.begin() + k / 2, ids.end());
  std::sort(plan.base_class_ids.begin(), plan.base_class_ids.end());
  std::sort(plan.new_class_ids.begin(), plan.new_class_ids.end());
  return plan;
}

namespace {

TrainingSet pick_shots(const Dataset& dataset, const std::vector<int>& classes,
                       int shots, std::uint64_t seed) {
  if (shots < 1) throw ConfigError("few-shot sampling: shots must be >= 1");
  TrainingSet out;
  for (int cid : classes) {
    std::vector<std::size_t> pool = dataset.samples_of({cid});
    if (static_cast<int>(pool.size()) < shots) {
      throw ConfigError("few-shot sampling: class " + std::to_string(cid) +
                        " has " + std::to_string(pool.size()) +
                        " samples, needs " + std::to_string(shots));
    }
    Rng rng(derive_seed(seed, "shots", static_cast<std::uint64_t>(cid)));
    for (std::size_t i = pool.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.below(i + 1));
      std::swap(pool[i], pool[j]);
    }
    out.indices.insert(out.indices.end(), pool.begin(), pool.begin() + shots);
  }
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

}  // namespace

TrainingSet sample_few_shot(const Dataset& dataset, const SplitPlan& plan,
                            std::uint64_t seed) {
  return pick_shots(dataset, plan.base_class_ids, plan.shots, seed);
}

TrainingSet sample_few_shot_all(const Dataset& dataset, int shots,
                                std::uint64_t seed) {
  return pick_shots(dataset, dataset.class_ids(), shots, seed);
}

std::vector<std::size_t> held_out_indices(const Dataset& dataset,
                                          const std::vector<int>& class_ids,
                                          const TrainingSet& training) {
  const std::set<std::size_t> used(training.indices.begin(),
                                   training.indices.end());
  std::vector<std::size_t> out;
  for (std::size_t i : dataset.samples_of(class_ids)) {
    if (!used.count(i)) out.push_back(i);
  }
  return out;
}

ShiftConfig::Kind shift_kind_from_name(const std::string& name) {
  if (name == "brightness") return ShiftConfig::Kind::brightness;
  if (name == "contrast") return ShiftConfig::Kind::contrast;
  if (name == "noise") return ShiftConfig::Kind::noise;
  throw ConfigError("unknown shift kind '" + name + "'");
}

std::string shift_kind_name(ShiftConfig::Kind kind) {
  switch (kind) {
    case ShiftConfig::Kind::brightness: return "brightness";
    case ShiftConfig::Kind::contrast: return "contrast";
    case ShiftConfig::Kind::noise: return "noise";
  }
  throw ConfigError("invalid shift kind");
}

Dataset generate_shifted_dataset(const Dataset& dataset,
                                 const ShiftConfig& shift, std::uint64_t seed) {
  Dataset out = dataset;
  out.name = dataset.name + "@" + shift_kind_name(shift.kind);
  if (shift.magnitude == 0.0) return out;  // exact identity by contract

  Rng rng(derive_seed(seed, "domain_shift"));
  for (Sample& s : out.samples) {
    switch (shift.kind) {
      case ShiftConfig::Kind::brightness:
        for (double& p : s.image.pixels) p += shift.magnitude;
        break;
      case ShiftConfig::Kind::contrast:
        for (double& p : s.image.pixels) {
          p = 0.5 + (p - 0.5) * (1.0 + shift.magnitude);
        }
        break;
      case ShiftConfig::Kind::noise:
        for (double& p : s.image.pixels) {
          p += rng.gaussian(0.0, shift.magnitude);
        }
        break;
    }
    s.image.clip();
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON round-trip
// ---------------------------------------------------------------------------

namespace {
constexpr int kDatasetSchemaVersion = 1;
}

std::string dataset_to_json(const Dataset& dataset) {
  nlohmann::json j;
  j["schema_version"] = kDatasetSchemaVersion;
  j["name"] = dataset.name;
  j["generator_seed"] = dataset.generator_seed;
  j["config"] = {{"name", dataset.config.name},
                 {"num_classes", dataset.config.num_classes},
                 {"samples_per_class", dataset.config.samples_per_class},
                 {"noise_sigma", dataset.config.noise_sigma}};
  nlohmann::json classes = nlohmann::json::array();
  for (const ClassSpec& c : dataset.classes) {
    classes.push_back({{"class_id", c.class_id},
                       {"class_uid", c.class_uid},
                       {"intra_class_noise", c.intra_class_noise},
                       {"attributes",
                        {{"shape_kind", c.attributes.shape_kind},
                         {"hue", c.attributes.hue},
                         {"fg_value", c.attributes.fg_value},
                         {"bg_value", c.attributes.bg_value}}},
                       {"prototype", c.prototype.pixels}});
  }
  j["classes"] = std::move(classes);
  nlohmann::json samples = nlohmann::json::array();
  for (const Sample& s : dataset.samples) {
    samples.push_back({{"class_id", s.class_id}, {"pixels", s.image.pixels}});
  }
  j["samples"] = std::move(samples);
  return j.dump();
}

Dataset dataset_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(std::string("dataset JSON parse failed: ") + e.what());
  }
  if (!j.contains("schema_version") ||
      j["schema_version"].get<int>() != kDatasetSchemaVersion) {
    throw VersionError("dataset JSON: unsupported schema version");
  }
  Dataset ds;
  ds.name = j.at("name").get<std::string>();
  ds.generator_seed = j.at("generator_seed").get<std::uint64_t>();
  const auto& cfg = j.at("config");
  ds.config.name = cfg.at("name").get<std::string>();
  ds.config.num_classes = cfg.at("num_classes").get<int>();
  ds.config.samples_per_class = cfg.at("samples_per_class").get<int>();
  ds.config.noise_sigma = cfg.at("noise_sigma").get<double>();
  for (const auto& c : j.at("classes")) {
    ClassSpec spec;
    spec.class_id = c.at("class_id").get<int>();
    spec.class_uid = c.at("class_uid").get<std::uint64_t>();
    spec.intra_class_noise = c.at("intra_class_noise").get<double>();
    const auto& a = c.at("attributes");
    spec.attributes.shape_kind = a.at("shape_kind").get<int>();
    spec.attributes.hue = a.at("hue").get<double>();
    spec.attributes.fg_value = a.at("fg_value").get<double>();
    spec.attributes.bg_value = a.at("bg_value").get<double>();
    spec.prototype.pixels = c.at("prototype").get<std::vector<double>>();
    spec.prototype.validate();
    ds.classes.push_back(std::move(spec));
  }
  for (const auto& s : j.at("samples")) {
    Sample sample;
    sample.class_id = s.at("class_id").get<int>();
    sample.image.pixels = s.at("pixels").get<std::vector<double>>();
    sample.image.validate();
    ds.samples.push_back(std::move(sample));
  }
  for (const Sample& s : ds.samples) ds.class_spec(s.class_id);
  return ds;
}

std::uint64_t dataset_fingerprint(const Dataset& dataset) {
  const std::string text = dataset_to_json(dataset);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace aapl
