#include "aapl/encoders.hpp"

#include <cmath>
#include <cstring>

#include "aapl/error.hpp"
#include "aapl/rng.hpp"

namespace aapl {

namespace {

Tensor gaussian_matrix(int rows, int cols, Rng& rng) {
  // Fan-in scaling keeps layer outputs O(1) regardless of width.
  const double stddev = 1.0 / std::sqrt(static_cast<double>(cols));
  return Tensor::randn({rows, cols}, rng, stddev);
}

Tensor gaussian_bias(int n, int fan_in, Rng& rng) {
  const double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return Tensor::randn({n}, rng, stddev);
}

}  // namespace

EncoderWeights EncoderWeights::init_frozen(const EncoderDims& dims,
                                           std::uint64_t seed) {
  if (dims.feature_dim < 8 || dims.token_dim < 8) {
    throw ConfigError("encoder dims: feature_dim and token_dim must be >= 8");
  }
  if (dims.context_len < 1) {
    throw ConfigError("encoder dims: context_len must be >= 1");
  }
  EncoderWeights w;
  w.dims_ = dims;
  w.init_seed_ = seed;

  Rng img_rng(derive_seed(seed, "image_encoder"));
  w.layers_.image_w1 = gaussian_matrix(dims.image_hidden, dims.image_input, img_rng);
  w.layers_.image_b1 = gaussian_bias(dims.image_hidden, dims.image_input, img_rng);
  w.layers_.image_w2 = gaussian_matrix(dims.feature_dim, dims.image_hidden, img_rng);
  w.layers_.image_b2 = gaussian_bias(dims.feature_dim, dims.image_hidden, img_rng);

  const int text_input = dims.prompt_len() * dims.token_dim;
  Rng txt_rng(derive_seed(seed, "text_encoder"));
  w.layers_.text_w1 = gaussian_matrix(dims.text_hidden, text_input, txt_rng);
  w.layers_.text_b1 = gaussian_bias(dims.text_hidden, text_input, txt_rng);
  w.layers_.text_w2 = gaussian_matrix(dims.feature_dim, dims.text_hidden, txt_rng);
  w.layers_.text_b2 = gaussian_bias(dims.feature_dim, dims.text_hidden, txt_rng);
  return w;
}

EncoderWeights EncoderWeights::from_parts(
    const EncoderDims& dims, std::uint64_t seed, Layers layers,
    std::map<std::uint64_t, Tensor> embeddings) {
  EncoderWeights w;
  w.dims_ = dims;
  w.init_seed_ = seed;
  w.layers_ = std::move(layers);
  w.embeddings_ = std::move(embeddings);
  return w;
}

Tensor EncoderWeights::encode_image(const ToyImage& image) const {
  image.validate();
  // Images are data, not parameters: this path never records on a tape.
  TapeSuspend no_tape;
  Tensor x = Tensor::from_vector(image.pixels);
  Tensor h = relu(add(matmul(layers_.image_w1, x), layers_.image_b1));
  Tensor y = add(matmul(layers_.image_w2, h), layers_.image_b2);
  return l2_normalize(y);
}

Tensor EncoderWeights::encode_text(std::span<const Tensor> prompt) const {
  if (static_cast<int>(prompt.size()) != dims_.prompt_len()) {
    throw ContractError("encode_text: prompt must have " +
                        std::to_string(dims_.prompt_len()) + " tokens, got " +
                        std::to_string(prompt.size()));
  }
  for (const Tensor& t : prompt) {
    if (t.rank() != 1 || t.shape()[0] != dims_.token_dim) {
      throw ContractError("encode_text: token dim must be " +
                          std::to_string(dims_.token_dim));
    }
  }
  Tensor t = concat(prompt);
  Tensor h = relu(add(matmul(layers_.text_w1, t), layers_.text_b1));
  Tensor y = add(matmul(layers_.text_w2, h), layers_.text_b2);
  // A collapsed prompt is a bug upstream, not something to normalize away.
  return l2_normalize(y, 1e-9);
}

void EncoderWeights::register_class(std::uint64_t class_uid) {
  if (embeddings_.count(class_uid)) return;
  Rng rng(derive_seed(init_seed_, "class_embedding", class_uid));
  embeddings_.emplace(class_uid, Tensor::randn({dims_.token_dim}, rng, 1.0));
}

void EncoderWeights::register_dataset(const Dataset& dataset) {
  for (const ClassSpec& c : dataset.classes) register_class(c.class_uid);
}

bool EncoderWeights::is_registered(std::uint64_t class_uid) const {
  return embeddings_.count(class_uid) > 0;
}

const Tensor& EncoderWeights::class_embedding(std::uint64_t class_uid) const {
  auto it = embeddings_.find(class_uid);
  if (it == embeddings_.end()) {
    throw IndexError("class uid " + std::to_string(class_uid) +
                     " was not registered with the encoder");
  }
  return it->second;
}

std::uint64_t EncoderWeights::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](const Tensor& t) {
    for (double v : t.data()) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, sizeof(bits));
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    }
  };
  mix(layers_.image_w1); mix(layers_.image_b1);
  mix(layers_.image_w2); mix(layers_.image_b2);
  mix(layers_.text_w1);  mix(layers_.text_b1);
  mix(layers_.text_w2);  mix(layers_.text_b2);
  for (const auto& [uid, emb] : embeddings_) {
    h ^= uid;
    h *= 0x100000001b3ULL;
    mix(emb);
  }
  return h;
}

}  // namespace aapl
