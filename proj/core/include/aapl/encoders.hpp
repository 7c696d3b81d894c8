#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "aapl/dataset.hpp"
#include "aapl/tensor.hpp"
#include "aapl/toy_image.hpp"

namespace aapl {

struct EncoderDims {
  int image_input = ToyImage::kPixels;  // 3*16*16
  int image_hidden = 64;
  int feature_dim = 64;   // d
  int text_hidden = 64;
  int token_dim = 32;     // d_e
  int context_len = 4;    // M; prompts are M+1 tokens

  int prompt_len() const { return context_len + 1; }

  bool operator==(const EncoderDims&) const = default;
};

/// Frozen dual encoder standing in for a pre-trained image/text backbone.
/// Weights are drawn once from (dims, seed) and never change; both encoders
/// L2-normalize. The text encoder is differentiable in its prompt tokens, so
/// gradients reach the learnable context and metanet while the weights here
/// stay out of every gradient map.
class EncoderWeights {
 public:
  EncoderWeights() = default;
  static EncoderWeights init_frozen(const EncoderDims& dims,
                                    std::uint64_t seed);

  const EncoderDims& dims() const { return dims_; }
  std::uint64_t init_seed() const { return init_seed_; }

  Tensor encode_image(const ToyImage& image) const;
  /// `prompt` must hold exactly M+1 tokens of dim d_e (context + class).
  Tensor encode_text(std::span<const Tensor> prompt) const;

  void register_class(std::uint64_t class_uid);
  void register_dataset(const Dataset& dataset);
  bool is_registered(std::uint64_t class_uid) const;
  /// IndexError when the uid was never registered.
  const Tensor& class_embedding(std::uint64_t class_uid) const;

  /// FNV-1a over all weight bytes and the registered embedding table;
  /// used to assert the freeze contract.
  std::uint64_t content_hash() const;

  // Checkpoint plumbing.
  const std::map<std::uint64_t, Tensor>& embedding_table() const {
    return embeddings_;
  }
  struct Layers {
    Tensor image_w1, image_b1, image_w2, image_b2;
    Tensor text_w1, text_b1, text_w2, text_b2;
  };
  const Layers& layers() const { return layers_; }
  static EncoderWeights from_parts(const EncoderDims& dims, std::uint64_t seed,
                                   Layers layers,
                                   std::map<std::uint64_t, Tensor> embeddings);

 private:
  EncoderDims dims_{};
  std::uint64_t init_seed_ = 0;
  Layers layers_{};
  std::map<std::uint64_t, Tensor> embeddings_;
};

}  // namespace aapl
