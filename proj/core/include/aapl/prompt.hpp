#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aapl/augmentation.hpp"
#include "aapl/encoders.hpp"
#include "aapl/tensor.hpp"

namespace aapl {

/// Operating mode of the prompt learner.
///   static_coop      - static learnable context, no image conditioning
///   conditional_cocoop - context shifted by a metanet token per image
///   aapl             - conditional context plus the adversarial delta-token
///                      objective over quad batches
enum class ModelMode { static_coop, conditional_cocoop, aapl };

std::string model_mode_name(ModelMode mode);
ModelMode model_mode_from_name(const std::string& name);

/// The M learnable context vectors prepended to every class embedding.
struct LearnableContext {
  std::vector<Tensor> tokens;  // M tensors of dim d_e, requires_grad

  static LearnableContext init(const EncoderDims& dims, std::uint64_t seed,
                               double stddev = 0.02);
};

/// Bottlenecked conditioning network: feature_dim -> feature_dim/16 -> d_e.
struct MetaNet {
  Tensor w1, b1, w2, b2;  // all requires_grad

  static MetaNet init(const EncoderDims& dims, std::uint64_t seed);
  static MetaNet zeros(const EncoderDims& dims);
  int hidden_dim() const { return w1.shape()[0]; }

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
};

/// Instance-conditional bias added to every context token.
struct MetaToken {
  Tensor value;  // d_e
};

/// Difference of the meta tokens of an augmented and an original view of one
/// image. Carries augmentation-specific information; class content cancels.
struct DeltaMetaToken {
  Tensor value;  // d_e
  int class_id = 0;
  AugmentationKind kind = AugmentationKind::random_crop;
};

MetaToken meta_token(const MetaNet& net, const Tensor& image_feature);

/// Prompt {v_1 + pi, ..., v_M + pi, c_class}. In static_coop mode the caller
/// passes a zero meta token; the addition still happens so that the two modes
/// share one code path bit for bit.
std::vector<Tensor> conditional_prompt(const LearnableContext& ctx,
                                       const MetaToken& pi,
                                       std::uint64_t class_uid,
                                       const EncoderWeights& enc);

/// Both branches stay on the tape unless stop_gradient_original is set, in
/// which case the un-augmented branch is detached.
DeltaMetaToken delta_meta_token(const MetaNet& net, const EncoderWeights& enc,
                                const ToyImage& image, int class_id,
                                AugmentationKind kind, std::uint64_t aug_seed,
                                bool stop_gradient_original = false);

MetaToken zero_meta_token(const EncoderDims& dims);

/// Cosine-similarity logits of one image against each class prompt, scaled
/// by 1/tau. Stays on the tape, so it feeds both training and evaluation.
Tensor prompt_logits(ModelMode mode, const LearnableContext& ctx,
                     const MetaNet& net, const EncoderWeights& enc,
                     const Tensor& image_feature,
                     const std::vector<std::uint64_t>& class_uids, double tau);

/// Softmax over similarity logits. Exposed separately so the probability
/// arithmetic is testable without encoder plumbing.
std::vector<double> probs_from_similarities(const std::vector<double>& sims,
                                            double tau);

std::vector<double> predict_proba(ModelMode mode, const LearnableContext& ctx,
                                  const MetaNet& net, const EncoderWeights& enc,
                                  const ToyImage& image,
                                  const std::vector<std::uint64_t>& class_uids,
                                  double tau);

}  // namespace aapl
