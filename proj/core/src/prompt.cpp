#include "aapl/prompt.hpp"

#include <cmath>

#include "aapl/error.hpp"
#include "aapl/rng.hpp"

namespace aapl {

std::string model_mode_name(ModelMode mode) {
  switch (mode) {
    case ModelMode::static_coop: return "static_coop";
    case ModelMode::conditional_cocoop: return "conditional_cocoop";
    case ModelMode::aapl: return "aapl";
  }
  throw ConfigError("invalid model mode");
}

ModelMode model_mode_from_name(const std::string& name) {
  if (name == "static_coop") return ModelMode::static_coop;
  if (name == "conditional_cocoop") return ModelMode::conditional_cocoop;
  if (name == "aapl") return ModelMode::aapl;
  throw ConfigError("unknown model mode '" + name + "'");
}

LearnableContext LearnableContext::init(const EncoderDims& dims,
                                        std::uint64_t seed, double stddev) {
  Rng rng(derive_seed(seed, "context"));
  LearnableContext ctx;
  for (int m = 0; m < dims.context_len; ++m) {
    Tensor t = Tensor::randn({dims.token_dim}, rng, stddev);
    t.set_requires_grad(true);
    ctx.tokens.push_back(std::move(t));
  }
  return ctx;
}

MetaNet MetaNet::init(const EncoderDims& dims, std::uint64_t seed) {
  const int hidden = std::max(1, dims.feature_dim / 16);
  Rng rng(derive_seed(seed, "metanet"));
  MetaNet net;
  net.w1 = Tensor::randn({hidden, dims.feature_dim}, rng,
                         1.0 / std::sqrt(dims.feature_dim));
  net.b1 = Tensor::zeros({hidden});
  net.w2 = Tensor::randn({dims.token_dim, hidden}, rng,
                         1.0 / std::sqrt(hidden));
  net.b2 = Tensor::zeros({dims.token_dim});
  for (Tensor* p : net.parameters()) p->set_requires_grad(true);
  return net;
}

MetaNet MetaNet::zeros(const EncoderDims& dims) {
  const int hidden = std::max(1, dims.feature_dim / 16);
  MetaNet net;
  net.w1 = Tensor::zeros({hidden, dims.feature_dim});
  net.b1 = Tensor::zeros({hidden});
  net.w2 = Tensor::zeros({dims.token_dim, hidden});
  net.b2 = Tensor::zeros({dims.token_dim});
  for (Tensor* p : net.parameters()) p->set_requires_grad(true);
  return net;
}

std::vector<Tensor*> MetaNet::parameters() { return {&w1, &b1, &w2, &b2}; }

std::vector<const Tensor*> MetaNet::parameters() const {
  return {&w1, &b1, &w2, &b2};
}

MetaToken meta_token(const MetaNet& net, const Tensor& image_feature) {
  if (image_feature.rank() != 1 ||
      image_feature.shape()[0] != net.w1.shape()[1]) {
    throw ContractError("meta_token: feature dim must be " +
                        std::to_string(net.w1.shape()[1]));
  }
  Tensor h = relu(add(matmul(net.w1, image_feature), net.b1));
  return MetaToken{add(matmul(net.w2, h), net.b2)};
}

MetaToken zero_meta_token(const EncoderDims& dims) {
  return MetaToken{Tensor::zeros({dims.token_dim})};
}

std::vector<Tensor> conditional_prompt(const LearnableContext& ctx,
                                       const MetaToken& pi,
                                       std::uint64_t class_uid,
                                       const EncoderWeights& enc) {
  if (pi.value.rank() != 1 ||
      pi.value.shape()[0] != enc.dims().token_dim) {
    throw ContractError("conditional_prompt: meta token dim must be " +
                        std::to_string(enc.dims().token_dim));
  }
  std::vector<Tensor> prompt;
  prompt.reserve(ctx.tokens.size() + 1);
  // One shared pi for every context slot, never a per-slot value.
  for (const Tensor& v : ctx.tokens) prompt.push_back(add(v, pi.value));
  prompt.push_back(enc.class_embedding(class_uid));
  return prompt;
}

DeltaMetaToken delta_meta_token(const MetaNet& net, const EncoderWeights& enc,
                                const ToyImage& image, int class_id,
                                AugmentationKind kind, std::uint64_t aug_seed,
                                bool stop_gradient_original) {
  const ToyImage augmented = apply_augmentation(kind, image, aug_seed);
  const Tensor f_aug = enc.encode_image(augmented);
  const Tensor f_orig = enc.encode_image(image);
  const Tensor pi_aug = meta_token(net, f_aug).value;
  Tensor pi_orig = meta_token(net, f_orig).value;
  if (stop_gradient_original) pi_orig = detach(pi_orig);
  return DeltaMetaToken{sub(pi_aug, pi_orig), class_id, kind};
}

Tensor prompt_logits(ModelMode mode, const LearnableContext& ctx,
                     const MetaNet& net, const EncoderWeights& enc,
                     const Tensor& image_feature,
                     const std::vector<std::uint64_t>& class_uids, double tau) {
  if (class_uids.size() < 2) {
    throw ContractError("prompt_logits: need at least 2 classes");
  }
  if (!(tau > 0.0)) {
    throw ConfigError("prompt_logits: tau must be positive");
  }
  const MetaToken pi = mode == ModelMode::static_coop
                           ? zero_meta_token(enc.dims())
                           : meta_token(net, image_feature);
  std::vector<Tensor> sims;
  sims.reserve(class_uids.size());
  for (std::uint64_t uid : class_uids) {
    const std::vector<Tensor> prompt = conditional_prompt(ctx, pi, uid, enc);
    const Tensor text = enc.encode_text(prompt);
    sims.push_back(cosine_similarity(image_feature, text));
  }
  return scale(stack_scalars(sims), 1.0 / tau);
}

std::vector<double> probs_from_similarities(const std::vector<double>& sims,
                                            double tau) {
  if (!(tau > 0.0)) {
    throw ConfigError("probs_from_similarities: tau must be positive");
  }
  std::vector<double> logits(sims);
  for (double& v : logits) v /= tau;
  return softmax_values(logits);
}

std::vector<double> predict_proba(ModelMode mode, const LearnableContext& ctx,
                                  const MetaNet& net, const EncoderWeights& enc,
                                  const ToyImage& image,
                                  const std::vector<std::uint64_t>& class_uids,
                                  double tau) {
  TapeSuspend no_tape;  // prediction is read-only
  const Tensor f = enc.encode_image(image);
  const Tensor logits = prompt_logits(mode, ctx, net, enc, f, class_uids, tau);
  return softmax_values(logits.data());
}

}  // namespace aapl
