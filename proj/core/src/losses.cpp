#include "aapl/losses.hpp"

#include <cmath>

#include "aapl/error.hpp"

namespace aapl {

void QuadDeltas::validate() const {
  if (d1a.class_id != d1b.class_id || d2a.class_id != d2b.class_id) {
    throw ContractError("quad: per-class token pair has mismatched class ids");
  }
  if (d1a.class_id == d2a.class_id) {
    throw ContractError("quad: the two classes must be distinct");
  }
  if (d1a.kind != d2a.kind || d1b.kind != d2b.kind) {
    throw ContractError("quad: per-augmentation token pair has mismatched kinds");
  }
  if (d1a.kind == d1b.kind) {
    throw ContractError("quad: the two augmentations must be distinct");
  }
  const Shape& s = d1a.value.shape();
  if (!shape_equal(s, d1b.value.shape()) || !shape_equal(s, d2a.value.shape()) ||
      !shape_equal(s, d2b.value.shape())) {
    throw ShapeError("quad: delta tokens must share one dimension");
  }
}

void LossWeights::validate() const {
  if (alpha < 0.0 || beta < 0.0) {
    throw ConfigError("loss weights must be >= 0");
  }
  if (alpha + beta <= 0.0) {
    throw ConfigError("at least one of alpha, beta must be positive");
  }
  if (margin < 0.0) {
    throw ConfigError("margin must be >= 0");
  }
}

Tensor triplet(const Tensor& anchor, const Tensor& positive,
               const Tensor& negative, double margin) {
  if (margin < 0.0) throw ConfigError("triplet: margin must be >= 0");
  const Tensor d_pos = euclidean_distance(anchor, positive);
  const Tensor d_neg = euclidean_distance(anchor, negative);
  return relu(add_scalar(sub(d_pos, d_neg), margin));
}

Tensor adtriplet(const QuadDeltas& quad, double margin, bool swap_anchors) {
  quad.validate();
  if (!swap_anchors) {
    return add(triplet(quad.d1a.value, quad.d2a.value, quad.d1b.value, margin),
               triplet(quad.d2b.value, quad.d1b.value, quad.d2a.value, margin));
  }
  return add(triplet(quad.d1b.value, quad.d2b.value, quad.d1a.value, margin),
             triplet(quad.d2a.value, quad.d1a.value, quad.d2b.value, margin));
}

Tensor conventional_triplet_objective(const QuadDeltas& quad, double margin) {
  quad.validate();
  // Same anchors as the adversarial form, roles exchanged: the positive now
  // shares the class, the negative shares the augmentation.
  return add(triplet(quad.d1a.value, quad.d1b.value, quad.d2a.value, margin),
             triplet(quad.d2b.value, quad.d2a.value, quad.d1b.value, margin));
}

Tensor classification_loss(ModelMode mode, const LearnableContext& ctx,
                           const MetaNet& net, const EncoderWeights& enc,
                           const ToyImage& labeled_image, int label_index,
                           const std::vector<std::uint64_t>& class_uids,
                           double tau) {
  if (label_index < 0 ||
      label_index >= static_cast<int>(class_uids.size())) {
    throw IndexError("classification_loss: label index " +
                     std::to_string(label_index) + " not among the " +
                     std::to_string(class_uids.size()) + " class uids");
  }
  const Tensor f = enc.encode_image(labeled_image);
  const Tensor logits =
      prompt_logits(mode, ctx, net, enc, f, class_uids, tau);
  return softmax_cross_entropy(logits, label_index);
}

Tensor total_loss(const Tensor& ce, const Tensor& adt, const LossWeights& w) {
  w.validate();
  if (!std::isfinite(ce.value()) || !std::isfinite(adt.value())) {
    throw NumericError("total_loss: non-finite component");
  }
  return add(scale(adt, w.alpha), scale(ce, w.beta));
}

}  // namespace aapl
