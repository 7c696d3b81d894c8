#pragma once

#include "aapl/prompt.hpp"
#include "aapl/tensor.hpp"

namespace aapl {

/// The four delta tokens of one quad batch: two classes x two augmentations.
struct QuadDeltas {
  DeltaMetaToken d1a, d1b, d2a, d2b;

  /// ContractError unless classes and kinds are distinct and dims agree.
  void validate() const;
};

struct LossWeights {
  double alpha = 0.2;  // adversarial triplet scale
  double beta = 1.0;   // cross-entropy scale
  double margin = 0.2;

  void validate() const;
};

/// max(0, ||a - p|| - ||a - n|| + margin); hinge subgradient 0 at the kink.
Tensor triplet(const Tensor& anchor, const Tensor& positive,
               const Tensor& negative, double margin);

/// Two-anchor adversarial triplet over a quad: positives share the
/// augmentation, negatives share the class.
///   term 1: anchor d1a, positive d2a, negative d1b
///   term 2: anchor d2b, positive d1b, negative d2a
/// `swap_anchors` switches to the symmetric anchor pair (d1b, d2a); kept as a
/// hidden ablation, not the default.
Tensor adtriplet(const QuadDeltas& quad, double margin,
                 bool swap_anchors = false);

/// Class-clustering ablation: positive/negative roles exchanged, so deltas of
/// one class are pulled together across augmentations.
Tensor conventional_triplet_objective(const QuadDeltas& quad, double margin);

/// Cross-entropy of the labeled image against the class prompts. `label_index`
/// addresses class_uids; IndexError when the label is not among them.
Tensor classification_loss(ModelMode mode, const LearnableContext& ctx,
                           const MetaNet& net, const EncoderWeights& enc,
                           const ToyImage& labeled_image, int label_index,
                           const std::vector<std::uint64_t>& class_uids,
                           double tau);

/// alpha * adversarial + beta * cross-entropy.
Tensor total_loss(const Tensor& ce, const Tensor& adt, const LossWeights& w);

}  // namespace aapl
