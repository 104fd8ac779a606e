#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrst/tape.hpp"

namespace mrst {

enum class AdvKind { nonsaturating_bce, least_squares };
enum class ContentSpace { pixel_l1, feature_l1 };

std::string to_string(AdvKind kind);
std::string to_string(ContentSpace space);
AdvKind adv_kind_from_string(const std::string& name);
ContentSpace content_space_from_string(const std::string& name);

// Combined objective: total = adv + lambda * content.
struct LossConfig {
  double lambda = 10.0;
  AdvKind adv_kind = AdvKind::least_squares;
  ContentSpace content_space = ContentSpace::pixel_l1;
  uint64_t featnet_seed = 17;  // only consulted for feature_l1

  bool operator==(const LossConfig&) const = default;
};

void validate(const LossConfig& cfg);

// Frozen random conv stack standing in for a pretrained perceptual net:
// three stride-2 conv + leaky-relu layers with a tap after each. Weights are
// fixed at construction and never receive gradients; the same seed always
// reproduces the same features.
template <typename T>
class FeatureNet {
 public:
  static constexpr int kLayers = 3;

  explicit FeatureNet(uint64_t seed);

  uint64_t seed() const { return seed_; }
  std::vector<Tensor<T>> taps(Tape<T>& tape, const Tensor<T>& image) const;

 private:
  uint64_t seed_;
  std::vector<Tensor<T>> kernels_;
  std::vector<Tensor<T>> biases_;
};

// Discriminator objective over logit maps.
//   nonsaturating_bce: bce(real, 1) + bce(fake, 0)
//   least_squares:     mean((real - 1)^2) + mean(fake^2)
template <typename T>
Tensor<T> adv_loss_d(Tape<T>& tape, const Tensor<T>& real_logits,
                     const Tensor<T>& fake_logits, AdvKind kind);

// Generator objective: nonsaturating bce(fake, 1) or mean((fake - 1)^2).
template <typename T>
Tensor<T> adv_loss_g(Tape<T>& tape, const Tensor<T>& fake_logits,
                     AdvKind kind);

// Mean absolute difference, either on pixels or averaged over feature taps.
// featnet is required exactly when space == feature_l1.
template <typename T>
Tensor<T> content_loss(Tape<T>& tape, const Tensor<T>& output,
                       const Tensor<T>& target, ContentSpace space,
                       const FeatureNet<T>* featnet);

template <typename T>
Tensor<T> total_loss(Tape<T>& tape, const Tensor<T>& l_adv,
                     const Tensor<T>& l_content, const LossConfig& cfg);

}  // namespace mrst
