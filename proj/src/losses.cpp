#include "mrst/losses.hpp"

#include <cmath>

#include "mrst/errors.hpp"
#include "mrst/rng.hpp"

namespace mrst {
namespace {

// Constant tensor matching `like`, outside the gradient graph.
template <typename T>
Tensor<T> const_like(const Tensor<T>& like, T value) {
  return Tensor<T>::full(like.shape(), value);
}

constexpr int kFeatChannels[] = {8, 16, 32};

}  // namespace

std::string to_string(AdvKind kind) {
  switch (kind) {
    case AdvKind::nonsaturating_bce: return "nonsaturating_bce";
    case AdvKind::least_squares: return "least_squares";
  }
  throw ArgumentError("unknown adversarial loss kind");
}

std::string to_string(ContentSpace space) {
  switch (space) {
    case ContentSpace::pixel_l1: return "pixel_l1";
    case ContentSpace::feature_l1: return "feature_l1";
  }
  throw ArgumentError("unknown content space");
}

AdvKind adv_kind_from_string(const std::string& name) {
  if (name == "nonsaturating_bce") return AdvKind::nonsaturating_bce;
  if (name == "least_squares") return AdvKind::least_squares;
  throw ConfigError("unknown adv_kind '" + name +
                    "' (expected nonsaturating_bce or least_squares)");
}

ContentSpace content_space_from_string(const std::string& name) {
  if (name == "pixel_l1") return ContentSpace::pixel_l1;
  if (name == "feature_l1") return ContentSpace::feature_l1;
  throw ConfigError("unknown content_space '" + name +
                    "' (expected pixel_l1 or feature_l1)");
}

void validate(const LossConfig& cfg) {
  if (!(cfg.lambda >= 0.0)) {
    throw ConfigError("lambda must be >= 0, got " + std::to_string(cfg.lambda));
  }
}

template <typename T>
FeatureNet<T>::FeatureNet(uint64_t seed) : seed_(seed) {
  RngStream rng(seed);
  int in_ch = 1;
  for (int out_ch : kFeatChannels) {
    const double stddev = std::sqrt(2.0 / (in_ch * 9.0));
    auto w = Tensor<T>::zeros({out_ch, in_ch, 3, 3});
    for (auto& v : w.data()) v = T(rng.normal(0.0, stddev));
    kernels_.push_back(w);
    biases_.push_back(Tensor<T>::zeros({out_ch}));
    in_ch = out_ch;
  }
}

template <typename T>
std::vector<Tensor<T>> FeatureNet<T>::taps(Tape<T>& tape,
                                           const Tensor<T>& image) const {
  std::vector<Tensor<T>> out;
  Tensor<T> h = image;
  for (size_t l = 0; l < kernels_.size(); ++l) {
    h = tape.conv2d(h, kernels_[l], biases_[l], 2, 1);
    h = tape.leaky_relu(h, T(0.2));
    out.push_back(h);
  }
  return out;
}

template <typename T>
Tensor<T> adv_loss_d(Tape<T>& tape, const Tensor<T>& real_logits,
                     const Tensor<T>& fake_logits, AdvKind kind) {
  switch (kind) {
    case AdvKind::nonsaturating_bce:
      return tape.add(
          tape.bce_with_logits(real_logits, const_like(real_logits, T(1))),
          tape.bce_with_logits(fake_logits, const_like(fake_logits, T(0))));
    case AdvKind::least_squares:
      return tape.add(tape.mse(real_logits, const_like(real_logits, T(1))),
                      tape.mse(fake_logits, const_like(fake_logits, T(0))));
  }
  throw ArgumentError("unknown adversarial loss kind");
}

template <typename T>
Tensor<T> adv_loss_g(Tape<T>& tape, const Tensor<T>& fake_logits,
                     AdvKind kind) {
  switch (kind) {
    case AdvKind::nonsaturating_bce:
      return tape.bce_with_logits(fake_logits, const_like(fake_logits, T(1)));
    case AdvKind::least_squares:
      return tape.mse(fake_logits, const_like(fake_logits, T(1)));
  }
  throw ArgumentError("unknown adversarial loss kind");
}

template <typename T>
Tensor<T> content_loss(Tape<T>& tape, const Tensor<T>& output,
                       const Tensor<T>& target, ContentSpace space,
                       const FeatureNet<T>* featnet) {
  if (output.shape() != target.shape()) {
    throw DimensionError("content_loss shape mismatch: " +
                         shape_str(output.shape()) + " vs " +
                         shape_str(target.shape()));
  }
  if (space == ContentSpace::pixel_l1) {
    return tape.l1(output, target);
  }
  if (featnet == nullptr) {
    throw ArgumentError("content_loss with feature_l1 requires a FeatureNet");
  }
  auto out_taps = featnet->taps(tape, output);
  auto tgt_taps = featnet->taps(tape, target);
  Tensor<T> sum;
  for (size_t l = 0; l < out_taps.size(); ++l) {
    Tensor<T> term = tape.l1(out_taps[l], tgt_taps[l]);
    sum = sum.defined() ? tape.add(sum, term) : term;
  }
  return tape.scale(sum, T(1) / T(out_taps.size()));
}

template <typename T>
Tensor<T> total_loss(Tape<T>& tape, const Tensor<T>& l_adv,
                     const Tensor<T>& l_content, const LossConfig& cfg) {
  validate(cfg);
  return tape.add(l_adv, tape.scale(l_content, T(cfg.lambda)));
}

template class FeatureNet<float>;
template class FeatureNet<double>;
template Tensor<float> adv_loss_d(Tape<float>&, const Tensor<float>&,
                                  const Tensor<float>&, AdvKind);
template Tensor<double> adv_loss_d(Tape<double>&, const Tensor<double>&,
                                   const Tensor<double>&, AdvKind);
template Tensor<float> adv_loss_g(Tape<float>&, const Tensor<float>&, AdvKind);
template Tensor<double> adv_loss_g(Tape<double>&, const Tensor<double>&,
                                   AdvKind);
template Tensor<float> content_loss(Tape<float>&, const Tensor<float>&,
                                    const Tensor<float>&, ContentSpace,
                                    const FeatureNet<float>*);
template Tensor<double> content_loss(Tape<double>&, const Tensor<double>&,
                                     const Tensor<double>&, ContentSpace,
                                     const FeatureNet<double>*);
template Tensor<float> total_loss(Tape<float>&, const Tensor<float>&,
                                  const Tensor<float>&, const LossConfig&);
template Tensor<double> total_loss(Tape<double>&, const Tensor<double>&,
                                   const Tensor<double>&, const LossConfig&);

}  // namespace mrst
