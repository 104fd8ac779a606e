#pragma once

#include <functional>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mrst/tensor.hpp"

namespace mrst {

// Reverse-mode tape. Each op validates its inputs, computes the forward
// result eagerly and, when any input requires grad, records a backward
// closure. backward() replays the closures in reverse order, accumulating
// gradients as sums over all paths, then clears the tape; a second
// backward() on the consumed tape is a StateError.
//
// A tape and the tensors enrolled in it belong to one logical thread from
// forward through backward.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // --- convolution and resampling ---

  // Cross-correlation with zero padding. kernel is [Cout,Cin,kH,kW] with odd
  // kH/kW, bias is [Cout]. Output extent: (H + 2*pad - kH) / stride + 1.
  Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel,
                   const Tensor<T>& bias, int stride, int padding);

  // Replicates each pixel into a factor x factor block.
  Tensor<T> upsample_nearest(const Tensor<T>& input, int factor);

  // --- normalization ---

  // Per-(sample, channel) population mean over spatial positions; [N,C].
  Tensor<T> spatial_mean(const Tensor<T>& input);
  // Per-(sample, channel) sqrt(population variance + eps); [N,C].
  Tensor<T> spatial_std(const Tensor<T>& input);
  std::pair<Tensor<T>, Tensor<T>> instance_stats(const Tensor<T>& input) {
    return {spatial_mean(input), spatial_std(input)};
  }

  // Instance normalization with per-channel affine: gamma/beta are [C].
  // Conditional instance norm selects the bank row to pass here.
  Tensor<T> cin(const Tensor<T>& input, const Tensor<T>& gamma,
                const Tensor<T>& beta);

  // --- elementwise ---

  Tensor<T> leaky_relu(const Tensor<T>& input, T slope);
  Tensor<T> sigmoid(const Tensor<T>& input);
  Tensor<T> tanh(const Tensor<T>& input);

  // --- structural ---

  Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
  Tensor<T> scale(const Tensor<T>& a, T factor);
  Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

  // --- reductions / losses (scalar outputs, shape [1]) ---

  Tensor<T> reduce_mean(const Tensor<T>& input);
  Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b);
  Tensor<T> l1(const Tensor<T>& a, const Tensor<T>& b);
  // Numerically stable log-sum-exp form; targets must lie in [0,1].
  Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& targets);

  // Extension point: enroll a precomputed output with a custom backward
  // closure. The closure sees the output grad via the captured handles.
  Tensor<T> custom(const std::vector<Tensor<T>>& inputs, Tensor<T> output,
                   std::function<void()> backward_fn);

  // Reverse accumulation from a scalar loss produced through this tape.
  void backward(const Tensor<T>& loss);

  size_t node_count() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  static constexpr T kInstanceNormEps = T(1e-5);

 private:
  struct Node {
    std::function<void()> backward;
  };

  // Registers an op result. Called by every op exactly once.
  Tensor<T> enroll(Tensor<T> output, bool needs_grad,
                   std::function<void()> backward_fn);

  void fresh_graph_check();

  std::vector<Node> nodes_;
  std::unordered_set<const void*> outputs_;
  bool consumed_ = false;
};

// Engine epsilon used inside spatial_std / cin.
inline constexpr double kInstanceNormEpsilon = 1e-5;

}  // namespace mrst
