#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mrst/params.hpp"
#include "mrst/rng.hpp"
#include "mrst/tape.hpp"

namespace mrst {

// The three restoration tasks. Values index CIN parameter banks and defect
// simulators.
enum class TaskId { denoise = 0, axial_inpaint = 1, super_resolve = 2 };

inline constexpr int kNumTasks = 3;

std::string to_string(TaskId task);
TaskId task_from_string(const std::string& name);

struct NetConfig {
  int base_channels = 16;
  int depth = 3;  // number of stride-2 encoder levels
  int num_tasks = kNumTasks;
  int patch_disc_depth = 3;

  bool operator==(const NetConfig&) const = default;
};

void validate(const NetConfig& cfg);

// Channel width at encoder level k (0 = stem), capped at 8x base.
int level_channels(const NetConfig& cfg, int level);

// Smallest spatial extent the generators accept without padding.
inline int spatial_multiple(const NetConfig& cfg) { return 1 << cfg.depth; }

// --- parameter construction -------------------------------------------------
//
// Conv kernels are He fan-in scaled normals, biases zero, CIN banks start at
// the identity (gamma 1, beta 0). Deterministic under the stream's seed.

ParamStore<float> defect_generator_init(const NetConfig& cfg, RngStream rng);
ParamStore<float> restore_generator_init(const NetConfig& cfg, RngStream rng);
ParamStore<float> discriminator_init(const NetConfig& cfg, bool conditioned,
                                     RngStream rng);

// Closed-form parameter counts, asserted against the stores in tests.
int64_t defect_generator_param_count(const NetConfig& cfg);
int64_t restore_generator_param_count(const NetConfig& cfg);
int64_t discriminator_param_count(const NetConfig& cfg, bool conditioned);

// --- forward passes ----------------------------------------------------------

// Conditional-instance-norm layer helper: applies the bank row of `task`.
// Bank rows live in `params` as separate tensors ("<prefix>.gamma.t<i>"),
// so an optimizer step for one task cannot disturb another task's rows.
template <typename T>
Tensor<T> cin_forward(Tape<T>& tape, const Tensor<T>& x,
                      const ParamStore<T>& params, const std::string& prefix,
                      int task, int num_tasks);

// Defect synthesis generator (encoder-decoder, CIN after every conv, residual
// tanh head). Same spatial size out as in.
template <typename T>
Tensor<T> defect_generator_forward(Tape<T>& tape, const ParamStore<T>& params,
                                   const Tensor<T>& gt, int task,
                                   const NetConfig& cfg);

// Restoration generator (same trunk with skip connections, plain affine
// instance norm). H and W must be divisible by 2^depth.
template <typename T>
Tensor<T> restore_generator_forward(Tape<T>& tape, const ParamStore<T>& params,
                                    const Tensor<T>& defected,
                                    const NetConfig& cfg);

// Patch discriminator: returns a [N,1,h,w] logit map. `condition`, when
// present, is channel-concatenated with `image` (paired-stage conditioning).
template <typename T>
Tensor<T> discriminator_forward(Tape<T>& tape, const ParamStore<T>& params,
                                const Tensor<T>& image,
                                const Tensor<T>* condition,
                                const NetConfig& cfg);

// Logit-map extents for a given input size under the stride schedule.
std::pair<int64_t, int64_t> discriminator_output_extents(const NetConfig& cfg,
                                                         int64_t h, int64_t w);

}  // namespace mrst
