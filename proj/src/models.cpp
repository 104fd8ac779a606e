#include "mrst/models.hpp"

#include <cmath>
#include <utility>

#include "mrst/errors.hpp"

namespace mrst {
namespace {

enum class NormKind { none, instance_affine, cin };

struct ConvSpec {
  std::string name;
  int in_ch = 0;
  int out_ch = 0;
  int stride = 1;
  NormKind norm = NormKind::none;
  bool upsample_before = false;  // nearest x2 before the conv
  int skip_level = -1;           // encoder level concatenated before the conv
};

// Encoder-decoder trunk shared by both generators. The restoration variant
// concatenates encoder activations into the decoder (U-Net skips); the defect
// variant keeps the straight bottleneck so the task banks carry the defect
// identity.
std::vector<ConvSpec> generator_specs(const NetConfig& cfg, bool with_skips,
                                      NormKind norm) {
  std::vector<ConvSpec> specs;
  specs.push_back({"stem", 1, level_channels(cfg, 0), 1, norm});
  for (int k = 1; k <= cfg.depth; ++k) {
    specs.push_back({"down" + std::to_string(k), level_channels(cfg, k - 1),
                     level_channels(cfg, k), 2, norm});
  }
  for (int k = cfg.depth; k >= 1; --k) {
    ConvSpec up{"up" + std::to_string(k), level_channels(cfg, k),
                level_channels(cfg, k - 1), 1, norm};
    up.upsample_before = true;
    if (with_skips) {
      up.skip_level = k - 1;
      up.in_ch += level_channels(cfg, k - 1);
    }
    specs.push_back(up);
  }
  specs.push_back({"head", level_channels(cfg, 0), 1, 1, NormKind::none});
  return specs;
}

std::vector<ConvSpec> discriminator_specs(const NetConfig& cfg,
                                          bool conditioned) {
  std::vector<ConvSpec> specs;
  int prev = conditioned ? 2 : 1;
  for (int l = 0; l < cfg.patch_disc_depth; ++l) {
    specs.push_back({"d" + std::to_string(l), prev, level_channels(cfg, l), 2,
                     NormKind::none});
    prev = level_channels(cfg, l);
  }
  specs.push_back({"head", prev, 1, 1, NormKind::none});
  return specs;
}

constexpr int kKernel = 3;

// He fan-in init for one [out,in,3,3] kernel plus zero bias; norm parameters
// start at the identity so every fresh CIN layer equals plain instance norm.
void add_conv_params(ParamStore<float>& store, const ConvSpec& spec,
                     int num_tasks, RngStream& rng) {
  const int64_t fan_in = int64_t(spec.in_ch) * kKernel * kKernel;
  const double stddev = std::sqrt(2.0 / double(fan_in));
  Shape wshape{spec.out_ch, spec.in_ch, kKernel, kKernel};
  auto w = Tensor<float>::zeros(wshape);
  for (auto& v : w.data()) v = float(rng.normal(0.0, stddev));
  store.add(spec.name + ".w", w, Partition::shared());
  store.add(spec.name + ".b", Tensor<float>::zeros({spec.out_ch}),
            Partition::shared());
  if (spec.norm == NormKind::instance_affine) {
    store.add(spec.name + ".gamma",
              Tensor<float>::full({spec.out_ch}, 1.0f), Partition::shared());
    store.add(spec.name + ".beta", Tensor<float>::zeros({spec.out_ch}),
              Partition::shared());
  } else if (spec.norm == NormKind::cin) {
    for (int t = 0; t < num_tasks; ++t) {
      store.add(spec.name + ".gamma.t" + std::to_string(t),
                Tensor<float>::full({spec.out_ch}, 1.0f),
                Partition::for_task(t));
      store.add(spec.name + ".beta.t" + std::to_string(t),
                Tensor<float>::zeros({spec.out_ch}), Partition::for_task(t));
    }
  }
}

ParamStore<float> init_from_specs(const std::vector<ConvSpec>& specs,
                                  int num_tasks, RngStream rng) {
  ParamStore<float> store;
  for (const auto& spec : specs) add_conv_params(store, spec, num_tasks, rng);
  return store;
}

int64_t count_from_specs(const std::vector<ConvSpec>& specs, int num_tasks) {
  int64_t total = 0;
  for (const auto& spec : specs) {
    total += int64_t(spec.out_ch) * spec.in_ch * kKernel * kKernel;  // w
    total += spec.out_ch;                                            // b
    if (spec.norm == NormKind::instance_affine) total += 2 * spec.out_ch;
    if (spec.norm == NormKind::cin) total += 2 * num_tasks * spec.out_ch;
  }
  return total;
}

template <typename T>
void check_divisible(const Tensor<T>& x, const NetConfig& cfg,
                     const char* net) {
  if (x.rank() != 4 || x.dim(1) != 1) {
    throw DimensionError(std::string(net) +
                         " expects a [N,1,H,W] input, got " +
                         shape_str(x.shape()));
  }
  const int mult = spatial_multiple(cfg);
  for (int axis : {2, 3}) {
    if (x.dim(axis) % mult != 0) {
      throw DimensionError(std::string(net) + ": " +
                           (axis == 2 ? "height " : "width ") +
                           std::to_string(x.dim(axis)) +
                           " is not divisible by " + std::to_string(mult));
    }
  }
}

// Norm + activation following a trunk conv.
template <typename T>
Tensor<T> conv_block(Tape<T>& tape, const ParamStore<T>& params,
                     const ConvSpec& spec, const Tensor<T>& x, int task,
                     int num_tasks) {
  Tensor<T> y = tape.conv2d(x, params.at(spec.name + ".w"),
                            params.at(spec.name + ".b"), spec.stride, 1);
  if (spec.norm == NormKind::instance_affine) {
    y = tape.cin(y, params.at(spec.name + ".gamma"),
                 params.at(spec.name + ".beta"));
  } else if (spec.norm == NormKind::cin) {
    y = cin_forward(tape, y, params, spec.name, task, num_tasks);
  }
  if (spec.norm != NormKind::none) y = tape.leaky_relu(y, T(0.2));
  return y;
}

template <typename T>
Tensor<T> generator_trunk(Tape<T>& tape, const ParamStore<T>& params,
                          const std::vector<ConvSpec>& specs,
                          const Tensor<T>& input, int task,
                          const NetConfig& cfg) {
  std::vector<Tensor<T>> encoder_acts;  // index = level, 0..depth-1
  Tensor<T> h = input;
  for (const auto& spec : specs) {
    if (spec.name == "head") {
      return tape.conv2d(h, params.at("head.w"), params.at("head.b"), 1, 1);
    }
    if (spec.upsample_before) h = tape.upsample_nearest(h, 2);
    if (spec.skip_level >= 0) {
      h = tape.concat_channels(h, encoder_acts[size_t(spec.skip_level)]);
    }
    h = conv_block(tape, params, spec, h, task, cfg.num_tasks);
    if (!spec.upsample_before && int(encoder_acts.size()) < cfg.depth) {
      encoder_acts.push_back(h);  // stem + all but the deepest down level
    }
  }
  throw StateError("generator trunk missing head layer");
}

}  // namespace

std::string to_string(TaskId task) {
  switch (task) {
    case TaskId::denoise: return "denoise";
    case TaskId::axial_inpaint: return "axial_inpaint";
    case TaskId::super_resolve: return "super_resolve";
  }
  throw ArgumentError("unknown task id " +
                      std::to_string(int(task)));
}

TaskId task_from_string(const std::string& name) {
  if (name == "denoise") return TaskId::denoise;
  if (name == "axial_inpaint") return TaskId::axial_inpaint;
  if (name == "super_resolve") return TaskId::super_resolve;
  throw ArgumentError("unknown task name '" + name +
                      "' (expected denoise, axial_inpaint or super_resolve)");
}

void validate(const NetConfig& cfg) {
  if (cfg.base_channels < 1)
    throw ConfigError("base_channels must be >= 1, got " +
                      std::to_string(cfg.base_channels));
  if (cfg.depth < 1)
    throw ConfigError("depth must be >= 1, got " + std::to_string(cfg.depth));
  if (cfg.num_tasks < 1)
    throw ConfigError("num_tasks must be >= 1, got " +
                      std::to_string(cfg.num_tasks));
  if (cfg.patch_disc_depth < 1)
    throw ConfigError("patch_disc_depth must be >= 1, got " +
                      std::to_string(cfg.patch_disc_depth));
}

int level_channels(const NetConfig& cfg, int level) {
  int64_t c = int64_t(cfg.base_channels) << level;
  return int(std::min<int64_t>(c, int64_t(cfg.base_channels) * 8));
}

ParamStore<float> defect_generator_init(const NetConfig& cfg, RngStream rng) {
  validate(cfg);
  return init_from_specs(generator_specs(cfg, false, NormKind::cin),
                         cfg.num_tasks, rng);
}

ParamStore<float> restore_generator_init(const NetConfig& cfg, RngStream rng) {
  validate(cfg);
  return init_from_specs(
      generator_specs(cfg, true, NormKind::instance_affine), cfg.num_tasks,
      rng);
}

ParamStore<float> discriminator_init(const NetConfig& cfg, bool conditioned,
                                     RngStream rng) {
  validate(cfg);
  return init_from_specs(discriminator_specs(cfg, conditioned), cfg.num_tasks,
                         rng);
}

int64_t defect_generator_param_count(const NetConfig& cfg) {
  return count_from_specs(generator_specs(cfg, false, NormKind::cin),
                          cfg.num_tasks);
}

int64_t restore_generator_param_count(const NetConfig& cfg) {
  return count_from_specs(
      generator_specs(cfg, true, NormKind::instance_affine), cfg.num_tasks);
}

int64_t discriminator_param_count(const NetConfig& cfg, bool conditioned) {
  return count_from_specs(discriminator_specs(cfg, conditioned),
                          cfg.num_tasks);
}

template <typename T>
Tensor<T> cin_forward(Tape<T>& tape, const Tensor<T>& x,
                      const ParamStore<T>& params, const std::string& prefix,
                      int task, int num_tasks) {
  if (task < 0 || task >= num_tasks) {
    throw ArgumentError("task index " + std::to_string(task) +
                        " out of range [0, " + std::to_string(num_tasks) +
                        ")");
  }
  const std::string suffix = ".t" + std::to_string(task);
  return tape.cin(x, params.at(prefix + ".gamma" + suffix),
                  params.at(prefix + ".beta" + suffix));
}

template <typename T>
Tensor<T> defect_generator_forward(Tape<T>& tape, const ParamStore<T>& params,
                                   const Tensor<T>& gt, int task,
                                   const NetConfig& cfg) {
  check_divisible(gt, cfg, "defect generator");
  if (task < 0 || task >= cfg.num_tasks) {
    throw ArgumentError("task index " + std::to_string(task) +
                        " out of range [0, " + std::to_string(cfg.num_tasks) +
                        ")");
  }
  auto specs = generator_specs(cfg, false, NormKind::cin);
  Tensor<T> head = generator_trunk(tape, params, specs, gt, task, cfg);
  // Residual head: the net learns the defect as a perturbation of the clean
  // input, so an untrained generator already stays near its input.
  return tape.tanh(tape.add(head, gt));
}

template <typename T>
Tensor<T> restore_generator_forward(Tape<T>& tape, const ParamStore<T>& params,
                                    const Tensor<T>& defected,
                                    const NetConfig& cfg) {
  check_divisible(defected, cfg, "restoration generator");
  auto specs = generator_specs(cfg, true, NormKind::instance_affine);
  Tensor<T> head =
      generator_trunk(tape, params, specs, defected, /*task=*/0, cfg);
  return tape.tanh(tape.add(head, defected));
}

template <typename T>
Tensor<T> discriminator_forward(Tape<T>& tape, const ParamStore<T>& params,
                                const Tensor<T>& image,
                                const Tensor<T>* condition,
                                const NetConfig& cfg) {
  if (image.rank() != 4 || image.dim(1) != 1) {
    throw DimensionError("discriminator expects a [N,1,H,W] input, got " +
                         shape_str(image.shape()));
  }
  Tensor<T> h = image;
  if (condition != nullptr) {
    h = tape.concat_channels(h, *condition);
  }
  auto specs = discriminator_specs(cfg, condition != nullptr);
  for (const auto& spec : specs) {
    h = tape.conv2d(h, params.at(spec.name + ".w"),
                    params.at(spec.name + ".b"), spec.stride, 1);
    if (spec.name != "head") h = tape.leaky_relu(h, T(0.2));
  }
  return h;
}

std::pair<int64_t, int64_t> discriminator_output_extents(const NetConfig& cfg,
                                                         int64_t h,
                                                         int64_t w) {
  for (int l = 0; l < cfg.patch_disc_depth; ++l) {
    h = (h + 2 - kKernel) / 2 + 1;
    w = (w + 2 - kKernel) / 2 + 1;
  }
  return {h, w};  // head conv is stride 1, pad 1: extent preserved
}

template Tensor<float> cin_forward(Tape<float>&, const Tensor<float>&,
                                   const ParamStore<float>&,
                                   const std::string&, int, int);
template Tensor<double> cin_forward(Tape<double>&, const Tensor<double>&,
                                    const ParamStore<double>&,
                                    const std::string&, int, int);
template Tensor<float> defect_generator_forward(Tape<float>&,
                                                const ParamStore<float>&,
                                                const Tensor<float>&, int,
                                                const NetConfig&);
template Tensor<double> defect_generator_forward(Tape<double>&,
                                                 const ParamStore<double>&,
                                                 const Tensor<double>&, int,
                                                 const NetConfig&);
template Tensor<float> restore_generator_forward(Tape<float>&,
                                                 const ParamStore<float>&,
                                                 const Tensor<float>&,
                                                 const NetConfig&);
template Tensor<double> restore_generator_forward(Tape<double>&,
                                                  const ParamStore<double>&,
                                                  const Tensor<double>&,
                                                  const NetConfig&);
template Tensor<float> discriminator_forward(Tape<float>&,
                                             const ParamStore<float>&,
                                             const Tensor<float>&,
                                             const Tensor<float>*,
                                             const NetConfig&);
template Tensor<double> discriminator_forward(Tape<double>&,
                                              const ParamStore<double>&,
                                              const Tensor<double>&,
                                              const Tensor<double>*,
                                              const NetConfig&);

}  // namespace mrst
