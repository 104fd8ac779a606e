#include "mrst/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "json.hpp"

#include "mrst/errors.hpp"
#include "mrst/losses.hpp"
#include "mrst/pgm.hpp"

namespace mrst {
namespace {

std::string format6(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string numbered_name(const std::string& prefix, TaskId task, int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", i);
  return prefix + "_" + to_string(task) + "_" + buf + ".pgm";
}

int bank_index(const std::vector<TaskId>& bank, TaskId t) {
  for (size_t i = 0; i < bank.size(); ++i)
    if (bank[i] == t) return int(i);
  return -1;
}

void check_finite(double v, const char* what, int64_t step, TaskId task) {
  if (!std::isfinite(v))
    throw EvaluationError("non-finite " + std::string(what) + " (" +
                          std::to_string(v) + ") at step " +
                          std::to_string(step) + ", task " + to_string(task));
}

std::vector<Image> gather(const std::vector<Image>& pool,
                          const std::vector<int>& order, size_t begin,
                          size_t count, size_t wrap) {
  std::vector<Image> out;
  out.reserve(count);
  for (size_t j = 0; j < count; ++j)
    out.push_back(pool[size_t(order[(begin + j) % wrap])]);
  return out;
}

// One adversarial iteration shared by both stages. The generator output is
// produced once on `tg`; the discriminator trains against a detached copy on
// its own tape, then scores the live output for the generator update while
// its parameters are frozen.
struct IterationLosses {
  double loss_d = 0, adv_g = 0, content_g = 0, total_g = 0;
};

IterationLosses gan_iteration(Tape<float>& tg, const Tensor<float>& output,
                              const Tensor<float>& content_target,
                              const Tensor<float>& real_images,
                              const Tensor<float>* condition,
                              ParamStore<float>& disc,
                              AdamOptimizer<float>& opt_d,
                              AdamOptimizer<float>& opt_g,
                              const RunConfig& cfg,
                              const FeatureNet<float>* featnet, int64_t step,
                              TaskId task) {
  IterationLosses out;

  const Tensor<float> detached = output.detached();
  Tape<float> td;
  auto real_logits =
      discriminator_forward(td, disc, real_images, condition, cfg.net);
  auto fake_logits =
      discriminator_forward(td, disc, detached, condition, cfg.net);
  auto ld = adv_loss_d(td, real_logits, fake_logits, cfg.loss.adv_kind);
  out.loss_d = double(ld.value());
  check_finite(out.loss_d, "discriminator loss", step, task);
  td.backward(ld);
  opt_d.step();

  disc.set_requires_grad(false);
  auto fake_for_g = discriminator_forward(tg, disc, output, condition, cfg.net);
  auto l_adv = adv_loss_g(tg, fake_for_g, cfg.loss.adv_kind);
  auto l_content =
      content_loss(tg, output, content_target, cfg.loss.content_space, featnet);
  auto l_total = total_loss(tg, l_adv, l_content, cfg.loss);
  out.adv_g = double(l_adv.value());
  out.content_g = double(l_content.value());
  out.total_g = double(l_total.value());
  check_finite(out.total_g, "generator loss", step, task);
  tg.backward(l_total);
  disc.set_requires_grad(true);
  opt_g.step();
  return out;
}

Image forward_to_image(const ParamStore<float>& generator,
                       const NetConfig& net, const Tensor<float>& input,
                       int bank, bool restoration) {
  Tape<float> tape;
  Tensor<float> out =
      restoration
          ? restore_generator_forward(tape, generator, input, net)
          : defect_generator_forward(tape, generator, input, bank, net);
  Image img = image_from_tensor(out);
  img.clamp_canonical();
  return img;
}

// Symmetric (edge-mirroring) pad on the bottom/right to reach target extents.
Image pad_symmetric(const Image& img, int64_t th, int64_t tw) {
  Image out(th, tw);
  for (int64_t r = 0; r < th; ++r) {
    const int64_t sr = r < img.height() ? r : 2 * img.height() - 1 - r;
    for (int64_t c = 0; c < tw; ++c) {
      const int64_t sc = c < img.width() ? c : 2 * img.width() - 1 - c;
      out.at(r, c) = img.at(sr, sc);
    }
  }
  return out;
}

std::map<TaskId, TaskPools> load_pools(const DatasetManifest& manifest) {
  std::map<TaskId, TaskPools> pools;
  for (const auto& [task, list] : manifest.unpaired_gt)
    for (const auto& rel : list)
      pools[task].gt.push_back(read_pgm(manifest.resolve(rel)));
  for (const auto& [task, list] : manifest.unpaired_defected)
    for (const auto& rel : list)
      pools[task].defected.push_back(read_pgm(manifest.resolve(rel)));
  return pools;
}

std::vector<ImagePair> load_pairs(const DatasetManifest& manifest) {
  std::vector<ImagePair> pairs;
  for (const auto& p : manifest.pairs) {
    ImagePair ip;
    ip.gt = read_pgm(manifest.resolve(p.gt));
    ip.defected = read_pgm(manifest.resolve(p.defected));
    ip.task = p.task;
    ip.synthetic = p.synthetic;
    pairs.push_back(std::move(ip));
  }
  return pairs;
}

void write_text(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(body.data(), std::streamsize(body.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace

template <typename T>
AdamOptimizer<T>::AdamOptimizer(ParamStore<T>& store, const AdamConfig& cfg)
    : store_(&store), cfg_(cfg) {
  if (!(cfg.lr > 0)) throw ConfigError("Adam lr must be > 0");
  if (!(cfg.beta1 >= 0 && cfg.beta1 < 1) || !(cfg.beta2 >= 0 && cfg.beta2 < 1))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(cfg.eps > 0)) throw ConfigError("Adam eps must be > 0");
  slots_.resize(store.size());
}

template <typename T>
void AdamOptimizer<T>::step() {
  auto entries = store_->entries();
  if (entries.size() != slots_.size())
    throw StateError("parameter store changed size under the optimizer");
  for (size_t i = 0; i < entries.size(); ++i) {
    Tensor<T>& p = entries[i].tensor;
    if (!p.has_grad()) continue;  // untouched this step: stays bitwise frozen
    Slot& slot = slots_[i];
    if (slot.m.empty()) {
      slot.m.assign(size_t(p.numel()), T(0));
      slot.v.assign(size_t(p.numel()), T(0));
    }
    slot.t += 1;
    const T b1 = T(cfg_.beta1), b2 = T(cfg_.beta2);
    const T corr1 = T(1) - T(std::pow(cfg_.beta1, double(slot.t)));
    const T corr2 = T(1) - T(std::pow(cfg_.beta2, double(slot.t)));
    const T lr = T(cfg_.lr), eps = T(cfg_.eps);
    auto grad = p.grad();
    auto data = p.data();
    for (size_t j = 0; j < data.size(); ++j) {
      const T g = grad[j];
      slot.m[j] = b1 * slot.m[j] + (T(1) - b1) * g;
      slot.v[j] = b2 * slot.v[j] + (T(1) - b2) * g * g;
      const T mhat = slot.m[j] / corr1;
      const T vhat = slot.v[j] / corr2;
      data[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    p.clear_grad();
  }
}

template <typename T>
int64_t AdamOptimizer<T>::steps_taken(const std::string& param_name) const {
  auto entries = store_->entries();
  for (size_t i = 0; i < entries.size(); ++i)
    if (entries[i].name == param_name) return slots_[i].t;
  throw StateError("missing parameter '" + param_name + "'");
}

template class AdamOptimizer<float>;
template class AdamOptimizer<double>;

std::string loss_log_csv(const std::vector<LossLogRow>& rows) {
  std::string out = "step,task,loss_d,adv_g,content_g,total_g\n";
  for (const auto& r : rows) {
    out += std::to_string(r.step) + "," + to_string(r.task) + "," +
           format6(r.loss_d) + "," + format6(r.adv_g) + "," +
           format6(r.content_g) + "," + format6(r.total_g) + "\n";
  }
  return out;
}

CinTrainResult train_cin_core(const std::map<TaskId, TaskPools>& pools,
                              const RunConfig& cfg,
                              const std::vector<TaskId>& task_bank,
                              uint64_t seed) {
  validate(cfg);
  if (int(task_bank.size()) != cfg.net.num_tasks)
    throw ConfigError("task bank lists " + std::to_string(task_bank.size()) +
                      " tasks but net.num_tasks is " +
                      std::to_string(cfg.net.num_tasks));
  for (TaskId t : cfg.train.tasks) {
    if (bank_index(task_bank, t) < 0)
      throw ConfigError("task " + to_string(t) + " has no bank row");
    auto it = pools.find(t);
    if (it == pools.end() || it->second.gt.empty() ||
        it->second.defected.empty())
      throw DataError("no unpaired data for task " + to_string(t));
  }

  RngStream root(seed);
  CinTrainResult res;
  res.task_bank = task_bank;
  res.generator = defect_generator_init(cfg.net, root.split(1));
  for (int i = 0; i < cfg.net.num_tasks; ++i)
    res.discriminators.push_back(
        discriminator_init(cfg.net, false, root.split(2 + uint64_t(i))));

  AdamOptimizer<float> opt_g(res.generator, cfg.train.adam);
  std::vector<AdamOptimizer<float>> opt_d;
  opt_d.reserve(res.discriminators.size());
  for (auto& d : res.discriminators) opt_d.emplace_back(d, cfg.train.adam);

  const FeatureNet<float> featnet(cfg.loss.featnet_seed);
  const FeatureNet<float>* fn =
      cfg.loss.content_space == ContentSpace::feature_l1 ? &featnet : nullptr;

  const size_t batch = size_t(cfg.train.batch_size);
  int64_t step = 0;
  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    struct Schedule {
      TaskId task;
      int bank;
      std::vector<int> gt_order, def_order;
      size_t batches;
    };
    std::vector<Schedule> sched;
    RngStream erng = root.split(1000).split(uint64_t(epoch));
    for (TaskId t : cfg.train.tasks) {
      const TaskPools& pool = pools.at(t);
      Schedule s;
      s.task = t;
      s.bank = bank_index(task_bank, t);
      s.gt_order.resize(pool.gt.size());
      std::iota(s.gt_order.begin(), s.gt_order.end(), 0);
      s.def_order.resize(pool.defected.size());
      std::iota(s.def_order.begin(), s.def_order.end(), 0);
      RngStream grng = erng.split(2 * uint64_t(int(t)));
      grng.shuffle(s.gt_order.begin(), s.gt_order.end());
      RngStream drng = erng.split(2 * uint64_t(int(t)) + 1);
      drng.shuffle(s.def_order.begin(), s.def_order.end());
      s.batches = (pool.gt.size() + batch - 1) / batch;
      sched.push_back(std::move(s));
    }
    size_t max_batches = 0;
    for (const auto& s : sched) max_batches = std::max(max_batches, s.batches);

    for (size_t b = 0; b < max_batches; ++b) {
      for (auto& s : sched) {
        if (b >= s.batches) continue;
        const TaskPools& pool = pools.at(s.task);
        const size_t begin = b * batch;
        const size_t count = std::min(batch, pool.gt.size() - begin);
        auto gt_batch = gather(pool.gt, s.gt_order, begin, count,
                               pool.gt.size());
        auto def_batch = gather(pool.defected, s.def_order, begin, count,
                                pool.defected.size());
        const auto X = images_to_batch<float>(gt_batch);
        const auto R = images_to_batch<float>(def_batch);

        Tape<float> tg;
        auto synth =
            defect_generator_forward(tg, res.generator, X, s.bank, cfg.net);
        auto losses = gan_iteration(
            tg, synth, X, R, nullptr, res.discriminators[size_t(s.bank)],
            opt_d[size_t(s.bank)], opt_g, cfg, fn, step, s.task);
        res.log.push_back(
            {step, s.task, losses.loss_d, losses.adv_g, losses.content_g,
             losses.total_g});
        ++step;
      }
    }
  }
  res.steps = step;
  return res;
}

RestoreTrainResult train_restore_core(const std::vector<ImagePair>& pairs,
                                      const RunConfig& cfg, uint64_t seed) {
  validate(cfg);
  if (pairs.empty()) throw DataError("no training pairs");

  RngStream root(seed);
  RestoreTrainResult res;
  res.generator = restore_generator_init(cfg.net, root.split(1));
  res.discriminator = discriminator_init(cfg.net, true, root.split(2));
  AdamOptimizer<float> opt_g(res.generator, cfg.train.adam);
  AdamOptimizer<float> opt_d(res.discriminator, cfg.train.adam);

  const FeatureNet<float> featnet(cfg.loss.featnet_seed);
  const FeatureNet<float>* fn =
      cfg.loss.content_space == ContentSpace::feature_l1 ? &featnet : nullptr;

  const size_t batch = size_t(cfg.train.batch_size);
  int64_t step = 0;
  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    std::vector<int> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    RngStream erng = root.split(1000).split(uint64_t(epoch));
    erng.shuffle(order.begin(), order.end());

    for (size_t begin = 0; begin < pairs.size(); begin += batch) {
      const size_t count = std::min(batch, pairs.size() - begin);
      std::vector<Image> def_batch, gt_batch;
      for (size_t j = 0; j < count; ++j) {
        const ImagePair& p = pairs[size_t(order[begin + j])];
        def_batch.push_back(p.defected);
        gt_batch.push_back(p.gt);
      }
      const auto X = images_to_batch<float>(def_batch);
      const auto Y = images_to_batch<float>(gt_batch);

      Tape<float> tg;
      auto restored = restore_generator_forward(tg, res.generator, X, cfg.net);
      auto losses =
          gan_iteration(tg, restored, Y, Y, &X, res.discriminator, opt_d,
                        opt_g, cfg, fn, step, pairs[size_t(order[begin])].task);
      res.log.push_back({step, pairs[size_t(order[begin])].task, losses.loss_d,
                         losses.adv_g, losses.content_g, losses.total_g});
      ++step;
    }
  }
  res.steps = step;
  return res;
}

Image synthesize_defect(const ParamStore<float>& generator,
                        const NetConfig& net, int bank, const Image& gt) {
  return forward_to_image(generator, net, image_to_tensor<float>(gt), bank,
                          false);
}

Image restore_image(const ParamStore<float>& generator, const NetConfig& net,
                    const Image& defected) {
  const int mult = spatial_multiple(net);
  const int64_t h = defected.height(), w = defected.width();
  const int64_t th = (h + mult - 1) / mult * mult;
  const int64_t tw = (w + mult - 1) / mult * mult;
  if (th == h && tw == w) {
    return forward_to_image(generator, net, image_to_tensor<float>(defected),
                            0, true);
  }
  const Image padded = pad_symmetric(defected, th, tw);
  Image out = forward_to_image(generator, net, image_to_tensor<float>(padded),
                               0, true);
  Image cropped(h, w);
  for (int64_t r = 0; r < h; ++r)
    for (int64_t c = 0; c < w; ++c) cropped.at(r, c) = out.at(r, c);
  return cropped;
}

DatasetManifest synth_corpus(const PhantomSpec& phantom,
                             const std::vector<DefectSpec>& defects, int n,
                             double paired_fraction, RngStream rng,
                             const std::filesystem::path& out_dir) {
  validate(phantom);
  if (defects.empty()) throw ArgumentError("synth_corpus needs a defect spec");
  if (n < 1) throw ArgumentError("corpus size must be >= 1, got " +
                                 std::to_string(n));
  if (!(paired_fraction >= 0.0 && paired_fraction <= 1.0))
    throw ArgumentError("paired_fraction must lie in [0,1], got " +
                        std::to_string(paired_fraction));
  {
    std::set<TaskId> seen;
    for (const auto& d : defects) {
      validate(d);
      if (!seen.insert(d.task).second)
        throw ArgumentError("duplicate defect spec for task " +
                            to_string(d.task));
    }
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec)
    throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  // Guards against 0.3*10 -> 2.999... landing one pair short.
  const int n_pairs = int(std::floor(paired_fraction * n + 1e-9));

  DatasetManifest m;
  m.root = out_dir;
  for (const DefectSpec& d : defects) {
    const TaskId t = d.task;
    m.tasks.push_back(t);
    RngStream trng = rng.split(uint64_t(int(t)));
    for (int i = 0; i < n; ++i) {
      // Even split keys draw listed ground truth; odd keys draw the disjoint
      // phantom set behind unpaired defected images.
      RngStream prng = trng.split(2 * uint64_t(i));
      const uint64_t gt_seed = prng.seed();
      const Image gt = make_phantom(phantom, prng);
      const std::string gt_name = numbered_name("gt", t, i);
      write_pgm(gt, out_dir / gt_name, 8);
      m.gt_images.push_back(gt_name);
      m.phantom_seeds[gt_name] = gt_seed;

      if (i < n_pairs) {
        RngStream drng = trng.split(1000000 + uint64_t(i));
        const Image def = apply_defect(gt, d, drng);
        const std::string def_name = numbered_name("def", t, i);
        write_pgm(def, out_dir / def_name, 8);
        m.defected_images.push_back(def_name);
        m.pairs.push_back({gt_name, def_name, false, t});
      } else {
        m.unpaired_gt[t].push_back(gt_name);
        RngStream urng = trng.split(2 * uint64_t(i) + 1);
        const uint64_t u_seed = urng.seed();
        const Image fresh = make_phantom(phantom, urng);
        RngStream udrng = trng.split(2000000 + uint64_t(i));
        const Image udef = apply_defect(fresh, d, udrng);
        const std::string udef_name = numbered_name("udef", t, i);
        write_pgm(udef, out_dir / udef_name, 8);
        m.defected_images.push_back(udef_name);
        m.unpaired_defected[t].push_back(udef_name);
        m.phantom_seeds[udef_name] = u_seed;
      }
    }
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

StageResult train_cin_gan(const DatasetManifest& manifest, const RunConfig& cfg,
                          uint64_t seed,
                          const std::filesystem::path& out_dir) {
  for (TaskId t : cfg.train.tasks) {
    if (!manifest.unpaired_gt.count(t) || !manifest.unpaired_defected.count(t))
      throw DataError("manifest has no unpaired pools for task " +
                      to_string(t));
  }
  const auto pools = load_pools(manifest);

  std::vector<TaskId> task_bank = cfg.train.tasks;
  if (int(task_bank.size()) != cfg.net.num_tasks) {
    // Banks default to the canonical task order when the trained subset
    // does not fill them (isolation tests train one task of three).
    if (cfg.net.num_tasks > kNumTasks)
      throw ConfigError("net.num_tasks " + std::to_string(cfg.net.num_tasks) +
                        " exceeds the known tasks; list train.tasks for every"
                        " bank row");
    task_bank.clear();
    for (int i = 0; i < cfg.net.num_tasks; ++i)
      task_bank.push_back(TaskId(i));
  }
  auto core = train_cin_core(pools, cfg, task_bank, seed);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec)
    throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  StageResult res;
  res.generator = std::move(core.generator);
  res.meta = CheckpointMeta{"cin_generator", cfg.net, cfg.loss, core.task_bank,
                            core.steps, seed};
  res.checkpoint_path = out_dir / "cin_generator.ckpt";
  res.loss_log_path = out_dir / "cin_loss_log.csv";
  res.steps = core.steps;
  save_checkpoint(res.checkpoint_path, res.generator, res.meta);
  write_text(res.loss_log_path, loss_log_csv(core.log));
  return res;
}

StageResult train_restore_cgan(const DatasetManifest& manifest,
                               const RunConfig& cfg, uint64_t seed,
                               const std::filesystem::path& out_dir) {
  if (manifest.pairs.empty())
    throw DataError("manifest has no training pairs");
  const auto pairs = load_pairs(manifest);
  auto core = train_restore_core(pairs, cfg, seed);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec)
    throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  StageResult res;
  res.generator = std::move(core.generator);
  res.meta = CheckpointMeta{"restore_generator", cfg.net, cfg.loss,
                            {},        core.steps, seed};
  res.checkpoint_path = out_dir / "restore_generator.ckpt";
  res.loss_log_path = out_dir / "restore_loss_log.csv";
  res.steps = core.steps;
  save_checkpoint(res.checkpoint_path, res.generator, res.meta);
  write_text(res.loss_log_path, loss_log_csv(core.log));
  return res;
}

DatasetManifest augment_dataset(const DatasetManifest& manifest,
                                const std::filesystem::path& cin_checkpoint,
                                int n_per_task, RngStream rng,
                                const std::filesystem::path& manifest_out) {
  if (n_per_task < 0)
    throw ArgumentError("n_per_task must be >= 0, got " +
                        std::to_string(n_per_task));
  auto loaded = load_checkpoint(cin_checkpoint);
  if (loaded.meta.kind != "cin_generator")
    throw StateError("checkpoint kind '" + loaded.meta.kind +
                     "' cannot synthesize defects (need cin_generator)");
  loaded.params.set_requires_grad(false);

  DatasetManifest out = manifest;
  if (n_per_task > 0) {
    if (manifest.gt_images.empty())
      throw DataError("manifest lists no ground-truth images to augment from");
    for (TaskId t : manifest.tasks) {
      const int bank = bank_index(loaded.meta.tasks, t);
      if (bank < 0)
        throw StateError("checkpoint has no bank for task " + to_string(t) +
                         " (trained tasks do not cover the manifest)");
      RngStream trng = rng.split(uint64_t(int(t)));
      std::vector<int> order(manifest.gt_images.size());
      std::iota(order.begin(), order.end(), 0);
      trng.shuffle(order.begin(), order.end());
      for (int i = 0; i < n_per_task; ++i) {
        const std::string& gt_rel =
            manifest.gt_images[size_t(order[size_t(i) % order.size()])];
        const Image gt = read_pgm(manifest.resolve(gt_rel));
        const Image synth =
            synthesize_defect(loaded.params, loaded.meta.net, bank, gt);
        const std::string name = numbered_name("synth", t, i);
        write_pgm(synth, manifest.root / name, 8);
        out.defected_images.push_back(name);
        out.pairs.push_back({gt_rel, name, true, t});
      }
    }
  }
  save_manifest(out, manifest.root / manifest_out.filename());
  return out;
}

std::vector<std::filesystem::path> restore_files(
    const std::vector<std::filesystem::path>& inputs,
    const std::filesystem::path& checkpoint,
    const std::filesystem::path& out_dir) {
  auto loaded = load_checkpoint(checkpoint);
  if (loaded.meta.kind != "restore_generator")
    throw StateError("checkpoint kind '" + loaded.meta.kind +
                     "' cannot restore images (need restore_generator)");
  loaded.params.set_requires_grad(false);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec)
    throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> outputs;
  nlohmann::json input_names = nlohmann::json::array();
  for (const auto& in_path : inputs) {
    const Image defected = read_pgm(in_path);
    const Image restored =
        restore_image(loaded.params, loaded.meta.net, defected);
    const auto out_path = out_dir / in_path.filename();
    write_pgm(restored, out_path, 8);
    outputs.push_back(out_path);
    input_names.push_back(in_path.filename().string());
  }

  nlohmann::json prov = {
      {"checkpoint", checkpoint.filename().string()},
      {"checkpoint_hash", checkpoint_hash(checkpoint)},
      {"inputs", input_names},
      {"net",
       {{"base_channels", loaded.meta.net.base_channels},
        {"depth", loaded.meta.net.depth},
        {"num_tasks", loaded.meta.net.num_tasks},
        {"patch_disc_depth", loaded.meta.net.patch_disc_depth}}},
      {"seed", loaded.meta.seed},
      {"step", loaded.meta.step}};
  write_text(out_dir / "provenance.json", prov.dump(2) + "\n");
  return outputs;
}

void validate(const AblationConfig& cfg) {
  if (cfg.repeats < 1)
    throw ConfigError("ablation repeats must be >= 1, got " +
                      std::to_string(cfg.repeats));
  if (cfg.pair_counts.empty())
    throw ConfigError("ablation pair_counts must be non-empty");
  if (!std::is_sorted(cfg.pair_counts.begin(), cfg.pair_counts.end()))
    throw ConfigError("ablation pair_counts must be sorted ascending");
  if (cfg.pair_counts.front() < 1)
    throw ConfigError("ablation pair_counts must be >= 1");
  if (cfg.arms.empty()) throw ConfigError("ablation arms must be non-empty");
  for (const auto& arm : cfg.arms)
    if (arm != "real_only" && arm != "separate_gans" && arm != "cin_gan")
      throw ConfigError("unknown ablation arm '" + arm + "'");
  if (cfg.augment_n < 0)
    throw ConfigError("ablation augment_n must be >= 0");
}

void run_ablation(const AblationConfig& ab, const DatasetManifest& base,
                  const RunConfig& cfg, uint64_t seed,
                  const std::filesystem::path& out_csv) {
  validate(ab);
  validate(cfg);
  const int max_pairs = ab.pair_counts.back();

  const bool needs_gan =
      std::any_of(ab.arms.begin(), ab.arms.end(),
                  [](const std::string& a) { return a != "real_only"; });

  // Everything is validated and loaded before any training starts.
  std::map<TaskId, std::vector<ImagePair>> real_pairs;
  for (const auto& p : base.pairs) {
    if (p.synthetic) continue;
    ImagePair ip;
    ip.gt = read_pgm(base.resolve(p.gt));
    ip.defected = read_pgm(base.resolve(p.defected));
    ip.task = p.task;
    real_pairs[p.task].push_back(std::move(ip));
  }
  for (TaskId t : base.tasks) {
    const size_t have =
        real_pairs.count(t) ? real_pairs.at(t).size() : 0;
    if (int(have) < max_pairs + 1)
      throw DataError("ablation needs at least " +
                      std::to_string(max_pairs + 1) + " real pairs for task " +
                      to_string(t) + ", manifest has " + std::to_string(have));
  }
  const auto pools = load_pools(base);
  if (needs_gan) {
    for (TaskId t : base.tasks) {
      auto it = pools.find(t);
      if (it == pools.end() || it->second.gt.empty() ||
          it->second.defected.empty())
        throw DataError("GAN arms need unpaired pools for task " +
                        to_string(t));
    }
  }

  RunConfig stage2_cfg = cfg;
  std::string csv =
      "arm,pair_count,repeat,task,n_eval,ssim_before_mean,ssim_after_mean,"
      "ssim_after_median,ssim_after_std,psnr_before_mean,psnr_after_mean\n";

  RngStream root(seed);
  for (int pc : ab.pair_counts) {
    for (size_t arm_i = 0; arm_i < ab.arms.size(); ++arm_i) {
      const std::string& arm = ab.arms[arm_i];
      for (int rep = 0; rep < ab.repeats; ++rep) {
        const uint64_t combo_key =
            (uint64_t(pc) << 32) ^ (uint64_t(arm_i) << 16) ^ uint64_t(rep);
        RngStream crng = root.split(combo_key);

        // Training subsample: pc of the first max_pairs pairs per task;
        // the tail past max_pairs stays held out for every combination.
        std::vector<ImagePair> train_pairs;
        for (TaskId t : base.tasks) {
          std::vector<int> order(static_cast<size_t>(max_pairs), 0);
          std::iota(order.begin(), order.end(), 0);
          RngStream srng = crng.split(10 + uint64_t(int(t)));
          srng.shuffle(order.begin(), order.end());
          for (int j = 0; j < pc; ++j)
            train_pairs.push_back(real_pairs.at(t)[size_t(order[size_t(j)])]);
        }

        // GAN arms add synthetic pairs from stage-1 generators.
        if (arm == "cin_gan") {
          RunConfig s1 = cfg;
          s1.net.num_tasks = int(base.tasks.size());
          s1.train.tasks = base.tasks;
          auto core = train_cin_core(pools, s1, base.tasks,
                                     crng.split(100).seed());
          for (TaskId t : base.tasks) {
            const int bank = bank_index(core.task_bank, t);
            RngStream arng = crng.split(200 + uint64_t(int(t)));
            const auto& gt_pool = pools.at(t).gt;
            for (int j = 0; j < ab.augment_n; ++j) {
              const Image& gt =
                  gt_pool[size_t(arng.uniform_int(int64_t(gt_pool.size())))];
              ImagePair ip;
              ip.gt = gt;
              ip.defected = synthesize_defect(core.generator, s1.net, bank, gt);
              ip.task = t;
              ip.synthetic = true;
              train_pairs.push_back(std::move(ip));
            }
          }
        } else if (arm == "separate_gans") {
          for (TaskId t : base.tasks) {
            RunConfig s1 = cfg;
            s1.net.num_tasks = 1;
            s1.train.tasks = {t};
            std::map<TaskId, TaskPools> single;
            single[t] = pools.at(t);
            auto core = train_cin_core(single, s1, {t},
                                       crng.split(300 + uint64_t(int(t))).seed());
            RngStream arng = crng.split(400 + uint64_t(int(t)));
            const auto& gt_pool = pools.at(t).gt;
            for (int j = 0; j < ab.augment_n; ++j) {
              const Image& gt =
                  gt_pool[size_t(arng.uniform_int(int64_t(gt_pool.size())))];
              ImagePair ip;
              ip.gt = gt;
              ip.defected = synthesize_defect(core.generator, s1.net, 0, gt);
              ip.task = t;
              ip.synthetic = true;
              train_pairs.push_back(std::move(ip));
            }
          }
        }

        auto trained =
            train_restore_core(train_pairs, stage2_cfg, crng.split(500).seed());

        for (TaskId t : base.tasks) {
          const auto& all = real_pairs.at(t);
          std::vector<double> sb, sa, pb, pa;
          for (size_t k = size_t(max_pairs); k < all.size(); ++k) {
            const ImagePair& hp = all[k];
            const Image restored =
                restore_image(trained.generator, cfg.net, hp.defected);
            Image gt01 = hp.gt, def01 = hp.defected, res01 = restored;
            for (Image* img : {&gt01, &def01, &res01})
              for (double& v : img->pixels()) v = (v + 1.0) * 0.5;
            pb.push_back(psnr(def01, gt01, 1.0));
            pa.push_back(psnr(res01, gt01, 1.0));
            sb.push_back(ssim(def01, gt01, 1.0));
            sa.push_back(ssim(res01, gt01, 1.0));
          }
          const ColumnStats ssim_after = column_stats(sa);
          csv += arm + "," + std::to_string(pc) + "," + std::to_string(rep) +
                 "," + to_string(t) + "," + std::to_string(sa.size()) + "," +
                 format6(column_stats(sb).mean) + "," +
                 format6(ssim_after.mean) + "," + format6(ssim_after.median) +
                 "," + format6(ssim_after.stddev) + "," +
                 format6(column_stats(pb).mean) + "," +
                 format6(column_stats(pa).mean) + "\n";
        }
      }
    }
  }
  write_text(out_csv, csv);
}

}  // namespace mrst
