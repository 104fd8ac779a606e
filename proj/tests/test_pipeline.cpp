// Training-loop and orchestration contracts: Adam update math and freezing,
// bank-row isolation under real optimizer steps, deterministic scheduling,
// corpus synthesis bookkeeping, stage wrappers, and the ablation grid.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "mrst/checkpoint.hpp"
#include "mrst/defects.hpp"
#include "mrst/manifest.hpp"
#include "mrst/metrics.hpp"
#include "mrst/models.hpp"
#include "mrst/pgm.hpp"
#include "mrst/phantom.hpp"
#include "mrst/pipeline.hpp"
#include "mrst/rng.hpp"
#include "mrst/runconfig.hpp"
#include "mrst/tape.hpp"

using namespace mrst;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("mrst_pipe_" + std::to_string(uint64_t(::getpid())) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// Small nets and images keep every training test in the millisecond range.
RunConfig tiny_config() {
  RunConfig cfg;
  cfg.net.base_channels = 4;
  cfg.net.depth = 1;
  cfg.net.num_tasks = kNumTasks;
  cfg.net.patch_disc_depth = 2;
  cfg.train.epochs = 1;
  cfg.train.batch_size = 2;
  cfg.train.adam.lr = 1e-3;
  cfg.phantom.image_size = 16;
  return cfg;
}

Image tiny_phantom(uint64_t key, int size = 16) {
  PhantomSpec spec;
  spec.image_size = size;
  spec.density = 0.5;
  RngStream rng(key);
  return make_phantom(spec, rng);
}

TaskPools make_pools(TaskId task, int n, uint64_t key) {
  DefectSpec d;
  d.task = task;
  TaskPools pools;
  for (int i = 0; i < n; ++i) {
    pools.gt.push_back(tiny_phantom(key + uint64_t(i)));
    RngStream drng(key + 1000 + uint64_t(i));
    pools.defected.push_back(
        apply_defect(tiny_phantom(key + 500 + uint64_t(i)), d, drng));
  }
  return pools;
}

bool tensors_bitwise_equal(const Tensor<float>& a, const Tensor<float>& b) {
  if (a.shape() != b.shape()) return false;
  auto da = a.data(), db = b.data();
  return std::equal(da.begin(), da.end(), db.begin());
}

bool images_equal(const Image& a, const Image& b) {
  return a.height() == b.height() && a.width() == b.width() &&
         std::equal(a.pixels().begin(), a.pixels().end(), b.pixels().begin());
}

bool in_canonical_range(const Image& img) {
  return std::all_of(img.pixels().begin(), img.pixels().end(),
                     [](double v) { return v >= -1.0 && v <= 1.0; });
}

}  // namespace

TEST_CASE("adam: first step matches the closed-form update") {
  ParamStore<float> store;
  store.add("p", Tensor<float>::from_data({3}, {1.0f, 2.0f, -3.0f}));

  AdamConfig adam;
  adam.lr = 0.01;
  AdamOptimizer<float> opt(store, adam);

  const std::vector<float> grads = {0.5f, -0.25f, 2.0f};
  store.at("p").accumulate_grad(grads);
  opt.step();

  // After one step the bias corrections cancel: m_hat = g, v_hat = g^2, so
  // the update is lr * g / (|g| + eps).
  const std::vector<float> before = {1.0f, 2.0f, -3.0f};
  auto data = store.at("p").data();
  for (size_t j = 0; j < grads.size(); ++j) {
    const double g = grads[j];
    const double expect =
        before[j] - adam.lr * g / (std::abs(g) + adam.eps);
    CHECK(data[j] == doctest::Approx(expect).epsilon(1e-6));
  }
  CHECK(opt.steps_taken("p") == 1);
  CHECK_FALSE(store.at("p").has_grad());  // consumed by the step
  CHECK_THROWS_AS((void)opt.steps_taken("nope"), StateError);
}

TEST_CASE("adam: hyperparameters are validated at construction") {
  ParamStore<float> store;
  store.add("p", Tensor<float>::zeros({2}));

  AdamConfig bad = AdamConfig{};
  bad.lr = 0.0;
  CHECK_THROWS_AS(AdamOptimizer<float>(store, bad), ConfigError);
  bad = AdamConfig{};
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(AdamOptimizer<float>(store, bad), ConfigError);
  bad = AdamConfig{};
  bad.beta2 = -0.1;
  CHECK_THROWS_AS(AdamOptimizer<float>(store, bad), ConfigError);
  bad = AdamConfig{};
  bad.eps = 0.0;
  CHECK_THROWS_AS(AdamOptimizer<float>(store, bad), ConfigError);
}

TEST_CASE("adam: parameters without gradients stay bitwise frozen") {
  ParamStore<float> store;
  store.add("a", Tensor<float>::from_data({2}, {1.0f, -1.0f}));
  store.add("b", Tensor<float>::from_data({2}, {0.25f, 0.75f}));
  const Tensor<float> b_before = store.at("b").clone();

  AdamOptimizer<float> opt(store, AdamConfig{});
  const std::vector<float> ga = {1.0f, 1.0f};
  store.at("a").accumulate_grad(ga);
  opt.step();
  opt.step();  // no gradients anywhere: a second call must be a no-op too

  CHECK_FALSE(tensors_bitwise_equal(store.at("a"),
                                    Tensor<float>::from_data({2}, {1.0f, -1.0f})));
  CHECK(tensors_bitwise_equal(store.at("b"), b_before));
  CHECK(opt.steps_taken("a") == 1);
  CHECK(opt.steps_taken("b") == 0);

  store.add("late", Tensor<float>::zeros({1}));
  CHECK_THROWS_AS(opt.step(), StateError);
}

TEST_CASE("adam: drives a quadratic to its minimum") {
  ParamStore<float> store;
  store.add("x", Tensor<float>::from_data({1}, {5.0f}));
  AdamConfig adam;
  adam.lr = 0.05;
  AdamOptimizer<float> opt(store, adam);

  const Tensor<float> target = Tensor<float>::from_data({1}, {3.0f});
  for (int i = 0; i < 400; ++i) {
    Tape<float> tape;
    auto loss = tape.mse(store.at("x"), target);
    tape.backward(loss);
    opt.step();
  }
  CHECK(double(store.at("x").data()[0]) == doctest::Approx(3.0).epsilon(0.02));
  CHECK(opt.steps_taken("x") == 400);
}

TEST_CASE("generator inference is deterministic and stays in range") {
  RunConfig cfg = tiny_config();
  const Image gt = tiny_phantom(7);

  const auto defect_gen = defect_generator_init(cfg.net, RngStream(11));
  const Image s1 = synthesize_defect(defect_gen, cfg.net, 1, gt);
  const Image s2 = synthesize_defect(defect_gen, cfg.net, 1, gt);
  CHECK(s1.height() == gt.height());
  CHECK(s1.width() == gt.width());
  CHECK(images_equal(s1, s2));
  CHECK(in_canonical_range(s1));

  const auto restore_gen = restore_generator_init(cfg.net, RngStream(12));
  const Image r1 = restore_image(restore_gen, cfg.net, gt);
  const Image r2 = restore_image(restore_gen, cfg.net, gt);
  CHECK(images_equal(r1, r2));
  CHECK(in_canonical_range(r1));
}

TEST_CASE("restoration pads extents the encoder cannot divide") {
  RunConfig cfg = tiny_config();
  cfg.net.depth = 2;  // spatial multiple 4
  const auto gen = restore_generator_init(cfg.net, RngStream(13));

  // 10x14 is not divisible by 4: the image is mirror-padded, restored, and
  // cropped back, so the caller sees the original extents.
  Image odd(10, 14);
  {
    RngStream rng(5);
    for (double& v : odd.pixels()) v = rng.uniform(-1.0, 1.0);
  }
  const Image out = restore_image(gen, cfg.net, odd);
  CHECK(out.height() == 10);
  CHECK(out.width() == 14);
  CHECK(in_canonical_range(out));
  CHECK(images_equal(out, restore_image(gen, cfg.net, odd)));

  // Divisible extents take the direct path: the wrapper must agree with a
  // plain forward pass plus canonical clamping.
  const Image even = tiny_phantom(9, 16);
  Tape<float> tape;
  auto direct = restore_generator_forward(
      tape, gen, image_to_tensor<float>(even), cfg.net);
  Image direct_img = image_from_tensor(direct);
  direct_img.clamp_canonical();
  CHECK(images_equal(restore_image(gen, cfg.net, even), direct_img));
}

TEST_CASE("unpaired stage: training one task leaves other bank rows frozen") {
  RunConfig cfg = tiny_config();
  cfg.train.tasks = {TaskId::axial_inpaint};
  const std::vector<TaskId> bank = {TaskId::denoise, TaskId::axial_inpaint,
                                    TaskId::super_resolve};
  std::map<TaskId, TaskPools> pools;
  pools[TaskId::axial_inpaint] = make_pools(TaskId::axial_inpaint, 4, 100);

  const uint64_t seed = 42;
  auto res = train_cin_core(pools, cfg, bank, seed);
  CHECK(res.steps == 2);  // ceil(4 / batch 2) batches, one epoch, one task

  // The trained generator must match a fresh init everywhere except the
  // trained task's bank rows and the shared trunk.
  const auto init = defect_generator_init(cfg.net, RngStream(seed).split(1));
  int foreign_rows = 0, trained_changed = 0, shared_changed = 0;
  for (const auto& e : res.generator.entries()) {
    const Tensor<float>& init_t = init.at(e.name);
    if (e.partition.is_shared()) {
      if (!tensors_bitwise_equal(e.tensor, init_t)) ++shared_changed;
    } else if (e.partition.task == 1) {
      if (!tensors_bitwise_equal(e.tensor, init_t)) ++trained_changed;
    } else {
      ++foreign_rows;
      CHECK(tensors_bitwise_equal(e.tensor, init_t));
    }
  }
  CHECK(foreign_rows > 0);
  CHECK(trained_changed > 0);
  CHECK(shared_changed > 0);

  // The freeze bracket around the generator update must leave every
  // discriminator trainable afterwards.
  for (const auto& disc : res.discriminators)
    for (const auto& e : disc.entries()) CHECK(e.tensor.requires_grad());
}

TEST_CASE("unpaired stage: round-robin scheduling and determinism") {
  RunConfig cfg = tiny_config();
  cfg.net.num_tasks = 2;
  cfg.train.tasks = {TaskId::denoise, TaskId::super_resolve};
  cfg.train.epochs = 2;
  const std::vector<TaskId> bank = {TaskId::denoise, TaskId::super_resolve};

  std::map<TaskId, TaskPools> pools;
  pools[TaskId::denoise] = make_pools(TaskId::denoise, 3, 200);
  pools[TaskId::super_resolve] = make_pools(TaskId::super_resolve, 3, 300);

  auto a = train_cin_core(pools, cfg, bank, 7);
  // 3 images at batch 2 give 2 batches per task, interleaved per batch index.
  REQUIRE(a.steps == 8);
  const std::vector<TaskId> expect = {
      TaskId::denoise, TaskId::super_resolve, TaskId::denoise,
      TaskId::super_resolve, TaskId::denoise, TaskId::super_resolve,
      TaskId::denoise, TaskId::super_resolve};
  for (size_t i = 0; i < expect.size(); ++i) {
    CHECK(a.log[i].task == expect[i]);
    CHECK(a.log[i].step == int64_t(i));
    CHECK(std::isfinite(a.log[i].total_g));
  }
  CHECK(a.task_bank == bank);
  CHECK(a.discriminators.size() == 2);

  auto b = train_cin_core(pools, cfg, bank, 7);
  REQUIRE(b.log.size() == a.log.size());
  for (size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].loss_d == b.log[i].loss_d);
    CHECK(a.log[i].adv_g == b.log[i].adv_g);
    CHECK(a.log[i].content_g == b.log[i].content_g);
    CHECK(a.log[i].total_g == b.log[i].total_g);
  }
  for (const auto& e : a.generator.entries())
    CHECK(tensors_bitwise_equal(e.tensor, b.generator.at(e.name)));
}

TEST_CASE("unpaired stage: tasks with fewer batches drop out of the rotation") {
  RunConfig cfg = tiny_config();
  cfg.net.num_tasks = 2;
  cfg.train.tasks = {TaskId::denoise, TaskId::super_resolve};
  const std::vector<TaskId> bank = {TaskId::denoise, TaskId::super_resolve};

  std::map<TaskId, TaskPools> pools;
  pools[TaskId::denoise] = make_pools(TaskId::denoise, 3, 400);
  pools[TaskId::super_resolve] = make_pools(TaskId::super_resolve, 1, 500);

  auto res = train_cin_core(pools, cfg, bank, 7);
  REQUIRE(res.steps == 3);
  CHECK(res.log[0].task == TaskId::denoise);
  CHECK(res.log[1].task == TaskId::super_resolve);
  CHECK(res.log[2].task == TaskId::denoise);
}

TEST_CASE("unpaired stage: configuration and data errors") {
  RunConfig cfg = tiny_config();
  std::map<TaskId, TaskPools> pools;
  pools[TaskId::denoise] = make_pools(TaskId::denoise, 2, 600);

  // Bank must have exactly num_tasks rows.
  cfg.train.tasks = {TaskId::denoise};
  CHECK_THROWS_AS(train_cin_core(pools, cfg, {TaskId::denoise}, 1),
                  ConfigError);

  // A trained task needs a bank row...
  cfg.net.num_tasks = 1;
  cfg.train.tasks = {TaskId::super_resolve};
  CHECK_THROWS_AS(train_cin_core(pools, cfg, {TaskId::denoise}, 1),
                  ConfigError);

  // ...and unpaired data.
  cfg.train.tasks = {TaskId::denoise};
  CHECK_THROWS_AS(
      train_cin_core(std::map<TaskId, TaskPools>{}, cfg, {TaskId::denoise}, 1),
      DataError);
  std::map<TaskId, TaskPools> empty_def;
  empty_def[TaskId::denoise].gt = pools[TaskId::denoise].gt;
  CHECK_THROWS_AS(train_cin_core(empty_def, cfg, {TaskId::denoise}, 1),
                  DataError);
}

TEST_CASE("paired stage: the content term improves on an easy task") {
  RunConfig cfg = tiny_config();
  cfg.train.epochs = 20;
  cfg.train.adam.lr = 2e-3;

  DefectSpec noise;
  noise.task = TaskId::denoise;
  noise.gaussian_sigma = 0.15;
  std::vector<ImagePair> pairs;
  for (int i = 0; i < 6; ++i) {
    ImagePair p;
    p.gt = tiny_phantom(700 + uint64_t(i));
    RngStream drng(800 + uint64_t(i));
    p.defected = apply_defect(p.gt, noise, drng);
    p.task = TaskId::denoise;
    pairs.push_back(std::move(p));
  }

  auto res = train_restore_core(pairs, cfg, 21);
  REQUIRE(res.steps == 60);  // 3 batches per epoch over 20 epochs
  auto mean_content = [&](size_t begin, size_t end) {
    double s = 0;
    for (size_t i = begin; i < end; ++i) s += res.log[i].content_g;
    return s / double(end - begin);
  };
  CHECK(mean_content(55, 60) < mean_content(0, 5));
  for (const auto& r : res.log) {
    CHECK(std::isfinite(r.total_g));
    CHECK(std::isfinite(r.loss_d));
  }
  for (const auto& e : res.discriminator.entries())
    CHECK(e.tensor.requires_grad());

  // Identical seeds give identical runs.
  auto res2 = train_restore_core(pairs, cfg, 21);
  CHECK(res2.log.back().total_g == res.log.back().total_g);
  for (const auto& e : res.generator.entries())
    CHECK(tensors_bitwise_equal(e.tensor, res2.generator.at(e.name)));

  CHECK_THROWS_AS(train_restore_core({}, cfg, 1), DataError);
}

TEST_CASE("corpus synthesis: counts, pools, and disjoint unpaired phantoms") {
  TempDir dir;
  PhantomSpec phantom;
  phantom.image_size = 16;
  DefectSpec dn, sr;
  dn.task = TaskId::denoise;
  sr.task = TaskId::super_resolve;

  auto m = synth_corpus(phantom, {dn, sr}, 6, 0.5, RngStream(99),
                        dir.path / "corpus");
  CHECK(m.tasks == std::vector<TaskId>{TaskId::denoise, TaskId::super_resolve});
  CHECK(m.gt_images.size() == 12);
  CHECK(m.defected_images.size() == 12);
  CHECK(m.pairs.size() == 6);  // floor(0.5 * 6) pairs per task
  for (TaskId t : m.tasks) {
    CHECK(m.unpaired_gt.at(t).size() == 3);
    CHECK(m.unpaired_defected.at(t).size() == 3);
  }
  for (const auto& p : m.pairs) CHECK_FALSE(p.synthetic);

  // Every listed image exists on disk and reads back at the right extents.
  for (const auto& rel : m.gt_images) CHECK(fs::exists(m.resolve(rel)));
  for (const auto& rel : m.defected_images) {
    REQUIRE(fs::exists(m.resolve(rel)));
    const Image img = read_pgm(m.resolve(rel));
    CHECK(img.height() == 16);
    CHECK(img.width() == 16);
  }

  // The unpaired defected images must come from phantoms that share no draw
  // seed with any listed ground truth: that is what makes the data unpaired.
  std::set<uint64_t> gt_seeds;
  for (const auto& rel : m.gt_images) {
    REQUIRE(m.phantom_seeds.count(rel) == 1);
    gt_seeds.insert(m.phantom_seeds.at(rel));
  }
  for (const auto& kv : m.unpaired_defected)
    for (const auto& rel : kv.second) {
      REQUIRE(m.phantom_seeds.count(rel) == 1);
      CHECK(gt_seeds.count(m.phantom_seeds.at(rel)) == 0);
    }

  // The manifest round-trips through its saved file.
  auto loaded = load_manifest(dir.path / "corpus" / "manifest.json");
  CHECK(loaded.gt_images.size() == m.gt_images.size());
  CHECK(loaded.pairs.size() == m.pairs.size());
  CHECK(loaded.unpaired_defected.at(TaskId::denoise).size() == 3);
}

TEST_CASE("corpus synthesis: paired-fraction edge cases and validation") {
  TempDir dir;
  PhantomSpec phantom;
  phantom.image_size = 16;
  DefectSpec dn;
  dn.task = TaskId::denoise;

  // floor() with a nudge keeps 0.3 * 10 from landing one pair short.
  auto m3 = synth_corpus(phantom, {dn}, 10, 0.3, RngStream(1), dir.path / "f3");
  CHECK(m3.pairs.size() == 3);
  CHECK(m3.unpaired_gt.at(TaskId::denoise).size() == 7);

  auto all = synth_corpus(phantom, {dn}, 4, 1.0, RngStream(2), dir.path / "f1");
  CHECK(all.pairs.size() == 4);
  CHECK(all.unpaired_gt.empty());
  CHECK(all.unpaired_defected.empty());

  auto none = synth_corpus(phantom, {dn}, 4, 0.0, RngStream(3), dir.path / "f0");
  CHECK(none.pairs.empty());
  CHECK(none.unpaired_gt.at(TaskId::denoise).size() == 4);
  RunConfig cfg = tiny_config();
  CHECK_THROWS_AS(train_restore_cgan(none, cfg, 1, dir.path / "s2"), DataError);

  CHECK_THROWS_AS(
      synth_corpus(phantom, {dn}, 0, 0.5, RngStream(4), dir.path / "bad"),
      ArgumentError);
  CHECK_THROWS_AS(
      synth_corpus(phantom, {dn}, 4, 1.5, RngStream(4), dir.path / "bad"),
      ArgumentError);
  CHECK_THROWS_AS(
      synth_corpus(phantom, {dn}, 4, -0.1, RngStream(4), dir.path / "bad"),
      ArgumentError);
  CHECK_THROWS_AS(
      synth_corpus(phantom, {}, 4, 0.5, RngStream(4), dir.path / "bad"),
      ArgumentError);
  CHECK_THROWS_AS(
      synth_corpus(phantom, {dn, dn}, 4, 0.5, RngStream(4), dir.path / "bad"),
      ArgumentError);
}

TEST_CASE("stage wrappers: checkpoints, loss logs, and augmentation") {
  TempDir dir;
  PhantomSpec phantom;
  phantom.image_size = 16;
  DefectSpec dn, sr;
  dn.task = TaskId::denoise;
  sr.task = TaskId::super_resolve;
  auto manifest = synth_corpus(phantom, {dn, sr}, 4, 0.5, RngStream(5),
                               dir.path / "corpus");

  RunConfig cfg = tiny_config();
  cfg.net.num_tasks = 2;
  cfg.train.tasks = {TaskId::denoise, TaskId::super_resolve};

  auto s1 = train_cin_gan(manifest, cfg, 77, dir.path / "stage1");
  CHECK(fs::exists(s1.checkpoint_path));
  CHECK(fs::exists(s1.loss_log_path));
  auto loaded = load_checkpoint(s1.checkpoint_path);
  CHECK(loaded.meta.kind == "cin_generator");
  CHECK(loaded.meta.tasks == cfg.train.tasks);
  CHECK(loaded.meta.step == s1.steps);
  CHECK(loaded.meta.seed == 77);
  const std::string log = read_bytes(s1.loss_log_path);
  CHECK(log.rfind("step,task,loss_d,adv_g,content_g,total_g\n", 0) == 0);
  CHECK(std::count(log.begin(), log.end(), '\n') ==
        std::ptrdiff_t(s1.steps) + 1);

  // Augmenting with zero requested pairs is the identity on the pair list.
  auto same = augment_dataset(manifest, s1.checkpoint_path, 0, RngStream(6),
                              "manifest_same.json");
  CHECK(same.pairs.size() == manifest.pairs.size());
  CHECK(fs::exists(dir.path / "corpus" / "manifest_same.json"));

  auto aug = augment_dataset(manifest, s1.checkpoint_path, 3, RngStream(6),
                             "manifest_aug.json");
  CHECK(aug.pairs.size() == manifest.pairs.size() + 3 * manifest.tasks.size());
  CHECK(aug.gt_images == manifest.gt_images);
  CHECK(aug.defected_images.size() ==
        manifest.defected_images.size() + 3 * manifest.tasks.size());
  // The saved manifest is canonicalized, so select the additions by flag.
  int synthetic = 0;
  for (const PairEntry& p : aug.pairs) {
    if (!p.synthetic) continue;
    REQUIRE(fs::exists(aug.resolve(p.defected)));
    const Image gt = read_pgm(aug.resolve(p.gt));
    const Image synth_img = read_pgm(aug.resolve(p.defected));
    CHECK_FALSE(images_equal(gt, synth_img));
    ++synthetic;
  }
  CHECK(synthetic == int(3 * manifest.tasks.size()));
  auto reloaded = load_manifest(dir.path / "corpus" / "manifest_aug.json");
  CHECK(reloaded.pairs.size() == aug.pairs.size());

  CHECK_THROWS_AS(augment_dataset(manifest, s1.checkpoint_path, -1,
                                  RngStream(6), "m.json"),
                  ArgumentError);

  // A single-task checkpoint cannot augment a two-task manifest.
  RunConfig one = tiny_config();
  one.net.num_tasks = 1;
  one.train.tasks = {TaskId::denoise};
  auto s1_one = train_cin_gan(manifest, one, 78, dir.path / "stage1_one");
  CHECK_THROWS_AS(augment_dataset(manifest, s1_one.checkpoint_path, 1,
                                  RngStream(6), "m.json"),
                  StateError);
}

TEST_CASE("restoration runs: byte-stable outputs and provenance sidecar") {
  TempDir dir;
  PhantomSpec phantom;
  phantom.image_size = 16;
  DefectSpec dn;
  dn.task = TaskId::denoise;
  auto manifest =
      synth_corpus(phantom, {dn}, 4, 1.0, RngStream(8), dir.path / "corpus");

  RunConfig cfg = tiny_config();
  cfg.train.tasks = {TaskId::denoise};
  auto s2 = train_restore_cgan(manifest, cfg, 79, dir.path / "stage2");
  auto ck = load_checkpoint(s2.checkpoint_path);
  CHECK(ck.meta.kind == "restore_generator");

  std::vector<fs::path> inputs;
  for (const auto& p : manifest.pairs)
    inputs.push_back(manifest.resolve(p.defected));
  inputs.resize(2);

  auto out1 = restore_files(inputs, s2.checkpoint_path, dir.path / "r1");
  auto out2 = restore_files(inputs, s2.checkpoint_path, dir.path / "r2");
  REQUIRE(out1.size() == 2);
  REQUIRE(out2.size() == 2);
  for (size_t i = 0; i < out1.size(); ++i) {
    CHECK(out1[i].filename() == inputs[i].filename());
    CHECK(read_bytes(out1[i]) == read_bytes(out2[i]));
  }

  // The files must match what the in-memory generator produces: the
  // checkpoint round trip is exact.
  const Image direct = restore_image(s2.generator, cfg.net,
                                     read_pgm(inputs[0]));
  const Image from_file = read_pgm(out1[0]);
  // Both sides go through the same 8-bit quantization on disk.
  write_pgm(direct, dir.path / "direct.pgm", 8);
  CHECK(images_equal(read_pgm(dir.path / "direct.pgm"), from_file));

  const std::string prov = read_bytes(dir.path / "r1" / "provenance.json");
  REQUIRE(!prov.empty());
  CHECK(prov.find(checkpoint_hash(s2.checkpoint_path)) != std::string::npos);
  CHECK(prov.find(inputs[0].filename().string()) != std::string::npos);
  CHECK(prov.find("restore_generator.ckpt") != std::string::npos);

  // Kind checks cut both ways.
  RunConfig s1cfg = tiny_config();
  s1cfg.net.num_tasks = 1;
  s1cfg.train.tasks = {TaskId::denoise};
  auto c1 = synth_corpus(phantom, {dn}, 4, 0.5, RngStream(9), dir.path / "c1");
  auto s1 = train_cin_gan(c1, s1cfg, 80, dir.path / "stage1");
  CHECK_THROWS_AS(restore_files(inputs, s1.checkpoint_path, dir.path / "r3"),
                  StateError);
  CHECK_THROWS_AS(augment_dataset(c1, s2.checkpoint_path, 1, RngStream(1),
                                  "m.json"),
                  StateError);
}

TEST_CASE("loss log csv renders a fixed schema") {
  std::vector<LossLogRow> rows;
  rows.push_back({3, TaskId::super_resolve, 0.5, 1.25, 0.125, 1.75});
  CHECK(loss_log_csv(rows) ==
        "step,task,loss_d,adv_g,content_g,total_g\n"
        "3,super_resolve,0.500000,1.250000,0.125000,1.750000\n");
  CHECK(loss_log_csv({}) == "step,task,loss_d,adv_g,content_g,total_g\n");
}

TEST_CASE("ablation: configuration validation") {
  AblationConfig ab;
  ab.repeats = 0;
  CHECK_THROWS_AS(validate(ab), ConfigError);
  ab = AblationConfig{};
  ab.pair_counts = {};
  CHECK_THROWS_AS(validate(ab), ConfigError);
  ab = AblationConfig{};
  ab.pair_counts = {3, 2};
  CHECK_THROWS_AS(validate(ab), ConfigError);
  ab = AblationConfig{};
  ab.pair_counts = {0, 2};
  CHECK_THROWS_AS(validate(ab), ConfigError);
  ab = AblationConfig{};
  ab.arms = {};
  CHECK_THROWS_AS(validate(ab), ConfigError);
  ab = AblationConfig{};
  ab.arms = {"real_only", "bogus"};
  CHECK_THROWS_AS(validate(ab), ConfigError);
  ab = AblationConfig{};
  ab.augment_n = -1;
  CHECK_THROWS_AS(validate(ab), ConfigError);
  CHECK_NOTHROW(validate(AblationConfig{}));
}

TEST_CASE("ablation: preflight rejects corpora that cannot cover the grid") {
  TempDir dir;
  PhantomSpec phantom;
  phantom.image_size = 16;
  DefectSpec dn;
  dn.task = TaskId::denoise;
  RunConfig cfg = tiny_config();
  cfg.train.tasks = {TaskId::denoise};

  AblationConfig ab;
  ab.pair_counts = {2};
  ab.repeats = 1;
  ab.augment_n = 1;

  // Two real pairs cannot serve pair_count 2 plus a held-out image.
  auto small =
      synth_corpus(phantom, {dn}, 4, 0.5, RngStream(10), dir.path / "small");
  CHECK_THROWS_AS(
      run_ablation(ab, small, cfg, 1, dir.path / "out.csv"), DataError);

  // Fully paired corpora have no unpaired pools for the GAN arms.
  auto paired =
      synth_corpus(phantom, {dn}, 5, 1.0, RngStream(11), dir.path / "paired");
  CHECK_THROWS_AS(
      run_ablation(ab, paired, cfg, 1, dir.path / "out.csv"), DataError);
  ab.arms = {"real_only"};
  CHECK_NOTHROW(run_ablation(ab, paired, cfg, 1, dir.path / "real_only.csv"));
}

TEST_CASE("ablation: full grid emits one deterministic row per cell") {
  TempDir dir;
  PhantomSpec phantom;
  phantom.image_size = 16;
  DefectSpec dn;
  dn.task = TaskId::denoise;
  RunConfig cfg = tiny_config();
  cfg.train.tasks = {TaskId::denoise};

  auto corpus =
      synth_corpus(phantom, {dn}, 8, 0.5, RngStream(12), dir.path / "corpus");

  AblationConfig ab;
  ab.pair_counts = {2};
  ab.repeats = 1;
  ab.augment_n = 2;

  run_ablation(ab, corpus, cfg, 31, dir.path / "a.csv");
  const std::string csv = read_bytes(dir.path / "a.csv");
  REQUIRE(!csv.empty());
  CHECK(csv.rfind("arm,pair_count,repeat,task,n_eval,ssim_before_mean,"
                  "ssim_after_mean,ssim_after_median,ssim_after_std,"
                  "psnr_before_mean,psnr_after_mean\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 arms
  CHECK(csv.find("nan") == std::string::npos);
  CHECK(csv.find("real_only,2,0,denoise,2,") != std::string::npos);
  CHECK(csv.find("separate_gans,2,0,denoise,2,") != std::string::npos);
  CHECK(csv.find("cin_gan,2,0,denoise,2,") != std::string::npos);

  run_ablation(ab, corpus, cfg, 31, dir.path / "b.csv");
  CHECK(read_bytes(dir.path / "b.csv") == csv);
}
