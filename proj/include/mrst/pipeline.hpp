#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mrst/checkpoint.hpp"
#include "mrst/defects.hpp"
#include "mrst/image.hpp"
#include "mrst/manifest.hpp"
#include "mrst/metrics.hpp"
#include "mrst/phantom.hpp"
#include "mrst/runconfig.hpp"

namespace mrst {

// Adam with bias correction and per-parameter step counts. Parameters whose
// gradient buffer is absent this step are skipped entirely: their values,
// moments and step count stay bitwise unchanged. That is what keeps bank
// rows of tasks outside the current batch frozen.
template <typename T>
class AdamOptimizer {
 public:
  AdamOptimizer(ParamStore<T>& store, const AdamConfig& cfg);

  // Applies one update from the accumulated gradients, then clears them.
  void step();

  int64_t steps_taken(const std::string& param_name) const;

 private:
  struct Slot {
    std::vector<T> m, v;
    int64_t t = 0;
  };

  ParamStore<T>* store_;
  AdamConfig cfg_;
  std::vector<Slot> slots_;  // parallel to store_->entries()
};

// One per-iteration record of the training loss log.
struct LossLogRow {
  int64_t step = 0;
  TaskId task = TaskId::denoise;
  double loss_d = 0, adv_g = 0, content_g = 0, total_g = 0;
};

std::string loss_log_csv(const std::vector<LossLogRow>& rows);

// --- in-memory training cores (file wrappers below build on these) --------

struct TaskPools {
  std::vector<Image> gt;
  std::vector<Image> defected;
};

struct CinTrainResult {
  ParamStore<float> generator;
  std::vector<ParamStore<float>> discriminators;  // aligned with task_bank
  std::vector<TaskId> task_bank;                  // bank row i serves task_bank[i]
  std::vector<LossLogRow> log;
  int64_t steps = 0;
};

// Unpaired stage: for each batch of task t, the generator synthesizes
// defects from clean input and the task's own discriminator scores them
// against real defected images; the content term anchors the synthesis to
// its input. Tasks are interleaved round-robin. task_bank defines the bank
// row order and must have exactly net.num_tasks entries covering every task
// that has data.
CinTrainResult train_cin_core(const std::map<TaskId, TaskPools>& pools,
                              const RunConfig& cfg,
                              const std::vector<TaskId>& task_bank,
                              uint64_t seed);

struct ImagePair {
  Image gt;
  Image defected;
  TaskId task = TaskId::denoise;
  bool synthetic = false;
};

struct RestoreTrainResult {
  ParamStore<float> generator;
  ParamStore<float> discriminator;
  std::vector<LossLogRow> log;
  int64_t steps = 0;
};

// Paired stage: conditional discriminator sees (candidate, defected input)
// channel pairs; generator loss adds the content term against ground truth.
RestoreTrainResult train_restore_core(const std::vector<ImagePair>& pairs,
                                      const RunConfig& cfg, uint64_t seed);

// Runs a defect generator checkpoint's forward pass for one task.
Image synthesize_defect(const ParamStore<float>& generator,
                        const NetConfig& net, int bank_index,
                        const Image& gt);

// Restoration forward pass; extents not divisible by 2^depth are handled by
// symmetric padding and cropping back. Output is clamped to canonical range.
Image restore_image(const ParamStore<float>& generator, const NetConfig& net,
                    const Image& defected);

// --- corpus synthesis ------------------------------------------------------

// Writes, per task: n ground-truth phantoms, floor(paired_fraction*n)
// defected counterparts recorded as pairs, and (n - pairs) unpaired defected
// images built from fresh phantoms that share no draw seed with any listed
// ground truth. Returns the saved manifest (out_dir/manifest.json).
DatasetManifest synth_corpus(const PhantomSpec& phantom,
                             const std::vector<DefectSpec>& defects, int n,
                             double paired_fraction, RngStream rng,
                             const std::filesystem::path& out_dir);

// --- file-level stage wrappers ----------------------------------------------

struct StageResult {
  ParamStore<float> generator;
  CheckpointMeta meta;
  std::filesystem::path checkpoint_path;
  std::filesystem::path loss_log_path;
  int64_t steps = 0;
};

// Trains on the manifest's unpaired pools for cfg.train.tasks; writes
// cin_generator.ckpt and cin_loss_log.csv into out_dir.
StageResult train_cin_gan(const DatasetManifest& manifest, const RunConfig& cfg,
                          uint64_t seed, const std::filesystem::path& out_dir);

// Trains on the manifest's pairs; writes restore_generator.ckpt and
// restore_loss_log.csv into out_dir.
StageResult train_restore_cgan(const DatasetManifest& manifest,
                               const RunConfig& cfg, uint64_t seed,
                               const std::filesystem::path& out_dir);

// Synthesizes n_per_task defected partners for sampled ground-truth images
// with a stage-1 checkpoint, writes them next to the corpus, and returns the
// manifest extended with synthetic=true pairs (saved to manifest_out inside
// the corpus directory).
DatasetManifest augment_dataset(const DatasetManifest& manifest,
                                const std::filesystem::path& cin_checkpoint,
                                int n_per_task, RngStream rng,
                                const std::filesystem::path& manifest_out);

// Restores each input PGM with a stage-2 checkpoint into out_dir (same file
// names) and writes a provenance.json sidecar (checkpoint hash + config).
std::vector<std::filesystem::path> restore_files(
    const std::vector<std::filesystem::path>& inputs,
    const std::filesystem::path& checkpoint,
    const std::filesystem::path& out_dir);

// --- ablation ----------------------------------------------------------------

struct AblationConfig {
  std::vector<int> pair_counts{4, 10, 25};  // ascending
  std::vector<std::string> arms{"real_only", "separate_gans", "cin_gan"};
  int repeats = 1;
  int augment_n = 8;  // synthetic pairs per task for the GAN arms
};

void validate(const AblationConfig& cfg);

// For every (pair_count, arm, repeat): trains on a subsample of real pairs
// (plus synthetic augmentation for the GAN arms) and scores the held-out
// tail of each task's pair list. Emits one CSV row per
// (arm, pair_count, repeat, task). Deterministic under seed.
void run_ablation(const AblationConfig& ab, const DatasetManifest& base,
                  const RunConfig& cfg, uint64_t seed,
                  const std::filesystem::path& out_csv);

}  // namespace mrst
