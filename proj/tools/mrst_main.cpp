// Command-line surface for the restoration pipeline. Progress goes to
// stderr; machine-readable output goes to files only. Exit codes: 0 success,
// 1 invalid input (arguments, config, data), 2 runtime failure.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mrst/errors.hpp"
#include "mrst/gradcheck.hpp"
#include "mrst/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mrst;

namespace {

struct GlobalArgs {
  uint64_t seed = 0;
  std::string config_path;
  std::string out;
};

RunConfig load_or_default(const GlobalArgs& g) {
  return g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
}

std::vector<TaskId> parse_tasks(const std::vector<std::string>& names) {
  std::vector<TaskId> tasks;
  for (const auto& n : names) tasks.push_back(task_from_string(n));
  return tasks;
}

fs::path require_out(const GlobalArgs& g, const char* what) {
  if (g.out.empty())
    throw ArgumentError(std::string("--out is required for ") + what);
  return g.out;
}

int run_synth(const GlobalArgs& g, const std::vector<std::string>& task_names,
              int n, double paired_fraction) {
  RunConfig cfg = load_or_default(g);
  const auto tasks =
      task_names.empty()
          ? std::vector<TaskId>{TaskId::denoise, TaskId::axial_inpaint,
                                TaskId::super_resolve}
          : parse_tasks(task_names);
  std::vector<DefectSpec> defects;
  for (TaskId t : tasks) {
    DefectSpec d = cfg.defect;
    d.task = t;
    defects.push_back(d);
  }
  const fs::path out_dir = require_out(g, "synth");
  RngStream rng(g.seed);
  auto manifest =
      synth_corpus(cfg.phantom, defects, n, paired_fraction, rng, out_dir);
  std::cerr << "synth: wrote " << manifest.gt_images.size() << " gt + "
            << manifest.defected_images.size() << " defected images, "
            << manifest.pairs.size() << " pairs -> "
            << (out_dir / "manifest.json").string() << "\n";
  return 0;
}

int run_train_cin(const GlobalArgs& g, const std::string& manifest_path) {
  RunConfig cfg = load_or_default(g);
  auto manifest = load_manifest(manifest_path);
  const fs::path out_dir = require_out(g, "train-cin");
  std::cerr << "train-cin: " << cfg.train.epochs << " epoch(s), batch "
            << cfg.train.batch_size << ", seed " << g.seed << "\n";
  auto result = train_cin_gan(manifest, cfg, g.seed, out_dir);
  std::cerr << "train-cin: " << result.steps << " generator steps -> "
            << result.checkpoint_path.string() << "\n";
  return 0;
}

int run_augment(const GlobalArgs& g, const std::string& manifest_path,
                const std::string& checkpoint, int n_per_task,
                const std::string& manifest_out) {
  auto manifest = load_manifest(manifest_path);
  RngStream rng(g.seed);
  auto augmented =
      augment_dataset(manifest, checkpoint, n_per_task, rng, manifest_out);
  std::cerr << "augment: manifest now lists " << augmented.pairs.size()
            << " pairs -> "
            << (manifest.root / fs::path(manifest_out).filename()).string()
            << "\n";
  return 0;
}

int run_train_restore(const GlobalArgs& g, const std::string& manifest_path) {
  RunConfig cfg = load_or_default(g);
  auto manifest = load_manifest(manifest_path);
  const fs::path out_dir = require_out(g, "train-restore");
  std::cerr << "train-restore: " << manifest.pairs.size() << " pairs, "
            << cfg.train.epochs << " epoch(s), seed " << g.seed << "\n";
  auto result = train_restore_cgan(manifest, cfg, g.seed, out_dir);
  std::cerr << "train-restore: " << result.steps << " generator steps -> "
            << result.checkpoint_path.string() << "\n";
  return 0;
}

int run_restore(const GlobalArgs& g, const std::string& checkpoint,
                const std::vector<std::string>& inputs) {
  const fs::path out_dir = require_out(g, "restore");
  std::vector<fs::path> paths(inputs.begin(), inputs.end());
  auto outputs = restore_files(paths, checkpoint, out_dir);
  std::cerr << "restore: wrote " << outputs.size() << " images to "
            << out_dir.string() << "\n";
  return 0;
}

int run_eval(const GlobalArgs& g, const std::string& manifest_path,
             const std::string& restored_dir) {
  auto manifest = load_manifest(manifest_path);
  auto report = evaluate_corpus(manifest, restored_dir, 1.0);
  const fs::path out_csv = require_out(g, "eval");
  emit_csv(report, out_csv);
  std::cerr << "eval: " << report.rows.size() << " rows -> "
            << out_csv.string() << " (mean psnr before "
            << report.psnr_before.mean << " dB, after "
            << report.psnr_after.mean << " dB)\n";
  return 0;
}

int run_ablation_cmd(const GlobalArgs& g, const std::string& manifest_path,
                     const std::vector<int>& pair_counts,
                     const std::vector<std::string>& arms, int repeats,
                     int augment_n) {
  RunConfig cfg = load_or_default(g);
  auto manifest = load_manifest(manifest_path);
  AblationConfig ab;
  if (!pair_counts.empty()) ab.pair_counts = pair_counts;
  if (!arms.empty()) ab.arms = arms;
  ab.repeats = repeats;
  ab.augment_n = augment_n;
  const fs::path out_csv = require_out(g, "ablation");
  std::cerr << "ablation: " << ab.arms.size() << " arms x "
            << ab.pair_counts.size() << " pair counts x " << ab.repeats
            << " repeats\n";
  run_ablation(ab, manifest, cfg, g.seed, out_csv);
  std::cerr << "ablation: wrote " << out_csv.string() << "\n";
  return 0;
}

int run_gradcheck(int instances, uint64_t seed) {
  auto results = run_gradient_suite(instances, seed);
  bool all_pass = true;
  int total_instances = 0;
  for (const auto& entry : results) {
    total_instances += entry.instances;
    all_pass = all_pass && entry.report.pass;
    std::fprintf(stderr, "%-18s %s  max rel err %.3e (tol %.0e, %d instances)\n",
                 entry.name.c_str(), entry.report.pass ? "PASS" : "FAIL",
                 entry.report.max_rel_err, entry.report.tolerance,
                 entry.instances);
  }
  std::fprintf(stderr, "gradient suite: %s (%zu checks, %d instances)\n",
               all_pass ? "PASS" : "FAIL", results.size(), total_instances);
  return all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage GAN pipeline for multi-defect image restoration"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  app.add_option("--seed", g.seed, "Pipeline seed (default 0)");
  app.add_option("--config", g.config_path, "JSON run configuration");
  app.add_option("--out", g.out, "Output directory or file");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a phantom corpus");
  std::vector<std::string> synth_tasks;
  int synth_n = 16;
  double synth_pf = 0.5;
  synth->add_option("--task", synth_tasks,
                    "Tasks to synthesize (repeatable; default all)");
  synth->add_option("--n", synth_n, "Ground-truth images per task");
  synth->add_option("--paired-fraction", synth_pf,
                    "Fraction of gt images given a real defected partner");

  // train-cin
  auto* train_cin = app.add_subcommand(
      "train-cin", "Train the stage-1 defect-synthesis network");
  std::string tc_manifest;
  train_cin->add_option("--manifest", tc_manifest, "Dataset manifest")
      ->required();

  // augment
  auto* augment = app.add_subcommand(
      "augment", "Synthesize paired training data with a stage-1 checkpoint");
  std::string au_manifest, au_checkpoint;
  std::string au_manifest_out = "manifest_augmented.json";
  int au_n = 8;
  augment->add_option("--manifest", au_manifest, "Dataset manifest")
      ->required();
  augment->add_option("--checkpoint", au_checkpoint, "Stage-1 checkpoint")
      ->required();
  augment->add_option("--n", au_n, "Synthetic pairs per task");
  augment->add_option("--manifest-out", au_manifest_out,
                      "File name of the augmented manifest");

  // train-restore
  auto* train_restore = app.add_subcommand(
      "train-restore", "Train the stage-2 restoration network");
  std::string tr_manifest;
  train_restore->add_option("--manifest", tr_manifest, "Dataset manifest")
      ->required();

  // restore
  auto* restore = app.add_subcommand("restore", "Restore PGM images");
  std::string re_checkpoint;
  std::vector<std::string> re_inputs;
  restore->add_option("--checkpoint", re_checkpoint, "Stage-2 checkpoint")
      ->required();
  restore->add_option("inputs", re_inputs, "PGM files to restore")
      ->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score restorations as CSV");
  std::string ev_manifest, ev_restored;
  eval_cmd->add_option("--manifest", ev_manifest, "Dataset manifest")
      ->required();
  eval_cmd->add_option("--restored", ev_restored, "Directory of restored PGMs")
      ->required();

  // ablation
  auto* ablation = app.add_subcommand(
      "ablation", "Run the augmentation-strategy comparison grid");
  std::string ab_manifest;
  std::vector<int> ab_pair_counts;
  std::vector<std::string> ab_arms;
  int ab_repeats = 3, ab_augment_n = 8;
  ablation->add_option("--manifest", ab_manifest, "Dataset manifest")
      ->required();
  ablation->add_option("--pair-counts", ab_pair_counts,
                       "Real-pair budgets (default 4 10 25)");
  ablation->add_option("--arms", ab_arms,
                       "Arms to run (real_only separate_gans cin_gan)");
  ablation->add_option("--repeats", ab_repeats, "Repeats per cell");
  ablation->add_option("--augment-n", ab_augment_n,
                       "Synthetic pairs per task in GAN arms");

  // gradcheck
  auto* gradcheck = app.add_subcommand(
      "gradcheck", "Finite-difference checks for every differentiable op");
  int gc_instances = 7;
  gradcheck->add_option("--instances", gc_instances,
                        "Random instances per operation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return run_synth(g, synth_tasks, synth_n, synth_pf);
    if (train_cin->parsed()) return run_train_cin(g, tc_manifest);
    if (augment->parsed())
      return run_augment(g, au_manifest, au_checkpoint, au_n, au_manifest_out);
    if (train_restore->parsed()) return run_train_restore(g, tr_manifest);
    if (restore->parsed()) return run_restore(g, re_checkpoint, re_inputs);
    if (eval_cmd->parsed()) return run_eval(g, ev_manifest, ev_restored);
    if (ablation->parsed())
      return run_ablation_cmd(g, ab_manifest, ab_pair_counts, ab_arms,
                              ab_repeats, ab_augment_n);
    if (gradcheck->parsed()) return run_gradcheck(gc_instances, g.seed);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
