// Python bindings. Images cross the boundary as 2-D float64 numpy arrays in
// the canonical [-1, 1] range; run settings cross as the same JSON document
// the CLI accepts, so both front ends share one validated schema.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mrst/checkpoint.hpp"
#include "mrst/defects.hpp"
#include "mrst/errors.hpp"
#include "mrst/gradcheck.hpp"
#include "mrst/manifest.hpp"
#include "mrst/metrics.hpp"
#include "mrst/models.hpp"
#include "mrst/pgm.hpp"
#include "mrst/phantom.hpp"
#include "mrst/pipeline.hpp"
#include "mrst/rng.hpp"
#include "mrst/runconfig.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace mrst;

namespace {

Image array_to_image(const py::array_t<double, py::array::c_style |
                                                   py::array::forcecast>& arr) {
  if (arr.ndim() != 2)
    throw DimensionError("expected a 2-D array, got " +
                         std::to_string(arr.ndim()) + " dimension(s)");
  Image img(arr.shape(0), arr.shape(1));
  const double* src = arr.data();
  std::copy(src, src + img.numel(), img.pixels().begin());
  return img;
}

py::array_t<double> image_to_array(const Image& img) {
  py::array_t<double> arr({img.height(), img.width()});
  std::copy(img.pixels().begin(), img.pixels().end(), arr.mutable_data());
  return arr;
}

RunConfig config_from_json(const std::string& json_text) {
  if (json_text.empty()) return RunConfig{};
  return parse_config(json_text, "<python config>");
}

std::vector<TaskId> parse_task_names(const std::vector<std::string>& names) {
  std::vector<TaskId> tasks;
  for (const auto& n : names) tasks.push_back(task_from_string(n));
  return tasks;
}

py::dict checkpoint_info(const fs::path& path) {
  auto loaded = load_checkpoint(path);
  py::list tasks;
  for (TaskId t : loaded.meta.tasks) tasks.append(to_string(t));
  py::dict d;
  d["kind"] = loaded.meta.kind;
  d["step"] = loaded.meta.step;
  d["seed"] = loaded.meta.seed;
  d["tasks"] = tasks;
  d["base_channels"] = loaded.meta.net.base_channels;
  d["depth"] = loaded.meta.net.depth;
  d["num_tasks"] = loaded.meta.net.num_tasks;
  d["parameters"] = loaded.params.total_parameters();
  d["hash"] = checkpoint_hash(path);
  return d;
}

}  // namespace

PYBIND11_MODULE(_mrst, m) {
  m.doc() = "Two-stage GAN pipeline for multi-defect image restoration";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ArgumentError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const DimensionError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const FormatError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    } catch (const Error& e) {
      PyErr_SetString(PyExc_RuntimeError, e.what());
    }
  });

  // --- images and ground truth ------------------------------------------

  m.def(
      "make_phantom",
      [](const std::string& kind, int size, double density, uint64_t seed) {
        PhantomSpec spec;
        spec.kind = phantom_kind_from_string(kind);
        spec.image_size = size;
        spec.density = density;
        RngStream rng(seed);
        return image_to_array(make_phantom(spec, rng));
      },
      py::arg("kind") = "nuclei_blobs", py::arg("size") = 64,
      py::arg("density") = 0.5, py::arg("seed") = 0,
      "Procedural ground-truth image in the canonical [-1, 1] range.");

  m.def(
      "apply_defect",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>&
             img,
         const std::string& task, uint64_t seed,
         const std::string& config_json) {
        DefectSpec spec = config_from_json(config_json).defect;
        spec.task = task_from_string(task);
        RngStream rng(seed);
        return image_to_array(apply_defect(array_to_image(img), spec, rng));
      },
      py::arg("image"), py::arg("task"), py::arg("seed") = 0,
      py::arg("config_json") = "",
      "Degrades an image with the named task's defect model.");

  m.def(
      "read_pgm",
      [](const fs::path& path) { return image_to_array(read_pgm(path)); },
      py::arg("path"));
  m.def(
      "write_pgm",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>&
             img,
         const fs::path& path, int bits) {
        write_pgm(array_to_image(img), path, bits);
      },
      py::arg("image"), py::arg("path"), py::arg("bits") = 8);

  // --- metrics ------------------------------------------------------------

  m.def(
      "psnr",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>&
             a,
         const py::array_t<double, py::array::c_style | py::array::forcecast>&
             b,
         double max_val) {
        return psnr(array_to_image(a), array_to_image(b), max_val);
      },
      py::arg("a"), py::arg("b"), py::arg("max_val") = 2.0);
  m.def(
      "ssim",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>&
             a,
         const py::array_t<double, py::array::c_style | py::array::forcecast>&
             b,
         double max_val) {
        return ssim(array_to_image(a), array_to_image(b), max_val);
      },
      py::arg("a"), py::arg("b"), py::arg("max_val") = 2.0);

  // --- pipeline stages ------------------------------------------------------

  m.def(
      "synth_corpus",
      [](const fs::path& out_dir, int n, double paired_fraction, uint64_t seed,
         const std::vector<std::string>& tasks, const std::string& config_json) {
        RunConfig cfg = config_from_json(config_json);
        std::vector<DefectSpec> defects;
        for (TaskId t : parse_task_names(tasks)) {
          DefectSpec d = cfg.defect;
          d.task = t;
          defects.push_back(d);
        }
        RngStream rng(seed);
        synth_corpus(cfg.phantom, defects, n, paired_fraction, rng, out_dir);
        return (out_dir / "manifest.json").string();
      },
      py::arg("out_dir"), py::arg("n") = 20, py::arg("paired_fraction") = 0.5,
      py::arg("seed") = 0,
      py::arg("tasks") =
          std::vector<std::string>{"denoise", "axial_inpaint", "super_resolve"},
      py::arg("config_json") = "",
      "Writes a phantom corpus + manifest; returns the manifest path.");

  m.def(
      "train_cin",
      [](const fs::path& manifest_path, const fs::path& out_dir, uint64_t seed,
         const std::string& config_json) {
        auto manifest = load_manifest(manifest_path);
        auto res = train_cin_gan(manifest, config_from_json(config_json), seed,
                                 out_dir);
        return res.checkpoint_path.string();
      },
      py::arg("manifest"), py::arg("out_dir"), py::arg("seed") = 0,
      py::arg("config_json") = "",
      "Trains the task-conditioned defect synthesizer on unpaired pools.");

  m.def(
      "augment",
      [](const fs::path& manifest_path, const fs::path& checkpoint,
         int n_per_task, uint64_t seed, const std::string& manifest_out) {
        auto manifest = load_manifest(manifest_path);
        auto out = augment_dataset(manifest, checkpoint, n_per_task,
                                   RngStream(seed), manifest_out);
        return (out.root / manifest_out).string();
      },
      py::arg("manifest"), py::arg("checkpoint"), py::arg("n_per_task"),
      py::arg("seed") = 0, py::arg("manifest_out") = "manifest_aug.json",
      "Adds synthetic training pairs produced by a stage-1 checkpoint.");

  m.def(
      "train_restore",
      [](const fs::path& manifest_path, const fs::path& out_dir, uint64_t seed,
         const std::string& config_json) {
        auto manifest = load_manifest(manifest_path);
        auto res = train_restore_cgan(manifest, config_from_json(config_json),
                                      seed, out_dir);
        return res.checkpoint_path.string();
      },
      py::arg("manifest"), py::arg("out_dir"), py::arg("seed") = 0,
      py::arg("config_json") = "",
      "Trains the paired restoration model on the manifest's pairs.");

  m.def(
      "restore",
      [](const std::vector<fs::path>& inputs, const fs::path& checkpoint,
         const fs::path& out_dir) {
        std::vector<std::string> out;
        for (const auto& p : restore_files(inputs, checkpoint, out_dir))
          out.push_back(p.string());
        return out;
      },
      py::arg("inputs"), py::arg("checkpoint"), py::arg("out_dir"),
      "Restores image files with a stage-2 checkpoint.");

  m.def(
      "restore_array",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>&
             img,
         const fs::path& checkpoint) {
        auto loaded = load_checkpoint(checkpoint);
        if (loaded.meta.kind != "restore_generator")
          throw StateError("checkpoint kind '" + loaded.meta.kind +
                           "' cannot restore images (need restore_generator)");
        loaded.params.set_requires_grad(false);
        return image_to_array(
            restore_image(loaded.params, loaded.meta.net, array_to_image(img)));
      },
      py::arg("image"), py::arg("checkpoint"),
      "Restores one in-memory image with a stage-2 checkpoint.");

  m.def(
      "synthesize_defect_array",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>&
             img,
         const fs::path& checkpoint, const std::string& task) {
        auto loaded = load_checkpoint(checkpoint);
        if (loaded.meta.kind != "cin_generator")
          throw StateError("checkpoint kind '" + loaded.meta.kind +
                           "' cannot synthesize defects (need cin_generator)");
        loaded.params.set_requires_grad(false);
        const TaskId t = task_from_string(task);
        int bank = -1;
        for (size_t i = 0; i < loaded.meta.tasks.size(); ++i)
          if (loaded.meta.tasks[i] == t) bank = int(i);
        if (bank < 0)
          throw StateError("checkpoint has no bank for task " + task);
        return image_to_array(synthesize_defect(loaded.params, loaded.meta.net,
                                                bank, array_to_image(img)));
      },
      py::arg("image"), py::arg("checkpoint"), py::arg("task"),
      "Synthesizes a defected version of an image with a stage-1 checkpoint.");

  m.def(
      "evaluate",
      [](const fs::path& manifest_path, const fs::path& restored_dir) {
        auto manifest = load_manifest(manifest_path);
        return csv_string(evaluate_corpus(manifest, restored_dir));
      },
      py::arg("manifest"), py::arg("restored_dir"),
      "Scores every manifest pair before/after restoration; returns CSV.");

  m.def(
      "run_ablation",
      [](const fs::path& manifest_path, const fs::path& out_csv, uint64_t seed,
         const std::string& config_json, const std::vector<int>& pair_counts,
         const std::vector<std::string>& arms, int repeats, int augment_n) {
        AblationConfig ab;
        ab.pair_counts = pair_counts;
        ab.arms = arms;
        ab.repeats = repeats;
        ab.augment_n = augment_n;
        auto manifest = load_manifest(manifest_path);
        run_ablation(ab, manifest, config_from_json(config_json), seed,
                     out_csv);
        return out_csv.string();
      },
      py::arg("manifest"), py::arg("out_csv"), py::arg("seed") = 0,
      py::arg("config_json") = "",
      py::arg("pair_counts") = std::vector<int>{4, 10, 25},
      py::arg("arms") =
          std::vector<std::string>{"real_only", "separate_gans", "cin_gan"},
      py::arg("repeats") = 1, py::arg("augment_n") = 8,
      "Data-budget ablation over training arms; writes one CSV row per cell.");

  // --- verification helpers -------------------------------------------------

  m.def(
      "gradient_suite",
      [](int instances_per_op, uint64_t seed) {
        py::list out;
        for (const auto& e : run_gradient_suite(instances_per_op, seed)) {
          py::dict d;
          d["name"] = e.name;
          d["instances"] = e.instances;
          d["max_rel_err"] = e.report.max_rel_err;
          d["tolerance"] = e.report.tolerance;
          d["passed"] = e.report.pass;
          out.append(d);
        }
        return out;
      },
      py::arg("instances_per_op") = 3, py::arg("seed") = 0,
      "Finite-difference checks for every differentiable operation.");

  m.def("checkpoint_info", &checkpoint_info, py::arg("path"),
        "Metadata, parameter count, and content hash of a checkpoint.");

  m.def(
      "default_config",
      []() { return config_to_json(RunConfig{}); },
      "The default run configuration as a JSON document.");
}
