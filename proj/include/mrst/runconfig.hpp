#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mrst/defects.hpp"
#include "mrst/losses.hpp"
#include "mrst/models.hpp"
#include "mrst/phantom.hpp"

namespace mrst {

inline constexpr int kConfigVersion = 1;

// Optimization hyperparameters shared by both training stages.
struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

// The JSON "train" section.
struct TrainParams {
  int epochs = 1;
  int batch_size = 4;
  AdamConfig adam;
  int checkpoint_every = 0;  // epochs between snapshots; 0 = final only
  std::vector<TaskId> tasks = {TaskId::denoise, TaskId::axial_inpaint,
                               TaskId::super_resolve};

  bool operator==(const TrainParams&) const = default;
};

// Everything a run can configure from one JSON file. Sections are optional
// in the file and default as constructed here; unknown keys anywhere are
// rejected, all offenders listed.
struct RunConfig {
  int version = kConfigVersion;
  NetConfig net;
  LossConfig loss;
  TrainParams train;
  PhantomSpec phantom;
  DefectSpec defect;  // task field is chosen per run, not per file
};

void validate(const RunConfig& cfg);

RunConfig load_config(const std::filesystem::path& path);

// Parses from a JSON string (the file loader and tests share this path).
RunConfig parse_config(const std::string& json_text, const std::string& origin);

std::string config_to_json(const RunConfig& cfg);

}  // namespace mrst
