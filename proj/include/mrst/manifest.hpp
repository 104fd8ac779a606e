#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mrst/models.hpp"

namespace mrst {

inline constexpr int kManifestVersion = 1;

// One training pair; paths are relative to the manifest's directory.
struct PairEntry {
  std::string gt;
  std::string defected;
  bool synthetic = false;  // true when the defected side was generated
  TaskId task = TaskId::denoise;

  bool operator==(const PairEntry&) const = default;
};

// Dataset index: every image on disk, which ones form pairs, and the
// per-task unpaired pools used for stage-1 training. JSON on disk, saved in
// canonical (sorted) form so re-saving is stable.
struct DatasetManifest {
  int version = kManifestVersion;
  std::vector<TaskId> tasks;
  std::vector<std::string> gt_images;
  std::vector<std::string> defected_images;
  std::vector<PairEntry> pairs;
  std::map<TaskId, std::vector<std::string>> unpaired_gt;
  std::map<TaskId, std::vector<std::string>> unpaired_defected;
  // Phantom draw seed per image path; lets tests audit that unpaired
  // defected images come from phantoms disjoint from every gt.
  std::map<std::string, uint64_t> phantom_seeds;

  std::filesystem::path root;  // directory of the manifest file, not serialized

  std::filesystem::path resolve(const std::string& rel) const {
    return root / rel;
  }
};

// Image identifier used in reports: the file stem ("gt_0003.pgm" -> "gt_0003").
std::string image_id(const std::string& path);

// Sorts image lists and pairs into canonical order (in place).
void canonicalize(DatasetManifest& manifest);

// Structural checks: no duplicate paths, pairs reference listed images,
// unpaired pools reference listed images. Throws DataError.
void validate(const DatasetManifest& manifest);

// Load also verifies every referenced file exists (DataError listing all
// missing paths) and the version matches.
DatasetManifest load_manifest(const std::filesystem::path& path);

// Canonicalizes, validates, writes key-sorted JSON with trailing newline.
void save_manifest(DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace mrst
