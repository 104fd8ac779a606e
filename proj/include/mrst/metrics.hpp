#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mrst/image.hpp"
#include "mrst/manifest.hpp"

namespace mrst {

// Peak signal-to-noise ratio in dB: 10*log10(max_val^2 / MSE). Identical
// images return +infinity (rendered as "inf" in CSV).
double psnr(const Image& a, const Image& b, double max_val);

// Mean structural similarity over valid 11x11 Gaussian windows (sigma 1.5),
// C1=(0.01*max_val)^2, C2=(0.03*max_val)^2. Images must be at least 11x11.
double ssim(const Image& a, const Image& b, double max_val);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

struct MetricRow {
  std::string image_id;
  TaskId task = TaskId::denoise;
  double psnr_before = 0, ssim_before = 0;
  double psnr_after = 0, ssim_after = 0;
};

struct ColumnStats {
  double mean = 0, median = 0, stddev = 0;  // population std
};

struct MetricReport {
  std::vector<MetricRow> rows;
  ColumnStats psnr_before, ssim_before, psnr_after, ssim_after;
};

// Recomputes the four aggregate columns from the rows.
void recompute_aggregates(MetricReport& report);

ColumnStats column_stats(const std::vector<double>& values);

// Scores every manifest pair before (defected vs gt) and after (restored vs
// gt) restoration. Restored files live in restored_dir under the defected
// image's file name. Images are compared on the [0,1] scale; pass max_val=1.
MetricReport evaluate_corpus(const DatasetManifest& manifest,
                             const std::filesystem::path& restored_dir,
                             double max_val = 1.0);

// Fixed-column CSV: image_id,task,psnr_before,ssim_before,psnr_after,
// ssim_after; six decimal places, "inf" sentinel, LF line endings.
std::string csv_string(const MetricReport& report);
void emit_csv(const MetricReport& report, const std::filesystem::path& path);

}  // namespace mrst
