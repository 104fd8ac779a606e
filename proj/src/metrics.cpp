#include "mrst/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "mrst/errors.hpp"
#include "mrst/pgm.hpp"

namespace mrst {
namespace {

void require_same_extents(const Image& a, const Image& b, const char* op) {
  if (!a.same_extents(b))
    throw DimensionError(std::string(op) + ": extent mismatch " +
                         std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + " vs " +
                         std::to_string(b.height()) + "x" +
                         std::to_string(b.width()));
}

std::vector<double> gaussian_window() {
  std::vector<double> w(kSsimWindow);
  const int half = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - half;
    w[size_t(i)] = std::exp(-(d * d) / (2 * kSsimSigma * kSsimSigma));
    sum += w[size_t(i)];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Horizontal then vertical weighted sums over valid positions.
std::vector<double> valid_filter(const std::vector<double>& img, int64_t h,
                                 int64_t w, const std::vector<double>& win) {
  const int64_t k = int64_t(win.size());
  const int64_t wo = w - k + 1, ho = h - k + 1;
  std::vector<double> tmp(size_t(h * wo));
  for (int64_t r = 0; r < h; ++r) {
    for (int64_t c = 0; c < wo; ++c) {
      double acc = 0.0;
      for (int64_t i = 0; i < k; ++i)
        acc += win[size_t(i)] * img[size_t(r * w + c + i)];
      tmp[size_t(r * wo + c)] = acc;
    }
  }
  std::vector<double> out(size_t(ho * wo));
  for (int64_t r = 0; r < ho; ++r) {
    for (int64_t c = 0; c < wo; ++c) {
      double acc = 0.0;
      for (int64_t i = 0; i < k; ++i)
        acc += win[size_t(i)] * tmp[size_t((r + i) * wo + c)];
      out[size_t(r * wo + c)] = acc;
    }
  }
  return out;
}

std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

double psnr(const Image& a, const Image& b, double max_val) {
  require_same_extents(a, b, "psnr");
  if (!(max_val > 0))
    throw ArgumentError("psnr max_val must be > 0, got " +
                        std::to_string(max_val));
  double se = 0.0;
  for (size_t i = 0; i < a.pixels().size(); ++i) {
    const double d = a.pixels()[i] - b.pixels()[i];
    se += d * d;
  }
  const double mse = se / double(a.numel());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_val * max_val / mse);
}

double ssim(const Image& a, const Image& b, double max_val) {
  require_same_extents(a, b, "ssim");
  if (!(max_val > 0))
    throw ArgumentError("ssim max_val must be > 0, got " +
                        std::to_string(max_val));
  const int64_t h = a.height(), w = a.width();
  if (h < kSsimWindow || w < kSsimWindow)
    throw DimensionError("ssim needs images of at least " +
                         std::to_string(kSsimWindow) + "x" +
                         std::to_string(kSsimWindow) + ", got " +
                         std::to_string(h) + "x" + std::to_string(w));

  const double c1 = (0.01 * max_val) * (0.01 * max_val);
  const double c2 = (0.03 * max_val) * (0.03 * max_val);
  const auto win = gaussian_window();

  const auto& pa = a.pixels();
  const auto& pb = b.pixels();
  std::vector<double> aa(pa.size()), bb(pa.size()), ab(pa.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    aa[i] = pa[i] * pa[i];
    bb[i] = pb[i] * pb[i];
    ab[i] = pa[i] * pb[i];
  }

  const auto mu_a = valid_filter(pa, h, w, win);
  const auto mu_b = valid_filter(pb, h, w, win);
  const auto e_aa = valid_filter(aa, h, w, win);
  const auto e_bb = valid_filter(bb, h, w, win);
  const auto e_ab = valid_filter(ab, h, w, win);

  double total = 0.0;
  for (size_t i = 0; i < mu_a.size(); ++i) {
    const double va = e_aa[i] - mu_a[i] * mu_a[i];
    const double vb = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    const double num = (2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2);
    const double den =
        (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
    total += num / den;
  }
  return total / double(mu_a.size());
}

ColumnStats column_stats(const std::vector<double>& values) {
  if (values.empty()) return {};
  ColumnStats s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / double(values.size());
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / double(n));
  return s;
}

void recompute_aggregates(MetricReport& report) {
  std::vector<double> pb, sb, pa, sa;
  for (const auto& row : report.rows) {
    pb.push_back(row.psnr_before);
    sb.push_back(row.ssim_before);
    pa.push_back(row.psnr_after);
    sa.push_back(row.ssim_after);
  }
  report.psnr_before = column_stats(pb);
  report.ssim_before = column_stats(sb);
  report.psnr_after = column_stats(pa);
  report.ssim_after = column_stats(sa);
}

MetricReport evaluate_corpus(const DatasetManifest& manifest,
                             const std::filesystem::path& restored_dir,
                             double max_val) {
  MetricReport report;
  for (const auto& pair : manifest.pairs) {
    const std::string id = image_id(pair.defected);
    const auto restored_path =
        restored_dir / std::filesystem::path(pair.defected).filename();
    if (!std::filesystem::exists(restored_path))
      throw IoError("no restored image for '" + id + "' at " +
                    restored_path.string());
    const Image gt = read_pgm(manifest.resolve(pair.gt));
    const Image defected = read_pgm(manifest.resolve(pair.defected));
    const Image restored = read_pgm(restored_path);

    // Score on the [0,1] scale so max_val=1 matches the file dynamic range.
    Image gt01 = gt, def01 = defected, res01 = restored;
    for (Image* img : {&gt01, &def01, &res01})
      for (double& v : img->pixels()) v = (v + 1.0) * 0.5;

    MetricRow row;
    row.image_id = id;
    row.task = pair.task;
    row.psnr_before = psnr(def01, gt01, max_val);
    row.ssim_before = ssim(def01, gt01, max_val);
    row.psnr_after = psnr(res01, gt01, max_val);
    row.ssim_after = ssim(res01, gt01, max_val);
    report.rows.push_back(std::move(row));
  }
  recompute_aggregates(report);
  return report;
}

std::string csv_string(const MetricReport& report) {
  std::string out =
      "image_id,task,psnr_before,ssim_before,psnr_after,ssim_after\n";
  for (const auto& row : report.rows) {
    out += row.image_id + "," + to_string(row.task) + "," +
           format_metric(row.psnr_before) + "," +
           format_metric(row.ssim_before) + "," +
           format_metric(row.psnr_after) + "," +
           format_metric(row.ssim_after) + "\n";
  }
  return out;
}

void emit_csv(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::string body = csv_string(report);
  out.write(body.data(), std::streamsize(body.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace mrst
