#include "mrst/defects.hpp"

#include <cmath>

#include "mrst/errors.hpp"

namespace mrst {
namespace {

Image denoise_defect(const Image& gt, const DefectSpec& spec, RngStream& rng) {
  if (spec.gaussian_sigma == 0.0 && spec.poisson_peak == 0.0) {
    return gt;  // neutral parameters: bit-identical passthrough
  }
  Image out = gt;
  if (spec.poisson_peak > 0.0) {
    // Shot noise acts on photon counts, i.e. the [0,1] intensity scale.
    for (double& v : out.pixels()) {
      const double unit = std::clamp((v + 1.0) * 0.5, 0.0, 1.0);
      const double counts = double(rng.poisson(spec.poisson_peak * unit));
      v = (counts / spec.poisson_peak) * 2.0 - 1.0;
    }
  }
  if (spec.gaussian_sigma > 0.0) {
    for (double& v : out.pixels()) v += rng.normal(0.0, spec.gaussian_sigma);
  }
  out.clamp_canonical();
  return out;
}

Image inpaint_defect(const Image& gt, const DefectSpec& spec) {
  Image out = gt;
  const int64_t h = gt.height(), w = gt.width();
  const int d = spec.drop_every;
  for (int64_t r = 0; r < h; ++r) {
    if (r % d == 0) continue;  // kept row
    const int64_t below = (r / d) * d;
    const int64_t above = below + d;  // next kept row, may lie past the end
    for (int64_t c = 0; c < w; ++c) {
      if (spec.fill == RowFill::zero) {
        out.at(r, c) = 0.0;
      } else if (above < h) {
        const double t = double(r - below) / double(d);
        out.at(r, c) = (1.0 - t) * gt.at(below, c) + t * gt.at(above, c);
      } else {
        out.at(r, c) = gt.at(below, c);  // no kept row below: hold the last
      }
    }
  }
  return out;
}

Image super_resolve_defect(const Image& gt, const DefectSpec& spec) {
  const Image blurred = gaussian_blur(gt, spec.psf_sigma);
  const int f = spec.factor;
  const int64_t hd = (gt.height() + f - 1) / f;
  const int64_t wd = (gt.width() + f - 1) / f;
  Image dec(hd, wd);
  for (int64_t r = 0; r < hd; ++r)
    for (int64_t c = 0; c < wd; ++c) dec.at(r, c) = blurred.at(r * f, c * f);
  Image out(gt.height(), gt.width());
  for (int64_t r = 0; r < gt.height(); ++r)
    for (int64_t c = 0; c < gt.width(); ++c)
      out.at(r, c) = dec.at(std::min(r / f, hd - 1), std::min(c / f, wd - 1));
  return out;
}

}  // namespace

std::string to_string(RowFill fill) {
  switch (fill) {
    case RowFill::zero: return "zero";
    case RowFill::linear_interp: return "linear_interp";
  }
  throw ArgumentError("unknown row fill mode");
}

RowFill row_fill_from_string(const std::string& name) {
  if (name == "zero") return RowFill::zero;
  if (name == "linear_interp") return RowFill::linear_interp;
  throw ConfigError("unknown fill mode '" + name +
                    "' (expected zero or linear_interp)");
}

void validate(const DefectSpec& spec) {
  switch (spec.task) {
    case TaskId::denoise:
      if (!(spec.gaussian_sigma >= 0.0))
        throw ArgumentError("gaussian_sigma must be >= 0, got " +
                            std::to_string(spec.gaussian_sigma));
      if (!(spec.poisson_peak >= 0.0))
        throw ArgumentError("poisson_peak must be >= 0 (0 disables), got " +
                            std::to_string(spec.poisson_peak));
      return;
    case TaskId::axial_inpaint:
      if (spec.drop_every < 2)
        throw ArgumentError("drop_every must be >= 2, got " +
                            std::to_string(spec.drop_every));
      return;
    case TaskId::super_resolve:
      if (!(spec.psf_sigma > 0.0))
        throw ArgumentError("psf_sigma must be > 0, got " +
                            std::to_string(spec.psf_sigma));
      if (spec.factor < 2)
        throw ArgumentError("factor must be >= 2, got " +
                            std::to_string(spec.factor));
      return;
  }
  throw ArgumentError("unknown task id in defect spec");
}

Image apply_defect(const Image& gt, const DefectSpec& spec, RngStream& rng) {
  validate(spec);
  if (!gt.defined()) throw ArgumentError("apply_defect on an empty image");
  switch (spec.task) {
    case TaskId::denoise: return denoise_defect(gt, spec, rng);
    case TaskId::axial_inpaint: return inpaint_defect(gt, spec);
    case TaskId::super_resolve: return super_resolve_defect(gt, spec);
  }
  throw ArgumentError("unknown task id in defect spec");
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma == 0.0) return img;
  if (!(sigma > 0.0))
    throw ArgumentError("blur sigma must be >= 0, got " +
                        std::to_string(sigma));
  const int radius = int(std::ceil(3.0 * sigma));
  std::vector<double> kernel(size_t(2 * radius + 1));
  for (int i = -radius; i <= radius; ++i)
    kernel[size_t(i + radius)] = std::exp(-(double(i) * i) / (2 * sigma * sigma));

  const int64_t h = img.height(), w = img.width();
  // Separable passes; the kernel is renormalized over in-bounds taps so a
  // constant image blurs to itself exactly.
  Image tmp(h, w), out(h, w);
  for (int64_t r = 0; r < h; ++r) {
    for (int64_t c = 0; c < w; ++c) {
      double acc = 0.0, wsum = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int64_t cc = c + k;
        if (cc < 0 || cc >= w) continue;
        acc += kernel[size_t(k + radius)] * img.at(r, cc);
        wsum += kernel[size_t(k + radius)];
      }
      tmp.at(r, c) = acc / wsum;
    }
  }
  for (int64_t r = 0; r < h; ++r) {
    for (int64_t c = 0; c < w; ++c) {
      double acc = 0.0, wsum = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int64_t rr = r + k;
        if (rr < 0 || rr >= h) continue;
        acc += kernel[size_t(k + radius)] * tmp.at(rr, c);
        wsum += kernel[size_t(k + radius)];
      }
      out.at(r, c) = acc / wsum;
    }
  }
  return out;
}

}  // namespace mrst
