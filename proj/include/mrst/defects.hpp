#pragma once

#include <string>

#include "mrst/image.hpp"
#include "mrst/models.hpp"
#include "mrst/rng.hpp"

namespace mrst {

enum class RowFill { zero, linear_interp };

std::string to_string(RowFill fill);
RowFill row_fill_from_string(const std::string& name);

// Ground-truth degradation recipe for one task. Only the parameter group of
// `task` is consulted.
struct DefectSpec {
  TaskId task = TaskId::denoise;

  // denoise: optional Poisson shot noise at the given photon peak, then
  // additive Gaussian read noise (canonical units), clamped to range.
  // sigma 0 with peak off is the identity.
  double gaussian_sigma = 0.1;
  double poisson_peak = 0.0;  // 0 = shot noise off; must be >= 0

  // axial_inpaint: rows r with r % drop_every != 0 are replaced.
  int drop_every = 2;
  RowFill fill = RowFill::zero;

  // super_resolve: Gaussian blur, decimate by factor, nearest-upsample back.
  double psf_sigma = 1.0;
  int factor = 2;

  bool operator==(const DefectSpec&) const = default;
};

void validate(const DefectSpec& spec);

// Applies the degradation for spec.task; output has the input's extents.
Image apply_defect(const Image& gt, const DefectSpec& spec, RngStream& rng);

// Truncated Gaussian smoothing (kernel radius ceil(3*sigma), per-pixel
// renormalized at borders), exposed for tests. sigma 0 is the identity.
Image gaussian_blur(const Image& img, double sigma);

}  // namespace mrst
