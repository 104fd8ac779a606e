#include "mrst/phantom.hpp"

#include <cmath>

#include "mrst/errors.hpp"

namespace mrst {
namespace {

// Intensity fields are built in [0, 1] (0 = background) and mapped to the
// canonical range at the end.
Image to_canonical(const std::vector<double>& field, int size) {
  Image img(size, size);
  for (size_t i = 0; i < field.size(); ++i)
    img.pixels()[i] = std::clamp(field[i], 0.0, 1.0) * 2.0 - 1.0;
  return img;
}

void splat_gaussian(std::vector<double>& field, int size, double cy, double cx,
                    double sy, double sx, double angle, double amplitude) {
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double reach = 3.0 * std::max(sy, sx);
  const int r0 = std::max(0, int(std::floor(cy - reach)));
  const int r1 = std::min(size - 1, int(std::ceil(cy + reach)));
  const int c0 = std::max(0, int(std::floor(cx - reach)));
  const int c1 = std::min(size - 1, int(std::ceil(cx + reach)));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double dy = r - cy, dx = c - cx;
      const double u = ca * dx + sa * dy;   // rotated frame
      const double v = -sa * dx + ca * dy;
      const double q = (u * u) / (2 * sx * sx) + (v * v) / (2 * sy * sy);
      field[size_t(r) * size + c] += amplitude * std::exp(-q);
    }
  }
}

std::vector<double> nuclei_blobs(const PhantomSpec& spec, RngStream& rng) {
  std::vector<double> field(size_t(spec.image_size) * spec.image_size, 0.0);
  const int count = int(std::lround(spec.density * 24.0));
  for (int i = 0; i < count; ++i) {
    const double cy = rng.uniform(2.0, spec.image_size - 2.0);
    const double cx = rng.uniform(2.0, spec.image_size - 2.0);
    const double sy = rng.uniform(1.5, 4.5);
    const double sx = rng.uniform(1.5, 4.5);
    const double angle = rng.uniform(0.0, 3.14159265358979323846);
    const double amp = rng.uniform(0.45, 0.95);
    splat_gaussian(field, spec.image_size, cy, cx, sy, sx, angle, amp);
  }
  return field;
}

std::vector<double> filaments(const PhantomSpec& spec, RngStream& rng) {
  std::vector<double> field(size_t(spec.image_size) * spec.image_size, 0.0);
  const int count = int(std::lround(spec.density * 12.0));
  for (int i = 0; i < count; ++i) {
    // Random walk with slowly drifting heading, Gaussian cross-profile.
    double y = rng.uniform(0.0, double(spec.image_size));
    double x = rng.uniform(0.0, double(spec.image_size));
    double heading = rng.uniform(0.0, 2 * 3.14159265358979323846);
    const double sigma = rng.uniform(0.7, 1.3);
    const double amp = rng.uniform(0.5, 0.9);
    const int steps = int(spec.image_size * rng.uniform(0.6, 1.4));
    for (int s = 0; s < steps; ++s) {
      heading += rng.normal(0.0, 0.12);
      y += std::sin(heading);
      x += std::cos(heading);
      if (y < -3 || x < -3 || y > spec.image_size + 3 ||
          x > spec.image_size + 3)
        break;
      splat_gaussian(field, spec.image_size, y, x, sigma, sigma, 0.0,
                     amp * 0.35);
    }
  }
  return field;
}

std::vector<double> embryo_texture(const PhantomSpec& spec, RngStream& rng) {
  const int size = spec.image_size;
  // Band-limited value noise: a coarse random lattice interpolated smoothly.
  const int cells = std::max(4, size / 8);
  std::vector<double> lattice(size_t(cells + 1) * (cells + 1));
  for (auto& v : lattice) v = rng.uniform();

  const double a = rng.uniform(0.30, 0.42) * size;  // ellipse semi-axes
  const double b = rng.uniform(0.30, 0.42) * size;
  const double tilt = rng.uniform(0.0, 3.14159265358979323846);
  const double ca = std::cos(tilt), sa = std::sin(tilt);
  const double cy = size / 2.0, cx = size / 2.0;

  std::vector<double> field(size_t(size) * size, 0.0);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double gy = double(r) / size * cells;
      const double gx = double(c) / size * cells;
      const int iy = int(gy), ix = int(gx);
      const double fy = gy - iy, fx = gx - ix;
      const double wy = fy * fy * (3 - 2 * fy);  // smoothstep
      const double wx = fx * fx * (3 - 2 * fx);
      auto lat = [&](int yy, int xx) {
        return lattice[size_t(yy) * (cells + 1) + xx];
      };
      const double noise =
          lat(iy, ix) * (1 - wy) * (1 - wx) + lat(iy, ix + 1) * (1 - wy) * wx +
          lat(iy + 1, ix) * wy * (1 - wx) + lat(iy + 1, ix + 1) * wy * wx;

      const double dy = r - cy, dx = c - cx;
      const double u = (ca * dx + sa * dy) / a;
      const double v = (-sa * dx + ca * dy) / b;
      const double rho = std::sqrt(u * u + v * v);
      // Soft elliptical boundary, ~2 px falloff.
      const double mask = 1.0 / (1.0 + std::exp((rho - 1.0) * size * 0.15));
      field[size_t(r) * size + c] =
          mask * spec.density * (0.35 + 0.55 * noise);
    }
  }
  return field;
}

}  // namespace

std::string to_string(PhantomKind kind) {
  switch (kind) {
    case PhantomKind::nuclei_blobs: return "nuclei_blobs";
    case PhantomKind::filaments: return "filaments";
    case PhantomKind::embryo_texture: return "embryo_texture";
  }
  throw ArgumentError("unknown phantom kind");
}

PhantomKind phantom_kind_from_string(const std::string& name) {
  if (name == "nuclei_blobs") return PhantomKind::nuclei_blobs;
  if (name == "filaments") return PhantomKind::filaments;
  if (name == "embryo_texture") return PhantomKind::embryo_texture;
  throw ConfigError(
      "unknown phantom kind '" + name +
      "' (expected nuclei_blobs, filaments or embryo_texture)");
}

void validate(const PhantomSpec& spec) {
  if (spec.image_size < 16)
    throw ArgumentError("phantom image_size must be >= 16, got " +
                        std::to_string(spec.image_size));
  if (!(spec.density >= 0.0))
    throw ArgumentError("phantom density must be >= 0, got " +
                        std::to_string(spec.density));
}

Image make_phantom(const PhantomSpec& spec, RngStream& rng) {
  validate(spec);
  std::vector<double> field;
  switch (spec.kind) {
    case PhantomKind::nuclei_blobs: field = nuclei_blobs(spec, rng); break;
    case PhantomKind::filaments: field = filaments(spec, rng); break;
    case PhantomKind::embryo_texture: field = embryo_texture(spec, rng); break;
  }
  return to_canonical(field, spec.image_size);
}

}  // namespace mrst
