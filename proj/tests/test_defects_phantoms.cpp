// Degradation simulators and procedural ground-truth generators: identity
// at neutral parameters, hand-derived row patterns, noise statistics, PSNR
// severity ladders, and phantom density/determinism properties.

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mrst/defects.hpp"
#include "mrst/metrics.hpp"
#include "mrst/phantom.hpp"
#include "mrst/rng.hpp"

using namespace mrst;

namespace {

Image constant_image(int size, double v) {
  Image img(size, size);
  for (double& p : img.pixels()) p = v;
  return img;
}

Image test_phantom(uint64_t seed, int size = 64) {
  PhantomSpec spec;
  spec.image_size = size;
  RngStream rng(seed);
  return make_phantom(spec, rng);
}

double mean_of(const Image& img) {
  double s = 0;
  for (double v : img.pixels()) s += v;
  return s / double(img.numel());
}

}  // namespace

TEST_CASE("denoise with neutral parameters is bit-identical") {
  Image gt = test_phantom(1);
  DefectSpec spec;
  spec.task = TaskId::denoise;
  spec.gaussian_sigma = 0.0;
  spec.poisson_peak = 0.0;
  RngStream rng(2);
  Image out = apply_defect(gt, spec, rng);
  CHECK(out.pixels() == gt.pixels());
}

TEST_CASE("denoise noise statistics match the configured sigma") {
  Image zeros = constant_image(64, 0.0);
  DefectSpec spec;
  spec.task = TaskId::denoise;
  spec.gaussian_sigma = 0.1;
  RngStream rng(42);
  Image out = apply_defect(zeros, spec, rng);
  const double m = mean_of(out);
  double var = 0;
  for (double v : out.pixels()) var += (v - m) * (v - m);
  var /= double(out.numel());
  CHECK(std::abs(m) < 0.01);
  CHECK(std::sqrt(var) > 0.09);
  CHECK(std::sqrt(var) < 0.11);
  for (double v : out.pixels()) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("denoise shot noise responds to the photon peak") {
  Image half = constant_image(32, 0.0);  // 0.5 on the unit intensity scale
  DefectSpec spec;
  spec.task = TaskId::denoise;
  spec.gaussian_sigma = 0.0;
  spec.poisson_peak = 50.0;
  RngStream rng(7);
  Image noisy = apply_defect(half, spec, rng);
  CHECK(mean_of(noisy) == doctest::Approx(0.0).epsilon(0.05));
  double var = 0;
  for (double v : noisy.pixels()) var += v * v;
  CHECK(var / double(noisy.numel()) > 1e-4);  // strictly noisier than input

  spec.poisson_peak = 5000.0;  // more photons, less relative noise
  RngStream rng2(7);
  Image cleaner = apply_defect(half, spec, rng2);
  double var2 = 0;
  for (double v : cleaner.pixels()) var2 += v * v;
  CHECK(var2 < var);
}

TEST_CASE("axial inpaint: alternating rows of one and zero") {
  Image gt = constant_image(8, 1.0);
  DefectSpec spec;
  spec.task = TaskId::axial_inpaint;
  spec.drop_every = 2;
  spec.fill = RowFill::zero;
  RngStream rng(3);
  Image out = apply_defect(gt, spec, rng);
  for (int64_t r = 0; r < 8; ++r)
    for (int64_t c = 0; c < 8; ++c)
      CHECK(out.at(r, c) == (r % 2 == 0 ? 1.0 : 0.0));
}

TEST_CASE("axial inpaint: linear fill reconstructs a vertical ramp") {
  Image ramp(9, 4);
  for (int64_t r = 0; r < 9; ++r)
    for (int64_t c = 0; c < 4; ++c) ramp.at(r, c) = 0.1 * double(r);
  DefectSpec spec;
  spec.task = TaskId::axial_inpaint;
  spec.drop_every = 2;
  spec.fill = RowFill::linear_interp;
  RngStream rng(3);
  Image out = apply_defect(ramp, spec, rng);
  // Every dropped row of a linear signal interpolates exactly.
  for (int64_t r = 0; r + 1 < 9; ++r)
    for (int64_t c = 0; c < 4; ++c)
      CHECK(out.at(r, c) == doctest::Approx(ramp.at(r, c)));
}

TEST_CASE("super-resolve keeps extents and forms factor-sized blocks") {
  Image gt = test_phantom(4);
  DefectSpec spec;
  spec.task = TaskId::super_resolve;
  spec.psf_sigma = 1.0;
  spec.factor = 2;
  RngStream rng(5);
  Image out = apply_defect(gt, spec, rng);
  REQUIRE(out.same_extents(gt));
  for (int64_t r = 0; r < out.height(); r += 2)
    for (int64_t c = 0; c < out.width(); c += 2) {
      CHECK(out.at(r, c) == out.at(r + 1, c));
      CHECK(out.at(r, c) == out.at(r, c + 1));
      CHECK(out.at(r, c) == out.at(r + 1, c + 1));
    }
}

TEST_CASE("gaussian blur: identity at sigma zero, exact on constants") {
  Image gt = test_phantom(6);
  Image same = gaussian_blur(gt, 0.0);
  CHECK(same.pixels() == gt.pixels());

  Image flat = constant_image(16, 0.3);
  Image blurred = gaussian_blur(flat, 2.0);
  for (double v : blurred.pixels()) CHECK(v == doctest::Approx(0.3).epsilon(1e-12));

  // Smoothing shrinks the dynamic range of a structured image.
  Image soft = gaussian_blur(gt, 1.5);
  auto range = [](const Image& im) {
    auto [lo, hi] = std::minmax_element(im.pixels().begin(), im.pixels().end());
    return *hi - *lo;
  };
  CHECK(range(soft) < range(gt));
}

TEST_CASE("defect severity ladders strictly lower PSNR") {
  Image gt = test_phantom(8);

  SUBCASE("denoise sigma ladder") {
    double prev = 1e300;
    for (double sigma : {0.05, 0.1, 0.2, 0.4}) {
      DefectSpec spec;
      spec.task = TaskId::denoise;
      spec.gaussian_sigma = sigma;
      RngStream rng(9);
      const double p = psnr(gt, apply_defect(gt, spec, rng), 2.0);
      CHECK(std::isfinite(p));
      CHECK(p < prev);
      prev = p;
    }
  }

  SUBCASE("inpaint drop ladder") {
    double prev = 1e300;
    for (int drop : {2, 3, 4, 6}) {
      DefectSpec spec;
      spec.task = TaskId::axial_inpaint;
      spec.drop_every = drop;
      RngStream rng(10);
      const double p = psnr(gt, apply_defect(gt, spec, rng), 2.0);
      CHECK(std::isfinite(p));
      CHECK(p < prev);
      prev = p;
    }
  }

  SUBCASE("super-resolve factor ladder") {
    double prev = 1e300;
    for (int factor : {2, 4, 8}) {
      DefectSpec spec;
      spec.task = TaskId::super_resolve;
      spec.factor = factor;
      RngStream rng(11);
      const double p = psnr(gt, apply_defect(gt, spec, rng), 2.0);
      CHECK(std::isfinite(p));
      CHECK(p < prev);
      prev = p;
    }
  }
}

TEST_CASE("defect parameter validation") {
  DefectSpec spec;
  spec.task = TaskId::denoise;
  spec.gaussian_sigma = -0.1;
  CHECK_THROWS_AS(validate(spec), ArgumentError);

  spec = DefectSpec{};
  spec.task = TaskId::axial_inpaint;
  spec.drop_every = 1;
  CHECK_THROWS_AS(validate(spec), ArgumentError);

  spec = DefectSpec{};
  spec.task = TaskId::super_resolve;
  spec.factor = 1;
  CHECK_THROWS_AS(validate(spec), ArgumentError);
  spec.factor = 2;
  spec.psf_sigma = 0.0;
  CHECK_THROWS_AS(validate(spec), ArgumentError);

  CHECK(row_fill_from_string("linear_interp") == RowFill::linear_interp);
  CHECK_THROWS_AS(row_fill_from_string("mirror"), ConfigError);
}

TEST_CASE("phantoms: canonical range, determinism, density zero") {
  for (PhantomKind kind : {PhantomKind::nuclei_blobs, PhantomKind::filaments,
                           PhantomKind::embryo_texture}) {
    PhantomSpec spec;
    spec.kind = kind;
    CAPTURE(to_string(kind));

    RngStream r1(100), r2(100), r3(101);
    Image a = make_phantom(spec, r1);
    Image b = make_phantom(spec, r2);
    Image c = make_phantom(spec, r3);
    CHECK(a.pixels() == b.pixels());
    CHECK(a.pixels() != c.pixels());
    CHECK(a.height() == spec.image_size);
    for (double v : a.pixels()) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }

    PhantomSpec empty = spec;
    empty.density = 0.0;
    RngStream r4(100);
    Image bg = make_phantom(empty, r4);
    for (double v : bg.pixels()) CHECK(v == -1.0);
  }
}

TEST_CASE("phantom mean intensity rises with density (rank test)") {
  for (PhantomKind kind : {PhantomKind::nuclei_blobs, PhantomKind::filaments,
                           PhantomKind::embryo_texture}) {
    CAPTURE(to_string(kind));
    int wins = 0, total = 0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
      double prev = -2.0;
      bool ordered = true;
      for (double density : {0.2, 0.5, 0.9}) {
        PhantomSpec spec;
        spec.kind = kind;
        spec.density = density;
        RngStream rng(seed);
        const double m = mean_of(make_phantom(spec, rng));
        if (m <= prev) ordered = false;
        prev = m;
      }
      wins += ordered ? 1 : 0;
      ++total;
    }
    // Monotone in density for the overwhelming majority of seeds.
    CHECK(wins >= total - 2);
  }
}

TEST_CASE("phantom spec validation") {
  PhantomSpec spec;
  spec.image_size = 8;
  CHECK_THROWS_AS(validate(spec), ArgumentError);
  spec.image_size = 64;
  spec.density = -0.5;
  CHECK_THROWS_AS(validate(spec), ArgumentError);
  CHECK(phantom_kind_from_string("filaments") == PhantomKind::filaments);
  CHECK_THROWS_AS(phantom_kind_from_string("cells"), ConfigError);
}
