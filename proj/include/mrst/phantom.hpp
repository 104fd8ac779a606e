#pragma once

#include <string>

#include "mrst/image.hpp"
#include "mrst/rng.hpp"

namespace mrst {

// Procedural "microscopy-like" ground-truth generators: bright structures on
// a dark background, composed deterministically from the supplied stream.
enum class PhantomKind { nuclei_blobs, filaments, embryo_texture };

std::string to_string(PhantomKind kind);
PhantomKind phantom_kind_from_string(const std::string& name);

struct PhantomSpec {
  PhantomKind kind = PhantomKind::nuclei_blobs;
  int image_size = 64;   // square images, >= 16
  double density = 0.5;  // structure amount; 0 => pure background
  uint64_t seed = 0;     // corpus bookkeeping; draws come from the stream

  bool operator==(const PhantomSpec&) const = default;
};

void validate(const PhantomSpec& spec);

// Output values are canonical [-1, 1] with background at -1; density 0 gives
// an all-background image, and the mean intensity grows with density.
Image make_phantom(const PhantomSpec& spec, RngStream& rng);

}  // namespace mrst
