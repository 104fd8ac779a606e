#pragma once

#include <filesystem>

#include "mrst/image.hpp"

namespace mrst {

// Binary PGM ("P5") reader/writer, maxval 255 or 65535 only. 16-bit samples
// are most-significant-byte first. File values [0, maxval] map linearly to
// the canonical [-1, 1] image range, losslessly round-tripping at the file's
// bit depth.
//
// Written header grammar is exactly "P5\n{width} {height}\n{maxval}\n";
// the reader additionally tolerates standard whitespace and '#' comments.
// Malformed input raises FormatError carrying the byte offset.

Image read_pgm(const std::filesystem::path& path, int* maxval_out = nullptr);

// bit_depth is 8 or 16. Canonical values are clamped, then mapped with
// round-to-nearest onto [0, maxval].
void write_pgm(const Image& image, const std::filesystem::path& path,
               int bit_depth = 8);

}  // namespace mrst
