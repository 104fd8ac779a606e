#include "mrst/pgm.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "mrst/errors.hpp"

namespace mrst {
namespace {

[[noreturn]] void format_fail(const std::filesystem::path& path,
                              const std::string& what, size_t offset) {
  throw FormatError(path.string() + ": " + what + " (byte offset " +
                    std::to_string(offset) + ")");
}

// Pull-parser over the raw file bytes so errors can report exact offsets.
struct ByteCursor {
  const std::string& bytes;
  size_t pos = 0;

  bool eof() const { return pos >= bytes.size(); }
  unsigned char peek() const { return (unsigned char)bytes[pos]; }

  // PGM token separator: whitespace runs and '#' comments to end of line.
  void skip_separators() {
    while (!eof()) {
      if (std::isspace(peek())) {
        ++pos;
      } else if (peek() == '#') {
        while (!eof() && peek() != '\n') ++pos;
      } else {
        break;
      }
    }
  }

  int64_t read_number(const std::filesystem::path& path, const char* field) {
    skip_separators();
    const size_t start = pos;
    int64_t value = 0;
    while (!eof() && std::isdigit(peek())) {
      value = value * 10 + (peek() - '0');
      if (value > (int64_t(1) << 32)) break;  // caller range-checks
      ++pos;
    }
    if (pos == start)
      format_fail(path, std::string("expected ") + field, start);
    return value;
  }
};

}  // namespace

Image read_pgm(const std::filesystem::path& path, int* maxval_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open PGM file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();

  ByteCursor cur{bytes};
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    std::string magic = bytes.substr(0, std::min<size_t>(2, bytes.size()));
    format_fail(path, "not a binary PGM, magic '" + magic + "' (only P5 supported)", 0);
  }
  cur.pos = 2;

  const int64_t width = cur.read_number(path, "width");
  const int64_t height = cur.read_number(path, "height");
  const int64_t maxval = cur.read_number(path, "maxval");
  if (width < 1 || height < 1)
    format_fail(path, "non-positive image extents", cur.pos);
  if (maxval != 255 && maxval != 65535)
    format_fail(path, "unsupported maxval " + std::to_string(maxval) +
                          " (must be 255 or 65535)",
                cur.pos);
  // Exactly one whitespace byte separates the header from the raster.
  if (cur.eof() || !std::isspace(cur.peek()))
    format_fail(path, "missing whitespace before raster", cur.pos);
  ++cur.pos;

  const int bytes_per_sample = maxval == 255 ? 1 : 2;
  const size_t expected = size_t(width) * size_t(height) * bytes_per_sample;
  if (bytes.size() - cur.pos < expected)
    format_fail(path,
                "truncated raster: need " + std::to_string(expected) +
                    " bytes, have " + std::to_string(bytes.size() - cur.pos),
                cur.pos);

  Image img(height, width);
  const unsigned char* p = (const unsigned char*)bytes.data() + cur.pos;
  for (size_t i = 0; i < size_t(width) * size_t(height); ++i) {
    uint32_t v;
    if (bytes_per_sample == 1) {
      v = p[i];
    } else {
      v = (uint32_t(p[2 * i]) << 8) | p[2 * i + 1];  // MSB first
    }
    img.pixels()[i] = 2.0 * (double(v) / double(maxval)) - 1.0;
  }
  if (maxval_out) *maxval_out = int(maxval);
  return img;
}

void write_pgm(const Image& image, const std::filesystem::path& path,
               int bit_depth) {
  if (!image.defined()) throw ArgumentError("cannot write an empty image");
  if (bit_depth != 8 && bit_depth != 16)
    throw ArgumentError("bit_depth must be 8 or 16, got " +
                        std::to_string(bit_depth));
  const uint32_t maxval = bit_depth == 8 ? 255 : 65535;

  std::string out;
  out += "P5\n" + std::to_string(image.width()) + " " +
         std::to_string(image.height()) + "\n" + std::to_string(maxval) + "\n";
  out.reserve(out.size() + size_t(image.numel()) * (bit_depth / 8));
  for (double x : image.pixels()) {
    const double unit = std::clamp((x + 1.0) * 0.5, 0.0, 1.0);
    const uint32_t v = uint32_t(std::lround(unit * maxval));
    if (bit_depth == 8) {
      out.push_back(char(v));
    } else {
      out.push_back(char((v >> 8) & 0xff));
      out.push_back(char(v & 0xff));
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw IoError("short write to " + path.string());
}

}  // namespace mrst
