#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "mrst/errors.hpp"
#include "mrst/tensor.hpp"

namespace mrst {

// Single-channel image in the canonical [-1, 1] value range, row-major.
// File I/O maps [0, maxval] linearly onto this range (pgm.hpp).
class Image {
 public:
  Image() = default;
  Image(int64_t height, int64_t width, double fill = -1.0)
      : height_(height), width_(width) {
    if (height < 1 || width < 1)
      throw DimensionError("image extents must be positive, got " +
                           std::to_string(height) + "x" + std::to_string(width));
    pixels_.assign(static_cast<size_t>(height * width), fill);
  }

  int64_t height() const { return height_; }
  int64_t width() const { return width_; }
  int64_t numel() const { return height_ * width_; }
  bool defined() const { return !pixels_.empty(); }

  double& at(int64_t r, int64_t c) { return pixels_[size_t(r * width_ + c)]; }
  double at(int64_t r, int64_t c) const {
    return pixels_[size_t(r * width_ + c)];
  }

  std::vector<double>& pixels() { return pixels_; }
  const std::vector<double>& pixels() const { return pixels_; }

  void clamp_canonical() {
    for (double& v : pixels_) v = std::clamp(v, -1.0, 1.0);
  }

  bool same_extents(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

 private:
  int64_t height_ = 0;
  int64_t width_ = 0;
  std::vector<double> pixels_;
};

// [1,1,H,W] tensor view of an image, for feeding the networks.
template <typename T>
Tensor<T> image_to_tensor(const Image& img) {
  std::vector<T> data(img.pixels().size());
  for (size_t i = 0; i < data.size(); ++i) data[i] = T(img.pixels()[i]);
  return Tensor<T>::from_data({1, 1, img.height(), img.width()},
                              std::move(data));
}

template <typename T>
Image image_from_tensor(const Tensor<T>& t) {
  if (t.rank() != 4 || t.dim(0) != 1 || t.dim(1) != 1)
    throw DimensionError("expected a [1,1,H,W] tensor, got " +
                         shape_str(t.shape()));
  Image img(t.dim(2), t.dim(3));
  auto src = t.data();
  for (size_t i = 0; i < img.pixels().size(); ++i)
    img.pixels()[i] = double(src[i]);
  return img;
}

// Batch of images stacked along the first axis; extents must agree.
template <typename T>
Tensor<T> images_to_batch(const std::vector<Image>& images) {
  if (images.empty()) throw ArgumentError("cannot batch zero images");
  const int64_t h = images[0].height(), w = images[0].width();
  std::vector<T> data;
  data.reserve(size_t(int64_t(images.size()) * h * w));
  for (const Image& img : images) {
    if (img.height() != h || img.width() != w)
      throw DimensionError("batched images must share extents");
    for (double v : img.pixels()) data.push_back(T(v));
  }
  return Tensor<T>::from_data({int64_t(images.size()), 1, h, w},
                              std::move(data));
}

template <typename T>
std::vector<Image> batch_to_images(const Tensor<T>& t) {
  if (t.rank() != 4 || t.dim(1) != 1)
    throw DimensionError("expected a [N,1,H,W] tensor, got " +
                         shape_str(t.shape()));
  std::vector<Image> out;
  auto src = t.data();
  const int64_t hw = t.dim(2) * t.dim(3);
  for (int64_t n = 0; n < t.dim(0); ++n) {
    Image img(t.dim(2), t.dim(3));
    for (int64_t i = 0; i < hw; ++i)
      img.pixels()[size_t(i)] = double(src[size_t(n * hw + i)]);
    out.push_back(std::move(img));
  }
  return out;
}

// Canonical [-1,1] -> unit [0,1]; the range metrics are computed on.
inline std::vector<double> to_unit_range(const Image& img) {
  std::vector<double> out(img.pixels().size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = (img.pixels()[i] + 1.0) * 0.5;
  return out;
}

}  // namespace mrst
