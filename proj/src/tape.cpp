#include "mrst/tape.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace mrst {

namespace {

template <typename T>
using MatRM =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;

struct ConvDims {
  int64_t n, cin, h, w;
  int64_t cout, kh, kw;
  int64_t ho, wo;
  int stride, pad;
  int64_t patch() const { return cin * kh * kw; }
  int64_t positions() const { return ho * wo; }
};

// Scatters one input image [Cin,H,W] into patch columns [Cin*kH*kW, Ho*Wo].
template <typename T>
void im2col(const T* img, const ConvDims& d, T* col) {
  for (int64_t c = 0; c < d.cin; ++c) {
    for (int64_t ky = 0; ky < d.kh; ++ky) {
      for (int64_t kx = 0; kx < d.kw; ++kx) {
        T* row = col + ((c * d.kh + ky) * d.kw + kx) * d.positions();
        for (int64_t oy = 0; oy < d.ho; ++oy) {
          const int64_t iy = oy * d.stride - d.pad + ky;
          if (iy < 0 || iy >= d.h) {
            std::fill(row, row + d.wo, T(0));
            row += d.wo;
            continue;
          }
          const T* src = img + (c * d.h + iy) * d.w;
          for (int64_t ox = 0; ox < d.wo; ++ox) {
            const int64_t ix = ox * d.stride - d.pad + kx;
            *row++ = (ix < 0 || ix >= d.w) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

// Transpose of im2col: accumulates patch-column gradients back into the image.
template <typename T>
void col2im_add(const T* col, const ConvDims& d, T* img) {
  for (int64_t c = 0; c < d.cin; ++c) {
    for (int64_t ky = 0; ky < d.kh; ++ky) {
      for (int64_t kx = 0; kx < d.kw; ++kx) {
        const T* row = col + ((c * d.kh + ky) * d.kw + kx) * d.positions();
        for (int64_t oy = 0; oy < d.ho; ++oy) {
          const int64_t iy = oy * d.stride - d.pad + ky;
          if (iy < 0 || iy >= d.h) {
            row += d.wo;
            continue;
          }
          T* dst = img + (c * d.h + iy) * d.w;
          for (int64_t ox = 0; ox < d.wo; ++ox, ++row) {
            const int64_t ix = ox * d.stride - d.pad + kx;
            if (ix >= 0 && ix < d.w) dst[ix] += *row;
          }
        }
      }
    }
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                        const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <typename T>
void require_nchw(const Tensor<T>& t, const char* op) {
  if (t.rank() != 4)
    throw DimensionError(std::string(op) + ": expected a 4-d [N,C,H,W] tensor, got " +
                         shape_str(t.shape()));
}

}  // namespace

template <typename T>
void Tape<T>::fresh_graph_check() {
  if (consumed_) {
    nodes_.clear();
    outputs_.clear();
    consumed_ = false;
  }
}

template <typename T>
Tensor<T> Tape<T>::enroll(Tensor<T> output, bool needs_grad,
                          std::function<void()> backward_fn) {
  fresh_graph_check();
  outputs_.insert(output.id());
  if (needs_grad) {
    output.set_requires_grad(true);
    nodes_.push_back(Node{std::move(backward_fn)});
  }
  return output;
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (consumed_) throw StateError("backward on a consumed tape");
  if (loss.numel() != 1)
    throw ArgumentError("backward requires a scalar loss, got shape " +
                        shape_str(loss.shape()));
  if (!outputs_.contains(loss.id()))
    throw ArgumentError("loss tensor was not produced through this tape");
  if (loss.requires_grad()) {
    const T one = T(1);
    Tensor<T> seed = loss;
    seed.accumulate_grad(std::span<const T>(&one, 1));
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
  }
  nodes_.clear();
  outputs_.clear();
  consumed_ = true;
}

// --- conv2d ---

template <typename T>
Tensor<T> Tape<T>::conv2d(const Tensor<T>& input, const Tensor<T>& kernel,
                          const Tensor<T>& bias, int stride, int padding) {
  require_nchw(input, "conv2d input");
  require_nchw(kernel, "conv2d kernel");
  if (stride < 1)
    throw ArgumentError("conv2d: stride must be >= 1, got " +
                        std::to_string(stride));
  if (padding < 0)
    throw ArgumentError("conv2d: padding must be >= 0, got " +
                        std::to_string(padding));

  ConvDims d;
  d.n = input.dim(0);
  d.cin = input.dim(1);
  d.h = input.dim(2);
  d.w = input.dim(3);
  d.cout = kernel.dim(0);
  d.kh = kernel.dim(2);
  d.kw = kernel.dim(3);
  d.stride = stride;
  d.pad = padding;

  if (kernel.dim(1) != d.cin)
    throw DimensionError("conv2d: kernel expects " +
                         std::to_string(kernel.dim(1)) + " input channels, input has " +
                         std::to_string(d.cin));
  if (d.kh % 2 == 0 || d.kw % 2 == 0)
    throw ArgumentError("conv2d: kernel extents must be odd, got " +
                        shape_str(kernel.shape()));
  if (d.h + 2 * padding < d.kh || d.w + 2 * padding < d.kw)
    throw DimensionError("conv2d: padded input smaller than kernel");
  if (bias.rank() != 1 || bias.dim(0) != d.cout)
    throw DimensionError("conv2d: bias must be [Cout]=" +
                         std::to_string(d.cout) + ", got " +
                         shape_str(bias.shape()));

  d.ho = (d.h + 2 * padding - d.kh) / stride + 1;
  d.wo = (d.w + 2 * padding - d.kw) / stride + 1;

  auto out = Tensor<T>::zeros({d.n, d.cout, d.ho, d.wo});
  const int64_t patch = d.patch();
  const int64_t pos = d.positions();

  {
    std::vector<T> col(static_cast<size_t>(patch * pos));
    CMapRM<T> kmat(kernel.data().data(), d.cout, patch);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bvec(
        bias.data().data(), d.cout);
    for (int64_t n = 0; n < d.n; ++n) {
      im2col(input.data().data() + n * d.cin * d.h * d.w, d, col.data());
      CMapRM<T> cmat(col.data(), patch, pos);
      MapRM<T> omat(out.data().data() + n * d.cout * pos, d.cout, pos);
      omat.noalias() = kmat * cmat;
      omat.colwise() += bvec;
    }
  }

  const bool needs = input.requires_grad() || kernel.requires_grad() ||
                     bias.requires_grad();
  auto backward = [input, kernel, bias, out, d]() mutable {
    if (!out.has_grad()) return;
    const int64_t patch = d.patch();
    const int64_t pos = d.positions();
    const bool need_in = input.requires_grad();
    const bool need_k = kernel.requires_grad();
    const bool need_b = bias.requires_grad();

    std::vector<T> dkernel(need_k ? kernel.data().size() : 0, T(0));
    std::vector<T> dbias(need_b ? bias.data().size() : 0, T(0));
    std::vector<T> dinput(need_in ? input.data().size() : 0, T(0));
    std::vector<T> col(need_k ? static_cast<size_t>(patch * pos) : 0);
    std::vector<T> dcol(need_in ? static_cast<size_t>(patch * pos) : 0);

    CMapRM<T> kmat(kernel.data().data(), d.cout, patch);
    for (int64_t n = 0; n < d.n; ++n) {
      CMapRM<T> gmat(out.grad().data() + n * d.cout * pos, d.cout, pos);
      if (need_k) {
        im2col(input.data().data() + n * d.cin * d.h * d.w, d, col.data());
        CMapRM<T> cmat(col.data(), patch, pos);
        MapRM<T> dkmat(dkernel.data(), d.cout, patch);
        dkmat.noalias() += gmat * cmat.transpose();
      }
      if (need_b) {
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dbvec(dbias.data(),
                                                              d.cout);
        dbvec += gmat.rowwise().sum();
      }
      if (need_in) {
        MapRM<T> dcmat(dcol.data(), patch, pos);
        dcmat.noalias() = kmat.transpose() * gmat;
        col2im_add(dcol.data(), d, dinput.data() + n * d.cin * d.h * d.w);
      }
    }
    if (need_k) kernel.accumulate_grad(dkernel);
    if (need_b) bias.accumulate_grad(dbias);
    if (need_in) input.accumulate_grad(dinput);
  };
  return enroll(std::move(out), needs, std::move(backward));
}

// --- upsample ---

template <typename T>
Tensor<T> Tape<T>::upsample_nearest(const Tensor<T>& input, int factor) {
  require_nchw(input, "upsample_nearest");
  if (factor < 1)
    throw ArgumentError("upsample_nearest: factor must be >= 1, got " +
                        std::to_string(factor));
  const int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2),
                w = input.dim(3);
  const int64_t f = factor;
  auto out = Tensor<T>::zeros({n, c, h * f, w * f});
  const T* src = input.data().data();
  T* dst = out.data().data();
  for (int64_t nc = 0; nc < n * c; ++nc) {
    const T* in_plane = src + nc * h * w;
    T* out_plane = dst + nc * h * f * w * f;
    for (int64_t y = 0; y < h * f; ++y) {
      const T* in_row = in_plane + (y / f) * w;
      T* out_row = out_plane + y * w * f;
      for (int64_t x = 0; x < w * f; ++x) out_row[x] = in_row[x / f];
    }
  }
  auto backward = [input, out, n, c, h, w, f]() mutable {
    if (!out.has_grad() || !input.requires_grad()) return;
    std::vector<T> din(input.data().size(), T(0));
    const T* g = out.grad().data();
    for (int64_t nc = 0; nc < n * c; ++nc) {
      const T* g_plane = g + nc * h * f * w * f;
      T* d_plane = din.data() + nc * h * w;
      for (int64_t y = 0; y < h * f; ++y) {
        const T* g_row = g_plane + y * w * f;
        T* d_row = d_plane + (y / f) * w;
        for (int64_t x = 0; x < w * f; ++x) d_row[x / f] += g_row[x];
      }
    }
    input.accumulate_grad(din);
  };
  return enroll(std::move(out), input.requires_grad(), std::move(backward));
}

// --- instance statistics ---

template <typename T>
Tensor<T> Tape<T>::spatial_mean(const Tensor<T>& input) {
  require_nchw(input, "spatial_mean");
  const int64_t n = input.dim(0), c = input.dim(1);
  const int64_t m = input.dim(2) * input.dim(3);
  auto out = Tensor<T>::zeros({n, c});
  const T* x = input.data().data();
  T* o = out.data().data();
  for (int64_t i = 0; i < n * c; ++i) {
    T sum = T(0);
    for (int64_t j = 0; j < m; ++j) sum += x[i * m + j];
    o[i] = sum / static_cast<T>(m);
  }
  auto backward = [input, out, n, c, m]() mutable {
    if (!out.has_grad() || !input.requires_grad()) return;
    std::vector<T> din(input.data().size());
    const T* g = out.grad().data();
    for (int64_t i = 0; i < n * c; ++i) {
      const T v = g[i] / static_cast<T>(m);
      for (int64_t j = 0; j < m; ++j) din[i * m + j] = v;
    }
    input.accumulate_grad(din);
  };
  return enroll(std::move(out), input.requires_grad(), std::move(backward));
}

template <typename T>
Tensor<T> Tape<T>::spatial_std(const Tensor<T>& input) {
  require_nchw(input, "spatial_std");
  const int64_t n = input.dim(0), c = input.dim(1);
  const int64_t m = input.dim(2) * input.dim(3);
  const T eps = static_cast<T>(kInstanceNormEpsilon);
  auto out = Tensor<T>::zeros({n, c});
  std::vector<T> mean(static_cast<size_t>(n * c));
  const T* x = input.data().data();
  T* o = out.data().data();
  for (int64_t i = 0; i < n * c; ++i) {
    T sum = T(0);
    for (int64_t j = 0; j < m; ++j) sum += x[i * m + j];
    const T mu = sum / static_cast<T>(m);
    T var = T(0);
    for (int64_t j = 0; j < m; ++j) {
      const T dx = x[i * m + j] - mu;
      var += dx * dx;
    }
    var /= static_cast<T>(m);
    mean[static_cast<size_t>(i)] = mu;
    o[i] = std::sqrt(var + eps);
  }
  auto backward = [input, out, mean = std::move(mean), n, c, m]() mutable {
    if (!out.has_grad() || !input.requires_grad()) return;
    std::vector<T> din(input.data().size());
    const T* g = out.grad().data();
    const T* x = input.data().data();
    const T* sd = out.data().data();
    for (int64_t i = 0; i < n * c; ++i) {
      const T scale = g[i] / (static_cast<T>(m) * sd[i]);
      const T mu = mean[static_cast<size_t>(i)];
      for (int64_t j = 0; j < m; ++j)
        din[i * m + j] = scale * (x[i * m + j] - mu);
    }
    input.accumulate_grad(din);
  };
  return enroll(std::move(out), input.requires_grad(), std::move(backward));
}

// --- conditional instance normalization ---

template <typename T>
Tensor<T> Tape<T>::cin(const Tensor<T>& input, const Tensor<T>& gamma,
                       const Tensor<T>& beta) {
  require_nchw(input, "cin");
  const int64_t n = input.dim(0), c = input.dim(1);
  const int64_t m = input.dim(2) * input.dim(3);
  if (gamma.rank() != 1 || gamma.dim(0) != c)
    throw DimensionError("cin: gamma must be [C]=" + std::to_string(c) +
                         ", got " + shape_str(gamma.shape()));
  if (beta.rank() != 1 || beta.dim(0) != c)
    throw DimensionError("cin: beta must be [C]=" + std::to_string(c) +
                         ", got " + shape_str(beta.shape()));
  const T eps = static_cast<T>(kInstanceNormEpsilon);

  auto out = Tensor<T>::zeros(input.shape());
  std::vector<T> xhat(input.data().size());
  std::vector<T> sigma(static_cast<size_t>(n * c));
  const T* x = input.data().data();
  const T* gm = gamma.data().data();
  const T* bt = beta.data().data();
  T* o = out.data().data();
  for (int64_t i = 0; i < n * c; ++i) {
    T sum = T(0);
    for (int64_t j = 0; j < m; ++j) sum += x[i * m + j];
    const T mu = sum / static_cast<T>(m);
    T var = T(0);
    for (int64_t j = 0; j < m; ++j) {
      const T dx = x[i * m + j] - mu;
      var += dx * dx;
    }
    var /= static_cast<T>(m);
    const T sd = std::sqrt(var + eps);
    sigma[static_cast<size_t>(i)] = sd;
    const T g = gm[i % c], b = bt[i % c];
    for (int64_t j = 0; j < m; ++j) {
      const T xh = (x[i * m + j] - mu) / sd;
      xhat[static_cast<size_t>(i * m + j)] = xh;
      o[i * m + j] = g * xh + b;
    }
  }

  const bool needs = input.requires_grad() || gamma.requires_grad() ||
                     beta.requires_grad();
  auto backward = [input, gamma, beta, out, xhat = std::move(xhat),
                   sigma = std::move(sigma), n, c, m]() mutable {
    if (!out.has_grad()) return;
    const T* g = out.grad().data();
    const T* gm = gamma.data().data();
    const bool need_in = input.requires_grad();
    std::vector<T> dgamma(gamma.data().size(), T(0));
    std::vector<T> dbeta(beta.data().size(), T(0));
    std::vector<T> din(need_in ? input.data().size() : 0);
    for (int64_t i = 0; i < n * c; ++i) {
      T s1 = T(0), s2 = T(0);
      for (int64_t j = 0; j < m; ++j) {
        const T gj = g[i * m + j];
        s1 += gj;
        s2 += gj * xhat[static_cast<size_t>(i * m + j)];
      }
      dbeta[static_cast<size_t>(i % c)] += s1;
      dgamma[static_cast<size_t>(i % c)] += s2;
      if (need_in) {
        const T inv = gm[i % c] / sigma[static_cast<size_t>(i)];
        const T m1 = s1 / static_cast<T>(m);
        const T m2 = s2 / static_cast<T>(m);
        for (int64_t j = 0; j < m; ++j)
          din[static_cast<size_t>(i * m + j)] =
              inv * (g[i * m + j] - m1 -
                     xhat[static_cast<size_t>(i * m + j)] * m2);
      }
    }
    gamma.accumulate_grad(dgamma);
    beta.accumulate_grad(dbeta);
    if (need_in) input.accumulate_grad(din);
  };
  return enroll(std::move(out), needs, std::move(backward));
}

// --- elementwise activations ---

template <typename T>
Tensor<T> Tape<T>::leaky_relu(const Tensor<T>& input, T slope) {
  if (!(slope >= T(0) && slope < T(1)))
    throw ArgumentError("leaky_relu: slope must lie in [0,1)");
  auto out = Tensor<T>::zeros(input.shape());
  const T* x = input.data().data();
  T* o = out.data().data();
  for (int64_t i = 0; i < input.numel(); ++i)
    o[i] = x[i] > T(0) ? x[i] : slope * x[i];
  auto backward = [input, out, slope]() mutable {
    if (!out.has_grad() || !input.requires_grad()) return;
    std::vector<T> din(input.data().size());
    const T* g = out.grad().data();
    const T* x = input.data().data();
    for (size_t i = 0; i < din.size(); ++i)
      din[i] = g[i] * (x[i] > T(0) ? T(1) : slope);
    input.accumulate_grad(din);
  };
  return enroll(std::move(out), input.requires_grad(), std::move(backward));
}

template <typename T>
Tensor<T> Tape<T>::sigmoid(const Tensor<T>& input) {
  auto out = Tensor<T>::zeros(input.shape());
  const T* x = input.data().data();
  T* o = out.data().data();
  for (int64_t i = 0; i < input.numel(); ++i) {
    if (x[i] >= T(0)) {
      o[i] = T(1) / (T(1) + std::exp(-x[i]));
    } else {
      const T e = std::exp(x[i]);
      o[i] = e / (T(1) + e);
    }
  }
  auto backward = [input, out]() mutable {
    if (!out.has_grad() || !input.requires_grad()) return;
    std::vector<T> din(input.data().size());
    const T* g = out.grad().data();
    const T* y = out.data().data();
    for (size_t i = 0; i < din.size(); ++i)
      din[i] = g[i] * y[i] * (T(1) - y[i]);
    input.accumulate_grad(din);
  };
  return enroll(std::move(out), input.requires_grad(), std::move(backward));
}

template <typename T>
Tensor<T> Tape<T>::tanh(const Tensor<T>& input) {
  auto out = Tensor<T>::zeros(input.shape());
  const T* x = input.data().data();
  T* o = out.data().data();
  for (int64_t i = 0; i < input.numel(); ++i) o[i] = std::tanh(x[i]);
  auto backward = [input, out]() mutable {
    if (!out.has_grad() || !input.requires_grad()) return;
    std::vector<T> din(input.data().size());
    const T* g = out.grad().data();
    const T* y = out.data().data();
    for (size_t i = 0; i < din.size(); ++i)
      din[i] = g[i] * (T(1) - y[i] * y[i]);
    input.accumulate_grad(din);
  };
  return enroll(std::move(out), input.requires_grad(), std::move(backward));
}

// --- structural ---

template <typename T>
Tensor<T> Tape<T>::add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  auto out = Tensor<T>::zeros(a.shape());
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* o = out.data().data();
  for (int64_t i = 0; i < a.numel(); ++i) o[i] = pa[i] + pb[i];
  auto backward = [a, b, out]() mutable {
    if (!out.has_grad()) return;
    auto g = out.grad();
    a.accumulate_grad(g);
    b.accumulate_grad(g);
  };
  return enroll(std::move(out), a.requires_grad() || b.requires_grad(),
                std::move(backward));
}

template <typename T>
Tensor<T> Tape<T>::scale(const Tensor<T>& a, T factor) {
  auto out = Tensor<T>::zeros(a.shape());
  const T* pa = a.data().data();
  T* o = out.data().data();
  for (int64_t i = 0; i < a.numel(); ++i) o[i] = factor * pa[i];
  auto backward = [a, out, factor]() mutable {
    if (!out.has_grad() || !a.requires_grad()) return;
    std::vector<T> din(a.data().size());
    const T* g = out.grad().data();
    for (size_t i = 0; i < din.size(); ++i) din[i] = factor * g[i];
    a.accumulate_grad(din);
  };
  return enroll(std::move(out), a.requires_grad(), std::move(backward));
}

template <typename T>
Tensor<T> Tape<T>::concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require_nchw(a, "concat_channels");
  require_nchw(b, "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
    throw DimensionError("concat_channels: shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const int64_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  const int64_t m = a.dim(2) * a.dim(3);
  auto out = Tensor<T>::zeros({n, ca + cb, a.dim(2), a.dim(3)});
  T* o = out.data().data();
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for (int64_t i = 0; i < n; ++i) {
    std::copy(pa + i * ca * m, pa + (i + 1) * ca * m, o + i * (ca + cb) * m);
    std::copy(pb + i * cb * m, pb + (i + 1) * cb * m,
              o + i * (ca + cb) * m + ca * m);
  }
  auto backward = [a, b, out, n, ca, cb, m]() mutable {
    if (!out.has_grad()) return;
    const T* g = out.grad().data();
    if (a.requires_grad()) {
      std::vector<T> da(a.data().size());
      for (int64_t i = 0; i < n; ++i)
        std::copy(g + i * (ca + cb) * m, g + i * (ca + cb) * m + ca * m,
                  da.begin() + i * ca * m);
      a.accumulate_grad(da);
    }
    if (b.requires_grad()) {
      std::vector<T> db(b.data().size());
      for (int64_t i = 0; i < n; ++i)
        std::copy(g + i * (ca + cb) * m + ca * m, g + (i + 1) * (ca + cb) * m,
                  db.begin() + i * cb * m);
      b.accumulate_grad(db);
    }
  };
  return enroll(std::move(out), a.requires_grad() || b.requires_grad(),
                std::move(backward));
}

// --- reductions and losses ---

template <typename T>
Tensor<T> Tape<T>::reduce_mean(const Tensor<T>& input) {
  const int64_t n = input.numel();
  T sum = T(0);
  for (T v : input.data()) sum += v;
  auto out = Tensor<T>::full({1}, sum / static_cast<T>(n));
  auto backward = [input, out, n]() mutable {
    if (!out.has_grad() || !input.requires_grad()) return;
    const T v = out.grad()[0] / static_cast<T>(n);
    std::vector<T> din(input.data().size(), v);
    input.accumulate_grad(din);
  };
  return enroll(std::move(out), input.requires_grad(), std::move(backward));
}

template <typename T>
Tensor<T> Tape<T>::mse(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mse");
  const int64_t n = a.numel();
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T sum = T(0);
  for (int64_t i = 0; i < n; ++i) {
    const T d = pa[i] - pb[i];
    sum += d * d;
  }
  auto out = Tensor<T>::full({1}, sum / static_cast<T>(n));
  auto backward = [a, b, out, n]() mutable {
    if (!out.has_grad()) return;
    const T g = out.grad()[0] * T(2) / static_cast<T>(n);
    const T* pa = a.data().data();
    const T* pb = b.data().data();
    std::vector<T> d(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) d[static_cast<size_t>(i)] = g * (pa[i] - pb[i]);
    a.accumulate_grad(d);
    if (b.requires_grad()) {
      for (T& v : d) v = -v;
      b.accumulate_grad(d);
    }
  };
  return enroll(std::move(out), a.requires_grad() || b.requires_grad(),
                std::move(backward));
}

template <typename T>
Tensor<T> Tape<T>::l1(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "l1");
  const int64_t n = a.numel();
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T sum = T(0);
  for (int64_t i = 0; i < n; ++i) sum += std::abs(pa[i] - pb[i]);
  auto out = Tensor<T>::full({1}, sum / static_cast<T>(n));
  auto backward = [a, b, out, n]() mutable {
    if (!out.has_grad()) return;
    const T g = out.grad()[0] / static_cast<T>(n);
    const T* pa = a.data().data();
    const T* pb = b.data().data();
    std::vector<T> d(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      const T diff = pa[i] - pb[i];
      d[static_cast<size_t>(i)] =
          diff > T(0) ? g : (diff < T(0) ? -g : T(0));
    }
    a.accumulate_grad(d);
    if (b.requires_grad()) {
      for (T& v : d) v = -v;
      b.accumulate_grad(d);
    }
  };
  return enroll(std::move(out), a.requires_grad() || b.requires_grad(),
                std::move(backward));
}

template <typename T>
Tensor<T> Tape<T>::bce_with_logits(const Tensor<T>& logits,
                                   const Tensor<T>& targets) {
  require_same_shape(logits, targets, "bce_with_logits");
  const int64_t n = logits.numel();
  const T* z = logits.data().data();
  const T* t = targets.data().data();
  T sum = T(0);
  for (int64_t i = 0; i < n; ++i) {
    if (t[i] < T(0) || t[i] > T(1))
      throw ArgumentError("bce_with_logits: targets must lie in [0,1]");
    sum += std::max(z[i], T(0)) - z[i] * t[i] +
           std::log1p(std::exp(-std::abs(z[i])));
  }
  auto out = Tensor<T>::full({1}, sum / static_cast<T>(n));
  auto backward = [logits, targets, out, n]() mutable {
    if (!out.has_grad()) return;
    const T g = out.grad()[0] / static_cast<T>(n);
    const T* z = logits.data().data();
    const T* t = targets.data().data();
    if (logits.requires_grad()) {
      std::vector<T> d(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) {
        T s;
        if (z[i] >= T(0)) {
          s = T(1) / (T(1) + std::exp(-z[i]));
        } else {
          const T e = std::exp(z[i]);
          s = e / (T(1) + e);
        }
        d[static_cast<size_t>(i)] = g * (s - t[i]);
      }
      logits.accumulate_grad(d);
    }
    if (targets.requires_grad()) {
      std::vector<T> d(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) d[static_cast<size_t>(i)] = -g * z[i];
      targets.accumulate_grad(d);
    }
  };
  return enroll(std::move(out),
                logits.requires_grad() || targets.requires_grad(),
                std::move(backward));
}

template <typename T>
Tensor<T> Tape<T>::custom(const std::vector<Tensor<T>>& inputs,
                          Tensor<T> output,
                          std::function<void()> backward_fn) {
  bool needs = false;
  for (const auto& t : inputs) needs = needs || t.requires_grad();
  return enroll(std::move(output), needs, std::move(backward_fn));
}

template class Tape<float>;
template class Tape<double>;

}  // namespace mrst
