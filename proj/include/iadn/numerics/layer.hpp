#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "iadn/numerics/error.hpp"
#include "iadn/numerics/tensor.hpp"

namespace iadn {

enum class LayerKind {
  conv2d,
  maxpool2d,
  fully_connected,
  relu,
  sigmoid,
  softmax,
  concat_channels,
  bilinear_resize,
  // w[0] * day + w[1] * night; inputs {w, day, night}.
  gated_mix,
};

inline std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::fully_connected: return "fully_connected";
    case LayerKind::relu: return "relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::softmax: return "softmax";
    case LayerKind::concat_channels: return "concat_channels";
    case LayerKind::bilinear_resize: return "bilinear_resize";
    case LayerKind::gated_mix: return "gated_mix";
  }
  return "unknown";
}

/// Description of one layer application. Only the fields relevant to
/// `kind` are read.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  int out_channels = 0;  // conv2d output channels, fully_connected output width
  int out_h = 0;         // bilinear_resize target
  int out_w = 0;

  static LayerSpec conv2d(int kernel, int out_channels, int stride = 1, int padding = 0) {
    return {LayerKind::conv2d, kernel, stride, padding, out_channels, 0, 0};
  }
  static LayerSpec maxpool2d(int kernel, int stride) { return {LayerKind::maxpool2d, kernel, stride, 0, 0, 0, 0}; }
  static LayerSpec fully_connected(int out_features) {
    return {LayerKind::fully_connected, 1, 1, 0, out_features, 0, 0};
  }
  static LayerSpec relu() { return {LayerKind::relu}; }
  static LayerSpec sigmoid() { return {LayerKind::sigmoid}; }
  static LayerSpec softmax() { return {LayerKind::softmax}; }
  static LayerSpec concat_channels() { return {LayerKind::concat_channels}; }
  static LayerSpec bilinear_resize(int out_h, int out_w) {
    return {LayerKind::bilinear_resize, 1, 1, 0, 0, out_h, out_w};
  }
  static LayerSpec gated_mix() { return {LayerKind::gated_mix}; }

  void validate() const {
    if (kernel < 1 || stride < 1) throw UsageError(std::string(to_string(kind)) + ": kernel and stride must be >= 1");
    if (padding < 0) throw UsageError(std::string(to_string(kind)) + ": padding must be >= 0");
    if ((kind == LayerKind::conv2d || kind == LayerKind::fully_connected) && out_channels < 1) {
      throw UsageError(std::string(to_string(kind)) + ": output width must be >= 1");
    }
    if (kind == LayerKind::bilinear_resize && (out_h < 1 || out_w < 1)) {
      throw UsageError("bilinear_resize: target size must be >= 1");
    }
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

namespace detail {

template <typename T>
using TensorPtrs = std::vector<const Tensor<T>*>;

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;

struct Spatial {
  std::size_t c, h, w;
};

template <typename T>
Spatial spatial_of(const Tensor<T>& t, std::string_view what) {
  if (t.rank() == 3) return {t.dim(0), t.dim(1), t.dim(2)};
  if (t.rank() == 2) return {1, t.dim(0), t.dim(1)};
  throw DimensionError(std::string(what) + ": expected [C,H,W] or [H,W], got " + shape_string(t.shape()));
}

inline Shape spatial_shape(const Spatial& s, std::size_t input_rank) {
  if (input_rank == 2 && s.c == 1) return {s.h, s.w};
  return {s.c, s.h, s.w};
}

inline void require_count(std::string_view what, std::size_t got, std::size_t want, const char* noun) {
  if (got != want) {
    throw UsageError(std::string(what) + ": expected " + std::to_string(want) + " " + noun + ", got " +
                     std::to_string(got));
  }
}

inline std::size_t conv_out_dim(std::size_t in, int kernel, int stride, int pad, std::string_view what) {
  const long span = static_cast<long>(in) + 2L * pad - kernel;
  if (span < 0) {
    throw DimensionError(std::string(what) + ": kernel " + std::to_string(kernel) + " larger than padded input " +
                         std::to_string(in + 2 * static_cast<std::size_t>(pad)));
  }
  return static_cast<std::size_t>(span / stride + 1);
}

// Output columns [x0, x1) whose input column x * stride - pad + kx lies inside [0, w).
inline std::pair<std::size_t, std::size_t> valid_columns(std::size_t w, std::size_t ow, int stride, int pad, int kx) {
  const long lo_num = static_cast<long>(pad) - kx;
  const long x0 = lo_num <= 0 ? 0 : (lo_num + stride - 1) / stride;
  const long hi_num = static_cast<long>(w) - 1 + pad - kx;
  const long x1 = hi_num < 0 ? 0 : std::min<long>(static_cast<long>(ow), hi_num / stride + 1);
  return {static_cast<std::size_t>(std::min<long>(x0, static_cast<long>(ow))),
          static_cast<std::size_t>(std::max<long>(x1, std::min<long>(x0, static_cast<long>(ow))))};
}

// Unfolds a [C,H,W] input into a [C*k*k, OH*OW] patch matrix.
template <typename T>
void im2col(const T* in, const Spatial& s, int k, int stride, int pad, std::size_t oh, std::size_t ow, T* cols) {
  const std::size_t patches = oh * ow;
  for (std::size_t c = 0; c < s.c; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + ((c * k + ky) * k + kx) * patches;
        const auto [x0, x1] = valid_columns(s.w, ow, stride, pad, kx);
        for (std::size_t y = 0; y < oh; ++y) {
          const long iy = static_cast<long>(y) * stride - pad + ky;
          T* dst = row + y * ow;
          if (iy < 0 || iy >= static_cast<long>(s.h)) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* src = in + (c * s.h + static_cast<std::size_t>(iy)) * s.w;
          std::fill(dst, dst + x0, T(0));
          if (x0 < x1) {
            const auto first = static_cast<std::size_t>(static_cast<long>(x0) * stride - pad + kx);
            if (stride == 1) {
              std::copy(src + first, src + first + (x1 - x0), dst + x0);
            } else {
              for (std::size_t x = x0; x < x1; ++x) dst[x] = src[first + (x - x0) * static_cast<std::size_t>(stride)];
            }
          }
          std::fill(dst + x1, dst + ow, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const Spatial& s, int k, int stride, int pad, std::size_t oh, std::size_t ow, T* out) {
  const std::size_t patches = oh * ow;
  for (std::size_t c = 0; c < s.c; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + ((c * k + ky) * k + kx) * patches;
        const auto [x0, x1] = valid_columns(s.w, ow, stride, pad, kx);
        for (std::size_t y = 0; y < oh; ++y) {
          const long iy = static_cast<long>(y) * stride - pad + ky;
          if (iy < 0 || iy >= static_cast<long>(s.h)) continue;
          if (x0 >= x1) continue;
          const auto first = static_cast<std::size_t>(static_cast<long>(x0) * stride - pad + kx);
          T* dst = out + (c * s.h + static_cast<std::size_t>(iy)) * s.w + first;
          const T* src = row + y * ow + x0;
          const auto step = static_cast<std::size_t>(stride);
          for (std::size_t x = 0; x < x1 - x0; ++x) dst[x * step] += src[x];
        }
      }
    }
  }
}

inline bool is_pointwise_conv(const LayerSpec& spec) {
  return spec.kernel == 1 && spec.stride == 1 && spec.padding == 0;
}

template <typename T>
Shape conv_output_shape(const LayerSpec& spec, const TensorPtrs<T>& in, const TensorPtrs<T>& params) {
  require_count("conv2d", in.size(), 1, "inputs");
  require_count("conv2d", params.size(), 2, "params (weight, bias)");
  const Spatial s = spatial_of(*in[0], "conv2d");
  const Tensor<T>& w = *params[0];
  const Shape want_w{static_cast<std::size_t>(spec.out_channels), s.c, static_cast<std::size_t>(spec.kernel),
                     static_cast<std::size_t>(spec.kernel)};
  if (w.shape() != want_w) {
    throw DimensionError("conv2d: weight shape " + shape_string(w.shape()) + " does not match " +
                         shape_string(want_w) + " for input " + shape_string(in[0]->shape()));
  }
  if (params[1]->shape() != Shape{static_cast<std::size_t>(spec.out_channels)}) {
    throw DimensionError("conv2d: bias shape " + shape_string(params[1]->shape()) + " must be [" +
                         std::to_string(spec.out_channels) + "]");
  }
  const std::size_t oh = conv_out_dim(s.h, spec.kernel, spec.stride, spec.padding, "conv2d");
  const std::size_t ow = conv_out_dim(s.w, spec.kernel, spec.stride, spec.padding, "conv2d");
  return {static_cast<std::size_t>(spec.out_channels), oh, ow};
}

template <typename T>
Tensor<T> conv_forward(const LayerSpec& spec, const TensorPtrs<T>& in, const TensorPtrs<T>& params) {
  const Shape out_shape = conv_output_shape(spec, in, params);
  const Spatial s = spatial_of(*in[0], "conv2d");
  const std::size_t oh = out_shape[1], ow = out_shape[2], patches = oh * ow;
  const std::size_t depth = s.c * spec.kernel * spec.kernel;
  Tensor<T> out(out_shape);
  ConstMatrixMap<T> weight(params[0]->data().data(), spec.out_channels, static_cast<Eigen::Index>(depth));
  MatrixMap<T> y(out.data().data(), spec.out_channels, static_cast<Eigen::Index>(patches));
  if (is_pointwise_conv(spec)) {
    ConstMatrixMap<T> cols(in[0]->data().data(), static_cast<Eigen::Index>(depth), static_cast<Eigen::Index>(patches));
    y.noalias() = weight * cols;
  } else {
    AlignedVector<T> buffer(depth * patches);
    im2col(in[0]->data().data(), s, spec.kernel, spec.stride, spec.padding, oh, ow, buffer.data());
    ConstMatrixMap<T> cols(buffer.data(), static_cast<Eigen::Index>(depth), static_cast<Eigen::Index>(patches));
    y.noalias() = weight * cols;
  }
  const auto& bias = *params[1];
  for (std::size_t c = 0; c < out_shape[0]; ++c) y.row(static_cast<Eigen::Index>(c)).array() += bias[c];
  return out;
}

template <typename T>
void conv_backward(const LayerSpec& spec, const TensorPtrs<T>& in, const TensorPtrs<T>& params,
                   const Tensor<T>& gout, Tensor<T>* gin, Tensor<T>* gweight, Tensor<T>* gbias) {
  const Spatial s = spatial_of(*in[0], "conv2d");
  const std::size_t oh = gout.dim(1), ow = gout.dim(2), patches = oh * ow;
  const std::size_t depth = s.c * spec.kernel * spec.kernel;
  const auto rows = static_cast<Eigen::Index>(spec.out_channels);
  ConstMatrixMap<T> gy(gout.data().data(), rows, static_cast<Eigen::Index>(patches));
  ConstMatrixMap<T> weight(params[0]->data().data(), rows, static_cast<Eigen::Index>(depth));

  AlignedVector<T> buffer;
  const T* cols_ptr = in[0]->data().data();
  if (!is_pointwise_conv(spec)) {
    buffer.resize(depth * patches);
    im2col(in[0]->data().data(), s, spec.kernel, spec.stride, spec.padding, oh, ow, buffer.data());
    cols_ptr = buffer.data();
  }
  ConstMatrixMap<T> cols(cols_ptr, static_cast<Eigen::Index>(depth), static_cast<Eigen::Index>(patches));

  if (gweight) {
    MatrixMap<T> gw(gweight->data().data(), rows, static_cast<Eigen::Index>(depth));
    gw.noalias() += gy * cols.transpose();
  }
  if (gbias) {
    for (Eigen::Index c = 0; c < rows; ++c) (*gbias)[static_cast<std::size_t>(c)] += gy.row(c).sum();
  }
  if (gin) {
    if (is_pointwise_conv(spec)) {
      MatrixMap<T> gx(gin->data().data(), static_cast<Eigen::Index>(depth), static_cast<Eigen::Index>(patches));
      gx.noalias() += weight.transpose() * gy;
    } else {
      RowMatrix<T> gcols = weight.transpose() * gy;
      col2im_add(gcols.data(), s, spec.kernel, spec.stride, spec.padding, oh, ow, gin->data().data());
    }
  }
}

template <typename T>
Tensor<T> maxpool_forward(const LayerSpec& spec, const Tensor<T>& in) {
  const Spatial s = spatial_of(in, "maxpool2d");
  const std::size_t oh = conv_out_dim(s.h, spec.kernel, spec.stride, 0, "maxpool2d");
  const std::size_t ow = conv_out_dim(s.w, spec.kernel, spec.stride, 0, "maxpool2d");
  Tensor<T> out(spatial_shape({s.c, oh, ow}, in.rank()));
  const T* src = in.data().data();
  T* dst = out.data().data();
  for (std::size_t c = 0; c < s.c; ++c) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        T best = src[(c * s.h + y * spec.stride) * s.w + x * spec.stride];
        for (int ky = 0; ky < spec.kernel; ++ky) {
          for (int kx = 0; kx < spec.kernel; ++kx) {
            best = std::max(best, src[(c * s.h + y * spec.stride + ky) * s.w + x * spec.stride + kx]);
          }
        }
        dst[(c * oh + y) * ow + x] = best;
      }
    }
  }
  return out;
}

// Routes each output gradient to the first maximal element of its window.
template <typename T>
void maxpool_backward(const LayerSpec& spec, const Tensor<T>& in, const Tensor<T>& gout, Tensor<T>& gin) {
  const Spatial s = spatial_of(in, "maxpool2d");
  const Spatial o = spatial_of(gout, "maxpool2d");
  const T* src = in.data().data();
  for (std::size_t c = 0; c < s.c; ++c) {
    for (std::size_t y = 0; y < o.h; ++y) {
      for (std::size_t x = 0; x < o.w; ++x) {
        std::size_t arg = (c * s.h + y * spec.stride) * s.w + x * spec.stride;
        for (int ky = 0; ky < spec.kernel; ++ky) {
          for (int kx = 0; kx < spec.kernel; ++kx) {
            const std::size_t idx = (c * s.h + y * spec.stride + ky) * s.w + x * spec.stride + kx;
            if (src[idx] > src[arg]) arg = idx;
          }
        }
        gin[arg] += gout[(c * o.h + y) * o.w + x];
      }
    }
  }
}

template <typename T>
void check_fc(const LayerSpec& spec, const TensorPtrs<T>& in, const TensorPtrs<T>& params) {
  require_count("fully_connected", in.size(), 1, "inputs");
  require_count("fully_connected", params.size(), 2, "params (weight, bias)");
  const Shape want_w{in[0]->size(), static_cast<std::size_t>(spec.out_channels)};
  if (params[0]->shape() != want_w) {
    throw DimensionError("fully_connected: weight shape " + shape_string(params[0]->shape()) +
                         " must be [flattened input " + std::to_string(in[0]->size()) + " x " +
                         std::to_string(spec.out_channels) + "]");
  }
  if (params[1]->shape() != Shape{static_cast<std::size_t>(spec.out_channels)}) {
    throw DimensionError("fully_connected: bias shape " + shape_string(params[1]->shape()) + " must be [" +
                         std::to_string(spec.out_channels) + "]");
  }
}

template <typename T>
Tensor<T> fc_forward(const LayerSpec& spec, const TensorPtrs<T>& in, const TensorPtrs<T>& params) {
  check_fc(spec, in, params);
  const auto n_in = static_cast<Eigen::Index>(in[0]->size());
  const auto n_out = static_cast<Eigen::Index>(spec.out_channels);
  Tensor<T> out({static_cast<std::size_t>(spec.out_channels)});
  ConstMatrixMap<T> w(params[0]->data().data(), n_in, n_out);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> x(in[0]->data().data(), n_in);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(params[1]->data().data(), n_out);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> y(out.data().data(), n_out);
  y.noalias() = w.transpose() * x;
  y += b;
  return out;
}

template <typename T>
void fc_backward(const TensorPtrs<T>& in, const TensorPtrs<T>& params, const Tensor<T>& gout, Tensor<T>* gin,
                 Tensor<T>* gweight, Tensor<T>* gbias) {
  const auto n_in = static_cast<Eigen::Index>(in[0]->size());
  const auto n_out = static_cast<Eigen::Index>(gout.size());
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> x(in[0]->data().data(), n_in);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> gy(gout.data().data(), n_out);
  if (gweight) {
    MatrixMap<T> gw(gweight->data().data(), n_in, n_out);
    gw.noalias() += x * gy.transpose();
  }
  if (gbias) {
    for (std::size_t i = 0; i < gout.size(); ++i) (*gbias)[i] += gout[i];
  }
  if (gin) {
    ConstMatrixMap<T> w(params[0]->data().data(), n_in, n_out);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gx(gin->data().data(), n_in);
    gx.noalias() += w * gy;
  }
}

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Tensor<T> softmax_forward(const Tensor<T>& in) {
  Tensor<T> out(in.shape());
  T peak = in[0];
  for (std::size_t i = 1; i < in.size(); ++i) peak = std::max(peak, in[i]);
  T total = T(0);
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = std::exp(in[i] - peak);
    total += out[i];
  }
  for (std::size_t i = 0; i < in.size(); ++i) out[i] /= total;
  return out;
}

template <typename T>
Tensor<T> concat_forward(const TensorPtrs<T>& in) {
  if (in.empty()) throw UsageError("concat_channels: needs at least one input");
  const Spatial first = spatial_of(*in[0], "concat_channels");
  std::size_t channels = 0;
  for (const auto* t : in) {
    const Spatial s = spatial_of(*t, "concat_channels");
    if (s.h != first.h || s.w != first.w) {
      throw DimensionError("concat_channels: spatial dims " + shape_string(t->shape()) + " differ from " +
                           shape_string(in[0]->shape()));
    }
    channels += s.c;
  }
  AlignedVector<T> data;
  data.reserve(channels * first.h * first.w);
  for (const auto* t : in) data.insert(data.end(), t->data().begin(), t->data().end());
  return Tensor<T>({channels, first.h, first.w}, std::move(data));
}

struct ResizeTap {
  std::size_t lo, hi;
  double frac;
};

// Corner-aligned sampling: output endpoints land on input endpoints.
inline ResizeTap resize_tap(std::size_t out_index, std::size_t out_size, std::size_t in_size) {
  if (out_size == 1 || in_size == 1) return {0, 0, 0.0};
  const double pos = static_cast<double>(out_index) * static_cast<double>(in_size - 1) /
                     static_cast<double>(out_size - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo >= in_size - 1) return {in_size - 1, in_size - 1, 0.0};
  return {lo, lo + 1, pos - static_cast<double>(lo)};
}

template <typename T>
Tensor<T> resize_forward(const LayerSpec& spec, const Tensor<T>& in) {
  const Spatial s = spatial_of(in, "bilinear_resize");
  const auto oh = static_cast<std::size_t>(spec.out_h), ow = static_cast<std::size_t>(spec.out_w);
  Tensor<T> out(spatial_shape({s.c, oh, ow}, in.rank()));
  const T* src = in.data().data();
  for (std::size_t c = 0; c < s.c; ++c) {
    const T* plane = src + c * s.h * s.w;
    for (std::size_t y = 0; y < oh; ++y) {
      const ResizeTap ty = resize_tap(y, oh, s.h);
      const T fy = static_cast<T>(ty.frac);
      for (std::size_t x = 0; x < ow; ++x) {
        const ResizeTap tx = resize_tap(x, ow, s.w);
        const T fx = static_cast<T>(tx.frac);
        const T top = plane[ty.lo * s.w + tx.lo] * (T(1) - fx) + plane[ty.lo * s.w + tx.hi] * fx;
        const T bottom = plane[ty.hi * s.w + tx.lo] * (T(1) - fx) + plane[ty.hi * s.w + tx.hi] * fx;
        out[(c * oh + y) * ow + x] = top * (T(1) - fy) + bottom * fy;
      }
    }
  }
  return out;
}

template <typename T>
void resize_backward(const Tensor<T>& in, const Tensor<T>& gout, Tensor<T>& gin) {
  const Spatial s = spatial_of(in, "bilinear_resize");
  const Spatial o = spatial_of(gout, "bilinear_resize");
  for (std::size_t c = 0; c < s.c; ++c) {
    T* plane = gin.data().data() + c * s.h * s.w;
    for (std::size_t y = 0; y < o.h; ++y) {
      const ResizeTap ty = resize_tap(y, o.h, s.h);
      const T fy = static_cast<T>(ty.frac);
      for (std::size_t x = 0; x < o.w; ++x) {
        const ResizeTap tx = resize_tap(x, o.w, s.w);
        const T fx = static_cast<T>(tx.frac);
        const T g = gout[(c * o.h + y) * o.w + x];
        plane[ty.lo * s.w + tx.lo] += g * (T(1) - fy) * (T(1) - fx);
        plane[ty.lo * s.w + tx.hi] += g * (T(1) - fy) * fx;
        plane[ty.hi * s.w + tx.lo] += g * fy * (T(1) - fx);
        plane[ty.hi * s.w + tx.hi] += g * fy * fx;
      }
    }
  }
}

template <typename T>
Tensor<T> gated_mix_forward(const TensorPtrs<T>& in) {
  require_count("gated_mix", in.size(), 3, "inputs (weights, day, night)");
  if (in[0]->size() != 2) {
    throw DimensionError("gated_mix: weights must have 2 entries, got " + shape_string(in[0]->shape()));
  }
  in[1]->require_same_shape(*in[2], "gated_mix day/night");
  const T wd = (*in[0])[0], wn = (*in[0])[1];
  Tensor<T> out(in[1]->shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = wd * (*in[1])[i] + wn * (*in[2])[i];
  return out;
}

template <typename T>
void check_finite(const TensorPtrs<T>& tensors, LayerKind kind, const char* role) {
  for (const auto* t : tensors) {
    if (!t->all_finite()) {
      throw NumericError(std::string(to_string(kind)) + ": non-finite value in " + role);
    }
  }
}

template <typename T>
Tensor<T> forward(const LayerSpec& spec, const TensorPtrs<T>& in, const TensorPtrs<T>& params) {
  spec.validate();
  check_finite(in, spec.kind, "input");
  check_finite(params, spec.kind, "parameter");
  const auto unary = [&](const char* name) -> const Tensor<T>& {
    require_count(name, in.size(), 1, "inputs");
    require_count(name, params.size(), 0, "params");
    return *in[0];
  };
  switch (spec.kind) {
    case LayerKind::conv2d: return conv_forward(spec, in, params);
    case LayerKind::maxpool2d: return maxpool_forward(spec, unary("maxpool2d"));
    case LayerKind::fully_connected: return fc_forward(spec, in, params);
    case LayerKind::relu: {
      Tensor<T> out = unary("relu");
      for (T& v : out.data()) v = v > T(0) ? v : T(0);
      return out;
    }
    case LayerKind::sigmoid: {
      Tensor<T> out = unary("sigmoid");
      for (T& v : out.data()) v = sigmoid_scalar(v);
      return out;
    }
    case LayerKind::softmax: return softmax_forward(unary("softmax"));
    case LayerKind::concat_channels: require_count("concat_channels", params.size(), 0, "params"); return concat_forward(in);
    case LayerKind::bilinear_resize: return resize_forward(spec, unary("bilinear_resize"));
    case LayerKind::gated_mix: require_count("gated_mix", params.size(), 0, "params"); return gated_mix_forward(in);
  }
  throw UsageError("unknown layer kind");
}

/// Accumulates input/parameter gradients of <gout, out>. Null entries are skipped.
template <typename T>
void backward(const LayerSpec& spec, const TensorPtrs<T>& in, const TensorPtrs<T>& params, const Tensor<T>& out,
              const Tensor<T>& gout, const std::vector<Tensor<T>*>& gin, const std::vector<Tensor<T>*>& gparams) {
  switch (spec.kind) {
    case LayerKind::conv2d: conv_backward(spec, in, params, gout, gin[0], gparams[0], gparams[1]); return;
    case LayerKind::maxpool2d:
      if (gin[0]) maxpool_backward(spec, *in[0], gout, *gin[0]);
      return;
    case LayerKind::fully_connected: fc_backward(in, params, gout, gin[0], gparams[0], gparams[1]); return;
    case LayerKind::relu:
      if (gin[0]) {
        for (std::size_t i = 0; i < out.size(); ++i) {
          if (out[i] > T(0)) (*gin[0])[i] += gout[i];
        }
      }
      return;
    case LayerKind::sigmoid:
      if (gin[0]) {
        for (std::size_t i = 0; i < out.size(); ++i) (*gin[0])[i] += gout[i] * out[i] * (T(1) - out[i]);
      }
      return;
    case LayerKind::softmax:
      if (gin[0]) {
        const T inner = dot(gout, out);
        for (std::size_t i = 0; i < out.size(); ++i) (*gin[0])[i] += out[i] * (gout[i] - inner);
      }
      return;
    case LayerKind::concat_channels: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < in.size(); ++k) {
        if (gin[k]) {
          for (std::size_t i = 0; i < in[k]->size(); ++i) (*gin[k])[i] += gout[offset + i];
        }
        offset += in[k]->size();
      }
      return;
    }
    case LayerKind::bilinear_resize:
      if (gin[0]) resize_backward(*in[0], gout, *gin[0]);
      return;
    case LayerKind::gated_mix: {
      const T wd = (*in[0])[0], wn = (*in[0])[1];
      if (gin[0]) {
        (*gin[0])[0] += dot(gout, *in[1]);
        (*gin[0])[1] += dot(gout, *in[2]);
      }
      if (gin[1]) {
        for (std::size_t i = 0; i < gout.size(); ++i) (*gin[1])[i] += wd * gout[i];
      }
      if (gin[2]) {
        for (std::size_t i = 0; i < gout.size(); ++i) (*gin[2])[i] += wn * gout[i];
      }
      return;
    }
  }
}

template <typename T>
TensorPtrs<T> pointers(std::span<const Tensor<T>> tensors) {
  TensorPtrs<T> out;
  out.reserve(tensors.size());
  for (const auto& t : tensors) out.push_back(&t);
  return out;
}

}  // namespace detail

/// Pure forward application of one layer.
template <typename T>
Tensor<T> apply_layer(const LayerSpec& spec, std::span<const Tensor<T>> inputs,
                      std::span<const Tensor<T>> params = {}) {
  return detail::forward(spec, detail::pointers(inputs), detail::pointers(params));
}

template <typename T>
Tensor<T> apply_layer(const LayerSpec& spec, const std::vector<Tensor<T>>& inputs,
                      const std::vector<Tensor<T>>& params = {}) {
  return apply_layer<T>(spec, std::span<const Tensor<T>>(inputs), std::span<const Tensor<T>>(params));
}

}  // namespace iadn
