#pragma once

#include <algorithm>
#include <cmath>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "wtlab/common.hpp"
#include "wtlab/rng.hpp"
#include "wtlab/tensor.hpp"

namespace wtlab::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using CMatMap = Eigen::Map<const Mat<T>>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Stochastic layers draw from ctx.rng only when ctx.train is set.
struct Context {
  bool train = false;
  Rng* rng = nullptr;
};

struct Pad2d {
  std::size_t top = 0, bottom = 0, left = 0, right = 0;
};

// Dense 2-D convolution. x [B, Ci, H, W], w [Co, Ci, KH, KW], bias [Co] or empty.
// im2col is built for blocks of output rows to bound scratch memory.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, std::size_t sh,
                 std::size_t sw, Pad2d pad) {
  require_rank4(x, "conv2d input");
  require_rank4(w, "conv2d weight");
  const std::size_t B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Co = w.dim(0), KH = w.dim(2), KW = w.dim(3);
  require(w.dim(1) == Ci, "conv2d: weight expects ", w.dim(1), " input channels, got ", Ci);
  require(H + pad.top + pad.bottom >= KH && W + pad.left + pad.right >= KW,
          "conv2d: input ", shape_str(x.shape()), " smaller than kernel");
  const std::size_t Ho = (H + pad.top + pad.bottom - KH) / sh + 1;
  const std::size_t Wo = (W + pad.left + pad.right - KW) / sw + 1;
  const std::size_t K = Ci * KH * KW;
  Tensor<T> y({B, Co, Ho, Wo});
  const std::size_t rows_per_block = std::max<std::size_t>(1, (1u << 22) / std::max<std::size_t>(1, K * Wo));
  CMatMap<T> wm(w.data(), static_cast<Eigen::Index>(Co), static_cast<Eigen::Index>(K));
  Mat<T> cols;
  for (std::size_t b = 0; b < B; ++b) {
    const T* xb = x.data() + b * Ci * H * W;
    T* yb = y.data() + b * Co * Ho * Wo;
    for (std::size_t oh0 = 0; oh0 < Ho; oh0 += rows_per_block) {
      const std::size_t nr = std::min(rows_per_block, Ho - oh0);
      const std::size_t n = nr * Wo;
      cols.setZero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(n));
      for (std::size_t ci = 0; ci < Ci; ++ci) {
        for (std::size_t kh = 0; kh < KH; ++kh) {
          for (std::size_t kw = 0; kw < KW; ++kw) {
            T* row = cols.data() + ((ci * KH + kh) * KW + kw) * n;
            for (std::size_t r = 0; r < nr; ++r) {
              const long ih = static_cast<long>((oh0 + r) * sh + kh) - static_cast<long>(pad.top);
              if (ih < 0 || ih >= static_cast<long>(H)) continue;
              const T* xr = xb + (ci * H + static_cast<std::size_t>(ih)) * W;
              T* dst = row + r * Wo;
              for (std::size_t ow = 0; ow < Wo; ++ow) {
                const long iw = static_cast<long>(ow * sw + kw) - static_cast<long>(pad.left);
                if (iw >= 0 && iw < static_cast<long>(W)) dst[ow] = xr[iw];
              }
            }
          }
        }
      }
      Eigen::Map<Mat<T>, 0, Eigen::OuterStride<>> out(yb + oh0 * Wo, static_cast<Eigen::Index>(Co),
                                                      static_cast<Eigen::Index>(n),
                                                      Eigen::OuterStride<>(static_cast<Eigen::Index>(Ho * Wo)));
      out.noalias() = wm * cols;
    }
    if (!bias.empty()) {
      for (std::size_t co = 0; co < Co; ++co) {
        T* p = yb + co * Ho * Wo;
        for (std::size_t i = 0; i < Ho * Wo; ++i) p[i] += bias[co];
      }
    }
  }
  return y;
}

// Transposed convolution. x [B, Ci, H, W], w [Ci, Co, KH, KW]; output size
// (H - 1) * sh - 2 * ph + KH + oph along each axis.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                           std::size_t sh, std::size_t sw, std::size_t ph, std::size_t pw,
                           std::size_t oph, std::size_t opw) {
  require_rank4(x, "conv_transpose2d input");
  require_rank4(w, "conv_transpose2d weight");
  const std::size_t B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Co = w.dim(1), KH = w.dim(2), KW = w.dim(3);
  require(w.dim(0) == Ci, "conv_transpose2d: weight expects ", w.dim(0), " input channels, got ",
          Ci);
  const long Ho = static_cast<long>((H - 1) * sh + KH + oph) - 2 * static_cast<long>(ph);
  const long Wo = static_cast<long>((W - 1) * sw + KW + opw) - 2 * static_cast<long>(pw);
  require(Ho > 0 && Wo > 0, "conv_transpose2d: empty output");
  Tensor<T> y({B, Co, static_cast<std::size_t>(Ho), static_cast<std::size_t>(Wo)});
  const std::size_t K = Co * KH * KW;
  CMatMap<T> wm(w.data(), static_cast<Eigen::Index>(Ci), static_cast<Eigen::Index>(K));
  Mat<T> cols;
  for (std::size_t b = 0; b < B; ++b) {
    CMatMap<T> xm(x.data() + b * Ci * H * W, static_cast<Eigen::Index>(Ci),
                  static_cast<Eigen::Index>(H * W));
    cols.noalias() = wm.transpose() * xm;  // [K x H*W]
    T* yb = y.data() + b * Co * static_cast<std::size_t>(Ho * Wo);
    for (std::size_t co = 0; co < Co; ++co) {
      for (std::size_t kh = 0; kh < KH; ++kh) {
        for (std::size_t kw = 0; kw < KW; ++kw) {
          const T* src = cols.data() + ((co * KH + kh) * KW + kw) * H * W;
          for (std::size_t ih = 0; ih < H; ++ih) {
            const long oh = static_cast<long>(ih * sh + kh) - static_cast<long>(ph);
            if (oh < 0 || oh >= Ho) continue;
            T* dst = yb + (co * static_cast<std::size_t>(Ho) + static_cast<std::size_t>(oh)) *
                              static_cast<std::size_t>(Wo);
            for (std::size_t iw = 0; iw < W; ++iw) {
              const long ow = static_cast<long>(iw * sw + kw) - static_cast<long>(pw);
              if (ow >= 0 && ow < Wo) dst[ow] += src[ih * W + iw];
            }
          }
        }
      }
    }
    if (!bias.empty()) {
      for (std::size_t co = 0; co < Co; ++co) {
        T* p = yb + co * static_cast<std::size_t>(Ho * Wo);
        for (long i = 0; i < Ho * Wo; ++i) p[i] += bias[co];
      }
    }
  }
  return y;
}

// Keeps the first `width` frames (causal crop along time).
template <typename T>
Tensor<T> crop_time(const Tensor<T>& x, std::size_t width) {
  require(width <= x.dim(3), "crop_time: ", width, " > ", x.dim(3));
  if (width == x.dim(3)) return x;
  Tensor<T> y({x.dim(0), x.dim(1), x.dim(2), width});
  const std::size_t rows = x.dim(0) * x.dim(1) * x.dim(2);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x.data() + r * x.dim(3), width, y.data() + r * width);
  }
  return y;
}

// Depthwise KxK convolution with zero "same" padding. w [C, 1, K, K].
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  require_rank4(x, "depthwise_conv2d input");
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t K = w.dim(2);
  require(w.dim(0) == C && w.dim(1) == 1 && w.dim(3) == K && K % 2 == 1,
          "depthwise_conv2d: weight ", shape_str(w.shape()), " does not fit ", C, " channels");
  const long r = static_cast<long>(K / 2);
  Tensor<T> y(x.shape());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const T* xc = x.data() + (b * C + c) * H * W;
      T* yc = y.data() + (b * C + c) * H * W;
      const T* wc = w.data() + c * K * K;
      const T b0 = bias.empty() ? T(0) : bias[c];
      for (std::size_t i = 0; i < H * W; ++i) yc[i] = b0;
      for (long kh = -r; kh <= r; ++kh) {
        for (long kw = -r; kw <= r; ++kw) {
          const T wv = wc[(kh + r) * static_cast<long>(K) + (kw + r)];
          if (wv == T(0)) continue;
          const long h0 = std::max<long>(0, -kh), h1 = std::min<long>(H, static_cast<long>(H) - kh);
          const long w0 = std::max<long>(0, -kw), w1 = std::min<long>(W, static_cast<long>(W) - kw);
          for (long h = h0; h < h1; ++h) {
            const T* src = xc + (h + kh) * static_cast<long>(W) + kw;
            T* dst = yc + h * static_cast<long>(W);
            for (long q = w0; q < w1; ++q) dst[q] += wv * src[q];
          }
        }
      }
    }
  }
  return y;
}

// Gradients of depthwise_conv2d given dL/dy. dw and db are accumulated.
template <typename T>
Tensor<T> depthwise_conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                                    Tensor<T>& dw, std::type_identity_t<Tensor<T>>* db) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t K = w.dim(2);
  const long r = static_cast<long>(K / 2);
  Tensor<T> dx(x.shape());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const T* xc = x.data() + (b * C + c) * H * W;
      const T* gc = dy.data() + (b * C + c) * H * W;
      T* dxc = dx.data() + (b * C + c) * H * W;
      const T* wc = w.data() + c * K * K;
      T* dwc = dw.data() + c * K * K;
      if (db) {
        T s = 0;
        for (std::size_t i = 0; i < H * W; ++i) s += gc[i];
        (*db)[c] += s;
      }
      for (long kh = -r; kh <= r; ++kh) {
        for (long kw = -r; kw <= r; ++kw) {
          const long wi = (kh + r) * static_cast<long>(K) + (kw + r);
          const T wv = wc[wi];
          const long h0 = std::max<long>(0, -kh), h1 = std::min<long>(H, static_cast<long>(H) - kh);
          const long w0 = std::max<long>(0, -kw), w1 = std::min<long>(W, static_cast<long>(W) - kw);
          T acc = 0;
          for (long h = h0; h < h1; ++h) {
            const T* src = xc + (h + kh) * static_cast<long>(W) + kw;
            T* dsrc = dxc + (h + kh) * static_cast<long>(W) + kw;
            const T* g = gc + h * static_cast<long>(W);
            for (long q = w0; q < w1; ++q) {
              acc += g[q] * src[q];
              dsrc[q] += wv * g[q];
            }
          }
          dwc[wi] += acc;
        }
      }
    }
  }
  return dx;
}

// Per-channel affine y = x * scale[c] (+ shift[c]).
template <typename T>
void channel_affine(Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>* shift = nullptr) {
  const std::size_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      T* p = x.data() + (b * C + c) * HW;
      const T s = scale[c], o = shift ? (*shift)[c] : T(0);
      for (std::size_t i = 0; i < HW; ++i) p[i] = p[i] * s + o;
    }
  }
}

// Batch normalization over (B, H, W) per channel. Eval mode uses the running
// statistics; train mode uses batch statistics (running buffers untouched).
template <typename T>
void batch_norm(Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                const Tensor<T>& running_mean, const Tensor<T>& running_var, const Context& ctx,
                T eps = T(1e-5)) {
  const std::size_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  for (std::size_t c = 0; c < C; ++c) {
    T mean = running_mean[c], var = running_var[c];
    if (ctx.train) {
      double s = 0, s2 = 0;
      for (std::size_t b = 0; b < B; ++b) {
        const T* p = x.data() + (b * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) s += p[i];
      }
      const double n = static_cast<double>(B * HW);
      const double m = s / n;
      for (std::size_t b = 0; b < B; ++b) {
        const T* p = x.data() + (b * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) s2 += (p[i] - m) * (p[i] - m);
      }
      mean = static_cast<T>(m);
      var = static_cast<T>(s2 / n);
    }
    const T scale = gamma[c] / std::sqrt(var + eps);
    const T shift = beta[c] - mean * scale;
    for (std::size_t b = 0; b < B; ++b) {
      T* p = x.data() + (b * C + c) * HW;
      for (std::size_t i = 0; i < HW; ++i) p[i] = p[i] * scale + shift;
    }
  }
}

template <typename T>
void prelu(Tensor<T>& x, const Tensor<T>& slope) {
  const std::size_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      T* p = x.data() + (b * C + c) * HW;
      const T a = slope[c];
      for (std::size_t i = 0; i < HW; ++i) p[i] = p[i] >= T(0) ? p[i] : a * p[i];
    }
  }
}

template <typename T>
void dropout(std::span<T> x, double p, const Context& ctx) {
  if (!ctx.train || p <= 0.0) return;
  require(ctx.rng != nullptr, "dropout in train mode needs a seeded generator");
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  for (T& v : x) v = ctx.rng->uniform() < p ? T(0) : v * keep;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
          "concat_channels: shapes ", shape_str(a.shape()), " and ", shape_str(b.shape()),
          " do not align");
  const std::size_t B = a.dim(0), HW = a.dim(2) * a.dim(3);
  const std::size_t Ca = a.dim(1), Cb = b.dim(1);
  Tensor<T> y({B, Ca + Cb, a.dim(2), a.dim(3)});
  for (std::size_t n = 0; n < B; ++n) {
    std::copy_n(a.data() + n * Ca * HW, Ca * HW, y.data() + n * (Ca + Cb) * HW);
    std::copy_n(b.data() + n * Cb * HW, Cb * HW, y.data() + n * (Ca + Cb) * HW + Ca * HW);
  }
  return y;
}

template <typename T>
T sigmoid(T v) {
  return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
}

template <typename T>
T swish(T v) {
  return v * sigmoid(v);
}

// Row-wise layer norm over the last dimension of x [N x D].
template <typename T>
void layer_norm(Mat<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5)) {
  const Eigen::Index D = x.cols();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    auto row = x.row(i);
    const T mean = row.mean();
    const T var = (row.array() - mean).square().mean();
    const T inv = T(1) / std::sqrt(var + eps);
    for (Eigen::Index d = 0; d < D; ++d) {
      row[d] = (row[d] - mean) * inv * gamma[static_cast<std::size_t>(d)] +
               beta[static_cast<std::size_t>(d)];
    }
  }
}

// y = x W^T + b, W [out x in].
template <typename T>
Mat<T> linear(const Mat<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  CMatMap<T> wm(w.data(), static_cast<Eigen::Index>(w.dim(0)), static_cast<Eigen::Index>(w.dim(1)));
  require(x.cols() == wm.cols(), "linear: input width ", x.cols(), " != weight width ", wm.cols());
  Mat<T> y = x * wm.transpose();
  if (!b.empty()) {
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bv(b.data(), static_cast<Eigen::Index>(b.size()));
    y.rowwise() += bv;
  }
  return y;
}

}  // namespace wtlab::nn
