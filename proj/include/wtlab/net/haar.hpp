#pragma once

#include <cstddef>

#include "wtlab/common.hpp"
#include "wtlab/tensor.hpp"

namespace wtlab::nn {

// Subband order inside a packed tensor: channel c * 4 + k.
enum Subband : std::size_t { LL = 0, LH = 1, HL = 2, HH = 3 };

template <typename T>
struct HaarBands {
  Tensor<T> ll, lh, hl, hh;
  std::size_t height = 0, width = 0;  // size before padding
};

namespace haar {

// Odd axes grow by one sample mirrored about the last one (x[n] = x[n - 2]);
// a length-1 axis repeats its sample.
template <typename T>
Tensor<T> pad_even(const Tensor<T>& x) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Hp = H + H % 2, Wp = W + W % 2;
  if (Hp == H && Wp == W) return x;
  Tensor<T> y({B, C, Hp, Wp});
  for (std::size_t n = 0; n < B * C; ++n) {
    const T* src = x.data() + n * H * W;
    T* dst = y.data() + n * Hp * Wp;
    for (std::size_t h = 0; h < Hp; ++h) {
      const std::size_t sh = h < H ? h : (H >= 2 ? H - 2 : 0);
      for (std::size_t w = 0; w < Wp; ++w) {
        const std::size_t sw = w < W ? w : (W >= 2 ? W - 2 : 0);
        dst[h * Wp + w] = src[sh * W + sw];
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> pad_even_adjoint(const Tensor<T>& g, std::size_t H, std::size_t W) {
  const std::size_t B = g.dim(0), C = g.dim(1), Hp = g.dim(2), Wp = g.dim(3);
  if (Hp == H && Wp == W) return g;
  Tensor<T> y({B, C, H, W});
  for (std::size_t n = 0; n < B * C; ++n) {
    const T* src = g.data() + n * Hp * Wp;
    T* dst = y.data() + n * H * W;
    for (std::size_t h = 0; h < Hp; ++h) {
      const std::size_t sh = h < H ? h : (H >= 2 ? H - 2 : 0);
      for (std::size_t w = 0; w < Wp; ++w) {
        const std::size_t sw = w < W ? w : (W >= 2 ? W - 2 : 0);
        dst[sh * W + sw] += src[h * Wp + w];
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> crop(const Tensor<T>& x, std::size_t H, std::size_t W) {
  if (x.dim(2) == H && x.dim(3) == W) return x;
  require(H <= x.dim(2) && W <= x.dim(3), "haar crop: ", H, "x", W, " exceeds ",
          shape_str(x.shape()));
  const std::size_t B = x.dim(0), C = x.dim(1), Hp = x.dim(2), Wp = x.dim(3);
  Tensor<T> y({B, C, H, W});
  for (std::size_t n = 0; n < B * C; ++n) {
    for (std::size_t h = 0; h < H; ++h) {
      std::copy_n(x.data() + (n * Hp + h) * Wp, W, y.data() + (n * H + h) * W);
    }
  }
  return y;
}

// Adjoint of crop: zero extension.
template <typename T>
Tensor<T> crop_adjoint(const Tensor<T>& g, std::size_t Hp, std::size_t Wp) {
  const std::size_t B = g.dim(0), C = g.dim(1), H = g.dim(2), W = g.dim(3);
  if (Hp == H && Wp == W) return g;
  Tensor<T> y({B, C, Hp, Wp});
  for (std::size_t n = 0; n < B * C; ++n) {
    for (std::size_t h = 0; h < H; ++h) {
      std::copy_n(g.data() + (n * H + h) * W, W, y.data() + (n * Hp + h) * Wp);
    }
  }
  return y;
}

// Orthonormal analysis of an even-sized map into [B, 4C, H/2, W/2].
template <typename T>
Tensor<T> analyze(const Tensor<T>& x) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require(H % 2 == 0 && W % 2 == 0, "haar analysis needs even sizes, got ", shape_str(x.shape()));
  const std::size_t H2 = H / 2, W2 = W / 2;
  Tensor<T> y({B, 4 * C, H2, W2});
  for (std::size_t n = 0; n < B * C; ++n) {
    const T* src = x.data() + n * H * W;
    T* ll = y.data() + (4 * n + LL) * H2 * W2;
    T* lh = y.data() + (4 * n + LH) * H2 * W2;
    T* hl = y.data() + (4 * n + HL) * H2 * W2;
    T* hh = y.data() + (4 * n + HH) * H2 * W2;
    for (std::size_t i = 0; i < H2; ++i) {
      for (std::size_t j = 0; j < W2; ++j) {
        const T a = src[2 * i * W + 2 * j], b = src[2 * i * W + 2 * j + 1];
        const T c = src[(2 * i + 1) * W + 2 * j], d = src[(2 * i + 1) * W + 2 * j + 1];
        const std::size_t o = i * W2 + j;
        ll[o] = T(0.5) * (a + b + c + d);
        lh[o] = T(0.5) * (a + b - c - d);
        hl[o] = T(0.5) * (a - b + c - d);
        hh[o] = T(0.5) * (a - b - c + d);
      }
    }
  }
  return y;
}

// Inverse (and adjoint) of analyze.
template <typename T>
Tensor<T> synthesize(const Tensor<T>& s) {
  require(s.dim(1) % 4 == 0, "haar synthesis needs 4C channels, got ", s.dim(1));
  const std::size_t B = s.dim(0), C = s.dim(1) / 4, H2 = s.dim(2), W2 = s.dim(3);
  const std::size_t W = 2 * W2;
  Tensor<T> x({B, C, 2 * H2, W});
  for (std::size_t n = 0; n < B * C; ++n) {
    T* dst = x.data() + n * 4 * H2 * W2;
    const T* ll = s.data() + (4 * n + LL) * H2 * W2;
    const T* lh = s.data() + (4 * n + LH) * H2 * W2;
    const T* hl = s.data() + (4 * n + HL) * H2 * W2;
    const T* hh = s.data() + (4 * n + HH) * H2 * W2;
    for (std::size_t i = 0; i < H2; ++i) {
      for (std::size_t j = 0; j < W2; ++j) {
        const std::size_t o = i * W2 + j;
        dst[2 * i * W + 2 * j] = T(0.5) * (ll[o] + lh[o] + hl[o] + hh[o]);
        dst[2 * i * W + 2 * j + 1] = T(0.5) * (ll[o] + lh[o] - hl[o] - hh[o]);
        dst[(2 * i + 1) * W + 2 * j] = T(0.5) * (ll[o] - lh[o] + hl[o] - hh[o]);
        dst[(2 * i + 1) * W + 2 * j + 1] = T(0.5) * (ll[o] - lh[o] - hl[o] + hh[o]);
      }
    }
  }
  return x;
}

// Channel k of every group of four.
template <typename T>
Tensor<T> take_band(const Tensor<T>& s, std::size_t k) {
  const std::size_t B = s.dim(0), C = s.dim(1) / 4, HW = s.dim(2) * s.dim(3);
  Tensor<T> y({B, C, s.dim(2), s.dim(3)});
  for (std::size_t n = 0; n < B * C; ++n) {
    std::copy_n(s.data() + (4 * n + k) * HW, HW, y.data() + n * HW);
  }
  return y;
}

template <typename T>
void add_band(Tensor<T>& s, std::size_t k, const Tensor<T>& band) {
  const std::size_t B = s.dim(0), C = s.dim(1) / 4, HW = s.dim(2) * s.dim(3);
  require(band.dim(0) == B && band.dim(1) == C && band.size() == B * C * HW,
          "haar: band ", shape_str(band.shape()), " does not fit ", shape_str(s.shape()));
  for (std::size_t n = 0; n < B * C; ++n) {
    T* dst = s.data() + (4 * n + k) * HW;
    const T* src = band.data() + n * HW;
    for (std::size_t i = 0; i < HW; ++i) dst[i] += src[i];
  }
}

}  // namespace haar

template <typename T>
HaarBands<T> haar_dwt2(const Tensor<T>& x) {
  require_rank4(x, "haar_dwt2");
  const auto s = haar::analyze(haar::pad_even(x));
  return {haar::take_band(s, LL), haar::take_band(s, LH), haar::take_band(s, HL),
          haar::take_band(s, HH), x.dim(2), x.dim(3)};
}

template <typename T>
Tensor<T> haar_idwt2(const HaarBands<T>& b) {
  const auto& shape = b.ll.shape();
  require(b.ll.rank() == 4 && b.lh.shape() == shape && b.hl.shape() == shape &&
              b.hh.shape() == shape,
          "haar_idwt2: subband shapes ", shape_str(b.ll.shape()), ", ", shape_str(b.lh.shape()),
          ", ", shape_str(b.hl.shape()), ", ", shape_str(b.hh.shape()), " differ");
  const std::size_t H = b.height ? b.height : 2 * shape[2];
  const std::size_t W = b.width ? b.width : 2 * shape[3];
  require((H + 1) / 2 == shape[2] && (W + 1) / 2 == shape[3], "haar_idwt2: recorded size ", H,
          "x", W, " does not match subbands ", shape_str(shape));
  Tensor<T> s({shape[0], 4 * shape[1], shape[2], shape[3]});
  haar::add_band(s, LL, b.ll);
  haar::add_band(s, LH, b.lh);
  haar::add_band(s, HL, b.hl);
  haar::add_band(s, HH, b.hh);
  return haar::crop(haar::synthesize(s), H, W);
}

}  // namespace wtlab::nn
