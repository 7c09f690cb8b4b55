#pragma once

#include <string>
#include <vector>

#include "wtlab/net/grads.hpp"
#include "wtlab/net/haar.hpp"
#include "wtlab/net/ops.hpp"
#include "wtlab/net/params.hpp"

namespace wtlab::nn {

inline constexpr double kWaveletScaleInit = 0.1;

// Largest level count the Haar cascade supports on an H x W map.
inline std::size_t wtconv_max_levels(std::size_t H, std::size_t W) {
  std::size_t L = 0;
  while (H >= 2 && W >= 2) {
    ++L;
    H = (H + 1) / 2;
    W = (W + 1) / 2;
  }
  return L;
}

// Wavelet convolution: per level, Haar analysis, depthwise KxK conv over
// the 4C subbands with a per-subband gain, recursion on the unconvolved LL,
// synthesis accumulated bottom-up; plus a scaled depthwise conv of the input.
template <typename T>
struct WtConv {
  std::string prefix;
  std::size_t channels = 0, levels = 0, kernel = 5;

  struct Cache {
    Tensor<T> x, base;  // base: conv + bias, before scale
    std::vector<Tensor<T>> bands, conv;
    std::vector<std::size_t> heights, widths;
  };

  std::string name(const std::string& leaf) const { return prefix + "." + leaf; }
  std::string level_name(std::size_t i, const char* leaf) const {
    return prefix + ".level" + std::to_string(i) + "." + leaf;
  }

  static WtConv create(ParameterStore<T>& store, const std::string& prefix, std::size_t channels,
                       std::size_t levels, std::size_t kernel = 5) {
    require(kernel % 2 == 1, "wtconv kernel must be odd, got ", kernel);
    WtConv m{prefix, channels, levels, kernel};
    const double bound = fan_in_bound(kernel * kernel);
    store.add(m.name("base.weight"), {channels, 1, kernel, kernel}, Init::uniform, bound);
    store.add(m.name("base.bias"), {channels}, Init::uniform, bound);
    store.add(m.name("base.scale"), {channels}, Init::ones);
    for (std::size_t i = 0; i < levels; ++i) {
      store.add(m.level_name(i, "weight"), {4 * channels, 1, kernel, kernel}, Init::uniform, bound);
      store.add(m.level_name(i, "scale"), {4 * channels}, Init::constant, kWaveletScaleInit);
    }
    return m;
  }

  Tensor<T> forward(const ParameterStore<T>& store, const Tensor<T>& x,
                    Cache* cache = nullptr) const {
    require_rank4(x, "wtconv");
    require(x.dim(1) == channels, prefix, ": expected ", channels, " channels, got ", x.dim(1));
    const std::size_t max_l = wtconv_max_levels(x.dim(2), x.dim(3));
    require(levels <= max_l, prefix, ": a ", x.dim(2), "x", x.dim(3), " input supports at most ",
            max_l, " wavelet levels, configured ", levels);
    Cache local;
    Cache& c = cache ? *cache : local;
    c = Cache{};
    if (cache) c.x = x;

    std::vector<Tensor<T>> t(levels);
    Tensor<T> a = x;
    for (std::size_t i = 0; i < levels; ++i) {
      c.heights.push_back(a.dim(2));
      c.widths.push_back(a.dim(3));
      Tensor<T> s = haar::analyze(haar::pad_even(a));
      Tensor<T> conv = depthwise_conv2d(s, store.get(level_name(i, "weight")), Tensor<T>{});
      t[i] = conv;
      channel_affine(t[i], store.get(level_name(i, "scale")));
      a = haar::take_band(s, LL);
      if (cache) {
        c.bands.push_back(std::move(s));
        c.conv.push_back(std::move(conv));
      }
    }
    Tensor<T> next;
    for (std::size_t i = levels; i-- > 0;) {
      if (!next.empty()) haar::add_band(t[i], LL, next);
      next = haar::crop(haar::synthesize(t[i]), c.heights[i], c.widths[i]);
    }
    Tensor<T> base = depthwise_conv2d(x, store.get(name("base.weight")), store.get(name("base.bias")));
    if (cache) c.base = base;
    channel_affine(base, store.get(name("base.scale")));
    if (!next.empty()) {
      for (std::size_t i = 0; i < base.size(); ++i) base[i] += next[i];
    }
    return base;
  }

  // Returns dL/dx; parameter gradients are accumulated into g.
  Tensor<T> backward(const ParameterStore<T>& store, const Cache& c, const Tensor<T>& gy,
                     Grads<T>& g) const {
    const auto& bscale = store.get(name("base.scale"));
    const std::size_t B = gy.dim(0), C = gy.dim(1), HW = gy.dim(2) * gy.dim(3);
    auto& g_bscale = g(name("base.scale"), bscale.shape());
    Tensor<T> g_base = gy;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t ch = 0; ch < C; ++ch) {
        const T* gp = gy.data() + (b * C + ch) * HW;
        const T* bp = c.base.data() + (b * C + ch) * HW;
        T* gb = g_base.data() + (b * C + ch) * HW;
        T acc = 0;
        for (std::size_t i = 0; i < HW; ++i) {
          acc += gp[i] * bp[i];
          gb[i] = gp[i] * bscale[ch];
        }
        g_bscale[ch] += acc;
      }
    }
    const auto& bw = store.get(name("base.weight"));
    Tensor<T> gx = depthwise_conv2d_backward(c.x, bw, g_base, g(name("base.weight"), bw.shape()),
                                             &g(name("base.bias"), {channels}));
    if (levels == 0) return gx;

    // Top-down: gradient reaching each level's synthesis input.
    std::vector<Tensor<T>> gt(levels);
    Tensor<T> g_next = gy;
    for (std::size_t i = 0; i < levels; ++i) {
      const auto& s = c.bands[i];
      gt[i] = haar::analyze(haar::crop_adjoint(g_next, 2 * s.dim(2), 2 * s.dim(3)));
      g_next = haar::take_band(gt[i], LL);
    }
    // Bottom-up: through the subband convs and the LL recursion to the input.
    Tensor<T> g_a;
    for (std::size_t i = levels; i-- > 0;) {
      const auto& scale = store.get(level_name(i, "scale"));
      const auto& w = store.get(level_name(i, "weight"));
      auto& g_scale = g(level_name(i, "scale"), scale.shape());
      const auto& conv = c.conv[i];
      const std::size_t C4 = conv.dim(1), hw = conv.dim(2) * conv.dim(3);
      Tensor<T> g_conv(conv.shape());
      for (std::size_t b = 0; b < conv.dim(0); ++b) {
        for (std::size_t ch = 0; ch < C4; ++ch) {
          const std::size_t off = (b * C4 + ch) * hw;
          T acc = 0;
          for (std::size_t k = 0; k < hw; ++k) {
            acc += gt[i][off + k] * conv[off + k];
            g_conv[off + k] = gt[i][off + k] * scale[ch];
          }
          g_scale[ch] += acc;
        }
      }
      Tensor<T> g_s = depthwise_conv2d_backward(c.bands[i], w, g_conv, g(level_name(i, "weight"), w.shape()),
                                                nullptr);
      if (!g_a.empty()) haar::add_band(g_s, LL, g_a);
      g_a = haar::pad_even_adjoint(haar::synthesize(g_s), c.heights[i], c.widths[i]);
    }
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g_a[i];
    return gx;
  }
};

}  // namespace wtlab::nn
