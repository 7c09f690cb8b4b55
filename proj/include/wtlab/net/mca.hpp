#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "wtlab/net/grads.hpp"
#include "wtlab/net/ops.hpp"
#include "wtlab/net/params.hpp"

namespace wtlab::nn {

enum class McaPooling { avg_std, avg };

inline constexpr double kMcaStdEps = 1e-5;

// Nearest odd integer to log2(dim) / 2 + 0.5, at least 1.
inline std::size_t mca_kernel_size(std::size_t dim) {
  const double v = std::log2(static_cast<double>(std::max<std::size_t>(dim, 1))) / 2.0 + 0.5;
  const long j = std::lround((v - 1.0) / 2.0);
  return static_cast<std::size_t>(std::max<long>(0, j)) * 2 + 1;
}

// Three-branch gate over channel, frequency and time. Each branch squeezes
// the complementary axes to (mean, std) per index, runs a 1-D conv along its
// axis, and the three excitations are averaged into a sigmoid gate.
template <typename T>
struct Mca {
  enum Axis { channel = 0, freq = 1, time = 2 };
  static constexpr std::array<const char*, 3> kBranch{"channel", "freq", "time"};

  std::string prefix;
  std::array<std::size_t, 3> kernels{};
  McaPooling pooling = McaPooling::avg_std;

  struct Cache {
    Tensor<T> x, gate;
    std::array<std::vector<T>, 3> mean, stdv, rstd;  // rstd = 1 / sqrt(var + eps)
  };

  std::size_t pools() const { return pooling == McaPooling::avg_std ? 2 : 1; }
  std::string name(std::size_t axis, const char* leaf) const {
    return prefix + "." + kBranch[axis] + "." + leaf;
  }

  // Kernel sizes follow the nominal extent of each axis.
  static Mca create(ParameterStore<T>& store, const std::string& prefix, std::size_t channels,
                    std::size_t bins, std::size_t frames, McaPooling pooling = McaPooling::avg_std) {
    Mca m;
    m.prefix = prefix;
    m.pooling = pooling;
    m.kernels = {mca_kernel_size(channels), mca_kernel_size(bins), mca_kernel_size(frames)};
    for (std::size_t a = 0; a < 3; ++a) {
      const double bound = fan_in_bound(m.pools() * m.kernels[a]);
      store.add(m.name(a, "weight"), {1, m.pools(), m.kernels[a]}, Init::uniform, bound);
      store.add(m.name(a, "bias"), {1}, Init::uniform, bound);
    }
    return m;
  }

  static std::size_t axis_len(const Tensor<T>& x, std::size_t a) { return x.dim(a + 1); }

  // Index along the branch axis of flat position (c, f, t).
  static std::size_t pick(std::size_t a, std::size_t c, std::size_t f, std::size_t t) {
    return a == channel ? c : (a == freq ? f : t);
  }

  Tensor<T> forward(const ParameterStore<T>& store, const Tensor<T>& x,
                    Cache* cache = nullptr) const {
    require_rank4(x, "mca");
    const std::size_t B = x.dim(0), C = x.dim(1), F = x.dim(2), TT = x.dim(3);
    const std::array<std::size_t, 3> len{C, F, TT};
    Cache local;
    Cache& c = cache ? *cache : local;
    std::array<std::vector<T>, 3> exc;
    for (std::size_t a = 0; a < 3; ++a) {
      const std::size_t n = len[a];
      const double group = static_cast<double>(C * F * TT / n);
      std::vector<double> s1(B * n, 0.0), s2(B * n, 0.0);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t ch = 0; ch < C; ++ch)
          for (std::size_t f = 0; f < F; ++f)
            for (std::size_t t = 0; t < TT; ++t) s1[b * n + pick(a, ch, f, t)] += x(b, ch, f, t);
      c.mean[a].assign(B * n, T(0));
      for (std::size_t i = 0; i < B * n; ++i) c.mean[a][i] = static_cast<T>(s1[i] / group);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t ch = 0; ch < C; ++ch)
          for (std::size_t f = 0; f < F; ++f)
            for (std::size_t t = 0; t < TT; ++t) {
              const double d = x(b, ch, f, t) - c.mean[a][b * n + pick(a, ch, f, t)];
              s2[b * n + pick(a, ch, f, t)] += d * d;
            }
      c.stdv[a].assign(B * n, T(0));
      c.rstd[a].assign(B * n, T(0));
      for (std::size_t i = 0; i < B * n; ++i) {
        const double r = std::sqrt(s2[i] / group + kMcaStdEps);
        c.stdv[a][i] = static_cast<T>(r - std::sqrt(kMcaStdEps));
        c.rstd[a][i] = static_cast<T>(1.0 / r);
      }
      const auto& w = store.get(name(a, "weight"));
      const T bias = store.get(name(a, "bias"))[0];
      const long K = static_cast<long>(kernels[a]), r = K / 2;
      exc[a].assign(B * n, bias);
      for (std::size_t b = 0; b < B; ++b) {
        for (long i = 0; i < static_cast<long>(n); ++i) {
          T acc = 0;
          for (long k = 0; k < K; ++k) {
            const long j = i + k - r;
            if (j < 0 || j >= static_cast<long>(n)) continue;
            acc += w[static_cast<std::size_t>(k)] * c.mean[a][b * n + static_cast<std::size_t>(j)];
            if (pools() == 2)
              acc += w[kernels[a] + static_cast<std::size_t>(k)] *
                     c.stdv[a][b * n + static_cast<std::size_t>(j)];
          }
          exc[a][b * n + static_cast<std::size_t>(i)] += acc;
        }
      }
    }
    Tensor<T> y(x.shape());
    c.gate = Tensor<T>(x.shape());
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t ch = 0; ch < C; ++ch)
        for (std::size_t f = 0; f < F; ++f)
          for (std::size_t t = 0; t < TT; ++t) {
            const T z = (exc[0][b * C + ch] + exc[1][b * F + f] + exc[2][b * TT + t]) / T(3);
            const T g = sigmoid(z);
            c.gate(b, ch, f, t) = g;
            y(b, ch, f, t) = x(b, ch, f, t) * g;
          }
    if (cache) c.x = x;
    return y;
  }

  Tensor<T> backward(const ParameterStore<T>& store, const Cache& c, const Tensor<T>& gy,
                     Grads<T>& g) const {
    const Tensor<T>& x = c.x;
    const std::size_t B = x.dim(0), C = x.dim(1), F = x.dim(2), TT = x.dim(3);
    const std::array<std::size_t, 3> len{C, F, TT};
    Tensor<T> gx(x.shape());
    std::array<std::vector<T>, 3> gexc{std::vector<T>(B * C, T(0)), std::vector<T>(B * F, T(0)),
                                       std::vector<T>(B * TT, T(0))};
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t ch = 0; ch < C; ++ch)
        for (std::size_t f = 0; f < F; ++f)
          for (std::size_t t = 0; t < TT; ++t) {
            const T gt = c.gate(b, ch, f, t), go = gy(b, ch, f, t);
            gx(b, ch, f, t) = go * gt;
            const T gz = go * x(b, ch, f, t) * gt * (T(1) - gt) / T(3);
            gexc[0][b * C + ch] += gz;
            gexc[1][b * F + f] += gz;
            gexc[2][b * TT + t] += gz;
          }
    for (std::size_t a = 0; a < 3; ++a) {
      const std::size_t n = len[a];
      const T group = static_cast<T>(C * F * TT / n);
      const auto& w = store.get(name(a, "weight"));
      auto& gw = g(name(a, "weight"), w.shape());
      auto& gb = g(name(a, "bias"), {1});
      const long K = static_cast<long>(kernels[a]), r = K / 2;
      std::vector<T> gmean(B * n, T(0)), gstd(B * n, T(0));
      for (std::size_t b = 0; b < B; ++b) {
        for (long i = 0; i < static_cast<long>(n); ++i) {
          const T ge = gexc[a][b * n + static_cast<std::size_t>(i)];
          gb[0] += ge;
          for (long k = 0; k < K; ++k) {
            const long j = i + k - r;
            if (j < 0 || j >= static_cast<long>(n)) continue;
            const std::size_t jj = b * n + static_cast<std::size_t>(j);
            gw[static_cast<std::size_t>(k)] += ge * c.mean[a][jj];
            gmean[jj] += ge * w[static_cast<std::size_t>(k)];
            if (pools() == 2) {
              gw[kernels[a] + static_cast<std::size_t>(k)] += ge * c.stdv[a][jj];
              gstd[jj] += ge * w[kernels[a] + static_cast<std::size_t>(k)];
            }
          }
        }
      }
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t ch = 0; ch < C; ++ch)
          for (std::size_t f = 0; f < F; ++f)
            for (std::size_t t = 0; t < TT; ++t) {
              const std::size_t i = b * n + pick(a, ch, f, t);
              const T d = x(b, ch, f, t) - c.mean[a][i];
              gx(b, ch, f, t) += gmean[i] / group + gstd[i] * d * c.rstd[a][i] / group;
            }
    }
    return gx;
  }
};

}  // namespace wtlab::nn
