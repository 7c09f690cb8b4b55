#pragma once

#include <cmath>
#include <string>

#include "wtlab/net/grads.hpp"
#include "wtlab/net/ops.hpp"
#include "wtlab/net/params.hpp"
#include "wtlab/signal/stft.hpp"

namespace wtlab::nn {

// Complex mask with the spectrogram layout [M x F x T].
using ComplexMask = Spectrogram;

// Unidirectional LSTM layer, gate order (i, f, g, o), one bias vector.
template <typename T>
struct Lstm {
  std::string prefix;
  std::size_t input = 0, hidden = 0;

  static Lstm create(ParameterStore<T>& store, const std::string& prefix, std::size_t input,
                     std::size_t hidden) {
    const double bound = fan_in_bound(hidden);
    store.add(prefix + ".w_ih", {4 * hidden, input}, Init::uniform, bound);
    store.add(prefix + ".w_hh", {4 * hidden, hidden}, Init::uniform, bound);
    store.add(prefix + ".bias", {4 * hidden}, Init::uniform, bound);
    return {prefix, input, hidden};
  }

  // x rows are ordered (t, n): row t * N + n. Returns hidden states in the same order.
  Mat<T> forward(const ParameterStore<T>& store, const Mat<T>& x, std::size_t N) const {
    require(x.cols() == static_cast<Eigen::Index>(input), prefix, ": input width ", x.cols(),
            " != ", input);
    require(N > 0 && x.rows() % static_cast<Eigen::Index>(N) == 0, prefix, ": ", x.rows(),
            " rows do not split into ", N, " sequences");
    const auto Ne = static_cast<Eigen::Index>(N), He = static_cast<Eigen::Index>(hidden);
    const Eigen::Index steps = x.rows() / Ne;
    const Mat<T> xp = linear(x, store.get(prefix + ".w_ih"), store.get(prefix + ".bias"));
    const auto& whh = store.get(prefix + ".w_hh");
    CMatMap<T> wm(whh.data(), 4 * He, He);
    Mat<T> h = Mat<T>::Zero(Ne, He), c = Mat<T>::Zero(Ne, He), g(Ne, 4 * He);
    Mat<T> out(x.rows(), He);
    for (Eigen::Index t = 0; t < steps; ++t) {
      g = xp.middleRows(t * Ne, Ne);
      g.noalias() += h * wm.transpose();
      for (Eigen::Index n = 0; n < Ne; ++n) {
        for (Eigen::Index k = 0; k < He; ++k) {
          const T ig = sigmoid(g(n, k)), fg = sigmoid(g(n, He + k));
          const T gg = std::tanh(g(n, 2 * He + k)), og = sigmoid(g(n, 3 * He + k));
          c(n, k) = fg * c(n, k) + ig * gg;
          h(n, k) = og * std::tanh(c(n, k));
        }
      }
      out.middleRows(t * Ne, Ne) = h;
    }
    return out;
  }
};

// Head output -> mask entries: identity, or K * tanh(v / K) when bounded.
template <typename T>
T mask_squash(T v, double bound) {
  if (bound <= 0.0) return v;
  const T k = static_cast<T>(bound);
  return k * std::tanh(v / k);
}

template <typename T>
T mask_squash_grad(T v, double bound) {
  if (bound <= 0.0) return T(1);
  const T th = std::tanh(v / static_cast<T>(bound));
  return T(1) - th * th;
}

// Two LSTM layers shared across frequency and a linear head to 2M values per
// (f, t). Each bin's input is the decoder's real row f and imaginary row F + f.
template <typename T>
struct MaskGenerator {
  std::string prefix;
  std::size_t channels_in = 0, outputs = 0;  // outputs = microphones
  double bound = 0.0;
  Lstm<T> l1, l2;

  static MaskGenerator create(ParameterStore<T>& store, const std::string& prefix,
                              std::size_t channels_in, std::size_t hidden, std::size_t mics,
                              double bound) {
    MaskGenerator m{prefix, channels_in, mics, bound,
                    Lstm<T>::create(store, prefix + ".lstm1", 2 * channels_in, hidden),
                    Lstm<T>::create(store, prefix + ".lstm2", hidden, hidden)};
    store.add(prefix + ".head.weight", {2 * mics, hidden}, Init::uniform, fan_in_bound(hidden));
    store.add(prefix + ".head.bias", {2 * mics}, Init::uniform, fan_in_bound(hidden));
    return m;
  }

  // Hidden features of the second layer, rows (t, b * F + f).
  Mat<T> features(const ParameterStore<T>& store, const Tensor<T>& dec) const {
    require_rank4(dec, "mask generator");
    require(dec.dim(1) == channels_in, prefix, ": expected ", channels_in, " channels, got ",
            dec.dim(1));
    require(dec.dim(2) % 2 == 0, prefix, ": frequency axis ", dec.dim(2), " is not 2F");
    const std::size_t B = dec.dim(0), C = dec.dim(1), F = dec.dim(2) / 2, TT = dec.dim(3);
    const std::size_t N = B * F;
    Mat<T> x(static_cast<Eigen::Index>(TT * N), static_cast<Eigen::Index>(2 * C));
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t f = 0; f < F; ++f)
          for (std::size_t t = 0; t < TT; ++t) {
            const auto row = static_cast<Eigen::Index>(t * N + b * F + f);
            x(row, static_cast<Eigen::Index>(c)) = dec(b, c, f, t);
            x(row, static_cast<Eigen::Index>(C + c)) = dec(b, c, F + f, t);
          }
    return l2.forward(store, l1.forward(store, x, N), N);
  }

  // Raw head output for feature rows, [rows x 2M].
  Mat<T> head(const ParameterStore<T>& store, const Mat<T>& h) const {
    return linear(h, store.get(prefix + ".head.weight"), store.get(prefix + ".head.bias"));
  }

  // Mask packed as [B, M, 2F, T] (real rows f, imaginary rows F + f).
  Tensor<T> forward(const ParameterStore<T>& store, const Tensor<T>& dec) const {
    const std::size_t B = dec.dim(0), F = dec.dim(2) / 2, TT = dec.dim(3), M = outputs;
    const Mat<T> o = head(store, features(store, dec));
    Tensor<T> mask({B, M, 2 * F, TT});
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t m = 0; m < M; ++m)
        for (std::size_t f = 0; f < F; ++f)
          for (std::size_t t = 0; t < TT; ++t) {
            const auto row = static_cast<Eigen::Index>(t * B * F + b * F + f);
            mask(b, m, f, t) = mask_squash(o(row, static_cast<Eigen::Index>(m)), bound);
            mask(b, m, F + f, t) = mask_squash(o(row, static_cast<Eigen::Index>(M + m)), bound);
          }
    return mask;
  }
};

inline Spectrogram apply_cirm(const ComplexMask& mask, const Spectrogram& noisy) {
  require(mask.same_shape(noisy), "apply_cirm: mask [", mask.channels(), " x ", mask.bins(),
          " x ", mask.frames(), "] does not match spectrogram [", noisy.channels(), " x ",
          noisy.bins(), " x ", noisy.frames(), "]");
  Spectrogram out(noisy.channels(), noisy.bins(), noisy.frames(), noisy.params());
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] = mask.data()[i] * noisy.data()[i];
  return out;
}

// For a real loss L, gradients are packed as dL/dRe + j dL/dIm.
struct CirmGrad {
  Spectrogram mask, noisy;
};

inline CirmGrad apply_cirm_backward(const ComplexMask& mask, const Spectrogram& noisy,
                                    const Spectrogram& g_out) {
  CirmGrad g{Spectrogram(mask.channels(), mask.bins(), mask.frames(), mask.params()),
             Spectrogram(noisy.channels(), noisy.bins(), noisy.frames(), noisy.params())};
  for (std::size_t i = 0; i < g_out.data().size(); ++i) {
    g.mask.data()[i] = g_out.data()[i] * std::conj(noisy.data()[i]);
    g.noisy.data()[i] = g_out.data()[i] * std::conj(mask.data()[i]);
  }
  return g;
}

}  // namespace wtlab::nn
