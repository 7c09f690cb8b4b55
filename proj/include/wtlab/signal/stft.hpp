#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "wtlab/common.hpp"
#include "wtlab/signal/fft.hpp"
#include "wtlab/signal/waveform.hpp"
#include "wtlab/tensor.hpp"

namespace wtlab {

// Framing of the enhancement front-end: 20 ms periodic Hann, 50% overlap.
struct StftParams {
  std::size_t frame_len = 320;
  std::size_t hop = 160;
  std::size_t fft_size = 320;

  std::size_t bins() const { return fft_size / 2 + 1; }

  void validate() const {
    require(frame_len >= 2 && frame_len % 2 == 0, "STFT frame length must be even, got ",
            frame_len);
    require(hop * 2 == frame_len, "STFT hop (", hop, ") must be half the frame length (",
            frame_len, ")");
    require(fft_size == frame_len, "STFT fft size (", fft_size, ") must equal frame length (",
            frame_len, ")");
  }

  bool operator==(const StftParams&) const = default;
};

inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

// Complex STFT tensor [channels x bins x frames].
class Spectrogram {
 public:
  Spectrogram() = default;
  Spectrogram(std::size_t channels, std::size_t bins, std::size_t frames, StftParams params = {})
      : channels_(channels), bins_(bins), frames_(frames), params_(params),
        data_(channels * bins * frames) {}

  std::size_t channels() const { return channels_; }
  std::size_t bins() const { return bins_; }
  std::size_t frames() const { return frames_; }
  const StftParams& params() const { return params_; }

  cdouble& at(std::size_t m, std::size_t f, std::size_t t) {
    return data_[(m * bins_ + f) * frames_ + t];
  }
  const cdouble& at(std::size_t m, std::size_t f, std::size_t t) const {
    return data_[(m * bins_ + f) * frames_ + t];
  }

  std::vector<cdouble>& data() { return data_; }
  const std::vector<cdouble>& data() const { return data_; }

  bool same_shape(const Spectrogram& o) const {
    return channels_ == o.channels_ && bins_ == o.bins_ && frames_ == o.frames_;
  }

  bool all_finite() const {
    for (const auto& v : data_) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    }
    return true;
  }

  Spectrogram select(std::size_t m) const {
    Spectrogram out(1, bins_, frames_, params_);
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(m * bins_ * frames_), bins_ * frames_,
                out.data_.begin());
    return out;
  }

 private:
  std::size_t channels_ = 0, bins_ = 0, frames_ = 0;
  StftParams params_;
  std::vector<cdouble> data_;
};

inline std::size_t stft_frame_count(std::size_t length, const StftParams& p) {
  return length / p.hop + 1;
}

// Centered STFT: each channel is reflect-padded by frame_len/2 on both ends,
// so a 64000-sample input yields 401 frames at the default framing.
inline Spectrogram stft(const MultichannelWaveform& wave, const StftParams& params = {}) {
  params.validate();
  require(wave.sample_rate() == kSampleRate, "STFT expects ", kSampleRate, " Hz input, got ",
          wave.sample_rate());
  require(wave.length() >= params.frame_len, "signal of ", wave.length(),
          " samples is shorter than one STFT frame (", params.frame_len, ")");
  const std::size_t n = wave.length();
  const std::size_t pad = params.frame_len / 2;
  const std::size_t frames = (n + 2 * pad - params.frame_len) / params.hop + 1;
  const auto window = hann_window(params.frame_len);
  Spectrogram spec(wave.channels(), params.bins(), frames, params);

  std::vector<double> padded(n + 2 * pad);
  std::vector<double> frame(params.frame_len);
  std::vector<cdouble> bins;
  for (std::size_t m = 0; m < wave.channels(); ++m) {
    const auto x = wave.channel(m);
    for (std::size_t i = 0; i < padded.size(); ++i) {
      const auto j = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(pad);
      std::ptrdiff_t k = j;
      if (k < 0) k = -k;
      const auto last = static_cast<std::ptrdiff_t>(n) - 1;
      if (k > last) k = 2 * last - k;
      padded[i] = x[static_cast<std::size_t>(k)];
    }
    for (std::size_t t = 0; t < frames; ++t) {
      const double* src = padded.data() + t * params.hop;
      for (std::size_t i = 0; i < params.frame_len; ++i) frame[i] = src[i] * window[i];
      fft::rfft(frame, bins, params.fft_size);
      for (std::size_t f = 0; f < spec.bins(); ++f) spec.at(m, f, t) = bins[f];
    }
  }
  return spec;
}

// Weighted overlap-add inverse: synthesis with the analysis window, normalized
// by the accumulated squared window. `length` defaults to (frames-1)*hop.
inline MultichannelWaveform istft(const Spectrogram& spec, std::size_t length = 0) {
  const auto& params = spec.params();
  params.validate();
  require(spec.bins() == params.bins(), "spectrogram has ", spec.bins(),
          " bins but its framing implies ", params.bins());
  require(spec.frames() >= 1, "spectrogram has no frames");
  const std::size_t pad = params.frame_len / 2;
  const std::size_t natural = (spec.frames() - 1) * params.hop;
  if (length == 0) length = natural;
  require(length <= natural, "requested length ", length, " exceeds the ", natural,
          " samples covered by the spectrogram");
  const std::size_t total = natural + params.frame_len;
  const auto window = hann_window(params.frame_len);

  std::vector<double> wsum(total, 0.0);
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    for (std::size_t i = 0; i < params.frame_len; ++i) {
      wsum[t * params.hop + i] += window[i] * window[i];
    }
  }

  MultichannelWaveform out(spec.channels(), length);
  std::vector<double> acc(total);
  std::vector<cdouble> bins(spec.bins());
  std::vector<double> frame;
  for (std::size_t m = 0; m < spec.channels(); ++m) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t t = 0; t < spec.frames(); ++t) {
      for (std::size_t f = 0; f < spec.bins(); ++f) bins[f] = spec.at(m, f, t);
      fft::irfft(bins, frame, params.fft_size);
      for (std::size_t i = 0; i < params.frame_len; ++i) {
        acc[t * params.hop + i] += frame[i] * window[i];
      }
    }
    auto y = out.channel(m);
    for (std::size_t n = 0; n < length; ++n) {
      const double w = wsum[n + pad];
      y[n] = w > 1e-12 ? acc[n + pad] / w : 0.0;
    }
  }
  return out;
}

// Real/imaginary stacking along frequency: [1 x M x 2F x T], real rows first.
template <typename T = float>
Tensor<T> pack_ri(const Spectrogram& spec) {
  const std::size_t M = spec.channels(), F = spec.bins(), TT = spec.frames();
  Tensor<T> out({1, M, 2 * F, TT});
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t t = 0; t < TT; ++t) {
        const auto v = spec.at(m, f, t);
        out(0, m, f, t) = static_cast<T>(v.real());
        out(0, m, F + f, t) = static_cast<T>(v.imag());
      }
    }
  }
  return out;
}

template <typename T>
Spectrogram unpack_ri(const Tensor<T>& packed, const StftParams& params = {}) {
  require_rank4(packed, "unpack_ri");
  require(packed.dim(0) == 1, "unpack_ri expects batch size 1, got ", packed.dim(0));
  require(packed.dim(2) % 2 == 0, "unpack_ri expects an even frequency axis, got ",
          packed.dim(2));
  const std::size_t M = packed.dim(1), F = packed.dim(2) / 2, TT = packed.dim(3);
  Spectrogram spec(M, F, TT, params);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t t = 0; t < TT; ++t) {
        spec.at(m, f, t) = cdouble(static_cast<double>(packed(0, m, f, t)),
                                   static_cast<double>(packed(0, m, F + f, t)));
      }
    }
  }
  return spec;
}

}  // namespace wtlab
