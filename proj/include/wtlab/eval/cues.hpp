#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "wtlab/common.hpp"
#include "wtlab/signal/fft.hpp"
#include "wtlab/signal/stft.hpp"

namespace wtlab {

inline constexpr std::size_t kItdFrame = 512;
inline constexpr std::size_t kItdHop = 256;
inline constexpr double kItdMaxLag = 1e-3;  // seconds
inline constexpr double kActivityRangeDb = 40.0;
inline constexpr double kPhatFloor = 1e-12;
inline constexpr std::array<std::pair<std::size_t, std::size_t>, 4> kCuePairs{
    {{0, 4}, {1, 5}, {2, 6}, {3, 7}}};

// Delay of y relative to x, in seconds, from the PHAT-weighted cross
// correlation of Hann-windowed frames, interpolated 4x and refined by a
// parabola through the peak. nullopt when either input is silent.
inline std::optional<double> gcc_phat_itd(std::span<const double> x, std::span<const double> y,
                                          double fs = kSampleRate) {
  require(x.size() == y.size(), "gcc_phat_itd: lengths ", x.size(), " and ", y.size(), " differ");
  require(!x.empty(), "gcc_phat_itd: empty input");
  const std::size_t n = fft::fast_size(2 * x.size());
  const auto win = hann_window(x.size());
  std::vector<double> xw(x.size()), yw(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xw[i] = win[i] * x[i];
    yw[i] = win[i] * y[i];
  }
  std::vector<cdouble> X, Y;
  fft::rfft(xw, X, n);
  fft::rfft(yw, Y, n);
  double peak_mag = 0.0;
  std::vector<cdouble> G(X.size());
  for (std::size_t k = 0; k < X.size(); ++k) {
    G[k] = std::conj(X[k]) * Y[k];
    peak_mag = std::max(peak_mag, std::abs(G[k]));
  }
  if (peak_mag == 0.0) return std::nullopt;
  const double floor = kPhatFloor * peak_mag;
  constexpr std::size_t up = 4;
  std::vector<cdouble> Gu(n * up / 2 + 1, 0.0);
  for (std::size_t k = 0; k < G.size(); ++k) {
    const double mag = std::abs(G[k]);
    Gu[k] = mag > floor ? G[k] / mag : 0.0;
  }
  std::vector<double> r;
  fft::irfft(Gu, r, n * up);
  const long max_lag = static_cast<long>(std::floor(kItdMaxLag * fs * up));
  const long len = static_cast<long>(r.size());
  auto at = [&](long lag) { return r[static_cast<std::size_t>((lag % len + len) % len)]; };
  long best = 0;
  for (long lag = -max_lag; lag <= max_lag; ++lag) {
    if (at(lag) > at(best)) best = lag;
  }
  double frac = 0.0;
  if (best > -max_lag && best < max_lag) {
    const double a = at(best - 1), b = at(best), c = at(best + 1);
    const double den = a - 2.0 * b + c;
    if (den < 0.0) frac = 0.5 * (a - c) / den;
  }
  return (static_cast<double>(best) + frac) / (static_cast<double>(up) * fs);
}

struct PairCues {
  double delta_itd_us = 0.0;
  double delta_ipd_rad = 0.0;
  double delta_ild_db = 0.0;
  std::size_t itd_frames = 0, ipd_bins = 0, ild_frames = 0;
};

struct CueReport {
  double delta_itd_us = 0.0;
  double delta_ipd_rad = 0.0;
  double delta_ild_db = 0.0;
  std::array<PairCues, 4> per_pair{};
};

namespace detail {

inline double frame_energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

inline std::vector<bool> activity(const std::vector<double>& energies) {
  const double top = energies.empty() ? 0.0 : *std::max_element(energies.begin(), energies.end());
  std::vector<bool> active(energies.size(), false);
  if (top <= 0.0) return active;
  const double gate = top * std::pow(10.0, -kActivityRangeDb / 10.0);
  for (std::size_t i = 0; i < energies.size(); ++i) active[i] = energies[i] > 0.0 && energies[i] >= gate;
  return active;
}

inline double mean_or_zero(double sum, std::size_t n) {
  return n ? sum / static_cast<double>(n) : 0.0;
}

inline PairCues pair_cues(const MultichannelWaveform& enh, const MultichannelWaveform& clean,
                          const Spectrogram& E, const Spectrogram& C, std::size_t i, std::size_t j) {
  PairCues pc;
  const std::size_t len = clean.length();

  // ITD over 512-sample frames, gated on the clean pair energy.
  if (len >= kItdFrame) {
    const std::size_t frames = (len - kItdFrame) / kItdHop + 1;
    std::vector<double> en(frames);
    for (std::size_t k = 0; k < frames; ++k) {
      en[k] = frame_energy(clean.channel(i).subspan(k * kItdHop, kItdFrame)) +
              frame_energy(clean.channel(j).subspan(k * kItdHop, kItdFrame));
    }
    const auto active = activity(en);
    double sum = 0.0;
    for (std::size_t k = 0; k < frames; ++k) {
      if (!active[k]) continue;
      const auto c = gcc_phat_itd(clean.channel(i).subspan(k * kItdHop, kItdFrame),
                                  clean.channel(j).subspan(k * kItdHop, kItdFrame));
      const auto e = gcc_phat_itd(enh.channel(i).subspan(k * kItdHop, kItdFrame),
                                  enh.channel(j).subspan(k * kItdHop, kItdFrame));
      if (!c || !e) continue;
      sum += std::abs(*e - *c) * 1e6;
      ++pc.itd_frames;
    }
    pc.delta_itd_us = mean_or_zero(sum, pc.itd_frames);
  }

  const std::size_t F = C.bins(), T = C.frames();
  // IPD over active TF bins.
  {
    std::vector<double> en(F * T);
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t t = 0; t < T; ++t)
        en[f * T + t] = std::norm(C.at(i, f, t)) + std::norm(C.at(j, f, t));
    const auto active = activity(en);
    double sum = 0.0;
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t t = 0; t < T; ++t) {
        if (!active[f * T + t]) continue;
        const double pe = std::arg(E.at(i, f, t) * std::conj(E.at(j, f, t)));
        const double pcl = std::arg(C.at(i, f, t) * std::conj(C.at(j, f, t)));
        sum += std::abs(wrap_phase(pe - pcl));
        ++pc.ipd_bins;
      }
    }
    pc.delta_ipd_rad = mean_or_zero(sum, pc.ipd_bins);
  }
  // ILD per active frame.
  {
    std::vector<double> en(T), ild_c(T), ild_e(T);
    for (std::size_t t = 0; t < T; ++t) {
      double ci = 0, cj = 0, ei = 0, ej = 0;
      for (std::size_t f = 0; f < F; ++f) {
        ci += std::norm(C.at(i, f, t));
        cj += std::norm(C.at(j, f, t));
        ei += std::norm(E.at(i, f, t));
        ej += std::norm(E.at(j, f, t));
      }
      en[t] = ci + cj;
      constexpr double tiny = 1e-30;
      ild_c[t] = 10.0 * std::log10((ci + tiny) / (cj + tiny));
      ild_e[t] = 10.0 * std::log10((ei + tiny) / (ej + tiny));
    }
    const auto active = activity(en);
    double sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      if (!active[t]) continue;
      sum += std::abs(ild_e[t] - ild_c[t]);
      ++pc.ild_frames;
    }
    pc.delta_ild_db = mean_or_zero(sum, pc.ild_frames);
  }
  return pc;
}

}  // namespace detail

// Interaural-style cue errors of enh against clean for the mic pairs
// (0,4) (1,5) (2,6) (3,7), averaged over the four pairs.
inline CueReport cue_deltas(const MultichannelWaveform& enh, const MultichannelWaveform& clean) {
  require(enh.channels() == 8 && clean.channels() == 8, "cue_deltas: expected 8 channels, got ",
          enh.channels(), " and ", clean.channels());
  require(enh.length() == clean.length(), "cue_deltas: lengths ", enh.length(), " and ",
          clean.length(), " differ");
  const auto E = stft(enh), C = stft(clean);
  CueReport r;
  for (std::size_t p = 0; p < kCuePairs.size(); ++p) {
    const auto [i, j] = kCuePairs[p];
    r.per_pair[p] = detail::pair_cues(enh, clean, E, C, i, j);
    r.delta_itd_us += r.per_pair[p].delta_itd_us / 4.0;
    r.delta_ipd_rad += r.per_pair[p].delta_ipd_rad / 4.0;
    r.delta_ild_db += r.per_pair[p].delta_ild_db / 4.0;
  }
  return r;
}

}  // namespace wtlab
