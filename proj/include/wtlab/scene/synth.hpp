#pragma once

#include <cmath>
#include <vector>

#include "wtlab/rng.hpp"
#include "wtlab/scene/scene.hpp"

namespace wtlab {

namespace detail {

// Two-pole resonator with unity peak-ish gain.
class Resonator {
 public:
  Resonator(double freq, double bandwidth, double fs = kSampleRate) {
    const double r = std::exp(-kPi * bandwidth / fs);
    a1_ = 2.0 * r * std::cos(2.0 * kPi * freq / fs);
    a2_ = -r * r;
    gain_ = 1.0 - r;
  }
  double operator()(double x) {
    const double y = gain_ * x + a1_ * y1_ + a2_ * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double a1_, a2_, gain_, y1_ = 0.0, y2_ = 0.0;
};

inline void normalize_peak(std::vector<double>& x, double target) {
  double p = 0.0;
  for (double v : x) p = std::max(p, std::abs(v));
  if (p > 0.0)
    for (double& v : x) v *= target / p;
}

}  // namespace detail

// Speech-like test signal: voiced segments (glottal pulse train through three
// formant resonators), fricative bursts and pauses at a syllabic rate.
inline std::vector<double> synth_speech(std::uint64_t seed, std::size_t n, double fs = kSampleRate) {
  Rng rng(mix_seed(seed, 0x5eec4));
  std::vector<double> out(n, 0.0);
  const double f0_base = rng.uniform(90.0, 220.0);
  std::size_t pos = static_cast<std::size_t>(rng.uniform(0.0, 0.1) * fs);
  while (pos < n) {
    const double kind = rng.uniform();
    if (kind < 0.62) {
      const auto len = static_cast<std::size_t>(rng.uniform(0.12, 0.32) * fs);
      detail::Resonator r1(rng.uniform(300.0, 850.0), 90.0, fs);
      detail::Resonator r2(rng.uniform(900.0, 2300.0), 130.0, fs);
      detail::Resonator r3(rng.uniform(2400.0, 3300.0), 180.0, fs);
      const double f_start = f0_base * rng.uniform(0.85, 1.15);
      const double f_end = f0_base * rng.uniform(0.85, 1.15);
      const double amp = rng.uniform(0.5, 1.0);
      double phase = 0.0, lp1 = 0.0, lp2 = 0.0;
      for (std::size_t i = 0; i < len && pos + i < n; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(len);
        const double f0 = f_start + (f_end - f_start) * u;
        phase += f0 / fs;
        double src = 0.0;
        if (phase >= 1.0) {
          phase -= 1.0;
          src = 1.0;
        }
        src += 0.02 * rng.normal();
        lp1 = 0.9 * lp1 + src;  // glottal spectral tilt
        lp2 = 0.5 * lp2 + lp1;
        const double env = std::sin(kPi * u);
        const double v = r1(lp2) * 1.0 + r2(lp2) * 0.6 + r3(lp2) * 0.3;
        out[pos + i] += amp * env * v;
      }
      pos += len;
    } else if (kind < 0.82) {
      const auto len = static_cast<std::size_t>(rng.uniform(0.05, 0.14) * fs);
      detail::Resonator r(rng.uniform(3500.0, 6500.0), 1800.0, fs);
      const double amp = rng.uniform(0.02, 0.08);
      for (std::size_t i = 0; i < len && pos + i < n; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(len);
        out[pos + i] += amp * std::sin(kPi * u) * r(rng.normal());
      }
      pos += len;
    } else {
      pos += static_cast<std::size_t>(rng.uniform(0.04, 0.2) * fs);
    }
  }
  detail::normalize_peak(out, 0.5);
  return out;
}

inline std::vector<double> synth_noise(NoiseKind kind, std::uint64_t seed, std::size_t n) {
  Rng rng(mix_seed(seed, 0x0153));
  std::vector<double> out(n, 0.0);
  switch (kind) {
    case NoiseKind::white:
      for (double& v : out) v = rng.normal();
      break;
    case NoiseKind::pink: {
      // Paul Kellet's refined 1/f filter.
      double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
      for (double& v : out) {
        const double w = rng.normal();
        b0 = 0.99886 * b0 + w * 0.0555179;
        b1 = 0.99332 * b1 + w * 0.0750759;
        b2 = 0.96900 * b2 + w * 0.1538520;
        b3 = 0.86650 * b3 + w * 0.3104856;
        b4 = 0.55000 * b4 + w * 0.5329522;
        b5 = -0.7616 * b5 - w * 0.0168980;
        v = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
        b6 = w * 0.115926;
      }
      break;
    }
    case NoiseKind::babble:
      for (int talker = 0; talker < 6; ++talker) {
        const auto s = synth_speech(mix_seed(seed, 100 + talker), n);
        const std::size_t shift = rng.below(n);
        for (std::size_t i = 0; i < n; ++i) out[i] += s[(i + shift) % n];
      }
      break;
  }
  detail::normalize_peak(out, 0.5);
  return out;
}

}  // namespace wtlab
