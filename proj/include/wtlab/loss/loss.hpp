#pragma once

#include <cmath>

#include "wtlab/eval/music.hpp"
#include "wtlab/eval/si_snr.hpp"
#include "wtlab/signal/waveform.hpp"

namespace wtlab {

// Learnable task weights, stored as log sigma.
struct LossWeights {
  double log_sigma1 = 0.0;
  double log_sigma2 = 0.0;
  bool shared_sigma = false;  // sigma1 in both denominators

  double sigma1() const { return std::exp(log_sigma1); }
  double sigma2() const { return std::exp(log_sigma2); }
};

inline void require_paired(const MultichannelWaveform& a, const MultichannelWaveform& b,
                           const char* what) {
  require(a.channels() == b.channels(), what, ": channel counts ", a.channels(), " and ",
          b.channels(), " differ");
  require(a.length() == b.length(), what, ": lengths ", a.length(), " and ", b.length(),
          " differ");
}

// Negative mean SI-SNR over channels.
inline double l_ns(const MultichannelWaveform& enhanced, const MultichannelWaveform& target) {
  require_paired(enhanced, target, "l_ns");
  double acc = 0.0;
  for (std::size_t m = 0; m < target.channels(); ++m) {
    acc += si_snr(enhanced.channel(m), target.channel(m));
  }
  return -acc / static_cast<double>(target.channels());
}

inline MultichannelWaveform l_ns_grad(const MultichannelWaveform& enhanced,
                                      const MultichannelWaveform& target) {
  require_paired(enhanced, target, "l_ns_grad");
  MultichannelWaveform g(target.channels(), target.length(), target.sample_rate());
  const double scale = -1.0 / static_cast<double>(target.channels());
  for (std::size_t m = 0; m < target.channels(); ++m) {
    const auto gm = si_snr_grad(enhanced.channel(m), target.channel(m));
    for (std::size_t n = 0; n < gm.size(); ++n) g.at(m, n) = scale * gm[n];
  }
  return g;
}

inline double l_ps(const MultichannelWaveform& enhanced, const MultichannelWaveform& reference,
                   std::size_t n_sources = 1) {
  require_paired(enhanced, reference, "l_ps");
  return spatial_mse(music_spectrum(enhanced, n_sources), music_spectrum(reference, n_sources));
}

inline double l_total(double lns, double lps, const LossWeights& w) {
  const double s1 = w.sigma1(), s2 = w.sigma2();
  const double ps_sigma = w.shared_sigma ? s1 : s2;
  return 10.0 / (2.0 * s1 * s1) * lns + 1.0 / (2.0 * ps_sigma * ps_sigma) * lps + w.log_sigma1 +
         w.log_sigma2;
}

struct LossGrad {
  double d_lns = 0.0, d_lps = 0.0;
  double d_log_sigma1 = 0.0, d_log_sigma2 = 0.0;
};

inline LossGrad l_total_grad(double lns, double lps, const LossWeights& w) {
  const double inv1 = std::exp(-2.0 * w.log_sigma1), inv2 = std::exp(-2.0 * w.log_sigma2);
  LossGrad g;
  g.d_lns = 5.0 * inv1;
  if (w.shared_sigma) {
    g.d_lps = 0.5 * inv1;
    g.d_log_sigma1 = -10.0 * inv1 * lns - inv1 * lps + 1.0;
    g.d_log_sigma2 = 1.0;
  } else {
    g.d_lps = 0.5 * inv2;
    g.d_log_sigma1 = -10.0 * inv1 * lns + 1.0;
    g.d_log_sigma2 = -inv2 * lps + 1.0;
  }
  return g;
}

}  // namespace wtlab
