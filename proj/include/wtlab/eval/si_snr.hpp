#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "wtlab/common.hpp"
#include "wtlab/signal/waveform.hpp"

namespace wtlab {

inline constexpr double kSiSnrEps = 1e-8;
inline constexpr double kSiSnrFloorDb = -120.0;

// Scale-invariant SNR in dB. The error energy is regularized relative to the
// projected target energy, so the value is exactly invariant to any nonzero
// gain on `est` and saturates at -10*log10(eps) = 80 dB for a perfect match.
inline double si_snr(std::span<const double> est, std::span<const double> ref) {
  require(est.size() == ref.size(), "si_snr: length mismatch (", est.size(), " vs ", ref.size(),
          ")");
  const double r = energy(ref);
  require(r > 0.0, "si_snr: reference signal is all zeros");
  const double c = dot(est, ref);
  const double target = c * c / r;
  const double total = energy(est);
  const double err = std::max(0.0, total - target);
  const double den = err + kSiSnrEps * target;
  if (target <= 0.0 || den <= 0.0) return kSiSnrFloorDb;
  return std::max(kSiSnrFloorDb, power_to_db(target / den));
}

// d si_snr / d est.
inline std::vector<double> si_snr_grad(std::span<const double> est, std::span<const double> ref) {
  const double r = energy(ref);
  require(r > 0.0, "si_snr: reference signal is all zeros");
  const double c = dot(est, ref);
  const double alpha = c / r;
  const double target = c * c / r;
  const double den = std::max(0.0, energy(est) - target) + kSiSnrEps * target;
  std::vector<double> g(est.size(), 0.0);
  if (target <= 0.0 || den <= 0.0 || power_to_db(target / den) <= kSiSnrFloorDb) return g;
  const double k = 10.0 / std::log(10.0);
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double dnum = 2.0 * alpha * ref[i];
    const double dden = 2.0 * est[i] - (1.0 - kSiSnrEps) * 2.0 * alpha * ref[i];
    g[i] = k * (dnum / target - dden / den);
  }
  return g;
}

}  // namespace wtlab
