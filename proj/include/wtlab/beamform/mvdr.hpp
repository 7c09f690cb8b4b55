#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wtlab/common.hpp"
#include "wtlab/scene/geometry.hpp"
#include "wtlab/signal/stft.hpp"

namespace wtlab {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kDiagonalLoading = 1e-6;
inline constexpr double kMaskPower = 2.0;

// Per-frequency spatial covariance [F x M x M].
struct CovarianceSet {
  std::vector<CMatrix> matrices;
  std::size_t frame_count = 0;
  std::vector<std::size_t> fallback_bins;  // bins whose mask summed to zero

  std::size_t bins() const { return matrices.size(); }
  std::size_t mics() const { return matrices.empty() ? 0 : matrices[0].rows(); }
};

struct BeamformerWeights {
  std::vector<CVector> weights;  // [F] x M
  std::size_t reference_mic = 0;

  std::size_t bins() const { return weights.size(); }
};

// Real TF mask [F x T], row-major.
struct TfMask {
  std::size_t bins = 0, frames = 0;
  std::vector<double> values;

  TfMask() = default;
  TfMask(std::size_t f, std::size_t t, double fill = 0.0) : bins(f), frames(t), values(f * t, fill) {}
  double& at(std::size_t f, std::size_t t) { return values[f * frames + t]; }
  double at(std::size_t f, std::size_t t) const { return values[f * frames + t]; }
};

inline CMatrix hermitian_part(const CMatrix& r) { return 0.5 * (r + r.adjoint()); }

// R_f = sum_t m y y^H / sum_t m; an all-zero mask row falls back to the plain
// average and is recorded in fallback_bins.
inline CovarianceSet estimate_covariance(const Spectrogram& spec, const TfMask* mask = nullptr) {
  const std::size_t M = spec.channels(), F = spec.bins(), T = spec.frames();
  require(T > 0, "estimate_covariance: spectrogram has no frames");
  if (mask) {
    require(mask->bins == F && mask->frames == T, "estimate_covariance: mask is ", mask->bins, "x",
            mask->frames, ", spectrogram is ", F, "x", T);
    for (double v : mask->values) {
      require(v >= 0.0 && v <= 1.0, "estimate_covariance: mask entry ", v, " outside [0, 1]");
    }
  }
  CovarianceSet cov;
  cov.frame_count = T;
  cov.matrices.resize(F);
  CVector y(M);
  for (std::size_t f = 0; f < F; ++f) {
    CMatrix plain = CMatrix::Zero(M, M), weighted = CMatrix::Zero(M, M);
    double wsum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t m = 0; m < M; ++m) y[m] = spec.at(m, f, t);
      if (!mask) {
        plain.noalias() += y * y.adjoint();
        continue;
      }
      const double w = mask->at(f, t);
      if (w > 0.0) {
        weighted.noalias() += w * (y * y.adjoint());
        wsum += w;
      }
    }
    if (!mask) {
      cov.matrices[f] = hermitian_part(plain / static_cast<double>(T));
    } else if (wsum > 0.0) {
      cov.matrices[f] = hermitian_part(weighted / wsum);
    } else {
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t m = 0; m < M; ++m) y[m] = spec.at(m, f, t);
        plain.noalias() += y * y.adjoint();
      }
      cov.matrices[f] = hermitian_part(plain / static_cast<double>(T));
      cov.fallback_bins.push_back(f);
    }
  }
  return cov;
}

// Far-field ULA steering vector, element m at m*d along the array axis.
inline CVector steering_vector(const ArrayGeometry& geom, double theta_deg, double freq_hz,
                               double c = kSpeedOfSound) {
  require(theta_deg >= 0.0 && theta_deg <= 180.0, "steering_vector: theta ", theta_deg,
          " outside [0, 180]");
  CVector a(static_cast<Eigen::Index>(geom.num_mics));
  const double ct = std::cos(theta_deg * kPi / 180.0);
  for (std::size_t m = 0; m < geom.num_mics; ++m) {
    const double phase = -2.0 * kPi * freq_hz * static_cast<double>(m) * geom.spacing * ct / c;
    a[static_cast<Eigen::Index>(m)] = std::polar(1.0, phase);
  }
  return a;
}

inline double bin_frequency(std::size_t f, std::size_t fft_size, double fs = kSampleRate) {
  return static_cast<double>(f) * fs / static_cast<double>(fft_size);
}

inline std::vector<CVector> steering_matrix(const ArrayGeometry& geom, double theta_deg,
                                            const StftParams& params = {}) {
  std::vector<CVector> out(params.bins());
  for (std::size_t f = 0; f < out.size(); ++f) {
    out[f] = steering_vector(geom, theta_deg, bin_frequency(f, params.fft_size));
  }
  return out;
}

// w_f = R^-1 a / (a^H R^-1 a) with loading 1e-6 tr(R)/M. The final division
// uses conj(z^H a) so that w^H a == 1 to rounding.
inline BeamformerWeights mvdr_weights(const CovarianceSet& noise_cov,
                                      const std::vector<CVector>& steer,
                                      std::size_t reference_mic = 0) {
  require(steer.size() == noise_cov.bins(), "mvdr_weights: steering has ", steer.size(),
          " bins, covariance has ", noise_cov.bins());
  const std::size_t M = noise_cov.mics();
  BeamformerWeights w;
  w.reference_mic = reference_mic;
  w.weights.resize(steer.size());
  for (std::size_t f = 0; f < steer.size(); ++f) {
    require(static_cast<std::size_t>(steer[f].size()) == M, "mvdr_weights: steering size ",
            steer[f].size(), " at bin ", f, ", expected ", M);
    CMatrix r = noise_cov.matrices[f];
    const double load = kDiagonalLoading * r.trace().real() / static_cast<double>(M);
    r.diagonal().array() += load;
    Eigen::LDLT<CMatrix> ldlt(r);
    const double rc = ldlt.info() == Eigen::Success ? ldlt.rcond() : 0.0;
    require(rc > 1e-14 && std::isfinite(rc),
            "mvdr_weights: noise covariance is singular at frequency bin ", f,
            " even after diagonal loading");
    const CVector z = ldlt.solve(steer[f]);
    const cdouble d = z.dot(steer[f]);  // z^H a
    require(std::abs(d) > 0.0, "mvdr_weights: zero response at frequency bin ", f);
    w.weights[f] = z / std::conj(d);
  }
  return w;
}

inline Spectrogram apply_beamformer(const BeamformerWeights& w, const Spectrogram& spec) {
  require(w.bins() == spec.bins(), "apply_beamformer: weights have ", w.bins(),
          " bins, spectrogram has ", spec.bins());
  Spectrogram out(1, spec.bins(), spec.frames(), spec.params());
  for (std::size_t f = 0; f < spec.bins(); ++f) {
    require(static_cast<std::size_t>(w.weights[f].size()) == spec.channels(),
            "apply_beamformer: weights have ", w.weights[f].size(), " mics, spectrogram has ",
            spec.channels());
    for (std::size_t t = 0; t < spec.frames(); ++t) {
      cdouble acc = 0.0;
      for (std::size_t m = 0; m < spec.channels(); ++m) {
        acc += std::conj(w.weights[f][static_cast<Eigen::Index>(m)]) * spec.at(m, f, t);
      }
      out.at(0, f, t) = acc;
    }
  }
  return out;
}

// Principal eigenvector by power iteration (50 steps or residual 1e-10).
inline CVector principal_eigenvector(const CMatrix& r) {
  const Eigen::Index M = r.rows();
  Eigen::Index start = 0;
  r.diagonal().real().maxCoeff(&start);
  CVector v = r.col(start);
  if (v.norm() == 0.0) v = CVector::Ones(M);
  v.normalize();
  const double scale = std::max(r.norm(), 1e-300);
  for (int it = 0; it < 50; ++it) {
    const CVector rv = r * v;
    const cdouble lambda = v.dot(rv);
    if ((rv - lambda * v).norm() < 1e-10 * scale) break;
    const double n = rv.norm();
    if (n == 0.0) break;
    v = rv / n;
  }
  return v;
}

inline std::vector<CVector> rtf_steering(const CovarianceSet& speech_cov, std::size_t ref) {
  std::vector<CVector> out(speech_cov.bins());
  for (std::size_t f = 0; f < out.size(); ++f) {
    CVector v = principal_eigenvector(speech_cov.matrices[f]);
    const cdouble vr = v[static_cast<Eigen::Index>(ref)];
    if (std::abs(vr) > 1e-12 * v.norm()) {
      v /= vr;
    } else {
      v = CVector::Unit(v.size(), static_cast<Eigen::Index>(ref));
    }
    out[f] = v;
  }
  return out;
}

// Oracle masks from the target image S and the residual N = Y - S:
// |S|^p / (|S|^p + |N|^p) and its complement, averaged over channels.
inline std::pair<TfMask, TfMask> oracle_masks(const Spectrogram& mixture, const Spectrogram& target,
                                              double power = kMaskPower) {
  require(mixture.same_shape(target), "oracle_masks: mixture and target shapes differ");
  const std::size_t M = mixture.channels(), F = mixture.bins(), T = mixture.frames();
  TfMask ms(F, T), mn(F, T);
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t t = 0; t < T; ++t) {
      double s_acc = 0.0, n_acc = 0.0;
      for (std::size_t m = 0; m < M; ++m) {
        const double s = std::pow(std::abs(target.at(m, f, t)), power);
        const double n = std::pow(std::abs(mixture.at(m, f, t) - target.at(m, f, t)), power);
        if (s + n > 0.0) {
          s_acc += s / (s + n);
          n_acc += n / (s + n);
        }
      }
      ms.at(f, t) = s_acc / static_cast<double>(M);
      mn.at(f, t) = n_acc / static_cast<double>(M);
    }
  }
  return {std::move(ms), std::move(mn)};
}

struct MvdrResult {
  Spectrogram output;  // 1 channel, or M for the restacked variant
  BeamformerWeights weights;
  bool degenerate = false;  // speech and noise covariances coincide
  std::vector<std::size_t> fallback_bins;
};

namespace detail {

inline bool covariances_equal(const CovarianceSet& a, const CovarianceSet& b) {
  for (std::size_t f = 0; f < a.bins(); ++f) {
    const double scale = std::max(a.matrices[f].norm(), b.matrices[f].norm());
    if ((a.matrices[f] - b.matrices[f]).norm() > 1e-12 * scale) return false;
  }
  return true;
}

}  // namespace detail

inline MvdrResult mb_mvdr_masks(const Spectrogram& mixture, const TfMask& speech_mask,
                                const TfMask& noise_mask, std::size_t ref = 0) {
  require(ref < mixture.channels(), "mb_mvdr: reference mic ", ref, " out of range");
  const auto phi_s = estimate_covariance(mixture, &speech_mask);
  const auto phi_n = estimate_covariance(mixture, &noise_mask);
  MvdrResult r;
  r.degenerate = detail::covariances_equal(phi_s, phi_n);
  r.fallback_bins = phi_n.fallback_bins;
  r.weights = mvdr_weights(phi_n, rtf_steering(phi_s, ref), ref);
  r.output = apply_beamformer(r.weights, mixture);
  return r;
}

inline MvdrResult mb_mvdr(const Spectrogram& mixture, const Spectrogram& target_oracle,
                          std::size_t ref = 0) {
  const auto [ms, mn] = oracle_masks(mixture, target_oracle);
  return mb_mvdr_masks(mixture, ms, mn, ref);
}

// MB-MVDR run once per reference mic; channel r of the output is the estimate
// of the target at mic r.
inline Spectrogram mb_mvdr_restacked(const Spectrogram& mixture, const Spectrogram& target_oracle) {
  const auto [ms, mn] = oracle_masks(mixture, target_oracle);
  const auto phi_s = estimate_covariance(mixture, &ms);
  const auto phi_n = estimate_covariance(mixture, &mn);
  Spectrogram out(mixture.channels(), mixture.bins(), mixture.frames(), mixture.params());
  for (std::size_t r = 0; r < mixture.channels(); ++r) {
    const auto w = mvdr_weights(phi_n, rtf_steering(phi_s, r), r);
    const auto y = apply_beamformer(w, mixture);
    for (std::size_t f = 0; f < mixture.bins(); ++f) {
      for (std::size_t t = 0; t < mixture.frames(); ++t) out.at(r, f, t) = y.at(0, f, t);
    }
  }
  return out;
}

enum class TiSteering { oracle_rtf, geometric };

// Time-invariant MVDR: whole-utterance noise covariance from the true noise
// image; steering from the target covariance or from the array geometry.
inline MvdrResult ti_mvdr(const Spectrogram& mixture, const Spectrogram& target_oracle,
                          TiSteering steering = TiSteering::oracle_rtf,
                          const ArrayGeometry* geom = nullptr, double doa_deg = 90.0,
                          std::size_t ref = 0) {
  require(mixture.same_shape(target_oracle), "ti_mvdr: mixture and target shapes differ");
  Spectrogram noise = mixture;
  for (std::size_t i = 0; i < noise.data().size(); ++i) noise.data()[i] -= target_oracle.data()[i];
  const auto phi_n = estimate_covariance(noise);
  std::vector<CVector> steer;
  if (steering == TiSteering::geometric) {
    require(geom != nullptr, "ti_mvdr: geometric steering needs the array geometry");
    steer = steering_matrix(*geom, doa_deg, mixture.params());
  } else {
    steer = rtf_steering(estimate_covariance(target_oracle), ref);
  }
  MvdrResult r;
  r.weights = mvdr_weights(phi_n, steer, ref);
  r.output = apply_beamformer(r.weights, mixture);
  return r;
}

}  // namespace wtlab
