#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "wtlab/beamform/mvdr.hpp"
#include "wtlab/signal/stft.hpp"

namespace wtlab {

inline constexpr std::size_t kMusicBands = 300;
inline constexpr std::size_t kMusicAngles = 181;

// 600-point analysis (37.5 ms), hop 300; bins 1..300 are the bands.
inline StftParams music_stft_params() { return {600, 300, 600}; }

struct SpatialSpectrum {
  std::size_t bands = 0, angles = 0;
  std::vector<double> values;  // [bands x angles], row-major
  std::vector<double> band_freqs;
  std::vector<std::size_t> flagged_bands;  // silent bands, emitted uniform

  double& at(std::size_t b, std::size_t a) { return values[b * angles + a]; }
  double at(std::size_t b, std::size_t a) const { return values[b * angles + a]; }

  std::size_t band_peak(std::size_t b) const {
    const auto row = values.begin() + static_cast<std::ptrdiff_t>(b * angles);
    return static_cast<std::size_t>(std::max_element(row, row + static_cast<std::ptrdiff_t>(angles)) - row);
  }

  // Mean over bands, optionally only those above min_hz.
  std::vector<double> wideband(double min_hz = 0.0) const {
    std::vector<double> out(angles, 0.0);
    std::size_t used = 0;
    for (std::size_t b = 0; b < bands; ++b) {
      if (band_freqs[b] < min_hz) continue;
      for (std::size_t a = 0; a < angles; ++a) out[a] += at(b, a);
      ++used;
    }
    for (double& v : out) v /= static_cast<double>(std::max<std::size_t>(used, 1));
    return out;
  }

  double peak_angle(double min_hz = 0.0) const {
    const auto w = wideband(min_hz);
    return static_cast<double>(std::max_element(w.begin(), w.end()) - w.begin());
  }
};

// Orthonormal basis of the noise subspace (the M - n_sources smallest
// eigenvectors) of one band covariance. Empty when the band is silent.
inline CMatrix music_noise_subspace(const CMatrix& r, std::size_t n_sources) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(r);
  require(es.info() == Eigen::Success, "music: eigendecomposition failed");
  const auto M = r.rows();
  return es.eigenvectors().leftCols(M - static_cast<Eigen::Index>(n_sources));
}

inline SpatialSpectrum music_spectrum(const Spectrogram& spec, std::size_t n_sources = 1,
                                      const ArrayGeometry& geom = {}) {
  const std::size_t M = spec.channels();
  require(M == geom.num_mics, "music: expected ", geom.num_mics, " channels, got ", M);
  require(n_sources >= 1 && n_sources < M, "music: n_sources must be in [1, ", M - 1, "], got ",
          n_sources);
  require(spec.bins() > kMusicBands, "music: analysis has ", spec.bins(), " bins, need ",
          kMusicBands + 1);
  const auto cov = estimate_covariance(spec);
  double max_trace = 0.0;
  for (std::size_t b = 1; b <= kMusicBands; ++b) {
    max_trace = std::max(max_trace, cov.matrices[b].trace().real());
  }

  SpatialSpectrum out;
  out.bands = kMusicBands;
  out.angles = kMusicAngles;
  out.values.assign(kMusicBands * kMusicAngles, 1.0);
  out.band_freqs.resize(kMusicBands);
  for (std::size_t b = 0; b < kMusicBands; ++b) {
    const std::size_t bin = b + 1;
    const double freq = bin_frequency(bin, spec.params().fft_size);
    out.band_freqs[b] = freq;
    const CMatrix& r = cov.matrices[bin];
    if (!(r.trace().real() > 1e-20 * max_trace) || max_trace == 0.0) {
      out.flagged_bands.push_back(b);
      continue;
    }
    const CMatrix en = music_noise_subspace(r, n_sources);
    double peak = 0.0;
    for (std::size_t a = 0; a < kMusicAngles; ++a) {
      const CVector sv = steering_vector(geom, static_cast<double>(a), freq);
      const double denom = (en.adjoint() * sv).squaredNorm();
      const double p = 1.0 / std::max(denom, 1e-300);
      out.at(b, a) = p;
      peak = std::max(peak, p);
    }
    for (std::size_t a = 0; a < kMusicAngles; ++a) out.at(b, a) /= peak;
  }
  return out;
}

inline SpatialSpectrum music_spectrum(const MultichannelWaveform& wave, std::size_t n_sources = 1,
                                      const ArrayGeometry& geom = {}) {
  return music_spectrum(stft(wave, music_stft_params()), n_sources, geom);
}

inline double spatial_mse(const SpatialSpectrum& p, const SpatialSpectrum& q) {
  require(p.bands == q.bands && p.angles == q.angles, "spatial_mse: shapes ", p.bands, "x",
          p.angles, " and ", q.bands, "x", q.angles, " differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double d = p.values[i] - q.values[i];
    acc += d * d;
  }
  return acc / static_cast<double>(p.values.size());
}

}  // namespace wtlab
