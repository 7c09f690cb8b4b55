#include <catch2/catch_amalgamated.hpp>

#include "wtlab/eval/cues.hpp"
#include "wtlab/eval/music.hpp"
#include "wtlab/eval/si_snr.hpp"
#include "wtlab/rng.hpp"
#include "wtlab/scene/mixture.hpp"
#include "wtlab/scene/synth.hpp"

using namespace wtlab;

namespace {

std::vector<double> noise(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (double& v : x) v = rng.normal();
  return x;
}

// x filtered by the fractional-delay kernel at the given delay.
std::vector<double> delayed(const std::vector<double>& x, double delay) {
  std::vector<double> h(static_cast<std::size_t>(delay) + 2 * kSincHalfTaps + 2, 0.0);
  detail::FractionalDelayBank::instance().add(h, 0, h.size(), delay, 1.0);
  return fft::convolve(x, h, x.size());
}

// Narrowband far-field model at the MUSIC framing: Y_m(f,t) = a_m(f) S(f,t) + noise.
Spectrogram plane_wave(double theta, double noise_db, std::uint64_t seed) {
  const ArrayGeometry g;
  const auto S = stft(MultichannelWaveform::mono(noise(seed, 64000)), music_stft_params());
  Spectrogram Y(8, S.bins(), S.frames(), S.params());
  Rng rng(seed + 1);
  for (std::size_t f = 0; f < S.bins(); ++f) {
    const auto a = steering_vector(g, theta, bin_frequency(f, 600));
    double p = 0.0;
    for (std::size_t t = 0; t < S.frames(); ++t) p += std::norm(S.at(0, f, t));
    const double sigma = std::sqrt(p / S.frames() * db_to_power(noise_db) / 2.0);
    for (std::size_t m = 0; m < 8; ++m)
      for (std::size_t t = 0; t < S.frames(); ++t)
        Y.at(m, f, t) = a[static_cast<Eigen::Index>(m)] * S.at(0, f, t) +
                        (noise_db > -300 ? sigma * cdouble(rng.normal(), rng.normal()) : 0.0);
  }
  return Y;
}

MultichannelWaveform eight(const std::vector<std::vector<double>>& ch) {
  MultichannelWaveform w(ch.size(), ch[0].size());
  for (std::size_t m = 0; m < ch.size(); ++m) std::copy(ch[m].begin(), ch[m].end(), w.channel(m).begin());
  return w;
}

}  // namespace

TEST_CASE("SI-SNR closed forms", "[si_snr]") {
  const auto ref = noise(1, 8000);
  std::vector<double> twice(ref), neg(ref);
  for (double& v : twice) v *= 2.0;
  for (double& v : neg) v = -v;
  const double self = si_snr(ref, ref);
  CHECK(self >= 80.0 - 1e-9);
  CHECK(si_snr(twice, ref) == Catch::Approx(self).margin(1e-9));
  CHECK(si_snr(neg, ref) == Catch::Approx(self).margin(1e-9));

  // n orthogonal to ref with equal energy.
  auto n = noise(2, 8000);
  const double proj = dot(n, ref) / dot(ref, ref);
  for (std::size_t i = 0; i < n.size(); ++i) n[i] -= proj * ref[i];
  const double scale = std::sqrt(energy(ref) / energy(n));
  std::vector<double> est(ref);
  for (std::size_t i = 0; i < est.size(); ++i) est[i] += scale * n[i];
  CHECK(std::abs(si_snr(est, ref)) < 1e-6);

  for (double alpha : {0.5, 2.0, 10.0}) {
    std::vector<double> a(est);
    for (double& v : a) v *= alpha;
    CHECK(std::abs(si_snr(a, ref) - si_snr(est, ref)) < 1e-6);
  }
  CHECK_THROWS_AS(si_snr(ref, std::vector<double>(8000, 0.0)), Error);
  CHECK_THROWS_AS(si_snr(ref, std::vector<double>(10, 1.0)), Error);
}

TEST_CASE("SI-SNR gradient matches central differences", "[si_snr][grad]") {
  const auto ref = noise(3, 64);
  auto est = noise(4, 64);
  for (std::size_t i = 0; i < est.size(); ++i) est[i] += 0.7 * ref[i];
  const auto g = si_snr_grad(est, ref);
  double worst = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    auto p = est, m = est;
    const double h = 1e-6;
    p[i] += h;
    m[i] -= h;
    const double fd = (si_snr(p, ref) - si_snr(m, ref)) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i])));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("MUSIC spectrum shape and broadside peak", "[music]") {
  const auto x = noise(5, 64000);
  const auto sp = music_spectrum(eight(std::vector<std::vector<double>>(8, x)));
  CHECK(sp.bands == 300);
  CHECK(sp.angles == 181);
  CHECK(sp.values.size() == 300 * 181);
  CHECK(sp.band_freqs.front() == Catch::Approx(16000.0 / 600));
  CHECK(sp.band_freqs.back() == Catch::Approx(8000.0));
  CHECK(sp.peak_angle() == 90.0);
  for (double v : sp.values) {
    REQUIRE(std::isfinite(v));
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
  }
}

TEST_CASE("MUSIC flags silent bands", "[music]") {
  const auto sp = music_spectrum(MultichannelWaveform(8, 64000));
  CHECK(sp.flagged_bands.size() == 300);
  for (double v : sp.values) REQUIRE(v == 1.0);
  CHECK_THROWS_AS(music_spectrum(MultichannelWaveform(4, 64000)), Error);
  CHECK_THROWS_AS(music_spectrum(MultichannelWaveform(8, 64000), 8), Error);
}

TEST_CASE("MUSIC is invariant to a global input scale", "[music][property]") {
  const auto Y = plane_wave(64.0, -20.0, 6);
  const auto base = music_spectrum(Y);
  auto scaled = [&](cdouble alpha) {
    Spectrogram Z = Y;
    for (auto& v : Z.data()) v *= alpha;
    return music_spectrum(Z);
  };
  const auto unit = scaled(cdouble(2.0, 1.0) / std::abs(cdouble(2.0, 1.0)));
  const auto three = scaled(3.0);
  double w1 = 0.0, w3 = 0.0;
  for (std::size_t i = 0; i < base.values.size(); ++i) {
    w1 = std::max(w1, std::abs(unit.values[i] - base.values[i]));
    w3 = std::max(w3, std::abs(three.values[i] - base.values[i]));
  }
  CHECK(w1 < 1e-9);
  CHECK(w3 < 1e-6);
}

TEST_CASE("MUSIC band peaks under the narrowband far-field model", "[music]") {
  for (double theta : {25.0, 71.0, 118.0, 150.0}) {
    const auto sp = music_spectrum(plane_wave(theta, -20.0, 7));
    std::size_t good = 0, total = 0;
    for (std::size_t b = 0; b < sp.bands; ++b) {
      if (sp.band_freqs[b] < 500.0) continue;
      ++total;
      good += std::abs(static_cast<double>(sp.band_peak(b)) - theta) <= 1.0;
    }
    INFO("theta " << theta << " good " << good << "/" << total);
    CHECK(good >= 0.95 * total);
    CHECK(sp.peak_angle() == theta);
  }
}

TEST_CASE("noise subspace is orthogonal to the source steering", "[music][property]") {
  const double theta = 57.0;
  const auto cov = estimate_covariance(plane_wave(theta, -400.0, 8));
  const ArrayGeometry g;
  for (std::size_t b = 1; b <= kMusicBands; ++b) {
    const double f = bin_frequency(b, 600);
    if (f < 500.0) continue;
    const CMatrix en = music_noise_subspace(cov.matrices[b], 1);
    REQUIRE((en.adjoint() * steering_vector(g, theta, f)).norm() < 1e-3);
  }
}

TEST_CASE("MUSIC finds the speaker in simulated anechoic rooms", "[music]") {
  SceneConfig cfg;
  cfg.anechoic = true;
  for (std::uint64_t seed : {2u, 11u, 17u}) {
    const auto scene = sample_scene(seed, cfg);
    auto ex = render_mixture(scene, synth_speech(seed, 64000), {std::vector<double>(64000, 0.0)});
    // Spatially white sensor noise 20 dB below the reference-mic speech.
    const double sigma = std::sqrt(energy(ex.mixture.channel(0)) / 64000 * 0.01);
    Rng rng(seed);
    for (double& v : ex.mixture.samples()) v += sigma * rng.normal();
    const auto sp = music_spectrum(ex.mixture, 1, scene.array);
    CHECK(std::abs(sp.peak_angle() - scene.speech_doa_deg()) <= 1.0);
  }
}

TEST_CASE("spatial MSE", "[music]") {
  const auto p = music_spectrum(plane_wave(40.0, -20.0, 9));
  const auto q = music_spectrum(plane_wave(100.0, -20.0, 10));
  CHECK(spatial_mse(p, p) == 0.0);
  CHECK(spatial_mse(p, q) == spatial_mse(q, p));
  CHECK(spatial_mse(p, q) > 0.0);
  SpatialSpectrum small;
  small.bands = 2;
  small.angles = 181;
  small.values.assign(362, 0.0);
  CHECK_THROWS_AS(spatial_mse(p, small), Error);
}

TEST_CASE("GCC-PHAT delay estimates", "[cues]") {
  const auto x = noise(11, 512);
  const auto x0 = delayed(x, 40.0);
  CHECK(*gcc_phat_itd(x0, x0) == 0.0);
  const double two = *gcc_phat_itd(x0, delayed(x, 42.0)) * 1e6;
  CHECK(std::abs(two - 125.0) <= 2.0);
  const double half = *gcc_phat_itd(x0, delayed(x, 40.5)) * 1e6;
  CHECK(std::abs(half - 31.25) <= 5.0);
  const double back = *gcc_phat_itd(delayed(x, 42.0), x0) * 1e6;
  CHECK(std::abs(back + 125.0) <= 2.0);
  const std::vector<double> zeros(512, 0.0);
  CHECK_FALSE(gcc_phat_itd(zeros, x0).has_value());
}

TEST_CASE("cue deltas on analytic perturbations", "[cues]") {
  const auto speech = synth_speech(12, 32000);
  std::vector<std::vector<double>> ch;
  for (int m = 0; m < 8; ++m) ch.push_back(delayed(speech, 40.0 + 0.3 * m));
  const auto clean = eight(ch);

  const auto same = cue_deltas(clean, clean);
  CHECK(same.delta_itd_us == 0.0);
  CHECK(same.delta_ipd_rad == 0.0);
  CHECK(same.delta_ild_db == 0.0);

  auto louder = clean;
  for (const auto& [i, j] : kCuePairs)
    for (double& v : louder.channel(i)) v *= 2.0;
  const auto l = cue_deltas(louder, clean);
  CHECK(std::abs(l.delta_ild_db - 20.0 * std::log10(2.0)) < 0.01);
  CHECK(l.delta_itd_us == 0.0);
  CHECK(l.delta_ipd_rad < 1e-12);

  auto shifted = clean;
  for (const auto& [i, j] : kCuePairs) {
    auto c = shifted.channel(j);
    std::copy_backward(c.begin(), c.end() - 1, c.end());
    c[0] = 0.0;
  }
  const auto s = cue_deltas(shifted, clean);
  CHECK(std::abs(s.delta_itd_us - 62.5) <= 2.0);
  CHECK(s.delta_ild_db < 0.1);
  CHECK(s.delta_ipd_rad > 0.0);
  CHECK(s.delta_ipd_rad <= kPi);
  for (const auto& p : s.per_pair) CHECK(p.itd_frames > 0);

  CHECK_THROWS_AS(cue_deltas(clean.select(0), clean), Error);
}
