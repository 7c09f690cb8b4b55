#include <catch2/catch_amalgamated.hpp>

#include "wtlab/loss/loss.hpp"
#include "wtlab/rng.hpp"
#include "wtlab/scene/mixture.hpp"
#include "wtlab/scene/synth.hpp"

using namespace wtlab;

namespace {

MultichannelWaveform random_wave(std::uint64_t seed, std::size_t m, std::size_t n) {
  Rng rng(seed);
  MultichannelWaveform w(m, n);
  for (double& v : w.samples()) v = rng.normal();
  return w;
}

}  // namespace

TEST_CASE("l_total substitutions", "[loss]") {
  LossWeights w;
  CHECK(l_total(2.0, 4.0, w) == 12.0);
  CHECK(l_total(0.0, 0.0, w) == 0.0);
  LossWeights lit;
  lit.shared_sigma = true;
  lit.log_sigma2 = 1.0;
  CHECK(l_total(0.0, 0.0, lit) == Catch::Approx(1.0).margin(1e-15));
  // Literal form: sigma2 only enters the regularizer.
  lit.log_sigma1 = std::log(2.0);
  CHECK(l_total(2.0, 4.0, lit) == Catch::Approx(10.0 / 8.0 * 2.0 + 4.0 / 8.0 + std::log(2.0) + 1.0));
  LossWeights dflt;
  dflt.log_sigma1 = std::log(2.0);
  dflt.log_sigma2 = 1.0;
  CHECK(l_total(2.0, 4.0, dflt) ==
        Catch::Approx(10.0 / 8.0 * 2.0 + 4.0 / (2.0 * std::exp(2.0)) + std::log(2.0) + 1.0));
}

TEST_CASE("l_total task ratio and monotonicity", "[loss][property]") {
  for (double ls : {-1.0, 0.0, 0.7}) {
    LossWeights w;
    w.log_sigma1 = w.log_sigma2 = ls;
    const auto g = l_total_grad(1.0, 1.0, w);
    CHECK(g.d_lns / g.d_lps == Catch::Approx(10.0).epsilon(1e-15));
    CHECK(l_total(1.5, 1.0, w) > l_total(1.0, 1.0, w));
    CHECK(l_total(1.0, 1.5, w) > l_total(1.0, 1.0, w));
  }
}

TEST_CASE("l_total has an interior minimizer in sigma", "[loss][property]") {
  for (bool literal : {false, true}) {
    LossWeights w;
    w.shared_sigma = literal;
    double best = 1e300, best_at = 0.0, edge_lo = 0, edge_hi = 0;
    for (int i = 0; i <= 600; ++i) {
      w.log_sigma1 = -3.0 + 0.01 * i;
      w.log_sigma2 = literal ? 0.0 : w.log_sigma1;
      const double v = l_total(0.8, 0.3, w);
      if (i == 0) edge_lo = v;
      if (i == 600) edge_hi = v;
      if (v < best) best = v, best_at = w.log_sigma1;
    }
    INFO("literal " << literal << " argmin " << best_at);
    CHECK(best_at > -3.0);
    CHECK(best_at < 3.0);
    CHECK(best < edge_lo);
    CHECK(best < edge_hi);
  }
}

TEST_CASE("l_total sigma gradients match central differences", "[loss][grad]") {
  Rng rng(3);
  for (bool literal : {false, true}) {
    for (int trial = 0; trial < 20; ++trial) {
      LossWeights w;
      w.shared_sigma = literal;
      w.log_sigma1 = rng.uniform(-1.5, 1.5);
      w.log_sigma2 = rng.uniform(-1.5, 1.5);
      const double lns = rng.uniform(-20.0, 5.0), lps = rng.uniform(0.0, 0.3);
      const auto g = l_total_grad(lns, lps, w);
      const double h = 1e-5;
      auto at = [&](double d1, double d2) {
        LossWeights v = w;
        v.log_sigma1 += d1;
        v.log_sigma2 += d2;
        return l_total(lns, lps, v);
      };
      CHECK(std::abs((at(h, 0) - at(-h, 0)) / (2 * h) - g.d_log_sigma1) < 1e-8 * std::max(1.0, std::abs(g.d_log_sigma1)) * 10);
      CHECK(std::abs((at(0, h) - at(0, -h)) / (2 * h) - g.d_log_sigma2) < 1e-8 * std::max(1.0, std::abs(g.d_log_sigma2)) * 10);
    }
  }
}

TEST_CASE("l_ns closed forms", "[loss]") {
  const auto t = random_wave(1, 8, 4000);
  CHECK(l_ns(t, t) <= -80.0 + 1e-9);

  auto e = t;
  auto n = random_wave(2, 8, 4000);
  for (std::size_t m = 0; m < 8; ++m) {
    auto nm = n.channel(m);
    const auto tm = t.channel(m);
    const double proj = dot(nm, tm) / dot(tm, tm);
    for (std::size_t i = 0; i < nm.size(); ++i) nm[i] -= proj * tm[i];
    const double s = std::sqrt(energy(tm) / energy(nm));
    for (std::size_t i = 0; i < nm.size(); ++i) e.at(m, i) += s * nm[i];
  }
  CHECK(std::abs(l_ns(e, t)) < 1e-6);

  MultichannelWaveform pe(8, 4000), pt(8, 4000);
  for (std::size_t m = 0; m < 8; ++m) {
    std::copy_n(e.channel(7 - m).begin(), 4000, pe.channel(m).begin());
    std::copy_n(t.channel(7 - m).begin(), 4000, pt.channel(m).begin());
  }
  auto noisy = random_wave(3, 8, 4000);
  for (std::size_t i = 0; i < noisy.samples().size(); ++i) noisy.samples()[i] += t.samples()[i];
  MultichannelWaveform pn(8, 4000);
  for (std::size_t m = 0; m < 8; ++m) std::copy_n(noisy.channel(7 - m).begin(), 4000, pn.channel(m).begin());
  CHECK(l_ns(pn, pt) == Catch::Approx(l_ns(noisy, t)).epsilon(1e-14));

  CHECK_THROWS_AS(l_ns(t, MultichannelWaveform(8, 4000)), Error);
}

TEST_CASE("l_ns gradient matches central differences", "[loss][grad]") {
  const auto t = random_wave(4, 2, 64);
  auto e = random_wave(5, 2, 64);
  for (std::size_t i = 0; i < e.samples().size(); ++i) e.samples()[i] += t.samples()[i];
  const auto g = l_ns_grad(e, t);
  double worst = 0.0;
  for (std::size_t i = 0; i < e.samples().size(); ++i) {
    auto p = e, m = e;
    p.samples()[i] += 1e-6;
    m.samples()[i] -= 1e-6;
    const double fd = (l_ns(p, t) - l_ns(m, t)) / 2e-6;
    worst = std::max(worst, std::abs(fd - g.samples()[i]) / std::max(1.0, std::abs(fd)));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("l_ps is zero for identical and scaled inputs", "[loss]") {
  SceneConfig cfg;
  cfg.anechoic = true;
  const auto scene = sample_scene(4, cfg);
  const auto ex = render_mixture(scene, synth_speech(4, 64000), {synth_noise(NoiseKind::white, 4, 64000)});
  CHECK(l_ps(ex.target_early, ex.target_early) == 0.0);
  for (double alpha : {0.5, 3.0}) {
    auto scaled = ex.target_early;
    scaled.scale(alpha);
    CHECK(l_ps(scaled, ex.target_early) <= 1e-6);
  }
}

TEST_CASE("l_ps separates a noisy mixture from its target", "[loss]") {
  auto scene = sample_scene(8);
  scene.snr_db = -5.0;
  const auto ex = render_mixture(scene, synth_speech(8, 64000), {synth_noise(NoiseKind::pink, 8, 64000)});
  CHECK(l_ps(ex.mixture, ex.target_early) > 0.0);
}
