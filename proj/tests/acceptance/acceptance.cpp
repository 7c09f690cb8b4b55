// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Usage: acceptance <path-to-wtlab-cli> [AC1 AC4 ...]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "support/corpus.hpp"
#include "support/wtconv_oracle.hpp"
#include "wtlab/app/commands.hpp"
#include "wtlab/beamform/mvdr.hpp"
#include "wtlab/eval/cues.hpp"
#include "wtlab/eval/music.hpp"
#include "wtlab/eval/si_snr.hpp"
#include "wtlab/loss/loss.hpp"
#include "wtlab/net/gradcheck.hpp"
#include "wtlab/net/model.hpp"
#include "wtlab/scene/mixture.hpp"
#include "wtlab/scene/synth.hpp"

using namespace wtlab;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

std::string cli_path;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

MultichannelWaveform random_wave(Rng& rng, std::size_t m, std::size_t n) {
  MultichannelWaveform w(m, n);
  for (double& v : w.samples()) v = rng.normal();
  return w;
}

Tensor<double> randn(const Shape& s, Rng& rng) {
  Tensor<double> t(s);
  for (auto& v : t.vec()) v = rng.normal();
  return t;
}

double sumsq(const Tensor<double>& t) {
  double e = 0.0;
  for (double v : t.vec()) e += v * v;
  return e;
}

std::vector<double> delayed(const std::vector<double>& x, double delay) {
  std::vector<double> h(static_cast<std::size_t>(delay) + 2 * kSincHalfTaps + 2, 0.0);
  detail::FractionalDelayBank::instance().add(h, 0, h.size(), delay, 1.0);
  return fft::convolve(x, h, x.size());
}

// ---------------------------------------------------------------------------

Outcome stft_round_trip() {
  const auto t0 = Clock::now();
  Rng rng(1);
  double worst = 0.0;
  bool shapes = true;
  for (int i = 0; i < 100; ++i) {
    const auto x = random_wave(rng, 8, 64000);
    const auto X = stft(x);
    shapes = shapes && X.channels() == 8 && X.bins() == 161 && X.frames() == 401;
    const auto y = istft(X, 64000);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < x.samples().size(); ++k) {
      num += (y.samples()[k] - x.samples()[k]) * (y.samples()[k] - x.samples()[k]);
      den += x.samples()[k] * x.samples()[k];
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  const double t = seconds_since(t0);
  return {shapes && worst < 1e-6 && t < 10.0,
          "shape 8x161x401 " + std::string(shapes ? "ok" : "WRONG") + ", max rel L2 " +
              fmt("%.2e", worst) + ", " + fmt("%.1f", t) + " s (limit 10 s)"};
}

Outcome wtconv_machinery() {
  Rng rng(2);
  double round_trip = 0.0, energy_err = 0.0;
  for (const Shape& s : {Shape{2, 3, 16, 20}, Shape{1, 8, 322, 402}, Shape{1, 2, 161, 401}}) {
    const auto x = randn(s, rng);
    const auto b = nn::haar_dwt2(x);
    const auto y = nn::haar_idwt2(b);
    for (std::size_t i = 0; i < x.size(); ++i) round_trip = std::max(round_trip, std::abs(x[i] - y[i]));
    if (s[2] % 2 == 0 && s[3] % 2 == 0) {
      const double e = sumsq(b.ll) + sumsq(b.lh) + sumsq(b.hl) + sumsq(b.hh);
      energy_err = std::max(energy_err, std::abs(e - sumsq(x)) / sumsq(x));
    }
  }
  ParameterStore<double> store(9);
  const auto m = nn::WtConv<double>::create(store, "wt", 2, 2);
  for (auto& e : store.entries())
    for (auto& v : e.value.vec()) v += 0.3 * rng.normal();
  const auto x = randn({1, 2, 16, 16}, rng);
  const auto y = m.forward(store, x);
  const auto want = testing::dense_wtconv_l2(store, "wt", x);
  double oracle = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) oracle = std::max(oracle, std::abs(y[i] - want[i]));
  return {round_trip <= 1e-9 && energy_err <= 1e-9 && oracle <= 1e-9,
          "dwt/idwt max err " + fmt("%.1e", round_trip) + ", energy rel err " +
              fmt("%.1e", energy_err) + ", dense oracle max err " + fmt("%.1e", oracle)};
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  for (const auto& block : nn::gradcheck_blocks()) {
    const auto r = nn::grad_check(block, nn::default_gradcheck_shape(block), 0);
    ok = ok && r.passed() && r.max_rel_error < 1e-4;
    detail += block + " " + fmt("%.1e", r.max_rel_error) + (r.passed() ? "" : " FAIL") + ", ";
  }
  const double t = seconds_since(t0);
  return {ok && t < 120.0, detail + fmt("%.1f", t) + " s (limit 120 s)"};
}

Outcome music_accuracy() {
  SceneConfig cfg;
  cfg.anechoic = true;
  std::size_t hits = 0;
  bool shape = true;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto scene = sample_scene(seed, cfg);
    auto ex = render_mixture(scene, synth_speech(seed, 64000), {std::vector<double>(64000, 0.0)});
    const double sigma = std::sqrt(energy(ex.mixture.channel(0)) / 64000.0 * db_to_power(-20.0));
    Rng rng(mix_seed(seed, 0x20db));
    for (double& v : ex.mixture.samples()) v += sigma * rng.normal();
    const auto sp = music_spectrum(ex.mixture, 1, scene.array);
    shape = shape && sp.bands == 300 && sp.angles == 181 && sp.values.size() == 300 * 181;
    const double err = std::abs(sp.peak_angle() - scene.speech_doa_deg());
    worst = std::max(worst, err);
    if (err <= 1.0) ++hits;
  }
  return {shape && hits >= 48, std::to_string(hits) + "/50 within 1 deg (need 48), worst " +
                                   fmt("%.2f", worst) + " deg, shape 300x181 " +
                                   (shape ? "ok" : "WRONG")};
}

MixtureExample desk_example(std::uint64_t seed, double snr_db) {
  auto scene = sample_scene(seed);
  scene.snr_db = snr_db;
  std::vector<std::vector<double>> noises;
  for (std::size_t k = 0; k < scene.noise_pos.size(); ++k)
    noises.push_back(synth_noise(scene.noise_kind, mix_seed(seed, 0x6e6f + k), 64000));
  return render_mixture(scene, synth_speech(seed, 64000), noises);
}

Outcome mvdr() {
  const auto t0 = Clock::now();
  double distortion = 0.0, gain = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto ex = desk_example(seed, 0.0);
    const auto Y = stft(ex.mixture), S = stft(ex.target_early);
    const auto r = mb_mvdr(Y, S);
    const auto [ms, mn] = oracle_masks(Y, S);
    const auto steer = rtf_steering(estimate_covariance(Y, &ms), 0);
    for (std::size_t f = 0; f < steer.size(); ++f)
      distortion = std::max(distortion, std::abs(r.weights.weights[f].dot(steer[f]) - 1.0));
    const auto geo = ti_mvdr(Y, S, TiSteering::geometric, &ex.scene.array, ex.scene.speech_doa_deg());
    const auto a = steering_matrix(ex.scene.array, ex.scene.speech_doa_deg());
    for (std::size_t f = 0; f < a.size(); ++f)
      distortion = std::max(distortion, std::abs(geo.weights.weights[f].dot(a[f]) - 1.0));
    const auto out = istft(r.output, 64000);
    gain += (si_snr(out.channel(0), ex.target_early.channel(0)) -
             si_snr(ex.mixture.channel(0), ex.target_early.channel(0))) / 50.0;
  }
  const double t = seconds_since(t0);
  return {distortion < 1e-8 && gain >= 3.0 && t < 300.0,
          "max |w^H a - 1| " + fmt("%.1e", distortion) + ", MB-MVDR mean SI-SNR gain " +
              fmt("%+.2f", gain) + " dB (need +3), " + fmt("%.0f", t) + " s (limit 300 s)"};
}

Outcome cue_oracles() {
  const auto speech = synth_speech(12, 32000);
  auto build = [&](double extra_j, double gain_i) {
    MultichannelWaveform w(8, speech.size());
    for (std::size_t m = 0; m < 8; ++m) {
      bool is_j = false, is_i = false;
      for (const auto& [i, j] : kCuePairs) {
        is_j = is_j || j == m;
        is_i = is_i || i == m;
      }
      const auto ch = delayed(speech, 40.0 + 0.3 * static_cast<double>(m) + (is_j ? extra_j : 0.0));
      for (std::size_t n = 0; n < ch.size(); ++n) w.at(m, n) = (is_i ? gain_i : 1.0) * ch[n];
    }
    return w;
  };
  const auto clean = build(0.0, 1.0);
  const auto same = cue_deltas(clean, clean);
  const bool zero = same.delta_itd_us == 0.0 && same.delta_ipd_rad == 0.0 && same.delta_ild_db == 0.0;
  const double ild = cue_deltas(build(0.0, 2.0), clean).delta_ild_db;
  const double itd2 = cue_deltas(build(2.0, 1.0), clean).delta_itd_us;
  const double itd05 = cue_deltas(build(0.5, 1.0), clean).delta_itd_us;
  const bool ok = zero && std::abs(ild - 6.02) <= 0.01 && std::abs(itd2 - 125.0) <= 2.0 &&
                  std::abs(itd05 - 31.25) <= 5.0;
  return {ok, "dILD(x2) " + fmt("%.3f", ild) + " dB, dITD(2 smp) " + fmt("%.2f", itd2) +
                  " us, dITD(0.5 smp) " + fmt("%.2f", itd05) + " us, identical " +
                  (zero ? "all 0" : "NONZERO")};
}

Outcome noisy_direction() {
  const SceneConfig cfg;
  constexpr int kScenes = 30;
  double noisy = 0.0, noisy_ref = 0.0, mvdr_ref = 0.0, itd = 0.0, ipd = 0.0, ild = 0.0;
  for (int k = 0; k < kScenes; ++k) {
    const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(k);
    // evenly spaced over the test SNR range
    const double snr = cfg.snr_test.lo + (cfg.snr_test.hi - cfg.snr_test.lo) * (k + 0.5) / kScenes;
    const auto ex = desk_example(seed, snr);
    for (std::size_t m = 0; m < 8; ++m)
      noisy += si_snr(ex.mixture.channel(m), ex.target_early.channel(m)) / (8.0 * kScenes);
    const auto c = cue_deltas(ex.mixture, ex.target_early);
    itd += c.delta_itd_us / kScenes;
    ipd += c.delta_ipd_rad / kScenes;
    ild += c.delta_ild_db / kScenes;
    const auto out = istft(mb_mvdr(stft(ex.mixture), stft(ex.target_early)).output, 64000);
    noisy_ref += si_snr(ex.mixture.channel(0), ex.target_early.channel(0)) / kScenes;
    mvdr_ref += si_snr(out.channel(0), ex.target_early.channel(0)) / kScenes;
  }
  const bool ok = noisy < 0.0 && itd > 0.0 && ipd > 0.0 && ild > 0.0 && mvdr_ref > noisy_ref;
  return {ok, "snr " + fmt("[%g", cfg.snr_test.lo) + fmt(", %g] dB: ", cfg.snr_test.hi) +
                  "noisy SI-SNR " + fmt("%.2f", noisy) + " dB, dITD " + fmt("%.1f", itd) +
                  " us, dIPD " + fmt("%.3f", ipd) + " rad, dILD " + fmt("%.2f", ild) +
                  " dB, ref-mic MB-MVDR " + fmt("%.2f", mvdr_ref) + " vs noisy " +
                  fmt("%.2f", noisy_ref) + " dB"};
}

Outcome model_contract() {
  const nn::ModelConfig cfg;
  const nn::Model<float> model(cfg);
  Rng rng(8);
  const auto y = stft(random_wave(rng, 8, 64000));
  const auto a = nn::model_forward(model, y);
  const auto b = nn::model_forward(model, y);
  const bool shape = a.enhanced.same_shape(y) && a.mask.same_shape(y) && y.channels() == 8 &&
                     y.bins() == 161 && y.frames() == 401;
  const bool finite = a.enhanced.all_finite() && a.mask.all_finite();
  const bool deterministic = a.enhanced.data() == b.enhanced.data();

  const auto& mg = model.mask_generator();
  Tensor<float> dec({1, cfg.decoder_out, 2 * cfg.bins, 30});
  for (auto& v : dec.vec()) v = static_cast<float>(rng.normal());
  const auto m0 = mg.forward(model.params(), dec);
  for (std::size_t c = 0; c < dec.dim(1); ++c)
    for (std::size_t f = 0; f < dec.dim(2); ++f)
      for (std::size_t t = 20; t < 30; ++t) dec(0, c, f, t) += 1.0f;
  const auto m1 = mg.forward(model.params(), dec);
  bool past_fixed = true, future_moved = false;
  for (std::size_t m = 0; m < m0.dim(1); ++m)
    for (std::size_t f = 0; f < m0.dim(2); ++f)
      for (std::size_t t = 0; t < 30; ++t) {
        if (t < 20) past_fixed = past_fixed && m0(0, m, f, t) == m1(0, m, f, t);
        else future_moved = future_moved || m0(0, m, f, t) != m1(0, m, f, t);
      }
  const bool causal = past_fixed && future_moved;

  const std::size_t total = param_count(model.params());
  std::size_t sum = 0;
  for (const auto& [mod, n] : param_breakdown(model.params())) sum += n;
  const bool count_ok = total >= 750000 && total <= 1250000 && sum == total;
  return {shape && finite && deterministic && causal && count_ok,
          std::string("shape ") + (shape ? "ok" : "WRONG") + ", finite " + (finite ? "yes" : "NO") +
              ", deterministic " + (deterministic ? "yes" : "NO") + ", mask causal " +
              (causal ? "yes" : "NO") + ", params " + std::to_string(total) +
              " (breakdown sum " + std::to_string(sum) + ")"};
}

Outcome loss_algebra() {
  const double dflt = l_total(2.0, 4.0, LossWeights{});
  LossWeights shared{std::log(2.0), 1.0, true};
  const double s1 = 2.0;
  const double printed = 10.0 / (2.0 * s1 * s1) * 2.0 + 1.0 / (2.0 * s1 * s1) * 4.0 + std::log(s1) + 1.0;
  const double lit = l_total(2.0, 4.0, shared);
  SceneConfig cfg;
  cfg.anechoic = true;
  const auto scene = sample_scene(4, cfg);
  const auto ex = render_mixture(scene, synth_speech(4, 64000), {synth_noise(NoiseKind::white, 4, 64000)});
  const double same = l_ps(ex.target_early, ex.target_early);
  double scaled = 0.0;
  for (double alpha : {0.5, 3.0}) {
    auto s = ex.target_early;
    s.scale(alpha);
    scaled = std::max(scaled, l_ps(s, ex.target_early));
  }
  const bool ok = dflt == 12.0 && std::abs(lit - printed) <= 1e-12 && same == 0.0 && scaled <= 1e-6;
  return {ok, "l_total(1,1,2,4) " + fmt("%.12g", dflt) + ", shared-sigma form err " +
                  fmt("%.1e", std::abs(lit - printed)) + ", l_ps(x,x) " + fmt("%.1e", same) +
                  ", l_ps(a x,x) " + fmt("%.1e", scaled)};
}

int sh(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

Outcome end_to_end() {
  if (cli_path.empty() || !fs::exists(cli_path)) return {false, "wtlab CLI binary not found"};
  const auto t0 = Clock::now();
  const auto root = testing::scratch("acceptance_e2e");
  testing::make_corpus(root / "corpus", 20, 7);
  wav::write_atomic(root / "e2e.toml", "[scene]\nanechoic = true\n");
  const std::string q = "\"", cli = q + cli_path + q, r = root.string();
  const int rc_sim = sh(cli + " --seed 7 --config " + q + r + "/e2e.toml" + q + " simulate --corpus " + q + r + "/corpus" + q + " --out " + q + r + "/data" + q);
  const int rc_enh = sh(cli + " enhance --method mb-mvdr --dataset " + q + r + "/data/test" + q + " --out " + q + r + "/enh" + q);
  const int rc_ev = sh(cli + " evaluate --enhanced " + q + r + "/enh" + q + " --reference " + q + r + "/data/test" + q + " --out " + q + r + "/metrics.csv" + q);
  const int rc_mu = sh(cli + " music " + q + r + "/data/test/test_00000_target.wav" + q + " --out " + q + r + "/music/test_00000" + q);
  const double t = seconds_since(t0);
  if (rc_sim || rc_enh || rc_ev || rc_mu)
    return {false, "exit codes simulate " + std::to_string(rc_sim) + ", enhance " + std::to_string(rc_enh) +
                       ", evaluate " + std::to_string(rc_ev) + ", music " + std::to_string(rc_mu)};

  // metrics CSV: header, one row per test example, trailing mean row
  std::istringstream csv(wav::read_file(root / "metrics.csv"));
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(csv, line);) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    rows.push_back(cells);
  }
  bool schema = rows.size() == 3 && rows[0] == app::metric_columns() && rows.back()[0] == "mean";
  for (std::size_t i = 1; schema && i < rows.size(); ++i) {
    schema = rows[i].size() == app::metric_columns().size();
    for (std::size_t c = 2; schema && c < 5; ++c) {
      char* end = nullptr;
      std::strtod(rows[i][c].c_str(), &end);
      schema = !rows[i][c].empty() && *end == '\0';
    }
  }

  std::istringstream mcsv(wav::read_file(root / "music" / "test_00000.csv"));
  std::size_t music_lines = 0;
  for (std::string line; std::getline(mcsv, line);) ++music_lines;
  const auto img = app::parse_pgm(wav::read_file(root / "music" / "test_00000.pgm"));
  const auto scene = nlohmann::json::parse(wav::read_file(root / "data" / "test" / "test_00000_scene.json"));
  const double doa = scene.at("speech_doa_deg").get<double>();
  const auto col = app::pgm_peak_column(img);
  const double err = std::abs(static_cast<double>(col) - doa);
  const bool ok = schema && music_lines == 302 && img.width == 181 && img.height == 300 &&
                  err <= 1.0 && t < 600.0;
  return {ok, std::string("metrics CSV ") + (schema ? "valid" : "INVALID") + ", music CSV " +
                  std::to_string(music_lines) + " lines, PGM " + std::to_string(img.width) + "x" +
                  std::to_string(img.height) + " peak col " + std::to_string(col) + " vs DOA " +
                  fmt("%.2f", doa) + ", " + fmt("%.0f", t) + " s (limit 600 s)"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) cli_path = argv[1];
  std::set<std::string> only(argv + std::min(argc, 2), argv + argc);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1", stft_round_trip}, {"AC2", wtconv_machinery}, {"AC3", gradient_suite},
      {"AC4", music_accuracy},  {"AC5", mvdr},             {"AC6", cue_oracles},
      {"AC7", noisy_direction}, {"AC8", model_contract},   {"AC9", loss_algebra},
      {"AC10", end_to_end}};
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << name << (o.pass ? " PASS " : " FAIL ") << o.detail << " ["
              << fmt("%.1f", seconds_since(t0)) << " s]" << std::endl;
  }
  return failed ? 1 : 0;
}
