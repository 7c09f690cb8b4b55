#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wtlab/app/config.hpp"
#include "wtlab/app/pool.hpp"
#include "wtlab/beamform/mvdr.hpp"
#include "wtlab/eval/cues.hpp"
#include "wtlab/eval/music.hpp"
#include "wtlab/eval/si_snr.hpp"
#include "wtlab/net/gradcheck.hpp"
#include "wtlab/net/model.hpp"
#include "wtlab/scene/manifest.hpp"
#include "wtlab/scene/mixture.hpp"
#include "wtlab/scene/scene.hpp"
#include "wtlab/scene/synth.hpp"
#include "wtlab/signal/container.hpp"
#include "wtlab/signal/stft.hpp"
#include "wtlab/signal/wav.hpp"

namespace wtlab::app {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheck = 1;
inline constexpr int kExitUsage = 2;

// Column order of the evaluate CSV.
inline const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols{
      "id",           "channels",      "si_snr_db",     "noisy_si_snr_db",
      "si_snr_delta_db", "delta_itd_us", "delta_ipd_rad", "delta_ild_db"};
  return cols;
}

namespace detail {

inline std::string num(double v, const char* f = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  wav::write_atomic(path, j.dump(2) + "\n");
}

inline std::string strip_suffix(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size() || s.compare(s.size() - suffix.size(), suffix.size(), suffix) != 0) {
    return {};
  }
  return s.substr(0, s.size() - suffix.size());
}

// Sorted ids of files in dir named <id><suffix>.
inline std::vector<std::string> ids_with_suffix(const fs::path& dir, const std::string& suffix) {
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto id = strip_suffix(e.path().filename().string(), suffix);
    if (!id.empty()) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline void require_dir(const std::string& path, const char* what) {
  require(!path.empty(), "missing ", what, " path");
  require(fs::is_directory(path), what, " directory not found: ", path);
}

inline void report(std::ostream& err, const std::vector<std::optional<std::string>>& errors,
                   const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i]) err << "error: " << names[i] << ": " << *errors[i] << "\n";
  }
}

inline std::size_t failures(const std::vector<std::optional<std::string>>& errors) {
  return static_cast<std::size_t>(std::count_if(errors.begin(), errors.end(),
                                                [](const auto& e) { return e.has_value(); }));
}

// First `n` samples of channel 0, zero-padded when the utterance is shorter.
inline std::vector<double> chunk(const MultichannelWaveform& w, std::size_t n) {
  std::vector<double> out(n, 0.0);
  const auto ch = w.channel(0);
  std::copy_n(ch.begin(), std::min(n, ch.size()), out.begin());
  return out;
}

inline std::vector<double> noise_from_file(const fs::path& path, std::size_t n) {
  const auto w = wav::read(path);
  require(w.sample_rate() == kSampleRate, path.string(), ": sample rate ", w.sample_rate(),
          " Hz, expected ", kSampleRate);
  require(w.length() > 0, path.string(), ": empty noise file");
  std::vector<double> out(n);
  const auto ch = w.channel(0);
  for (std::size_t i = 0; i < n; ++i) out[i] = ch[i % ch.size()];  // loop short files
  return out;
}

}  // namespace detail

// ---- simulate -------------------------------------------------------------

inline int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto& sc = cfg.simulate;
  require(!sc.corpus.empty(), "simulate: missing corpus path");
  require(fs::is_directory(sc.corpus), "corpus directory not found: ", sc.corpus);
  require(!sc.out.empty(), "simulate: missing output directory");
  std::vector<fs::path> noise_files;
  if (!sc.noise_dir.empty()) {
    require(fs::is_directory(sc.noise_dir), "noise directory not found: ", sc.noise_dir);
    noise_files = list_corpus(sc.noise_dir);
    require(!noise_files.empty(), "noise directory ", sc.noise_dir, " contains no WAV files");
  }
  const auto rows = build_manifest(sc.corpus, cfg.scene, cfg.split, cfg.seed);
  const fs::path root(sc.out);
  for (const char* split : {"train", "valid", "test"}) fs::create_directories(root / split);

  const std::size_t n = cfg.scene.chunk_samples();
  auto job = [&](std::size_t i) {
    const auto& row = rows[i];
    const auto speech_wave = wav::read(row.utterance);
    require(speech_wave.sample_rate() == kSampleRate, "sample rate ", speech_wave.sample_rate(),
            " Hz, expected ", kSampleRate);
    const auto speech = detail::chunk(speech_wave, n);
    RoomScene scene = sample_scene(row.seed, cfg.scene);
    scene.snr_db = row.snr_db;
    std::vector<std::vector<double>> noises;
    for (std::size_t k = 0; k < scene.noise_pos.size(); ++k) {
      const auto s = mix_seed(row.seed, 0x6e6f + k);
      noises.push_back(noise_files.empty()
                           ? synth_noise(scene.noise_kind, s, n)
                           : detail::noise_from_file(noise_files[s % noise_files.size()], n));
    }
    const auto ex = render_mixture(scene, speech, noises, n);
    const fs::path dir = root / row.split;
    wav::write(dir / (row.id + "_mix.wav"), ex.mixture);
    wav::write(dir / (row.id + "_target.wav"), ex.target_early);
    auto j = to_json(ex.scene);
    j["id"] = row.id;
    j["split"] = row.split;
    j["utterance"] = row.utterance;
    j["noise_gain"] = ex.noise_gain;
    j["peak_gain"] = ex.peak_gain;
    detail::write_json(dir / (row.id + "_scene.json"), j);
  };
  const auto errors = parallel_for(rows.size(), cfg.workers, job);
  std::vector<std::string> names;
  for (const auto& r : rows) names.push_back(r.id + " (" + r.utterance + ")");
  detail::report(err, errors, names);
  write_manifest(root / "manifest.jsonl", rows);

  std::map<std::string, std::size_t> counts{{"train", 0}, {"valid", 0}, {"test", 0}};
  for (const auto& r : rows) ++counts[r.split];
  for (const char* split : {"train", "valid", "test"}) out << split << " " << counts[split] << "\n";
  const auto failed = detail::failures(errors);
  if (failed) err << failed << " of " << rows.size() << " examples failed\n";
  return failed ? kExitCheck : kExitOk;
}

// ---- enhance --------------------------------------------------------------

inline int cmd_enhance(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto& ec = cfg.enhance;
  detail::require_dir(ec.dataset, "dataset");
  require(!ec.out.empty(), "enhance: missing output directory");
  const auto ids = detail::ids_with_suffix(ec.dataset, "_mix.wav");
  require(!ids.empty(), "enhance: no *_mix.wav files in ", ec.dataset);
  fs::create_directories(ec.out);

  std::optional<nn::Model<float>> model;
  if (ec.method == Method::wtformer_random) {
    require(ec.random_init || !ec.checkpoint.empty(),
            "enhance: wtformer-random needs a checkpoint or --random-init");
    nn::ModelConfig mc = cfg.model;
    mc.seed = cfg.seed;
    model.emplace(mc);
    if (!ec.checkpoint.empty()) checkpoint::load(ec.checkpoint, model->params());
  }

  const fs::path dataset(ec.dataset), dst(ec.out);
  auto job = [&](std::size_t i) {
    const auto& id = ids[i];
    const fs::path mix_path = dataset / (id + "_mix.wav");
    nlohmann::json side{{"id", id}, {"method", to_string(ec.method)}, {"input", mix_path.string()}};
    if (ec.method == Method::identity) {
      const auto bytes = wav::read_file(mix_path);
      const auto w = wav::decode(bytes, mix_path.string());
      wav::write_atomic(dst / (id + ".wav"), bytes);
      side["channels"] = w.channels();
      detail::write_json(dst / (id + ".json"), side);
      return;
    }
    const auto mix = wav::read(mix_path);
    require(mix.sample_rate() == kSampleRate, "sample rate ", mix.sample_rate(), " Hz, expected ",
            kSampleRate);
    MultichannelWaveform result;
    if (ec.method == Method::wtformer_random) {
      const auto enhanced = model->forward(stft(mix)).enhanced;
      result = istft(enhanced, mix.length());
      require(result.all_finite(), "model produced non-finite samples");
      side["random_init"] = ec.checkpoint.empty();
      if (!ec.checkpoint.empty()) side["checkpoint"] = ec.checkpoint;
      side["seed"] = cfg.seed;
    } else {
      const fs::path target_path = dataset / (id + "_target.wav");
      const auto target = wav::read(target_path);
      require(target.channels() == mix.channels() && target.length() == mix.length() &&
                  target.sample_rate() == mix.sample_rate(),
              "shape mismatch: mixture ", mix.channels(), "x", mix.length(), " @", mix.sample_rate(),
              " Hz vs target ", target.channels(), "x", target.length(), " @",
              target.sample_rate(), " Hz");
      const auto Y = stft(mix), S = stft(target);
      MvdrResult r;
      if (ec.method == Method::mb_mvdr) {
        r = mb_mvdr(Y, S);
      } else {
        side["steering"] = ec.steering;
        if (ec.steering == "geometric") {
          const auto scene = scene_from_json(
              nlohmann::json::parse(wav::read_file(dataset / (id + "_scene.json"))));
          r = ti_mvdr(Y, S, TiSteering::geometric, &scene.array, scene.speech_doa_deg());
          side["doa_deg"] = scene.speech_doa_deg();
        } else {
          r = ti_mvdr(Y, S, TiSteering::oracle_rtf);
        }
      }
      result = istft(r.output, mix.length());
      side["reference_mic"] = r.weights.reference_mic;
      side["fallback_bins"] = r.fallback_bins;
      if (ec.dump_weights) {
        Spectrogram w(mix.channels(), r.weights.bins(), 1, Y.params());
        for (std::size_t f = 0; f < r.weights.bins(); ++f)
          for (std::size_t m = 0; m < mix.channels(); ++m)
            w.at(m, f, 0) = r.weights.weights[f](static_cast<Eigen::Index>(m));
        container::write(dst / (id + "_weights.wtsp"), w);
      }
    }
    wav::write(dst / (id + ".wav"), result);
    side["channels"] = result.channels();
    detail::write_json(dst / (id + ".json"), side);
  };
  const auto errors = parallel_for(ids.size(), cfg.workers, job);
  detail::report(err, errors, ids);
  const auto failed = detail::failures(errors);
  out << "enhanced " << ids.size() - failed << " of " << ids.size() << " with "
      << to_string(ec.method) << "\n";
  return failed ? kExitCheck : kExitOk;
}

// ---- evaluate -------------------------------------------------------------

struct MetricRow {
  std::string id;
  std::size_t channels = 0;
  double si_snr_db = 0.0, noisy_si_snr_db = 0.0;
  std::optional<CueReport> cues;  // multichannel outputs only
};

inline double mean_si_snr(const MultichannelWaveform& est, const MultichannelWaveform& ref,
                          std::size_t channels) {
  double acc = 0.0;
  for (std::size_t m = 0; m < channels; ++m) acc += si_snr(est.channel(m), ref.channel(m));
  return acc / static_cast<double>(channels);
}

// Scores an enhanced file against the target. Single-channel outputs are
// compared with the reference mic 0 and carry no cue columns.
inline MetricRow score(const std::string& id, const MultichannelWaveform& enh,
                       const MultichannelWaveform& target, const MultichannelWaveform& mix) {
  require(target.length() == enh.length() && mix.length() == enh.length(),
          "length mismatch: enhanced ", enh.length(), ", target ", target.length(), ", mixture ",
          mix.length());
  require(target.channels() == mix.channels(), "target has ", target.channels(),
          " channels, mixture ", mix.channels());
  require(enh.sample_rate() == target.sample_rate(), "sample rate mismatch: ", enh.sample_rate(),
          " vs ", target.sample_rate());
  require(enh.channels() == 1 || enh.channels() == target.channels(), "enhanced has ",
          enh.channels(), " channels, target ", target.channels());
  MetricRow r;
  r.id = id;
  r.channels = enh.channels();
  r.si_snr_db = mean_si_snr(enh, target, r.channels);
  r.noisy_si_snr_db = mean_si_snr(mix, target, r.channels);
  if (r.channels == target.channels() && r.channels == 8) r.cues = cue_deltas(enh, target);
  return r;
}

inline std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string s;
  const auto& cols = metric_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) s += (i ? "," : "") + cols[i];
  s += "\n";
  std::array<double, 6> sum{};
  std::size_t with_cues = 0;
  for (const auto& r : rows) {
    const double delta = r.si_snr_db - r.noisy_si_snr_db;
    s += r.id + "," + std::to_string(r.channels) + "," + detail::num(r.si_snr_db) + "," +
         detail::num(r.noisy_si_snr_db) + "," + detail::num(delta);
    sum[0] += r.si_snr_db;
    sum[1] += r.noisy_si_snr_db;
    sum[2] += delta;
    if (r.cues) {
      s += "," + detail::num(r.cues->delta_itd_us) + "," + detail::num(r.cues->delta_ipd_rad) +
           "," + detail::num(r.cues->delta_ild_db);
      sum[3] += r.cues->delta_itd_us;
      sum[4] += r.cues->delta_ipd_rad;
      sum[5] += r.cues->delta_ild_db;
      ++with_cues;
    } else {
      s += ",,,";
    }
    s += "\n";
  }
  const double n = static_cast<double>(std::max<std::size_t>(rows.size(), 1));
  s += "mean,," + detail::num(sum[0] / n) + "," + detail::num(sum[1] / n) + "," +
       detail::num(sum[2] / n);
  if (with_cues) {
    const double k = static_cast<double>(with_cues);
    s += "," + detail::num(sum[3] / k) + "," + detail::num(sum[4] / k) + "," +
         detail::num(sum[5] / k);
  } else {
    s += ",,,";
  }
  return s + "\n";
}

inline int cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto& ec = cfg.evaluate;
  detail::require_dir(ec.enhanced, "enhanced");
  detail::require_dir(ec.reference, "reference");
  const fs::path enh_dir(ec.enhanced), ref_dir(ec.reference);
  const auto enh_ids = detail::ids_with_suffix(enh_dir, ".wav");
  const auto ref_ids = detail::ids_with_suffix(ref_dir, "_target.wav");
  std::vector<std::string> paired;
  std::vector<std::string> unpaired;
  std::set_intersection(enh_ids.begin(), enh_ids.end(), ref_ids.begin(), ref_ids.end(),
                        std::back_inserter(paired));
  for (const auto& id : enh_ids)
    if (!std::binary_search(ref_ids.begin(), ref_ids.end(), id))
      unpaired.push_back((enh_dir / (id + ".wav")).string());
  for (const auto& id : ref_ids)
    if (!std::binary_search(enh_ids.begin(), enh_ids.end(), id))
      unpaired.push_back((ref_dir / (id + "_target.wav")).string());
  for (const auto& u : unpaired) err << "unpaired: " << u << "\n";
  require(!paired.empty(), "evaluate: no enhanced/reference pairs between ", ec.enhanced, " and ",
          ec.reference);

  std::vector<MetricRow> rows(paired.size());
  const auto errors = parallel_for(paired.size(), cfg.workers, [&](std::size_t i) {
    const auto& id = paired[i];
    rows[i] = score(id, wav::read(enh_dir / (id + ".wav")), wav::read(ref_dir / (id + "_target.wav")),
                    wav::read(ref_dir / (id + "_mix.wav")));
  });
  detail::report(err, errors, paired);
  std::vector<MetricRow> ok;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (!errors[i]) ok.push_back(rows[i]);
  const auto csv = metrics_csv(ok);
  if (ec.out.empty()) {
    out << csv;
  } else {
    wav::write_atomic(ec.out, csv);
    out << "scored " << ok.size() << " of " << paired.size() << " pairs -> " << ec.out << "\n";
  }
  if (!unpaired.empty()) return kExitUsage;
  return detail::failures(errors) ? kExitCheck : kExitOk;
}

// ---- music ----------------------------------------------------------------

inline std::string music_csv(const SpatialSpectrum& sp) {
  std::string s = "band_hz";
  for (std::size_t a = 0; a < sp.angles; ++a) s += ",deg_" + std::to_string(a);
  s += "\n";
  for (std::size_t b = 0; b < sp.bands; ++b) {
    s += detail::num(sp.band_freqs[b], "%.4f");
    for (std::size_t a = 0; a < sp.angles; ++a) s += "," + detail::num(sp.at(b, a), "%.9g");
    s += "\n";
  }
  s += "mean";
  for (double v : sp.wideband()) s += "," + detail::num(v, "%.9g");
  return s + "\n";
}

// 8-bit binary PGM, one column per angle and one row per band (highest band
// on top); each band is scaled by its own peak.
inline std::string music_pgm(const SpatialSpectrum& sp) {
  std::string s = "P5\n" + std::to_string(sp.angles) + " " + std::to_string(sp.bands) + "\n255\n";
  for (std::size_t r = 0; r < sp.bands; ++r) {
    const std::size_t b = sp.bands - 1 - r;
    double peak = 0.0;
    for (std::size_t a = 0; a < sp.angles; ++a) peak = std::max(peak, sp.at(b, a));
    for (std::size_t a = 0; a < sp.angles; ++a) {
      const double v = peak > 0.0 ? sp.at(b, a) / peak : 0.0;
      s += static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0))));
    }
  }
  return s;
}

struct PgmImage {
  std::size_t width = 0, height = 0;
  std::vector<unsigned char> pixels;
};

inline PgmImage parse_pgm(const std::string& bytes) {
  std::istringstream is(bytes);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  require(is && magic == "P5" && maxval == 255, "not an 8-bit binary PGM");
  is.get();
  PgmImage img{w, h, std::vector<unsigned char>(w * h)};
  is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(w * h));
  require(static_cast<std::size_t>(is.gcount()) == w * h, "PGM pixel data truncated");
  return img;
}

// Column with the largest pixel sum (first on ties).
inline std::size_t pgm_peak_column(const PgmImage& img) {
  std::vector<std::size_t> sums(img.width, 0);
  for (std::size_t r = 0; r < img.height; ++r)
    for (std::size_t c = 0; c < img.width; ++c) sums[c] += img.pixels[r * img.width + c];
  return static_cast<std::size_t>(std::max_element(sums.begin(), sums.end()) - sums.begin());
}

inline int cmd_music(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const auto& mc = cfg.music;
  require(!mc.input.empty(), "music: missing input WAV");
  require(fs::is_regular_file(mc.input), "music input not found: ", mc.input);
  require(!mc.out.empty(), "music: missing output stem");
  const auto wave = wav::read(mc.input);
  ArrayGeometry geom;
  geom.num_mics = wave.channels();
  geom.spacing = cfg.scene.array_spacing;
  const auto sp = music_spectrum(wave, mc.sources, geom);
  const fs::path stem(mc.out);
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  auto with_ext = [&](const char* ext) {
    auto p = stem;
    p += ext;
    return p;
  };
  wav::write_atomic(with_ext(".csv"), music_csv(sp));
  nlohmann::json side{{"input", mc.input},          {"bands", sp.bands},
                      {"angles", sp.angles},        {"sources", mc.sources},
                      {"peak_deg", sp.peak_angle()}, {"flagged_bands", sp.flagged_bands}};
  if (mc.pgm) {
    const auto pgm = music_pgm(sp);
    wav::write_atomic(with_ext(".pgm"), pgm);
    side["heatmap_peak_col"] = pgm_peak_column(parse_pgm(pgm));
  }
  detail::write_json(with_ext(".json"), side);
  out << "spectrum " << sp.bands << "x" << sp.angles << ", peak " << sp.peak_angle() << " deg\n";
  return kExitOk;
}

// ---- gradcheck / describe -------------------------------------------------

inline int cmd_gradcheck(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  bool ok = true;
  for (const auto& block : nn::gradcheck_blocks()) {
    const auto r = nn::grad_check(block, nn::default_gradcheck_shape(block), cfg.seed,
                                  cfg.model.mask_bound);
    ok = ok && r.passed();
    out << (r.passed() ? "PASS " : "FAIL ") << block << " max_rel_error="
        << detail::num(r.max_rel_error, "%.3e") << " tol=" << detail::num(r.tolerance, "%.0e")
        << " coords=" << r.coords << (r.finite ? "" : " non-finite") << "\n";
  }
  return ok ? kExitOk : kExitCheck;
}

inline int cmd_describe(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  nn::ModelConfig mc = cfg.model;
  mc.seed = cfg.seed;
  const nn::Model<float> model(mc);
  const auto rows = param_breakdown(model.params());
  std::size_t total = 0;
  out << "module,params\n";
  for (const auto& [name, n] : rows) {
    out << name << "," << n << "\n";
    total += n;
  }
  out << "total," << total << "\n";
  return kExitOk;
}

}  // namespace wtlab::app
