#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wtlab/rng.hpp"
#include "wtlab/scene/config.hpp"
#include "wtlab/signal/wav.hpp"

namespace wtlab {

struct SplitRatios {
  double train = 0.90;
  double valid = 0.05;
  double test = 0.05;
};

struct ManifestRow {
  std::string id;
  std::string utterance;
  std::uint64_t seed = 0;
  std::string split;
  double snr_db = 0.0;

  nlohmann::json to_json() const {
    return {{"id", id}, {"utterance", utterance}, {"seed", seed}, {"split", split},
            {"snr_db", snr_db}};
  }
  static ManifestRow from_json(const nlohmann::json& j) {
    return {j.at("id").get<std::string>(), j.at("utterance").get<std::string>(),
            j.at("seed").get<std::uint64_t>(), j.at("split").get<std::string>(),
            j.at("snr_db").get<double>()};
  }
};

inline std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

// Sorted list of WAV utterances below `dir` (recursive). FLAC files are
// counted in `skipped_flac` because no decoder is linked.
inline std::vector<std::filesystem::path> list_corpus(const std::filesystem::path& dir,
                                                      std::size_t* skipped_flac = nullptr) {
  require(std::filesystem::is_directory(dir), "corpus directory not found: ", dir.string());
  std::vector<std::filesystem::path> files;
  std::size_t flac = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = lower_ext(e.path());
    if (ext == ".wav") files.push_back(e.path());
    if (ext == ".flac") ++flac;
  }
  std::sort(files.begin(), files.end());
  if (skipped_flac) *skipped_flac = flac;
  return files;
}

// Deterministic shuffled split. Validation and test sizes are the rounded
// ratio shares; training takes the remainder. Test rows draw SNR from the
// test range, the others from the training range.
inline std::vector<ManifestRow> build_manifest(const std::filesystem::path& corpus_dir,
                                               const SceneConfig& cfg, const SplitRatios& ratios,
                                               std::uint64_t seed) {
  require(ratios.train >= 0 && ratios.valid >= 0 && ratios.test >= 0 &&
              std::abs(ratios.train + ratios.valid + ratios.test - 1.0) < 1e-9,
          "split ratios must be non-negative and sum to 1");
  auto files = list_corpus(corpus_dir);
  require(!files.empty(), "corpus directory ", corpus_dir.string(), " contains no WAV utterances");
  Rng rng(mix_seed(seed, 0x3a41f));
  rng.shuffle(files);
  const std::size_t n = files.size();
  const auto n_valid = static_cast<std::size_t>(std::llround(ratios.valid * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::llround(ratios.test * static_cast<double>(n)));
  require(n_valid + n_test <= n, "split ratios leave no room for the corpus size ", n);
  const std::size_t n_train = n - n_valid - n_test;

  std::vector<ManifestRow> rows;
  rows.reserve(n);
  std::array<std::size_t, 3> counters{};
  for (std::size_t i = 0; i < n; ++i) {
    ManifestRow r;
    const int split = i < n_train ? 0 : (i < n_train + n_valid ? 1 : 2);
    static const char* names[] = {"train", "valid", "test"};
    r.split = names[split];
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%05zu", names[split], counters[split]++);
    r.id = buf;
    r.utterance = files[i].lexically_normal().string();
    r.seed = mix_seed(seed, i + 1);
    const Range& snr = split == 2 ? cfg.snr_test : cfg.snr_train;
    r.snr_db = rng.uniform(snr.lo, snr.hi);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::string manifest_text(const std::vector<ManifestRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.to_json().dump();
    out += '\n';
  }
  return out;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  wav::write_atomic(path, manifest_text(rows));
}

inline std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), "cannot open manifest ", path.string());
  std::vector<ManifestRow> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    rows.push_back(ManifestRow::from_json(nlohmann::json::parse(line)));
  }
  return rows;
}

}  // namespace wtlab
