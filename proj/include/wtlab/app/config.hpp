#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <toml.hpp>

#include "wtlab/common.hpp"
#include "wtlab/net/model.hpp"
#include "wtlab/scene/config.hpp"
#include "wtlab/scene/manifest.hpp"

namespace wtlab::app {

inline constexpr const char* kConfigEnv = "WTLAB_CONFIG";

enum class Method { identity, ti_mvdr, mb_mvdr, wtformer_random };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::identity: return "identity";
    case Method::ti_mvdr: return "ti-mvdr";
    case Method::mb_mvdr: return "mb-mvdr";
    case Method::wtformer_random: return "wtformer-random";
  }
  return "?";
}

inline Method method_from(const std::string& s) {
  for (Method m : {Method::identity, Method::ti_mvdr, Method::mb_mvdr, Method::wtformer_random}) {
    if (s == to_string(m)) return m;
  }
  fail("unknown enhancement method '", s, "' (identity, ti-mvdr, mb-mvdr, wtformer-random)");
}

struct SimulateConfig {
  std::string corpus;
  std::string out;
  std::string noise_dir;  // empty: synthetic noise of the scene's kind
};

struct EnhanceConfig {
  std::string dataset;  // directory holding <id>_mix.wav / <id>_target.wav / <id>_scene.json
  std::string out;
  Method method = Method::mb_mvdr;
  std::string steering = "oracle";  // ti-mvdr: oracle | geometric
  std::string checkpoint;           // wtformer: parameter stem
  bool random_init = false;
  bool dump_weights = false;
};

struct EvaluateConfig {
  std::string enhanced;
  std::string reference;
  std::string out;  // CSV path
};

struct MusicConfig {
  std::string input;
  std::string out;  // output stem: <out>.csv, <out>.pgm, <out>.json
  std::size_t sources = 1;
  bool pgm = true;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t workers = 0;  // 0: hardware concurrency
  SceneConfig scene{};
  SplitRatios split{};
  SimulateConfig simulate{};
  EnhanceConfig enhance{};
  EvaluateConfig evaluate{};
  MusicConfig music{};
  nn::ModelConfig model{};

  void validate() const {
    scene.validate();
    require(split.train >= 0 && split.valid >= 0 && split.test >= 0 &&
                std::abs(split.train + split.valid + split.test - 1.0) < 1e-9,
            "config: split ratios must be non-negative and sum to 1");
    require(enhance.steering == "oracle" || enhance.steering == "geometric",
            "config: enhance.steering must be 'oracle' or 'geometric', got '", enhance.steering, "'");
    require(music.sources >= 1, "config: music.sources must be >= 1");
    model.validate();
  }
};

namespace detail {

inline void check_keys(const toml::table& t, const std::string& section,
                       const std::set<std::string>& known) {
  for (const auto& [k, v] : t) {
    const std::string key(k.str());
    require(known.count(key) != 0, "config: unknown key '", key, "' in [", section, "]");
  }
}

template <typename V>
V get(const toml::node& n, const std::string& key) {
  if constexpr (std::is_same_v<V, bool>) {
    const auto x = n.value<bool>();
    require(x.has_value(), "config: ", key, " must be a boolean");
    return *x;
  } else if constexpr (std::is_same_v<V, std::string>) {
    const auto x = n.value<std::string>();
    require(x.has_value(), "config: ", key, " must be a string");
    return *x;
  } else if constexpr (std::is_floating_point_v<V>) {
    const auto x = n.value<double>();
    require(x.has_value(), "config: ", key, " must be a number");
    return *x;
  } else {
    const auto x = n.value<std::int64_t>();
    require(x.has_value() && *x >= 0, "config: ", key, " must be a non-negative integer");
    return static_cast<V>(*x);
  }
}

template <std::size_t N>
std::array<std::size_t, N> get_sizes(const toml::node& n, const std::string& key) {
  const auto* arr = n.as_array();
  require(arr && arr->size() == N, "config: ", key, " must be an array of ", N, " integers");
  std::array<std::size_t, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = get<std::size_t>((*arr)[i], key);
  return out;
}

template <std::size_t N>
toml::array sizes(const std::array<std::size_t, N>& a) {
  toml::array out;
  for (auto v : a) out.push_back(static_cast<std::int64_t>(v));
  return out;
}

inline const toml::table& section(const toml::node& n, const std::string& name) {
  const auto* t = n.as_table();
  require(t != nullptr, "config: [", name, "] must be a table");
  return *t;
}

inline void apply_model(nn::ModelConfig& m, const toml::table& t) {
  check_keys(t, "model", {"mics", "widths", "enc_wt_levels", "dec_wt_levels", "wt_kernel",
                          "decoder_out", "dropout", "lstm_hidden", "mask_bound", "mca_pooling",
                          "heads", "ffn_mult", "conv_kernel"});
  for (const auto& [k, v] : t) {
    const std::string key(k.str());
    if (key == "mics") m.mics = get<std::size_t>(v, key);
    else if (key == "widths") m.widths = get_sizes<3>(v, key);
    else if (key == "enc_wt_levels") m.enc_wt_levels = get_sizes<3>(v, key);
    else if (key == "dec_wt_levels") m.dec_wt_levels = get_sizes<3>(v, key);
    else if (key == "wt_kernel") m.wt_kernel = get<std::size_t>(v, key);
    else if (key == "decoder_out") m.decoder_out = get<std::size_t>(v, key);
    else if (key == "dropout") m.dropout = get<double>(v, key);
    else if (key == "lstm_hidden") m.lstm_hidden = get<std::size_t>(v, key);
    else if (key == "mask_bound") m.mask_bound = get<double>(v, key);
    else if (key == "heads") m.conformer.heads = get<std::size_t>(v, key);
    else if (key == "ffn_mult") m.conformer.ffn_mult = get<std::size_t>(v, key);
    else if (key == "conv_kernel") m.conformer.conv_kernel = get<std::size_t>(v, key);
    else if (key == "mca_pooling") {
      const auto s = get<std::string>(v, key);
      require(s == "avg_std" || s == "avg", "config: model.mca_pooling must be avg_std or avg");
      m.mca_pooling = s == "avg" ? nn::McaPooling::avg : nn::McaPooling::avg_std;
    }
  }
}

}  // namespace detail

// Overlays a parsed TOML document onto cfg. Unknown sections and keys are errors.
inline void apply_toml(RunConfig& cfg, const toml::table& doc) {
  using detail::get;
  detail::check_keys(doc, "top level", {"seed", "workers", "scene", "split", "simulate", "enhance",
                                        "evaluate", "music", "model"});
  for (const auto& [k, v] : doc) {
    const std::string key(k.str());
    if (key == "seed") cfg.seed = get<std::uint64_t>(v, key);
    else if (key == "workers") cfg.workers = get<std::size_t>(v, key);
    else if (key == "scene") cfg.scene.apply(detail::section(v, key));
    else if (key == "model") detail::apply_model(cfg.model, detail::section(v, key));
    else if (key == "split") {
      const auto& t = detail::section(v, key);
      detail::check_keys(t, key, {"train", "valid", "test"});
      if (auto* n = t.get("train")) cfg.split.train = get<double>(*n, "split.train");
      if (auto* n = t.get("valid")) cfg.split.valid = get<double>(*n, "split.valid");
      if (auto* n = t.get("test")) cfg.split.test = get<double>(*n, "split.test");
    } else if (key == "simulate") {
      const auto& t = detail::section(v, key);
      detail::check_keys(t, key, {"corpus", "out", "noise_dir"});
      auto& s = cfg.simulate;
      if (auto* n = t.get("corpus")) s.corpus = get<std::string>(*n, "simulate.corpus");
      if (auto* n = t.get("out")) s.out = get<std::string>(*n, "simulate.out");
      if (auto* n = t.get("noise_dir")) s.noise_dir = get<std::string>(*n, "simulate.noise_dir");
    } else if (key == "enhance") {
      const auto& t = detail::section(v, key);
      detail::check_keys(t, key, {"dataset", "out", "method", "steering", "checkpoint",
                                  "random_init", "dump_weights"});
      auto& e = cfg.enhance;
      if (auto* n = t.get("dataset")) e.dataset = get<std::string>(*n, "enhance.dataset");
      if (auto* n = t.get("out")) e.out = get<std::string>(*n, "enhance.out");
      if (auto* n = t.get("method")) e.method = method_from(get<std::string>(*n, "enhance.method"));
      if (auto* n = t.get("steering")) e.steering = get<std::string>(*n, "enhance.steering");
      if (auto* n = t.get("checkpoint")) e.checkpoint = get<std::string>(*n, "enhance.checkpoint");
      if (auto* n = t.get("random_init")) e.random_init = get<bool>(*n, "enhance.random_init");
      if (auto* n = t.get("dump_weights")) e.dump_weights = get<bool>(*n, "enhance.dump_weights");
    } else if (key == "evaluate") {
      const auto& t = detail::section(v, key);
      detail::check_keys(t, key, {"enhanced", "reference", "out"});
      auto& e = cfg.evaluate;
      if (auto* n = t.get("enhanced")) e.enhanced = get<std::string>(*n, "evaluate.enhanced");
      if (auto* n = t.get("reference")) e.reference = get<std::string>(*n, "evaluate.reference");
      if (auto* n = t.get("out")) e.out = get<std::string>(*n, "evaluate.out");
    } else if (key == "music") {
      const auto& t = detail::section(v, key);
      detail::check_keys(t, key, {"input", "out", "sources", "pgm"});
      auto& m = cfg.music;
      if (auto* n = t.get("input")) m.input = get<std::string>(*n, "music.input");
      if (auto* n = t.get("out")) m.out = get<std::string>(*n, "music.out");
      if (auto* n = t.get("sources")) m.sources = get<std::size_t>(*n, "music.sources");
      if (auto* n = t.get("pgm")) m.pgm = get<bool>(*n, "music.pgm");
    }
  }
}

inline void apply_toml_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  toml::table doc;
  try {
    doc = toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << e;
    fail("config ", origin, ": ", os.str());
  }
  apply_toml(cfg, doc);
}

inline void apply_toml_file(RunConfig& cfg, const std::filesystem::path& path) {
  require(std::filesystem::is_regular_file(path), "config file not found: ", path.string());
  apply_toml_text(cfg, wav::read_file(path), path.string());
}

inline toml::table to_toml(const RunConfig& c) {
  const auto& m = c.model;
  return toml::table{
      {"seed", static_cast<std::int64_t>(c.seed)},
      {"workers", static_cast<std::int64_t>(c.workers)},
      {"scene", c.scene.to_toml()},
      {"split", toml::table{{"train", c.split.train}, {"valid", c.split.valid}, {"test", c.split.test}}},
      {"simulate", toml::table{{"corpus", c.simulate.corpus}, {"out", c.simulate.out},
                               {"noise_dir", c.simulate.noise_dir}}},
      {"enhance", toml::table{{"dataset", c.enhance.dataset}, {"out", c.enhance.out},
                              {"method", to_string(c.enhance.method)},
                              {"steering", c.enhance.steering},
                              {"checkpoint", c.enhance.checkpoint},
                              {"random_init", c.enhance.random_init},
                              {"dump_weights", c.enhance.dump_weights}}},
      {"evaluate", toml::table{{"enhanced", c.evaluate.enhanced},
                               {"reference", c.evaluate.reference}, {"out", c.evaluate.out}}},
      {"music", toml::table{{"input", c.music.input}, {"out", c.music.out},
                            {"sources", static_cast<std::int64_t>(c.music.sources)},
                            {"pgm", c.music.pgm}}},
      {"model", toml::table{{"mics", static_cast<std::int64_t>(m.mics)},
                            {"widths", detail::sizes(m.widths)},
                            {"enc_wt_levels", detail::sizes(m.enc_wt_levels)},
                            {"dec_wt_levels", detail::sizes(m.dec_wt_levels)},
                            {"wt_kernel", static_cast<std::int64_t>(m.wt_kernel)},
                            {"decoder_out", static_cast<std::int64_t>(m.decoder_out)},
                            {"dropout", m.dropout},
                            {"lstm_hidden", static_cast<std::int64_t>(m.lstm_hidden)},
                            {"mask_bound", m.mask_bound},
                            {"mca_pooling", m.mca_pooling == nn::McaPooling::avg ? "avg" : "avg_std"},
                            {"heads", static_cast<std::int64_t>(m.conformer.heads)},
                            {"ffn_mult", static_cast<std::int64_t>(m.conformer.ffn_mult)},
                            {"conv_kernel", static_cast<std::int64_t>(m.conformer.conv_kernel)}}},
  };
}

inline std::string config_text(const RunConfig& c) {
  std::ostringstream os;
  os << to_toml(c) << "\n";
  return os.str();
}

}  // namespace wtlab::app
