#pragma once

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wtlab/app/commands.hpp"
#include "wtlab/app/config.hpp"

namespace wtlab::app {

namespace detail {

template <typename V>
void set_if(V& dst, const std::optional<V>& src) {
  if (src) dst = *src;
}

}  // namespace detail

// Parses argv, layers defaults < TOML < flags, and dispatches. Returns the
// process exit code; never throws.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"wtlab: multichannel speech enhancement toolkit", "wtlab"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  bool print_config = false;
  app.add_option("-c,--config", config_path,
                 std::string("TOML config (default: $") + kConfigEnv + ")");
  app.add_option("--seed", seed, "Global seed");
  app.add_option("-j,--workers", workers, "Worker threads (0 = all cores)");
  app.add_flag("--print-config", print_config, "Print the effective config as TOML and exit");

  std::optional<std::string> sim_corpus, sim_out, sim_noise;
  auto* sim = app.add_subcommand("simulate", "Render a multichannel dataset from a WAV corpus");
  sim->add_option("--corpus", sim_corpus, "Directory of mono 16 kHz WAV utterances");
  sim->add_option("-o,--out", sim_out, "Output dataset directory");
  sim->add_option("--noise-dir", sim_noise, "Directory of noise WAVs (default: synthetic)");

  std::optional<std::string> enh_dataset, enh_out, enh_method, enh_steering, enh_ckpt;
  bool enh_random = false, enh_dump = false;
  auto* enh = app.add_subcommand("enhance", "Enhance every <id>_mix.wav in a dataset split");
  enh->add_option("--dataset", enh_dataset, "Split directory from simulate (e.g. data/test)");
  enh->add_option("-o,--out", enh_out, "Output directory");
  enh->add_option("--method", enh_method, "identity | ti-mvdr | mb-mvdr | wtformer-random");
  enh->add_option("--steering", enh_steering, "ti-mvdr steering: oracle | geometric");
  enh->add_option("--checkpoint", enh_ckpt, "Parameter checkpoint stem for wtformer");
  enh->add_flag("--random-init", enh_random, "Run wtformer with seeded random weights");
  enh->add_flag("--dump-weights", enh_dump, "Write MVDR weights as <id>_weights.wtsp");

  std::optional<std::string> ev_enh, ev_ref, ev_out;
  auto* ev = app.add_subcommand("evaluate", "Score enhanced files against targets (CSV)");
  ev->add_option("--enhanced", ev_enh, "Directory of <id>.wav outputs");
  ev->add_option("--reference", ev_ref, "Split directory with <id>_target.wav and <id>_mix.wav");
  ev->add_option("-o,--out", ev_out, "CSV path (default: stdout)");

  std::optional<std::string> mu_in, mu_out;
  std::optional<std::size_t> mu_sources;
  bool mu_no_pgm = false;
  auto* mu = app.add_subcommand("music", "MUSIC spatial spectrum of a multichannel WAV");
  mu->add_option("input", mu_in, "Input WAV");
  mu->add_option("-o,--out", mu_out, "Output stem: writes <stem>.csv, .pgm, .json");
  mu->add_option("--sources", mu_sources, "Number of sources");
  mu->add_flag("--no-pgm", mu_no_pgm, "Skip the heatmap");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  auto* de = app.add_subcommand("describe", "Per-module parameter table of the model");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  RunConfig cfg;
  try {
    if (!config_path) {
      if (const char* env = std::getenv(kConfigEnv); env && *env) config_path = env;
    }
    if (config_path) apply_toml_file(cfg, *config_path);
    detail::set_if(cfg.seed, seed);
    detail::set_if(cfg.workers, workers);
    detail::set_if(cfg.simulate.corpus, sim_corpus);
    detail::set_if(cfg.simulate.out, sim_out);
    detail::set_if(cfg.simulate.noise_dir, sim_noise);
    detail::set_if(cfg.enhance.dataset, enh_dataset);
    detail::set_if(cfg.enhance.out, enh_out);
    if (enh_method) cfg.enhance.method = method_from(*enh_method);
    detail::set_if(cfg.enhance.steering, enh_steering);
    detail::set_if(cfg.enhance.checkpoint, enh_ckpt);
    if (enh_random) cfg.enhance.random_init = true;
    if (enh_dump) cfg.enhance.dump_weights = true;
    detail::set_if(cfg.evaluate.enhanced, ev_enh);
    detail::set_if(cfg.evaluate.reference, ev_ref);
    detail::set_if(cfg.evaluate.out, ev_out);
    detail::set_if(cfg.music.input, mu_in);
    detail::set_if(cfg.music.out, mu_out);
    detail::set_if(cfg.music.sources, mu_sources);
    if (mu_no_pgm) cfg.music.pgm = false;
    cfg.validate();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  if (print_config) {
    out << config_text(cfg);
    return kExitOk;
  }

  try {
    if (*sim) return cmd_simulate(cfg, out, err);
    if (*enh) return cmd_enhance(cfg, out, err);
    if (*ev) return cmd_evaluate(cfg, out, err);
    if (*mu) return cmd_music(cfg, out, err);
    if (*gc) return cmd_gradcheck(cfg, out, err);
    if (*de) return cmd_describe(cfg, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args);
}

}  // namespace wtlab::app
