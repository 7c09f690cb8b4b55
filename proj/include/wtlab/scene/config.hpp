#pragma once

#include <set>
#include <string>

#include <toml.hpp>

#include "wtlab/common.hpp"

namespace wtlab {

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
};

// Ranges and constants for dataset generation. Defaults reproduce the
// reference recipe: 8-mic ULA at 4 cm, 5-10 m rooms, RT60 0.3-0.7 s.
struct SceneConfig {
  Range room_length{5.0, 10.0};
  Range room_width{5.0, 10.0};
  Range room_height{3.0, 4.0};
  std::size_t array_mics = 8;
  double array_spacing = 0.04;
  double array_margin = 1.0;
  Range rotation_x{0.0, 2.0 * kPi};
  Range rotation_y{0.0, 2.0 * kPi};
  Range rotation_z{0.0, 2.0 * kPi};
  Range source_distance{0.75, 2.0};
  double wall_margin = 0.5;
  std::size_t noise_sources = 1;
  Range rt60{0.3, 0.7};
  double speed_of_sound = kSpeedOfSound;
  double early_ms = 50.0;
  bool anechoic = false;
  Range snr_train{-5.0, 20.0};
  Range snr_test{-5.0, 5.0};
  Range peak{0.2, 0.9};
  double chunk_seconds = 4.0;
  std::size_t max_attempts = 10000;

  std::size_t chunk_samples() const {
    return static_cast<std::size_t>(std::llround(chunk_seconds * kSampleRate));
  }

  void validate() const {
    auto check_range = [](const Range& r, const char* name, bool positive) {
      require(std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi, "scene config: ",
              name, " range [", r.lo, ", ", r.hi, "] is degenerate");
      if (positive) require(r.lo > 0.0, "scene config: ", name, " must be positive");
    };
    check_range(room_length, "room_length", true);
    check_range(room_width, "room_width", true);
    check_range(room_height, "room_height", true);
    check_range(rotation_x, "rotation_x", false);
    check_range(rotation_y, "rotation_y", false);
    check_range(rotation_z, "rotation_z", false);
    check_range(source_distance, "source_distance", true);
    check_range(rt60, "rt60", true);
    check_range(snr_train, "snr_train", false);
    check_range(snr_test, "snr_test", false);
    check_range(peak, "peak", true);
    require(array_mics >= 2, "scene config: array needs at least 2 mics");
    require(array_spacing > 0.0, "scene config: array spacing must be positive");
    require(array_margin >= 0.0 && wall_margin >= 0.0, "scene config: margins must be >= 0");
    require(speed_of_sound > 0.0, "scene config: speed of sound must be positive");
    require(early_ms > 0.0, "scene config: early_ms must be positive");
    require(chunk_seconds > 0.0, "scene config: chunk_seconds must be positive");
    require(peak.hi <= 1.0, "scene config: peak must stay within [0, 1]");
    const double half_array = 0.5 * array_spacing * static_cast<double>(array_mics - 1);
    const Range* dims[] = {&room_length, &room_width, &room_height};
    const char* names[] = {"length", "width", "height"};
    for (int i = 0; i < 3; ++i) {
      require(dims[i]->hi - 2.0 * array_margin > 0.0, "scene config infeasible: room ", names[i],
              " <= ", dims[i]->hi, " m leaves no room for the ", array_margin,
              " m array margin");
      require(dims[i]->hi - 2.0 * wall_margin > 0.0, "scene config infeasible: room ", names[i],
              " cannot honour the ", wall_margin, " m source wall margin");
    }
    require(room_height.hi - 2.0 * array_margin > 0.0 || half_array == 0.0,
            "scene config infeasible: array does not fit");
  }

  static Range range_from(const toml::node& node, const std::string& key) {
    const auto* arr = node.as_array();
    require(arr && arr->size() == 2, "scene config: ", key, " must be a [lo, hi] array");
    auto get = [&](std::size_t i) {
      const auto v = (*arr)[i].value<double>();
      require(v.has_value(), "scene config: ", key, " entries must be numbers");
      return *v;
    };
    return {get(0), get(1)};
  }

  // Overrides defaults from a flat TOML table; unknown keys are rejected.
  void apply(const toml::table& t) {
    static const std::set<std::string> known = {
        "room_length", "room_width", "room_height", "array_mics", "array_spacing",
        "array_margin", "rotation_x", "rotation_y", "rotation_z", "source_distance",
        "wall_margin", "noise_sources", "rt60", "speed_of_sound", "early_ms", "anechoic",
        "snr_train", "snr_test", "peak", "chunk_seconds", "max_attempts"};
    for (const auto& [k, v] : t) {
      const std::string key(k.str());
      require(known.count(key) != 0, "scene config: unknown key '", key, "'");
      auto num = [&]() {
        const auto x = v.value<double>();
        require(x.has_value(), "scene config: ", key, " must be a number");
        return *x;
      };
      auto count = [&]() {
        const auto x = v.value<std::int64_t>();
        require(x.has_value() && *x >= 0, "scene config: ", key, " must be a non-negative integer");
        return static_cast<std::size_t>(*x);
      };
      if (key == "room_length") room_length = range_from(v, key);
      else if (key == "room_width") room_width = range_from(v, key);
      else if (key == "room_height") room_height = range_from(v, key);
      else if (key == "array_mics") array_mics = count();
      else if (key == "array_spacing") array_spacing = num();
      else if (key == "array_margin") array_margin = num();
      else if (key == "rotation_x") rotation_x = range_from(v, key);
      else if (key == "rotation_y") rotation_y = range_from(v, key);
      else if (key == "rotation_z") rotation_z = range_from(v, key);
      else if (key == "source_distance") source_distance = range_from(v, key);
      else if (key == "wall_margin") wall_margin = num();
      else if (key == "noise_sources") noise_sources = count();
      else if (key == "rt60") rt60 = range_from(v, key);
      else if (key == "speed_of_sound") speed_of_sound = num();
      else if (key == "early_ms") early_ms = num();
      else if (key == "anechoic") {
        const auto b = v.value<bool>();
        require(b.has_value(), "scene config: anechoic must be a boolean");
        anechoic = *b;
      } else if (key == "snr_train") snr_train = range_from(v, key);
      else if (key == "snr_test") snr_test = range_from(v, key);
      else if (key == "peak") peak = range_from(v, key);
      else if (key == "chunk_seconds") chunk_seconds = num();
      else if (key == "max_attempts") max_attempts = count();
    }
  }

  toml::table to_toml() const {
    auto r = [](const Range& x) { return toml::array{x.lo, x.hi}; };
    return toml::table{
        {"room_length", r(room_length)},
        {"room_width", r(room_width)},
        {"room_height", r(room_height)},
        {"array_mics", static_cast<std::int64_t>(array_mics)},
        {"array_spacing", array_spacing},
        {"array_margin", array_margin},
        {"rotation_x", r(rotation_x)},
        {"rotation_y", r(rotation_y)},
        {"rotation_z", r(rotation_z)},
        {"source_distance", r(source_distance)},
        {"wall_margin", wall_margin},
        {"noise_sources", static_cast<std::int64_t>(noise_sources)},
        {"rt60", r(rt60)},
        {"speed_of_sound", speed_of_sound},
        {"early_ms", early_ms},
        {"anechoic", anechoic},
        {"snr_train", r(snr_train)},
        {"snr_test", r(snr_test)},
        {"peak", r(peak)},
        {"chunk_seconds", chunk_seconds},
        {"max_attempts", static_cast<std::int64_t>(max_attempts)},
    };
  }
};

}  // namespace wtlab
