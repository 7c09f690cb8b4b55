#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

#include "wtlab/rng.hpp"
#include "wtlab/scene/config.hpp"
#include "wtlab/scene/geometry.hpp"

namespace wtlab {

enum class NoiseKind { white, pink, babble };

inline const char* to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::white: return "white";
    case NoiseKind::pink: return "pink";
    case NoiseKind::babble: return "babble";
  }
  return "?";
}

inline NoiseKind noise_kind_from(const std::string& s) {
  if (s == "white") return NoiseKind::white;
  if (s == "pink") return NoiseKind::pink;
  if (s == "babble") return NoiseKind::babble;
  fail("unknown noise kind '", s, "'");
}

// Complete provenance of one simulated mixture.
struct RoomScene {
  Vec3 room_dims{};
  ArrayGeometry array;
  Vec3 speech_pos{};
  std::vector<Vec3> noise_pos;
  double rt60 = 0.5;
  double snr_db = 0.0;
  double peak = 0.5;
  double early_ms = 50.0;
  double speed_of_sound = kSpeedOfSound;
  bool anechoic = false;
  NoiseKind noise_kind = NoiseKind::white;
  std::uint64_t seed = 0;

  double speech_doa_deg() const { return array.doa_deg(speech_pos); }

  std::vector<Vec3> sources() const {
    std::vector<Vec3> s{speech_pos};
    s.insert(s.end(), noise_pos.begin(), noise_pos.end());
    return s;
  }
};

namespace detail {

inline double wall_distance(const Vec3& p, const Vec3& room) {
  double d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) d = std::min({d, p[i], room[i] - p[i]});
  return d;
}

inline Vec3 random_direction(Rng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * kPi);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

inline Vec3 place_source(Rng& rng, const Vec3& room, const Vec3& center, const SceneConfig& cfg) {
  for (std::size_t attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    const double r = rng.uniform(cfg.source_distance.lo, cfg.source_distance.hi);
    const Vec3 p = center + r * random_direction(rng);
    if (wall_distance(p, room) >= cfg.wall_margin) return p;
  }
  fail("scene sampling: could not place a source ", cfg.source_distance.lo, "-",
       cfg.source_distance.hi, " m from the array with a ", cfg.wall_margin,
       " m wall margin after ", cfg.max_attempts, " attempts");
}

}  // namespace detail

// Draws a room, array pose, sources, RT60, SNR and peak level. Deterministic in
// the seed; the SNR is drawn from the training range.
inline RoomScene sample_scene(std::uint64_t seed, const SceneConfig& cfg = {}) {
  cfg.validate();
  Rng rng(seed);
  RoomScene s;
  s.seed = seed;
  s.early_ms = cfg.early_ms;
  s.speed_of_sound = cfg.speed_of_sound;
  s.anechoic = cfg.anechoic;
  s.array.num_mics = cfg.array_mics;
  s.array.spacing = cfg.array_spacing;

  bool placed = false;
  for (std::size_t attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
    s.room_dims = {rng.uniform(cfg.room_length.lo, cfg.room_length.hi),
                   rng.uniform(cfg.room_width.lo, cfg.room_width.hi),
                   rng.uniform(cfg.room_height.lo, cfg.room_height.hi)};
    bool room_ok = true;
    for (int i = 0; i < 3; ++i) room_ok = room_ok && s.room_dims[i] > 2.0 * cfg.array_margin;
    if (!room_ok) continue;
    for (std::size_t pose = 0; pose < 100 && !placed; ++pose) {
      for (int i = 0; i < 3; ++i) {
        s.array.center[i] = rng.uniform(cfg.array_margin, s.room_dims[i] - cfg.array_margin);
      }
      s.array.rotation = {rng.uniform(cfg.rotation_x.lo, cfg.rotation_x.hi),
                          rng.uniform(cfg.rotation_y.lo, cfg.rotation_y.hi),
                          rng.uniform(cfg.rotation_z.lo, cfg.rotation_z.hi)};
      placed = true;
      for (const auto& p : s.array.positions()) {
        placed = placed && detail::wall_distance(p, s.room_dims) >= cfg.array_margin;
      }
    }
  }
  require(placed, "scene sampling: no array pose keeps every mic ", cfg.array_margin,
          " m from the walls");

  s.speech_pos = detail::place_source(rng, s.room_dims, s.array.center, cfg);
  for (std::size_t i = 0; i < cfg.noise_sources; ++i) {
    s.noise_pos.push_back(detail::place_source(rng, s.room_dims, s.array.center, cfg));
  }
  s.rt60 = rng.uniform(cfg.rt60.lo, cfg.rt60.hi);
  s.snr_db = rng.uniform(cfg.snr_train.lo, cfg.snr_train.hi);
  s.peak = rng.uniform(cfg.peak.lo, cfg.peak.hi);
  s.noise_kind = static_cast<NoiseKind>(rng.below(3));
  return s;
}

// Returns an empty string when every placement invariant holds, otherwise a
// description of the first violation.
inline std::string check_scene(const RoomScene& s, const SceneConfig& cfg = {}) {
  const double tol = 1e-9;
  if (!cfg.room_length.contains(s.room_dims[0], tol) || !cfg.room_width.contains(s.room_dims[1], tol) ||
      !cfg.room_height.contains(s.room_dims[2], tol))
    return "room dimensions out of range";
  for (const auto& p : s.array.positions()) {
    if (detail::wall_distance(p, s.room_dims) < cfg.array_margin - tol) return "mic too close to wall";
  }
  const auto pos = s.array.positions();
  for (std::size_t m = 1; m < pos.size(); ++m) {
    if (std::abs(norm3(pos[m] - pos[m - 1]) - cfg.array_spacing) > 1e-9) return "mics not uniformly spaced";
    if (m >= 2) {
      const Vec3 a = pos[m] - pos[m - 1], b = pos[1] - pos[0];
      if (std::abs(dot3(a, b) / (norm3(a) * norm3(b)) - 1.0) > 1e-9) return "mics not collinear";
    }
  }
  for (const auto& src : s.sources()) {
    const double r = norm3(src - s.array.center);
    if (!cfg.source_distance.contains(r, tol)) return "source distance out of range";
    if (detail::wall_distance(src, s.room_dims) < cfg.wall_margin - tol) return "source too close to wall";
  }
  if (!cfg.rt60.contains(s.rt60, tol)) return "rt60 out of range";
  if (!cfg.peak.contains(s.peak, tol)) return "peak out of range";
  return {};
}

inline nlohmann::json to_json(const RoomScene& s) {
  nlohmann::json noise = nlohmann::json::array();
  for (const auto& p : s.noise_pos) noise.push_back(p);
  nlohmann::json mics = nlohmann::json::array();
  for (const auto& p : s.array.positions()) mics.push_back(p);
  return {
      {"seed", s.seed},
      {"room_dims", s.room_dims},
      {"array", {{"num_mics", s.array.num_mics}, {"spacing", s.array.spacing},
                 {"center", s.array.center}, {"rotation", s.array.rotation},
                 {"mic_positions", mics}}},
      {"speech_pos", s.speech_pos},
      {"noise_pos", noise},
      {"rt60", s.rt60},
      {"snr_db", s.snr_db},
      {"peak", s.peak},
      {"early_ms", s.early_ms},
      {"speed_of_sound", s.speed_of_sound},
      {"anechoic", s.anechoic},
      {"noise_kind", to_string(s.noise_kind)},
      {"speech_doa_deg", s.speech_doa_deg()},
  };
}

inline RoomScene scene_from_json(const nlohmann::json& j) {
  RoomScene s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.room_dims = j.at("room_dims").get<Vec3>();
  const auto& a = j.at("array");
  s.array.num_mics = a.at("num_mics").get<std::size_t>();
  s.array.spacing = a.at("spacing").get<double>();
  s.array.center = a.at("center").get<Vec3>();
  s.array.rotation = a.at("rotation").get<Vec3>();
  s.speech_pos = j.at("speech_pos").get<Vec3>();
  for (const auto& p : j.at("noise_pos")) s.noise_pos.push_back(p.get<Vec3>());
  s.rt60 = j.at("rt60").get<double>();
  s.snr_db = j.at("snr_db").get<double>();
  s.peak = j.at("peak").get<double>();
  s.early_ms = j.at("early_ms").get<double>();
  s.speed_of_sound = j.at("speed_of_sound").get<double>();
  s.anechoic = j.at("anechoic").get<bool>();
  s.noise_kind = noise_kind_from(j.at("noise_kind").get<std::string>());
  return s;
}

}  // namespace wtlab
