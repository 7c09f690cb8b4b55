#pragma once

#include <array>
#include <optional>
#include <span>
#include <cmath>
#include <vector>

#include "wtlab/common.hpp"
#include "wtlab/scene/scene.hpp"

namespace wtlab {

// Impulse responses [mics x sources x length]. Source 0 is the speech source,
// followed by the noise sources in scene order.
struct RirSet {
  std::size_t mics = 0, sources = 0, length = 0;
  int sample_rate = kSampleRate;
  std::vector<double> h;
  std::vector<double> direct_delay;       // exact direct-path delay, samples
  std::vector<std::size_t> direct_index;  // integer part of the direct-path delay

  RirSet() = default;
  RirSet(std::size_t m, std::size_t s, std::size_t l)
      : mics(m), sources(s), length(l), h(m * s * l, 0.0), direct_delay(m * s, 0.0),
        direct_index(m * s, 0) {}

  std::span<double> response(std::size_t m, std::size_t s) {
    return {h.data() + (m * sources + s) * length, length};
  }
  std::span<const double> response(std::size_t m, std::size_t s) const {
    return {h.data() + (m * sources + s) * length, length};
  }
  std::vector<double> response_vec(std::size_t m, std::size_t s) const {
    const auto r = response(m, s);
    return {r.begin(), r.end()};
  }
  std::size_t direct(std::size_t m, std::size_t s) const { return direct_index[m * sources + s]; }
};

struct RirOptions {
  bool high_pass = true;
  double high_pass_hz = 80.0;
  // Sets every wall's absorption coefficient directly (1.0 = anechoic) instead
  // of deriving it from RT60 through Sabine's formula.
  std::optional<double> absorption;
};

inline constexpr int kSincHalfTaps = 40;  // 81-tap fractional delay

namespace detail {

// Hann-windowed sinc evaluated for fractional offsets on a fine grid; rows are
// linearly interpolated at lookup time.
class FractionalDelayBank {
 public:
  static constexpr int kPhases = 512;
  static constexpr int kTaps = 2 * kSincHalfTaps + 1;

  FractionalDelayBank() : table_((kPhases + 1) * kTaps) {
    for (int p = 0; p <= kPhases; ++p) {
      const double frac = static_cast<double>(p) / kPhases;
      for (int k = -kSincHalfTaps; k <= kSincHalfTaps; ++k) {
        const double t = k - frac;
        const double sinc = std::abs(t) < 1e-12 ? 1.0 : std::sin(kPi * t) / (kPi * t);
        const double win = 0.5 * (1.0 + std::cos(kPi * t / (kSincHalfTaps + 1)));
        table_[p * kTaps + (k + kSincHalfTaps)] = sinc * win;
      }
    }
  }

  static const FractionalDelayBank& instance() {
    static const FractionalDelayBank bank;
    return bank;
  }

  // Adds amp * filter(n - delay) into h for n within the filter support.
  void add(std::vector<double>& h, std::size_t offset, std::size_t length, double delay,
           double amp) const {
    const double base = std::floor(delay);
    const double frac = delay - base;
    const double pos = frac * kPhases;
    const int p = std::min(static_cast<int>(pos), kPhases - 1);
    const double w1 = pos - p, w0 = 1.0 - w1;
    const double* r0 = table_.data() + p * kTaps;
    const double* r1 = r0 + kTaps;
    const long start = static_cast<long>(base) - kSincHalfTaps;
    const int k0 = static_cast<int>(std::max(0L, -start));
    const int k1 = static_cast<int>(std::min<long>(kTaps, static_cast<long>(length) - start));
    double* dst = h.data() + offset;
    for (int k = k0; k < k1; ++k) dst[start + k] += amp * (w0 * r0[k] + w1 * r1[k]);
  }

 private:
  std::vector<double> table_;
};

// Allen & Berkley style DC-blocking high-pass, applied in place.
inline void high_pass(std::span<double> h, double cutoff_hz, double fs) {
  const double W = 2.0 * kPi * cutoff_hz / fs;
  const double R1 = std::exp(-W);
  const double B1 = 2.0 * R1 * std::cos(W);
  const double B2 = -R1 * R1;
  const double A1 = -(1.0 + R1);
  double Y0 = 0.0, Y1 = 0.0, Y2 = 0.0;
  for (double& v : h) {
    const double X0 = v;
    Y2 = Y1;
    Y1 = Y0;
    Y0 = B1 * Y1 + B2 * Y2 + X0;
    v = Y0 + A1 * Y1 + R1 * Y2;
  }
}

}  // namespace detail

inline double sabine_absorption(const Vec3& room, double rt60, double c) {
  const double volume = room[0] * room[1] * room[2];
  const double surface = 2.0 * (room[0] * room[1] + room[0] * room[2] + room[1] * room[2]);
  return 24.0 * std::log(10.0) * volume / (c * surface * rt60);
}

// Shoebox image-source response from `src` to `mic`, accumulated into
// h[offset, offset+length). `beta` is the wall reflection coefficient; images
// farther than `max_distance` are skipped. Returns the direct-path delay.
inline double image_source_response(std::vector<double>& h, std::size_t offset,
                                    std::size_t length, const Vec3& room, const Vec3& src,
                                    const Vec3& mic, double beta, double max_distance, double c,
                                    double fs) {
  const auto& bank = detail::FractionalDelayBank::instance();
  struct AxisTerm {
    double offset;
    int reflections;
  };
  std::array<std::vector<AxisTerm>, 3> axes;
  for (int a = 0; a < 3; ++a) {
    const int n = beta > 0.0 ? static_cast<int>(std::ceil(max_distance / (2.0 * room[a]))) + 1 : 0;
    for (int m = -n; m <= n; ++m) {
      for (int q = 0; q <= 1; ++q) {
        if (beta == 0.0 && (m != 0 || q != 0)) continue;
        const double comp = (1 - 2 * q) * src[a] + 2.0 * m * room[a] - mic[a];
        if (std::abs(comp) > max_distance) continue;
        axes[a].push_back({comp, std::abs(m - q) + std::abs(m)});
      }
    }
  }
  int max_refl = 0;
  for (const auto& axis : axes) {
    int most = 0;
    for (const auto& t : axis) most = std::max(most, t.reflections);
    max_refl += most;
  }
  std::vector<double> beta_pow(static_cast<std::size_t>(max_refl) + 1, 1.0);
  for (std::size_t i = 1; i < beta_pow.size(); ++i) beta_pow[i] = beta_pow[i - 1] * beta;

  const double r2max = max_distance * max_distance;
  const double limit = static_cast<double>(length) + kSincHalfTaps;
  for (const auto& ax : axes[0]) {
    const double x2 = ax.offset * ax.offset;
    if (x2 > r2max) continue;
    for (const auto& ay : axes[1]) {
      const double xy2 = x2 + ay.offset * ay.offset;
      if (xy2 > r2max) continue;
      for (const auto& az : axes[2]) {
        const double d2 = xy2 + az.offset * az.offset;
        if (d2 > r2max) continue;
        const double d = std::sqrt(d2);
        const double delay = d * fs / c;
        if (delay >= limit) continue;
        const int refl = ax.reflections + ay.reflections + az.reflections;
        const double gain = beta_pow[static_cast<std::size_t>(refl)];
        if (gain == 0.0) continue;
        bank.add(h, offset, length, delay, gain / (4.0 * kPi * d));
      }
    }
  }
  return norm3(src - mic) * fs / c;
}

// Image-method room impulse responses for every (mic, source) pair. Reflection
// coefficients follow from RT60 via Sabine's formula; images are kept while
// their propagation time is within 1.25 x RT60, which also sets the length.
inline RirSet simulate_rir(const RoomScene& scene, const RirOptions& opt = {}) {
  const double fs = kSampleRate;
  const double c = scene.speed_of_sound;
  require(scene.rt60 > 0.0, "simulate_rir: rt60 must be positive");
  double alpha = opt.absorption ? *opt.absorption
                                : (scene.anechoic ? 1.0 : sabine_absorption(scene.room_dims, scene.rt60, c));
  alpha = std::clamp(alpha, 0.0, 1.0);
  const double beta = std::sqrt(1.0 - alpha);
  const double horizon = 1.25 * scene.rt60;
  const auto mics = scene.array.positions();
  const auto sources = scene.sources();

  double farthest_direct = 0.0;
  for (const auto& m : mics)
    for (const auto& s : sources) farthest_direct = std::max(farthest_direct, norm3(s - m));
  const auto length = static_cast<std::size_t>(
      std::ceil(std::max(horizon * fs, farthest_direct * fs / c + kSincHalfTaps + 1)));

  RirSet rir(mics.size(), sources.size(), length);
  const double max_distance = std::max(horizon * c, farthest_direct + 1e-9);
  for (std::size_t m = 0; m < mics.size(); ++m) {
    for (std::size_t s = 0; s < sources.size(); ++s) {
      const std::size_t offset = (m * sources.size() + s) * length;
      const double delay = image_source_response(rir.h, offset, length, scene.room_dims,
                                                 sources[s], mics[m], beta, max_distance, c, fs);
      rir.direct_delay[m * sources.size() + s] = delay;
      rir.direct_index[m * sources.size() + s] = static_cast<std::size_t>(std::floor(delay));
      if (opt.high_pass && beta > 0.0) detail::high_pass(rir.response(m, s), opt.high_pass_hz, fs);
    }
  }
  return rir;
}

// Partitions each response into early (from the start of the direct-path
// interpolation kernel up to boundary_ms after the direct arrival) and late.
inline std::pair<RirSet, RirSet> split_early_late(const RirSet& rir, double boundary_ms) {
  require(boundary_ms > 0.0, "split_early_late: boundary must be positive, got ", boundary_ms);
  RirSet early = rir, late = rir;
  const auto boundary = static_cast<std::size_t>(std::llround(boundary_ms * 1e-3 * rir.sample_rate));
  for (std::size_t m = 0; m < rir.mics; ++m) {
    for (std::size_t s = 0; s < rir.sources; ++s) {
      const std::size_t d = rir.direct(m, s);
      const std::size_t begin = d > static_cast<std::size_t>(kSincHalfTaps) ? d - kSincHalfTaps : 0;
      const std::size_t end = std::min(rir.length, d + boundary);
      auto e = early.response(m, s);
      auto l = late.response(m, s);
      const auto src = rir.response(m, s);
      for (std::size_t n = 0; n < rir.length; ++n) {
        const bool in_early = n >= begin && n < end;
        e[n] = in_early ? src[n] : 0.0;
        l[n] = in_early ? 0.0 : src[n];
      }
    }
  }
  return {std::move(early), std::move(late)};
}

}  // namespace wtlab
