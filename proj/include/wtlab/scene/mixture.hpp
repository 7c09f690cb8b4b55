#pragma once

#include <algorithm>
#include <vector>

#include "wtlab/scene/rir.hpp"
#include "wtlab/signal/fft.hpp"
#include "wtlab/signal/waveform.hpp"

namespace wtlab {

struct MixtureExample {
  MultichannelWaveform mixture;
  MultichannelWaveform target_early;
  RoomScene scene;
  double noise_gain = 0.0;
  double peak_gain = 1.0;
};

// Unscaled spatial images of each signal component at every mic. The mixture
// is speech_reverb + noise; noise already carries the SNR gain.
struct MixtureComponents {
  MultichannelWaveform speech_reverb;
  MultichannelWaveform speech_early;
  MultichannelWaveform noise;
  double noise_gain = 0.0;

  MultichannelWaveform mixture() const {
    MultichannelWaveform out = speech_reverb;
    for (std::size_t i = 0; i < out.samples().size(); ++i) out.samples()[i] += noise.samples()[i];
    return out;
  }
};

namespace detail {

inline MultichannelWaveform spatialize(const RirSet& rir, std::size_t source,
                                       fft::Convolver& conv, std::size_t length) {
  MultichannelWaveform out(rir.mics, length);
  for (std::size_t m = 0; m < rir.mics; ++m) {
    const auto y = conv(rir.response_vec(m, source));
    std::copy(y.begin(), y.end(), out.channel(m).begin());
  }
  return out;
}

inline bool same_response(const RirSet& a, const RirSet& b, std::size_t source) {
  for (std::size_t m = 0; m < a.mics; ++m) {
    const auto x = a.response(m, source), y = b.response(m, source);
    if (!std::equal(x.begin(), x.end(), y.begin())) return false;
  }
  return true;
}

}  // namespace detail

// Convolves speech with the full and early speech responses and each noise
// signal with its response, then sets the noise gain so that the early speech
// to noise energy ratio at mic 0 equals scene.snr_db.
inline MixtureComponents render_components(const RoomScene& scene, const RirSet& rir,
                                           const std::vector<double>& speech,
                                           const std::vector<std::vector<double>>& noises,
                                           std::size_t length) {
  require(noises.size() + 1 == rir.sources, "render: expected ", rir.sources - 1,
          " noise signals, got ", noises.size());
  require(speech.size() >= length, "render: speech has ", speech.size(), " samples, need ",
          length);
  for (const auto& n : noises) {
    require(n.size() >= length, "render: noise has ", n.size(), " samples, need ", length);
  }
  require(energy(std::span<const double>(speech.data(), length)) > 0.0,
          "render: speech input is silent, SNR is undefined");

  const auto [early_rir, late_rir] = split_early_late(rir, scene.early_ms);
  MixtureComponents c;
  fft::Convolver speech_conv(speech, length);
  c.speech_reverb = detail::spatialize(rir, 0, speech_conv, length);
  c.speech_early = detail::same_response(rir, early_rir, 0)
                       ? c.speech_reverb
                       : detail::spatialize(early_rir, 0, speech_conv, length);
  c.noise = MultichannelWaveform(rir.mics, length);
  for (std::size_t k = 0; k < noises.size(); ++k) {
    fft::Convolver noise_conv(noises[k], length);
    const auto img = detail::spatialize(rir, k + 1, noise_conv, length);
    for (std::size_t i = 0; i < img.samples().size(); ++i) c.noise.samples()[i] += img.samples()[i];
  }
  const double e_speech = energy(c.speech_early.channel(0));
  const double e_noise = energy(c.noise.channel(0));
  c.noise_gain = e_noise > 0.0 ? std::sqrt(e_speech / (e_noise * db_to_power(scene.snr_db))) : 0.0;
  c.noise.scale(c.noise_gain);
  return c;
}

// Full mixture pipeline for one scene: components, then one shared gain that
// puts the mixture peak at scene.peak.
inline MixtureExample render_mixture(const RoomScene& scene, const RirSet& rir,
                                     const std::vector<double>& speech,
                                     const std::vector<std::vector<double>>& noises,
                                     std::size_t length = 64000) {
  const auto comp = render_components(scene, rir, speech, noises, length);
  MixtureExample ex;
  ex.scene = scene;
  ex.mixture = comp.mixture();
  ex.target_early = comp.speech_early;
  ex.noise_gain = comp.noise_gain;
  const double peak = ex.mixture.peak();
  require(peak > 0.0, "render: mixture is silent");
  ex.peak_gain = scene.peak / peak;
  ex.mixture.scale(ex.peak_gain);
  ex.target_early.scale(ex.peak_gain);
  return ex;
}

inline MixtureExample render_mixture(const RoomScene& scene, const std::vector<double>& speech,
                                     const std::vector<std::vector<double>>& noises,
                                     std::size_t length = 64000) {
  return render_mixture(scene, simulate_rir(scene), speech, noises, length);
}

}  // namespace wtlab
