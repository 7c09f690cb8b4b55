#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "wtlab/common.hpp"

namespace wtlab {

// M-channel time-domain signal, stored channel-major.
class MultichannelWaveform {
 public:
  MultichannelWaveform() = default;
  MultichannelWaveform(std::size_t channels, std::size_t length, int sample_rate = kSampleRate)
      : channels_(channels), length_(length), sample_rate_(sample_rate),
        samples_(channels * length, 0.0) {}

  static MultichannelWaveform mono(std::vector<double> samples, int sample_rate = kSampleRate) {
    MultichannelWaveform w(1, samples.size(), sample_rate);
    w.samples_ = std::move(samples);
    return w;
  }

  std::size_t channels() const { return channels_; }
  std::size_t length() const { return length_; }
  int sample_rate() const { return sample_rate_; }

  std::span<double> channel(std::size_t m) { return {samples_.data() + m * length_, length_}; }
  std::span<const double> channel(std::size_t m) const {
    return {samples_.data() + m * length_, length_};
  }

  double& at(std::size_t m, std::size_t n) { return samples_[m * length_ + n]; }
  double at(std::size_t m, std::size_t n) const { return samples_[m * length_ + n]; }

  std::vector<double>& samples() { return samples_; }
  const std::vector<double>& samples() const { return samples_; }

  MultichannelWaveform select(std::size_t m) const {
    MultichannelWaveform out(1, length_, sample_rate_);
    std::copy_n(samples_.begin() + static_cast<std::ptrdiff_t>(m * length_), length_,
                out.samples_.begin());
    return out;
  }

  double peak() const {
    double p = 0.0;
    for (double v : samples_) p = std::max(p, std::abs(v));
    return p;
  }

  void scale(double g) {
    for (double& v : samples_) v *= g;
  }

  bool all_finite() const {
    return std::all_of(samples_.begin(), samples_.end(), [](double v) { return std::isfinite(v); });
  }

  void validate() const {
    require(channels_ >= 1, "waveform needs at least one channel");
    require(length_ >= 1, "waveform needs at least one sample");
    require(all_finite(), "waveform contains non-finite samples");
  }

 private:
  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  int sample_rate_ = kSampleRate;
  std::vector<double> samples_;
};

inline double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace wtlab
