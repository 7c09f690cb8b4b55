#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "wtlab/rng.hpp"
#include "wtlab/signal/container.hpp"
#include "wtlab/signal/stft.hpp"
#include "wtlab/signal/wav.hpp"

using namespace wtlab;
namespace fs = std::filesystem;

namespace {

MultichannelWaveform white_noise(std::size_t channels, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  MultichannelWaveform w(channels, n);
  for (double& v : w.samples()) v = 0.3 * rng.normal();
  return w;
}

double rel_l2(const MultichannelWaveform& a, const MultichannelWaveform& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.samples().size(); ++i) {
    const double d = a.samples()[i] - b.samples()[i];
    num += d * d;
    den += b.samples()[i] * b.samples()[i];
  }
  return std::sqrt(num / den);
}

fs::path temp_dir() {
  auto d = fs::temp_directory_path() / "wtlab_test_signal";
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("stft shapes and zero input", "[stft]") {
  MultichannelWaveform zeros(8, 64000);
  const auto spec = stft(zeros);
  CHECK(spec.channels() == 8);
  CHECK(spec.bins() == 161);
  CHECK(spec.frames() == 401);
  for (const auto& v : spec.data()) REQUIRE(std::abs(v) == 0.0);
}

TEST_CASE("stft of a 1 kHz sine peaks at bin 20", "[stft]") {
  MultichannelWaveform w(1, 16000);
  for (std::size_t n = 0; n < w.length(); ++n) {
    w.at(0, n) = std::sin(2.0 * kPi * 1000.0 * static_cast<double>(n) / kSampleRate);
  }
  const auto spec = stft(w);
  const std::size_t t = spec.frames() / 2;
  std::size_t best = 0;
  for (std::size_t f = 0; f < spec.bins(); ++f) {
    if (std::abs(spec.at(0, f, t)) > std::abs(spec.at(0, best, t))) best = f;
  }
  CHECK(best == 20);
}

TEST_CASE("stft rejects signals shorter than a frame", "[stft]") {
  MultichannelWaveform w(1, 100);
  CHECK_THROWS_WITH(stft(w), Catch::Matchers::ContainsSubstring("shorter than one STFT frame"));
}

TEST_CASE("istft rejects inconsistent framing", "[stft]") {
  StftParams bad;
  bad.hop = 100;
  Spectrogram spec(1, 161, 10, bad);
  CHECK_THROWS_AS(istft(spec), Error);
}

TEST_CASE("zero spectrogram inverts to zero waveform", "[stft]") {
  Spectrogram spec(2, 161, 401);
  const auto w = istft(spec);
  CHECK(w.length() == 64000);
  CHECK(w.peak() == 0.0);
}

TEST_CASE("stft/istft round trip", "[stft]") {
  SECTION("white noise") {
    const auto x = white_noise(8, 64000, 11);
    CHECK(rel_l2(istft(stft(x)), x) < 1e-6);
  }
  SECTION("speech-shaped chirp") {
    MultichannelWaveform x(1, 64000);
    for (std::size_t n = 0; n < x.length(); ++n) {
      const double t = static_cast<double>(n) / kSampleRate;
      const double env = 0.5 + 0.5 * std::sin(2.0 * kPi * 4.0 * t);  // syllabic rate
      x.at(0, n) = env * std::sin(2.0 * kPi * (100.0 * t + 450.0 * t * t));
    }
    CHECK(rel_l2(istft(stft(x)), x) < 1e-6);
  }
}

TEST_CASE("Hann analysis window overlap-adds to a constant", "[stft]") {
  // The plain window satisfies COLA at 50% overlap; the squared window used for
  // synthesis normalization does not, but it stays within [0.5, 1].
  const StftParams p;
  const auto w = hann_window(p.frame_len);
  for (std::size_t n = 0; n < p.hop; ++n) {
    CHECK(w[n] + w[n + p.hop] == Catch::Approx(1.0).margin(1e-12));
    const double sq = w[n] * w[n] + w[n + p.hop] * w[n + p.hop];
    CHECK(sq >= 0.5 - 1e-12);
    CHECK(sq <= 1.0 + 1e-12);
  }
}

TEST_CASE("window-compensated Parseval identity", "[stft]") {
  const auto x = white_noise(1, 8000, 5);
  const StftParams p;
  const auto spec = stft(x, p);
  const std::size_t N = p.fft_size, pad = p.frame_len / 2;
  // Independent reflect padding and squared-window accumulation.
  std::vector<double> padded;
  for (std::size_t i = pad; i > 0; --i) padded.push_back(x.at(0, i));
  for (std::size_t i = 0; i < x.length(); ++i) padded.push_back(x.at(0, i));
  for (std::size_t i = 0; i < pad; ++i) padded.push_back(x.at(0, x.length() - 2 - i));
  const auto w = hann_window(p.frame_len);
  double time_energy = 0.0;
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    for (std::size_t i = 0; i < p.frame_len; ++i) {
      const double v = padded[t * p.hop + i] * w[i];
      time_energy += v * v;
    }
  }
  double spec_energy = 0.0;
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    for (std::size_t f = 0; f < spec.bins(); ++f) {
      const double mult = (f == 0 || f == N / 2) ? 1.0 : 2.0;
      spec_energy += mult * std::norm(spec.at(0, f, t)) / static_cast<double>(N);
    }
  }
  CHECK(std::abs(spec_energy - time_energy) / time_energy < 1e-6);
}

TEST_CASE("stft is linear", "[stft]") {
  const auto x = white_noise(2, 4000, 1), y = white_noise(2, 4000, 2);
  MultichannelWaveform z(2, 4000);
  const double a = 0.7, b = -1.9;
  for (std::size_t i = 0; i < z.samples().size(); ++i) {
    z.samples()[i] = a * x.samples()[i] + b * y.samples()[i];
  }
  const auto X = stft(x), Y = stft(y), Z = stft(z);
  double worst = 0.0;
  for (std::size_t i = 0; i < Z.data().size(); ++i) {
    worst = std::max(worst, std::abs(Z.data()[i] - (a * X.data()[i] + b * Y.data()[i])));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("pack_ri layout", "[pack]") {
  const auto spec = stft(white_noise(8, 64000, 3));
  const auto packed = pack_ri<double>(spec);
  CHECK(packed.shape() == Shape{1, 8, 322, 401});
  CHECK(packed(0, 3, 7, 11) == spec.at(3, 7, 11).real());
  CHECK(packed(0, 3, 161 + 7, 11) == spec.at(3, 7, 11).imag());

  Spectrogram real_only(2, 5, 4);
  for (auto& v : real_only.data()) v = 1.5;
  const auto pr = pack_ri<double>(real_only);
  for (std::size_t m = 0; m < 2; ++m)
    for (std::size_t f = 5; f < 10; ++f)
      for (std::size_t t = 0; t < 4; ++t) CHECK(pr(0, m, f, t) == 0.0);
}

TEST_CASE("pack_ri/unpack_ri is a bijection", "[pack][property]") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t M = 1 + rng.below(8), F = 1 + rng.below(20), T = 1 + rng.below(30);
    Spectrogram spec(M, F, T);
    for (auto& v : spec.data()) v = cdouble(rng.normal() * 1e3, rng.normal() * 1e-3);
    const auto back = unpack_ri(pack_ri<double>(spec));
    REQUIRE(back.same_shape(spec));
    for (std::size_t i = 0; i < spec.data().size(); ++i) REQUIRE(back.data()[i] == spec.data()[i]);
  }
}

TEST_CASE("float WAV round trip is bit-exact", "[wav]") {
  Rng rng(4);
  MultichannelWaveform w(8, 1234);
  for (double& v : w.samples()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  const auto path = temp_dir() / "rt8.wav";
  wav::write(path, w);
  const auto r = wav::read(path);
  REQUIRE(r.channels() == 8);
  REQUIRE(r.length() == 1234);
  CHECK(r.samples() == w.samples());

  MultichannelWaveform mono(1, 50);
  wav::write(temp_dir() / "mono.wav", mono);
  CHECK(wav::read(temp_dir() / "mono.wav").channels() == 1);
}

TEST_CASE("WAV reader rejects bad input", "[wav]") {
  MultichannelWaveform w(1, 10, 44100);
  CHECK_THROWS_WITH(wav::decode(wav::encode(w)),
                    Catch::Matchers::ContainsSubstring("unsupported sample rate"));
  CHECK_THROWS_WITH(wav::decode("RIFX0000WAVE"),
                    Catch::Matchers::ContainsSubstring("malformed WAV header"));
  CHECK_THROWS_AS(wav::read(temp_dir() / "does_not_exist.wav"), Error);
}

TEST_CASE("WAV reader accepts 16-bit PCM", "[wav]") {
  std::string s = "RIFF";
  wav::detail::put_u32(s, 36 + 4);
  s += "WAVEfmt ";
  wav::detail::put_u32(s, 16);
  wav::detail::put_u16(s, 1);
  wav::detail::put_u16(s, 1);
  wav::detail::put_u32(s, 16000);
  wav::detail::put_u32(s, 32000);
  wav::detail::put_u16(s, 2);
  wav::detail::put_u16(s, 16);
  s += "data";
  wav::detail::put_u32(s, 4);
  wav::detail::put_u16(s, 16384);
  wav::detail::put_u16(s, static_cast<std::uint16_t>(-16384));
  const auto w = wav::decode(s);
  REQUIRE(w.length() == 2);
  CHECK(w.at(0, 0) == 0.5);
  CHECK(w.at(0, 1) == -0.5);
}

TEST_CASE("spectrogram container round trip", "[container]") {
  Spectrogram spec(3, 7, 5);
  Rng rng(8);
  for (auto& v : spec.data()) {
    v = cdouble(static_cast<float>(rng.normal()), static_cast<float>(rng.normal()));
  }
  const auto path = temp_dir() / "spec.bin";
  container::write(path, spec);
  const auto back = container::read(path);
  REQUIRE(back.same_shape(spec));
  CHECK(back.data() == spec.data());
  CHECK_THROWS_AS(container::decode("nope"), Error);
}
