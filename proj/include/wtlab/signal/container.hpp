#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>

#include "wtlab/signal/stft.hpp"
#include "wtlab/signal/wav.hpp"

namespace wtlab {

// Flat little-endian container for complex [M x F x T] tensors:
//   "WTSP" | u32 version=1 | u32 M | u32 F | u32 T | M*F*T (f32 re, f32 im)
// The framing parameters are not stored; readers supply them.
namespace container {

inline constexpr char kMagic[4] = {'W', 'T', 'S', 'P'};

inline std::string encode(const Spectrogram& spec) {
  std::string s;
  s.append(kMagic, 4);
  wav::detail::put_u32(s, 1);
  wav::detail::put_u32(s, static_cast<std::uint32_t>(spec.channels()));
  wav::detail::put_u32(s, static_cast<std::uint32_t>(spec.bins()));
  wav::detail::put_u32(s, static_cast<std::uint32_t>(spec.frames()));
  for (const auto& v : spec.data()) {
    const float re = static_cast<float>(v.real()), im = static_cast<float>(v.imag());
    char buf[8];
    std::memcpy(buf, &re, 4);
    std::memcpy(buf + 4, &im, 4);
    s.append(buf, 8);
  }
  return s;
}

inline Spectrogram decode(const std::string& bytes, const StftParams& params = {}) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  require(bytes.size() >= 20 && std::memcmp(p, kMagic, 4) == 0,
          "not a spectrogram container (bad magic)");
  require(wav::detail::u32le(p + 4) == 1, "unsupported container version ",
          wav::detail::u32le(p + 4));
  const std::size_t M = wav::detail::u32le(p + 8), F = wav::detail::u32le(p + 12),
                    T = wav::detail::u32le(p + 16);
  require(bytes.size() == 20 + M * F * T * 8, "container payload size mismatch for [", M, " x ",
          F, " x ", T, "]");
  Spectrogram spec(M, F, T, params);
  const unsigned char* d = p + 20;
  for (std::size_t i = 0; i < spec.data().size(); ++i) {
    float re, im;
    std::memcpy(&re, d + 8 * i, 4);
    std::memcpy(&im, d + 8 * i + 4, 4);
    spec.data()[i] = cdouble(re, im);
  }
  return spec;
}

inline void write(const std::filesystem::path& path, const Spectrogram& spec) {
  wav::write_atomic(path, encode(spec));
}

inline Spectrogram read(const std::filesystem::path& path, const StftParams& params = {}) {
  return decode(wav::read_file(path), params);
}

}  // namespace container
}  // namespace wtlab
