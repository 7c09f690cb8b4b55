#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "wtlab/common.hpp"
#include "wtlab/signal/waveform.hpp"

namespace wtlab::wav {

namespace detail {

inline std::uint32_t u32le(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
inline std::uint16_t u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}
inline void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xFF));
  s.push_back(static_cast<char>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace detail

// Writes `data` to `path` via a temporary sibling and a rename, so readers
// never observe a partially written file.
inline void write_atomic(const std::filesystem::path& path, const std::string& data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(os), "cannot open ", tmp.string(), " for writing");
    os.write(data.data(), static_cast<std::streamsize>(data.size()));
    require(static_cast<bool>(os), "write to ", tmp.string(), " failed");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), "cannot open ", path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Serializes an interleaved 32-bit IEEE float RIFF/WAVE image.
inline std::string encode(const MultichannelWaveform& w) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  const auto channels = static_cast<std::uint16_t>(w.channels());
  const auto frames = static_cast<std::uint32_t>(w.length());
  const std::uint32_t data_bytes = frames * channels * 4u;
  std::string s;
  s.reserve(44 + data_bytes);
  s += "RIFF";
  detail::put_u32(s, 36 + data_bytes);
  s += "WAVEfmt ";
  detail::put_u32(s, 16);
  detail::put_u16(s, detail::kFormatFloat);
  detail::put_u16(s, channels);
  detail::put_u32(s, static_cast<std::uint32_t>(w.sample_rate()));
  detail::put_u32(s, static_cast<std::uint32_t>(w.sample_rate()) * channels * 4u);
  detail::put_u16(s, static_cast<std::uint16_t>(channels * 4));
  detail::put_u16(s, 32);
  s += "data";
  detail::put_u32(s, data_bytes);
  for (std::size_t n = 0; n < w.length(); ++n) {
    for (std::size_t m = 0; m < w.channels(); ++m) {
      const float v = static_cast<float>(w.at(m, n));
      char buf[4];
      std::memcpy(buf, &v, 4);
      s.append(buf, 4);
    }
  }
  return s;
}

inline MultichannelWaveform decode(const std::string& bytes, const std::string& name = "<memory>") {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();
  require(size >= 12 && std::memcmp(p, "RIFF", 4) == 0 && std::memcmp(p + 8, "WAVE", 4) == 0,
          name, ": malformed WAV header (missing RIFF/WAVE tags)");
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= size) {
    const std::uint32_t len = detail::u32le(p + pos + 4);
    const unsigned char* body = p + pos + 8;
    require(pos + 8 + len <= size || std::memcmp(p + pos, "data", 4) == 0, name,
            ": malformed WAV header (chunk overruns file)");
    if (std::memcmp(p + pos, "fmt ", 4) == 0) {
      require(len >= 16, name, ": malformed WAV header (short fmt chunk)");
      format = detail::u16le(body);
      channels = detail::u16le(body + 2);
      rate = detail::u32le(body + 4);
      bits = detail::u16le(body + 14);
      if (format == detail::kFormatExtensible) {
        require(len >= 40, name, ": malformed WAV header (short extensible fmt chunk)");
        format = detail::u16le(body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(p + pos, "data", 4) == 0) {
      require(have_fmt, name, ": malformed WAV header (data before fmt)");
      require(rate == static_cast<std::uint32_t>(kSampleRate), name,
              ": unsupported sample rate ", rate, " Hz (expected ", kSampleRate, ")");
      require(channels >= 1, name, ": malformed WAV header (zero channels)");
      const std::size_t avail = std::min<std::size_t>(len, size - pos - 8);
      const bool is_float = format == detail::kFormatFloat && bits == 32;
      const bool is_pcm16 = format == detail::kFormatPcm && bits == 16;
      const bool is_pcm32 = format == detail::kFormatPcm && bits == 32;
      require(is_float || is_pcm16 || is_pcm32, name, ": unsupported sample format (format ",
              format, ", ", bits, " bits)");
      const std::size_t bytes_per = bits / 8;
      const std::size_t frames = avail / (bytes_per * channels);
      MultichannelWaveform w(channels, frames, static_cast<int>(rate));
      for (std::size_t n = 0; n < frames; ++n) {
        for (std::size_t m = 0; m < channels; ++m) {
          const unsigned char* s = body + (n * channels + m) * bytes_per;
          double v = 0.0;
          if (is_float) {
            float f;
            std::memcpy(&f, s, 4);
            v = f;
          } else if (is_pcm16) {
            v = static_cast<std::int16_t>(detail::u16le(s)) / 32768.0;
          } else {
            v = static_cast<std::int32_t>(detail::u32le(s)) / 2147483648.0;
          }
          w.at(m, n) = v;
        }
      }
      require(w.all_finite(), name, ": WAV contains non-finite samples");
      return w;
    }
    pos += 8 + len + (len & 1u);
  }
  fail(name, ": malformed WAV header (no data chunk)");
}

inline MultichannelWaveform read(const std::filesystem::path& path) {
  return decode(read_file(path), path.string());
}

inline void write(const std::filesystem::path& path, const MultichannelWaveform& w) {
  require(w.channels() >= 1 && w.channels() <= 65535, "cannot write ", w.channels(),
          "-channel WAV");
  write_atomic(path, encode(w));
}

}  // namespace wtlab::wav
