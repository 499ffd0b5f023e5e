#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "beamtrack/errors.hpp"

namespace beamtrack {

struct WavData {
  double sample_rate = 48000.0;
  std::vector<std::vector<double>> channels;

  int channel_count() const { return static_cast<int>(channels.size()); }
  std::size_t frames() const {
    return channels.empty() ? 0 : channels[0].size();
  }
};

enum class WavFormat { pcm16, float32 };

namespace detail {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t off) {
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  return v;
}

}  // namespace detail

inline void write_wav(const std::string& path, const WavData& wav,
                      WavFormat format = WavFormat::float32) {
  if (wav.channels.empty()) throw io_error("wav: nothing to write");
  const std::size_t frames = wav.frames();
  for (const auto& ch : wav.channels) {
    if (ch.size() != frames) throw io_error("wav: ragged channels");
  }
  const int channels = wav.channel_count();
  const int bits = format == WavFormat::pcm16 ? 16 : 32;
  const int block = channels * bits / 8;
  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(frames * static_cast<std::size_t>(block));

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put<std::uint32_t>(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  detail::put<std::uint32_t>(out, 16);
  detail::put<std::uint16_t>(out, format == WavFormat::pcm16 ? 1 : 3);
  detail::put<std::uint16_t>(out, static_cast<std::uint16_t>(channels));
  detail::put<std::uint32_t>(out,
                             static_cast<std::uint32_t>(wav.sample_rate));
  detail::put<std::uint32_t>(
      out, static_cast<std::uint32_t>(wav.sample_rate) * block);
  detail::put<std::uint16_t>(out, static_cast<std::uint16_t>(block));
  detail::put<std::uint16_t>(out, static_cast<std::uint16_t>(bits));
  out += "data";
  detail::put<std::uint32_t>(out, data_bytes);

  for (std::size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      double v = wav.channels[c][i];
      if (format == WavFormat::pcm16) {
        double clamped = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
        detail::put<std::int16_t>(
            out, static_cast<std::int16_t>(std::llround(clamped * 32767.0)));
      } else {
        detail::put<float>(out, static_cast<float>(v));
      }
    }
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("wav: cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw io_error("wav: short write to '" + path + "'");
}

inline WavData read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("wav: cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || bytes.compare(0, 4, "RIFF") != 0 ||
      bytes.compare(8, 4, "WAVE") != 0) {
    throw io_error("wav: '" + path + "' is not a RIFF/WAVE file");
  }

  std::uint16_t audio_format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  std::size_t data_off = 0, data_len = 0;
  std::size_t off = 12;
  while (off + 8 <= bytes.size()) {
    std::string id = bytes.substr(off, 4);
    std::uint32_t len = detail::get<std::uint32_t>(bytes, off + 4);
    std::size_t body = off + 8;
    if (id == "fmt ") {
      if (len < 16) throw io_error("wav: truncated fmt chunk");
      audio_format = detail::get<std::uint16_t>(bytes, body);
      channels = detail::get<std::uint16_t>(bytes, body + 2);
      sample_rate = detail::get<std::uint32_t>(bytes, body + 4);
      bits = detail::get<std::uint16_t>(bytes, body + 14);
    } else if (id == "data") {
      data_off = body;
      data_len = len;
    }
    off = body + len + (len & 1);
  }
  if (channels == 0 || data_off == 0) {
    throw io_error("wav: missing fmt or data chunk in '" + path + "'");
  }
  bool pcm16 = audio_format == 1 && bits == 16;
  bool f32 = audio_format == 3 && bits == 32;
  if (!pcm16 && !f32) {
    throw io_error("wav: unsupported encoding (want PCM16 or float32)");
  }
  if (data_off + data_len > bytes.size()) data_len = bytes.size() - data_off;

  const int block = channels * bits / 8;
  const std::size_t frames = data_len / block;
  WavData wav;
  wav.sample_rate = sample_rate;
  wav.channels.assign(channels, std::vector<double>(frames));
  for (std::size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      std::size_t p = data_off + i * block + c * bits / 8;
      if (pcm16) {
        wav.channels[c][i] =
            detail::get<std::int16_t>(bytes, p) / 32767.0;
      } else {
        wav.channels[c][i] = detail::get<float>(bytes, p);
      }
    }
  }
  return wav;
}

}  // namespace beamtrack
