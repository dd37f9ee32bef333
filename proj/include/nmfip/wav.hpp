#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nmfip/errors.hpp"
#include "nmfip/signal.hpp"

namespace nmfip {

// Decoded WAV plus the channel count of the source file (downmixed inputs
// keep their original count here so callers can warn).
struct WavData {
  Signal signal;
  int source_channels = 1;
};

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(static_cast<std::uint32_t>(p[0]) |
                                    (static_cast<std::uint32_t>(p[1]) << 8));
}

inline void append_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void append_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

// Reads a RIFF/WAVE file holding 16-bit PCM or 32-bit IEEE float samples.
// Multi-channel content is downmixed to mono by averaging. Anything else
// (compressed formats, other bit depths, malformed chunks) raises IoError.
inline WavData load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open wav file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw IoError("not a RIFF/WAVE file: " + path.string());

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  bool have_fmt = false;
  std::size_t data_offset = 0, data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t size = detail::read_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size())
      throw IoError("truncated wav chunk: " + path.string());
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16) throw IoError("malformed fmt chunk: " + path.string());
      format = detail::read_u16(bytes.data() + body);
      channels = detail::read_u16(bytes.data() + body + 2);
      sample_rate = detail::read_u32(bytes.data() + body + 4);
      bits = detail::read_u16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_offset = body;
      data_size = size;
    }
    pos = body + size + (size % 2);  // chunks are word aligned
  }
  if (!have_fmt || data_offset == 0)
    throw IoError("missing fmt or data chunk: " + path.string());
  if (channels < 1) throw IoError("wav has no channels: " + path.string());
  if (sample_rate == 0) throw IoError("wav has zero sample rate: " + path.string());

  const bool pcm16 = (format == 1 && bits == 16);
  const bool float32 = (format == 3 && bits == 32);
  if (!pcm16 && !float32)
    throw IoError("unsupported wav encoding (need 16-bit PCM or 32-bit float): " +
                  path.string());

  const std::size_t bytes_per_sample = pcm16 ? 2 : 4;
  const std::size_t stride = bytes_per_sample * channels;
  if (data_size % stride != 0)
    throw IoError("wav data size not a whole number of sample frames: " +
                  path.string());
  const std::size_t n = data_size / stride;
  if (n == 0) throw IoError("wav holds no samples: " + path.string());

  WavData wav;
  wav.source_channels = channels;
  wav.signal.sample_rate = static_cast<int>(sample_rate);
  wav.signal.samples.resize(static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      const unsigned char* p =
          bytes.data() + data_offset + i * stride + c * bytes_per_sample;
      if (pcm16) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        acc += static_cast<double>(v) / 32768.0;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        acc += static_cast<double>(v);
      }
    }
    wav.signal.samples[static_cast<Index>(i)] =
        acc / static_cast<double>(channels);
  }
  return wav;
}

// Writes a mono 32-bit float WAV. Byte output is a pure function of the
// samples and sample rate.
inline void save_wav(const std::filesystem::path& path, const Signal& signal) {
  validate_signal(signal);
  const std::uint32_t n = static_cast<std::uint32_t>(signal.samples.size());
  const std::uint32_t data_size = n * 4;
  std::string out;
  out.reserve(44 + data_size);
  out.append("RIFF");
  detail::append_u32(out, 36 + data_size);
  out.append("WAVE");
  out.append("fmt ");
  detail::append_u32(out, 16);
  detail::append_u16(out, 3);  // IEEE float
  detail::append_u16(out, 1);  // mono
  detail::append_u32(out, static_cast<std::uint32_t>(signal.sample_rate));
  detail::append_u32(out, static_cast<std::uint32_t>(signal.sample_rate) * 4);
  detail::append_u16(out, 4);
  detail::append_u16(out, 32);
  out.append("data");
  detail::append_u32(out, data_size);
  for (Index i = 0; i < signal.samples.size(); ++i) {
    const float v = static_cast<float>(signal.samples[i]);
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.append(buf, 4);
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write wav file: " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("failed writing wav file: " + path.string());
}

}  // namespace nmfip
