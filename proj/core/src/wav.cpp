#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "kws/audio.hpp"

namespace kws {
namespace {

constexpr double kPcmScale = 32767.0;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

std::int16_t to_pcm16(double x) {
  const double clamped = std::clamp(x, -1.0, 1.0);
  return static_cast<std::int16_t>(std::lrint(clamped * kPcmScale));
}

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open WAV file: " + path.string());

  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();

  if (size < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw std::runtime_error("not a RIFF/WAVE file: " + path.string());

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;

  std::size_t off = 12;
  while (off + 8 <= size) {
    const std::uint32_t chunk_len = read_u32(p + off + 4);
    const unsigned char* chunk = p + off + 8;
    if (off + 8 + chunk_len > size)
      throw std::runtime_error("truncated WAV chunk in " + path.string());
    if (std::memcmp(p + off, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw std::runtime_error("malformed fmt chunk in " + path.string());
      format = read_u16(chunk);
      channels = read_u16(chunk + 2);
      rate = read_u32(chunk + 4);
      bits = read_u16(chunk + 14);
      have_fmt = true;
    } else if (std::memcmp(p + off, "data", 4) == 0) {
      data = chunk;
      data_len = chunk_len;
    }
    off += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data == nullptr)
    throw std::runtime_error("WAV file missing fmt or data chunk: " + path.string());
  if (format != 1 || bits != 16)
    throw std::runtime_error("unsupported WAV encoding (need PCM 16-bit): " + path.string());
  if (channels != 1)
    throw std::runtime_error("unsupported channel count " + std::to_string(channels) +
                             " (need mono): " + path.string());
  if (rate != static_cast<std::uint32_t>(kSampleRate))
    throw std::runtime_error("unsupported sample rate " + std::to_string(rate) + " Hz (need " +
                             std::to_string(kSampleRate) + "): " + path.string());

  AudioBuffer audio;
  audio.sample_rate = static_cast<int>(rate);
  const std::size_t n = data_len / 2;
  audio.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::int16_t>(read_u16(data + 2 * i));
    audio.samples[i] = static_cast<double>(s) / kPcmScale;
  }
  return audio;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio) {
  if (audio.sample_rate != kSampleRate)
    throw std::invalid_argument("write_wav: sample rate must be " + std::to_string(kSampleRate));

  const std::uint32_t data_len = static_cast<std::uint32_t>(audio.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_len);
  out.append("RIFF");
  put_u32(out, 36 + data_len);
  out.append("WAVE");
  out.append("fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate * 2));  // byte rate
  put_u16(out, 2);                                                  // block align
  put_u16(out, 16);                                                 // bits per sample
  out.append("data");
  put_u32(out, data_len);
  for (const double x : audio.samples) {
    const std::int16_t s = to_pcm16(x);
    put_u16(out, static_cast<std::uint16_t>(s));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write WAV file: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

void quantize_to_pcm16(AudioBuffer& audio) {
  for (double& x : audio.samples) x = static_cast<double>(to_pcm16(x)) / kPcmScale;
}

}  // namespace kws
