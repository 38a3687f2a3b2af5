#include "distillab/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "distillab/errors.hpp"

namespace distillab {

void Utterance::validate() const {
  if (sample_rate != kSampleRate) {
    throw ArgumentError("utterance '" + id + "' has sample rate " + std::to_string(sample_rate) + ", expected 16000");
  }
  if (samples.empty()) throw ArgumentError("utterance '" + id + "' is empty");
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

void put_u16(std::ofstream& out, std::uint16_t v) {
  const std::array<char, 2> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b.data(), 2);
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::int16_t to_pcm(float x) {
  const float c = std::clamp(x, -1.0f, 1.0f);
  return static_cast<std::int16_t>(std::lround(c * 32767.0f));
}

}  // namespace

float quantize_pcm16(float x) {
  return static_cast<float>(to_pcm(x)) / 32767.0f;
}

void write_wav(const std::filesystem::path& path, const std::vector<float>& samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  put_u32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, kSampleRate);
  put_u32(out, kSampleRate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.write("data", 4);
  put_u32(out, data_bytes);
  for (float s : samples) put_u16(out, static_cast<std::uint16_t>(to_pcm(s)));
  if (!out) throw IoError("failed writing " + path.string());
}

Utterance read_wav(const std::filesystem::path& path, std::string id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(path.string() + " is not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  Utterance utt;
  utt.id = id.empty() ? path.stem().string() : std::move(id);
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = get_u32(bytes.data() + pos + 4);
    const std::uint8_t* body = bytes.data() + pos + 8;
    if (pos + 8 + size > bytes.size()) throw FormatError(path.string() + ": truncated chunk");
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError(path.string() + ": short fmt chunk");
      const auto format = get_u16(body), channels = get_u16(body + 2), bits = get_u16(body + 14);
      utt.sample_rate = static_cast<int>(get_u32(body + 4));
      if (format != 1 || channels != 1 || bits != 16) {
        throw FormatError(path.string() + ": only mono 16-bit PCM is supported");
      }
      have_fmt = true;
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      if (!have_fmt) throw FormatError(path.string() + ": data chunk before fmt chunk");
      utt.samples.resize(size / 2);
      for (std::size_t i = 0; i < utt.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(get_u16(body + 2 * i));
        utt.samples[i] = static_cast<float>(raw) / 32767.0f;
      }
      return utt;
    }
    pos += 8 + size + (size & 1);
  }
  throw FormatError(path.string() + ": no data chunk");
}

}  // namespace distillab
