#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace distillab {

inline constexpr int kSampleRate = 16000;

// Mono 16 kHz waveform with samples in [-1, 1].
struct Utterance {
  std::string id;
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  void validate() const;
  bool operator==(const Utterance&) const = default;
};

// RIFF PCM, mono, 16-bit, 16 kHz. Samples are clipped to [-1, 1] and
// quantized by round(x · 32767).
void write_wav(const std::filesystem::path& path, const std::vector<float>& samples);
Utterance read_wav(const std::filesystem::path& path, std::string id = {});

// The value a sample takes after a write/read round trip.
float quantize_pcm16(float x);

}  // namespace distillab
