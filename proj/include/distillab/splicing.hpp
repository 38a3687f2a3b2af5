#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "distillab/audio.hpp"
#include "distillab/rng.hpp"

namespace distillab {

struct SyllableSpan {
  std::size_t start_sample = 0;
  std::size_t end_sample = 0;
  std::string label;

  std::size_t length() const { return end_sample - start_sample; }
  bool operator==(const SyllableSpan&) const = default;
};

using SpanTable = std::map<std::string, std::vector<SyllableSpan>>;

// Half-open sample range.
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t length() const { return end - begin; }
};

// Leading region [0, first start) followed by one segment per syllable, each
// running to the next syllable start; the last one runs to the utterance end.
struct Segmentation {
  Segment leading;
  std::vector<Segment> segments;
};

// Throws ArgumentError if spans are unsorted, overlapping, empty, or run past
// `length` samples.
void validate_spans(const std::vector<SyllableSpan>& spans, std::size_t length);
Segmentation segment(const std::vector<SyllableSpan>& spans, std::size_t length);

// `utt-id start-sec dur-sec label` per line. When `lengths` is given, spans
// past the end of their utterance are rejected.
SpanTable parse_alignment(const std::filesystem::path& path,
                          const std::map<std::string, std::size_t>* lengths = nullptr);
SpanTable parse_alignment_text(const std::string& text, const std::map<std::string, std::size_t>* lengths = nullptr);
std::string format_alignment(const SpanTable& table);
void write_alignment(const SpanTable& table, const std::filesystem::path& path);

struct LexiconEntry {
  std::string word;
  std::vector<std::vector<std::string>> syllables;
  bool operator==(const LexiconEntry&) const = default;
};

// `word<TAB>p1 p2 . p3`. A word may have several distinct pronunciations;
// repeating an identical (word, pronunciation) line is an error.
std::vector<LexiconEntry> parse_lexicon(const std::filesystem::path& path);
std::vector<LexiconEntry> parse_lexicon_text(const std::string& text);

struct SplicedUtterance {
  Utterance utterance;
  std::vector<SyllableSpan> spans;
  std::vector<std::size_t> permutation;  // output slot k holds original segment permutation[k]
  bool shuffled = false;
};

// Permutation entries are 0-based segment indices.
SplicedUtterance shuffle_splice(const Utterance& utt, const std::vector<SyllableSpan>& spans,
                                const std::vector<std::size_t>& permutation, double crossfade_ms = 0.0);

SplicedUtterance maybe_shuffle(const Utterance& utt, const std::vector<SyllableSpan>& spans, Rng& rng,
                               double p_shuffle = 0.375, double crossfade_ms = 0.0);

struct MixSpec {
  double snr_db_lo = 0.0;
  double snr_db_hi = 10.0;
  double max_overlap = 0.5;
};

double mix_scale(double primary_energy, double secondary_energy, double snr_db);

struct MixResult {
  Utterance utterance;
  bool mixed = false;
  std::size_t region_start = 0;
  std::size_t region_length = 0;
  double snr_db = 0.0;
  double scale = 0.0;
};

MixResult mix_pair(const Utterance& primary, const Utterance& secondary, Rng& rng, const MixSpec& spec = {});

struct BatchMixResult {
  std::vector<Utterance> batch;
  std::vector<std::optional<std::size_t>> partner;  // per slot, index of the mixed-in utterance
  std::size_t selected() const;
};

BatchMixResult batch_mix(const std::vector<Utterance>& batch, Rng& rng, double p_mix = 0.15, const MixSpec& spec = {});

}  // namespace distillab
