#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "distillab/audio.hpp"
#include "distillab/splicing.hpp"

namespace distillab {

struct CorpusSpec {
  int n_utts = 200;
  int inventory = 12;
  int min_syllables = 2;
  int max_syllables = 5;
  int min_syllable_ms = 60;
  int max_syllable_ms = 120;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const CorpusSpec& s);
void from_json(const nlohmann::json& j, CorpusSpec& s);

// Consonant-vowel labels: ka ki ku ta ti tu ...
std::vector<std::string> syllable_inventory(int size);

// Waveform of one syllable. Depends only on the label and the configured duration
// range, so every occurrence of a label sounds the same.
std::vector<float> synthesize_syllable(const std::string& label, const CorpusSpec& spec);

struct CorpusItem {
  Utterance utterance;
  std::vector<SyllableSpan> spans;
  std::vector<std::string> transcript;
};

struct Corpus {
  std::vector<std::string> vocab;  // syllable labels, in inventory order
  std::vector<CorpusItem> items;

  // Every tenth utterance (index % 10 == 9) is held out.
  std::vector<const CorpusItem*> train() const;
  std::vector<const CorpusItem*> dev() const;
};

// Writes wav/<id>.wav, wav.list, alignment.txt, transcripts.txt, lexicon.txt
// and corpus.json under out_dir. Output is a pure function of `spec`.
Corpus generate_synthetic_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir);

// Writes the same layout for an existing corpus. corpus.json records the
// generator settings only when one is given.
void write_corpus(const Corpus& corpus, const std::filesystem::path& out_dir, const CorpusSpec* spec = nullptr);

// Reads a directory laid out as above. corpus.json is optional; without it
// the vocabulary is the sorted set of transcript labels.
Corpus load_corpus(const std::filesystem::path& dir);

}  // namespace distillab
