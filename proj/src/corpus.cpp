#include "distillab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "distillab/errors.hpp"

namespace distillab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kConsonants[] = {"k", "t", "p", "s", "m", "n", "b", "d", "g", "l", "r", "h"};
constexpr const char* kVowels[] = {"a", "i", "u", "e", "o"};
constexpr int kNumConsonants = 12;
constexpr int kNumVowels = 5;

// Formant targets per vowel, Hz.
constexpr double kF1[] = {750, 300, 350, 500, 500};
constexpr double kF2[] = {1250, 2250, 800, 1900, 950};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void split_label(const std::string& label, int& c, int& v) {
  for (c = 0; c < kNumConsonants; ++c) {
    const std::string cons = kConsonants[c];
    if (label.rfind(cons, 0) != 0) continue;
    for (v = 0; v < kNumVowels; ++v)
      if (label.substr(cons.size()) == kVowels[v]) return;
  }
  throw ArgumentError("'" + label + "' is not a synthetic syllable label");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::pair<std::string, std::string>> tab_lines(const fs::path& path) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path.filename().string() + ": expected 'id<TAB>value'", lineno);
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

}  // namespace

void CorpusSpec::validate() const {
  if (n_utts < 0) throw ArgumentError("n_utts must be non-negative");
  if (inventory < 2) throw ArgumentError("syllable inventory must have at least 2 entries");
  if (inventory > kNumConsonants * kNumVowels) {
    throw ArgumentError("syllable inventory is limited to " + std::to_string(kNumConsonants * kNumVowels));
  }
  if (min_syllables < 1 || max_syllables < min_syllables) throw ArgumentError("bad syllables-per-utterance range");
  if (min_syllable_ms < 40 || max_syllable_ms < min_syllable_ms) {
    throw ArgumentError("syllable durations must be at least 40 ms with lo <= hi");
  }
}

void to_json(json& j, const CorpusSpec& s) {
  j = json{{"n_utts", s.n_utts},
           {"inventory", s.inventory},
           {"syllables_per_utt", {s.min_syllables, s.max_syllables}},
           {"syllable_ms", {s.min_syllable_ms, s.max_syllable_ms}},
           {"seed", s.seed}};
}

void from_json(const json& j, CorpusSpec& s) {
  s = CorpusSpec{};
  if (j.contains("n_utts")) j.at("n_utts").get_to(s.n_utts);
  if (j.contains("inventory")) j.at("inventory").get_to(s.inventory);
  if (j.contains("syllables_per_utt")) {
    j.at("syllables_per_utt").at(0).get_to(s.min_syllables);
    j.at("syllables_per_utt").at(1).get_to(s.max_syllables);
  }
  if (j.contains("syllable_ms")) {
    j.at("syllable_ms").at(0).get_to(s.min_syllable_ms);
    j.at("syllable_ms").at(1).get_to(s.max_syllable_ms);
  }
  if (j.contains("seed")) j.at("seed").get_to(s.seed);
}

std::vector<std::string> syllable_inventory(int size) {
  if (size < 0 || size > kNumConsonants * kNumVowels) throw ArgumentError("inventory size out of range");
  std::vector<std::string> out;
  for (int i = 0; i < size; ++i) out.push_back(std::string(kConsonants[i / kNumVowels]) + kVowels[i % kNumVowels]);
  return out;
}

std::vector<float> synthesize_syllable(const std::string& label, const CorpusSpec& spec) {
  int c = 0, v = 0;
  split_label(label, c, v);
  const int span_ms = spec.max_syllable_ms - spec.min_syllable_ms + 1;
  const int ms = spec.min_syllable_ms + static_cast<int>(fnv1a(label) % static_cast<std::uint64_t>(span_ms));
  const std::size_t n = static_cast<std::size_t>(ms) * kSampleRate / 1000;
  const std::size_t onset = n / 4;
  const std::size_t ramp = std::min<std::size_t>(n / 4, 8 * kSampleRate / 1000);

  const double fc = 1800.0 + 230.0 * c;
  const double f2_start = kF2[v] + 180.0 * ((c % 3) - 1);
  std::vector<float> y(n);
  double ph_c = 0, ph1 = 0, ph2 = 0;
  const double dt = 2.0 * std::numbers::pi / kSampleRate;
  for (std::size_t i = 0; i < n; ++i) {
    double env = 1.0;
    if (i < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / ramp);
    if (n - 1 - i < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(n - 1 - i) / ramp);
    double s = 0;
    if (i < onset) {
      const double decay = std::exp(-4.0 * static_cast<double>(i) / onset);
      ph_c += dt * fc;
      s += 0.35 * decay * std::sin(ph_c);
    }
    // Vowel fades in over the onset while F2 glides from a consonant-coloured start.
    const double frac = std::min(1.0, static_cast<double>(i) / std::max<std::size_t>(onset, 1));
    const double f2 = f2_start + (kF2[v] - f2_start) * frac;
    ph1 += dt * kF1[v];
    ph2 += dt * f2;
    s += frac * (0.4 * std::sin(ph1) + 0.25 * std::sin(ph2));
    y[i] = static_cast<float>(env * s);
  }
  return y;
}

std::vector<const CorpusItem*> Corpus::train() const {
  std::vector<const CorpusItem*> out;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (i % 10 != 9) out.push_back(&items[i]);
  return out;
}

std::vector<const CorpusItem*> Corpus::dev() const {
  std::vector<const CorpusItem*> out;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (i % 10 == 9) out.push_back(&items[i]);
  return out;
}

Corpus generate_synthetic_corpus(const CorpusSpec& spec, const fs::path& out_dir) {
  spec.validate();
  Corpus corpus;
  corpus.vocab = syllable_inventory(spec.inventory);
  const int v = spec.inventory;
  std::vector<std::vector<float>> sounds;
  for (const auto& label : corpus.vocab) sounds.push_back(synthesize_syllable(label, spec));

  Rng rng(spec.seed);
  // Phonotactics: every syllable has three favoured successors.
  std::vector<std::vector<int>> favoured(v);
  for (auto& f : favoured) {
    while (f.size() < 3 && static_cast<int>(f.size()) < v) {
      const int c = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(v)));
      if (std::find(f.begin(), f.end(), c) == f.end()) f.push_back(c);
    }
  }

  auto ms_samples = [](std::int64_t ms) { return static_cast<std::size_t>(ms) * kSampleRate / 1000; };
  for (int u = 0; u < spec.n_utts; ++u) {
    char id[32];
    std::snprintf(id, sizeof id, "utt%05d", u);
    CorpusItem item;
    item.utterance.id = id;
    auto& y = item.utterance.samples;
    const auto n_syl = rng.uniform_int(spec.min_syllables, spec.max_syllables);
    const double gain = rng.uniform(0.6, 1.0);
    y.assign(ms_samples(rng.uniform_int(20, 60)), 0.0f);
    int prev = -1;
    for (std::int64_t k = 0; k < n_syl; ++k) {
      int s;
      if (prev >= 0 && rng.uniform() < 0.7) {
        s = favoured[prev][rng.uniform_int(favoured[prev].size())];
      } else {
        s = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(v)));
      }
      if (k > 0) y.resize(y.size() + ms_samples(rng.uniform_int(0, 30)), 0.0f);
      const std::size_t start = y.size();
      for (float x : sounds[s]) y.push_back(static_cast<float>(gain * x));
      item.spans.push_back({start, y.size(), corpus.vocab[s]});
      item.transcript.push_back(corpus.vocab[s]);
      prev = s;
    }
    y.resize(y.size() + ms_samples(rng.uniform_int(20, 60)), 0.0f);
    for (auto& x : y) x = quantize_pcm16(x + static_cast<float>(0.002 * rng.normal()));
    corpus.items.push_back(std::move(item));
  }
  write_corpus(corpus, out_dir, &spec);
  return corpus;
}

void write_corpus(const Corpus& corpus, const fs::path& out_dir, const CorpusSpec* spec) {
  std::error_code ec;
  fs::create_directories(out_dir / "wav", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "wav").string() + ": " + ec.message());
  std::string wav_list, transcripts;
  SpanTable table;
  for (const auto& item : corpus.items) {
    const std::string& id = item.utterance.id;
    write_wav(out_dir / "wav" / (id + ".wav"), item.utterance.samples);
    wav_list += id + "\twav/" + id + ".wav\n";
    transcripts += id + "\t";
    for (std::size_t k = 0; k < item.transcript.size(); ++k) transcripts += (k ? " " : "") + item.transcript[k];
    transcripts += "\n";
    table[id] = item.spans;
  }

  std::string lexicon;
  for (const auto& label : corpus.vocab) {
    int c = 0, vi = 0;
    split_label(label, c, vi);
    lexicon += label + "\t" + kConsonants[c] + " " + kVowels[vi] + "\n";
  }
  json meta{{"vocab", corpus.vocab}};
  if (spec) meta["spec"] = *spec;
  write_text(out_dir / "wav.list", wav_list);
  write_text(out_dir / "transcripts.txt", transcripts);
  write_alignment(table, out_dir / "alignment.txt");
  write_text(out_dir / "lexicon.txt", lexicon);
  write_text(out_dir / "corpus.json", meta.dump(1) + "\n");
}

Corpus load_corpus(const fs::path& dir) {
  Corpus corpus;
  std::map<std::string, std::size_t> lengths;
  for (const auto& [id, rel] : tab_lines(dir / "wav.list")) {
    CorpusItem item;
    item.utterance = read_wav(dir / rel, id);
    item.utterance.validate();
    lengths[id] = item.utterance.samples.size();
    corpus.items.push_back(std::move(item));
  }
  const SpanTable table = parse_alignment(dir / "alignment.txt", &lengths);
  std::map<std::string, std::vector<std::string>> transcripts;
  for (const auto& [id, text] : tab_lines(dir / "transcripts.txt")) {
    std::istringstream ss(text);
    std::string tok;
    auto& t = transcripts[id];
    while (ss >> tok) t.push_back(tok);
  }
  std::set<std::string> labels;
  for (auto& item : corpus.items) {
    const std::string& id = item.utterance.id;
    if (auto it = table.find(id); it != table.end()) item.spans = it->second;
    const auto it = transcripts.find(id);
    if (it == transcripts.end()) throw FormatError("utterance '" + id + "' has no transcript");
    item.transcript = it->second;
    labels.insert(item.transcript.begin(), item.transcript.end());
  }
  if (fs::exists(dir / "corpus.json")) {
    try {
      corpus.vocab = json::parse(read_text(dir / "corpus.json")).at("vocab").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw FormatError("corrupt " + (dir / "corpus.json").string() + ": " + e.what());
    }
  } else {
    corpus.vocab.assign(labels.begin(), labels.end());
  }
  return corpus;
}

}  // namespace distillab
