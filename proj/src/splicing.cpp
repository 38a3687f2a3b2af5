#include "distillab/splicing.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "distillab/errors.hpp"

namespace distillab {

namespace fs = std::filesystem;

void validate_spans(const std::vector<SyllableSpan>& spans, std::size_t length) {
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    if (s.start_sample >= s.end_sample) {
      throw ArgumentError("span " + std::to_string(i) + " ('" + s.label + "') is empty or reversed");
    }
    if (s.end_sample > length) {
      throw ArgumentError("span " + std::to_string(i) + " ('" + s.label + "') ends at sample " +
                          std::to_string(s.end_sample) + " past utterance length " + std::to_string(length));
    }
    if (i > 0 && s.start_sample < spans[i - 1].end_sample) {
      throw ArgumentError("span " + std::to_string(i) + " ('" + s.label + "') overlaps or precedes span " +
                          std::to_string(i - 1));
    }
  }
}

Segmentation segment(const std::vector<SyllableSpan>& spans, std::size_t length) {
  validate_spans(spans, length);
  Segmentation seg;
  if (spans.empty()) {
    seg.leading = {0, length};
    return seg;
  }
  seg.leading = {0, spans.front().start_sample};
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const std::size_t end = i + 1 < spans.size() ? spans[i + 1].start_sample : length;
    seg.segments.push_back({spans[i].start_sample, end});
  }
  return seg;
}

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::size_t to_sample(double sec) { return static_cast<std::size_t>(std::llround(sec * kSampleRate)); }

}  // namespace

SpanTable parse_alignment_text(const std::string& text, const std::map<std::string, std::size_t>* lengths) {
  struct Row {
    SyllableSpan span;
    std::size_t line;
  };
  std::map<std::string, std::vector<Row>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto f = split_ws(line);
    if (f.empty()) continue;
    if (f.size() != 4) throw ParseError("expected 'utt-id start-sec dur-sec label', got " + std::to_string(f.size()) + " fields", lineno);
    double start = 0, dur = 0;
    if (!parse_double(f[1], start)) throw ParseError("bad start time '" + f[1] + "'", lineno);
    if (!parse_double(f[2], dur)) throw ParseError("bad duration '" + f[2] + "'", lineno);
    if (start < 0) throw ParseError("negative start time", lineno);
    if (dur <= 0) throw ParseError("non-positive duration " + f[2], lineno);
    if (f[3].find('.') != std::string::npos) throw ParseError("label '" + f[3] + "' contains '.'", lineno);
    SyllableSpan s{to_sample(start), to_sample(start + dur), f[3]};
    if (s.end_sample <= s.start_sample) throw ParseError("duration rounds to zero samples", lineno);
    if (lengths) {
      const auto it = lengths->find(f[0]);
      if (it == lengths->end()) throw ParseError("unknown utterance '" + f[0] + "'", lineno);
      if (s.end_sample > it->second) {
        throw ParseError("span ends at sample " + std::to_string(s.end_sample) + " past utterance length " +
                             std::to_string(it->second),
                         lineno);
      }
    }
    rows[f[0]].push_back({std::move(s), lineno});
  }

  SpanTable table;
  for (auto& [id, list] : rows) {
    std::stable_sort(list.begin(), list.end(),
                     [](const Row& a, const Row& b) { return a.span.start_sample < b.span.start_sample; });
    auto& spans = table[id];
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (i > 0 && list[i].span.start_sample < list[i - 1].span.end_sample) {
        const std::size_t bad = std::max(list[i].line, list[i - 1].line);
        throw ParseError("span overlaps another span of utterance '" + id + "'", bad);
      }
      spans.push_back(std::move(list[i].span));
    }
  }
  return table;
}

SpanTable parse_alignment(const fs::path& path, const std::map<std::string, std::size_t>* lengths) {
  return parse_alignment_text(read_text(path), lengths);
}

std::string format_alignment(const SpanTable& table) {
  std::string out;
  char buf[64];
  for (const auto& [id, spans] : table) {
    for (const auto& s : spans) {
      // Sample counts divided by 16000 are exact at 7 decimals.
      std::snprintf(buf, sizeof buf, " %.7f %.7f ", static_cast<double>(s.start_sample) / kSampleRate,
                    static_cast<double>(s.length()) / kSampleRate);
      out += id;
      out += buf;
      out += s.label;
      out += '\n';
    }
  }
  return out;
}

void write_alignment(const SpanTable& table, const fs::path& path) { write_text(path, format_alignment(table)); }

std::vector<LexiconEntry> parse_lexicon_text(const std::string& text) {
  std::vector<LexiconEntry> entries;
  std::set<std::pair<std::string, std::vector<std::vector<std::string>>>> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected 'word<TAB>pronunciation'", lineno);
    LexiconEntry e;
    e.word = line.substr(0, tab);
    if (e.word.empty()) throw ParseError("empty word", lineno);
    std::vector<std::string> current;
    for (const auto& tok : split_ws(line.substr(tab + 1))) {
      if (tok == ".") {
        if (current.empty()) throw ParseError("empty syllable in pronunciation of '" + e.word + "'", lineno);
        e.syllables.push_back(std::move(current));
        current.clear();
      } else {
        current.push_back(tok);
      }
    }
    if (current.empty()) {
      throw ParseError(e.syllables.empty() ? "empty pronunciation for '" + e.word + "'"
                                           : "trailing '.' in pronunciation of '" + e.word + "'",
                       lineno);
    }
    e.syllables.push_back(std::move(current));
    if (!seen.emplace(e.word, e.syllables).second) {
      throw ParseError("duplicate lexicon entry for '" + e.word + "'", lineno);
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<LexiconEntry> parse_lexicon(const fs::path& path) { return parse_lexicon_text(read_text(path)); }

SplicedUtterance shuffle_splice(const Utterance& utt, const std::vector<SyllableSpan>& spans,
                                const std::vector<std::size_t>& permutation, double crossfade_ms) {
  const std::size_t n = spans.size();
  if (permutation.size() != n) {
    throw ArgumentError("permutation has " + std::to_string(permutation.size()) + " entries for " +
                        std::to_string(n) + " segments");
  }
  std::vector<bool> hit(n, false);
  for (std::size_t p : permutation) {
    if (p >= n || hit[p]) throw ArgumentError("permutation is not a bijection on the segments");
    hit[p] = true;
  }
  if (crossfade_ms < 0) throw ArgumentError("crossfade must be non-negative");
  const Segmentation seg = segment(spans, utt.samples.size());
  const auto fade_len = static_cast<std::size_t>(std::llround(crossfade_ms * kSampleRate / 1000.0));

  SplicedUtterance out;
  out.permutation = permutation;
  out.shuffled = !std::is_sorted(permutation.begin(), permutation.end());
  out.utterance.id = utt.id;
  out.utterance.sample_rate = utt.sample_rate;
  auto& y = out.utterance.samples;
  y.reserve(utt.samples.size());
  y.assign(utt.samples.begin(), utt.samples.begin() + static_cast<std::ptrdiff_t>(seg.leading.end));

  std::size_t prev_len = seg.leading.length();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = permutation[k];
    const Segment& s = seg.segments[src];
    const std::size_t f = std::min({fade_len, prev_len, s.length()});
    // Overlap-add the first f samples of this segment onto the last f of the output.
    const std::size_t base = y.size() - f;
    for (std::size_t i = 0; i < f; ++i) {
      const float w = static_cast<float>(i + 1) / static_cast<float>(f + 1);
      y[base + i] = (1.0f - w) * y[base + i] + w * utt.samples[s.begin + i];
    }
    y.insert(y.end(), utt.samples.begin() + static_cast<std::ptrdiff_t>(s.begin + f),
             utt.samples.begin() + static_cast<std::ptrdiff_t>(s.end));
    const std::size_t offset = base;
    const auto& sp = spans[src];
    out.spans.push_back({offset + (sp.start_sample - s.begin), offset + (sp.end_sample - s.begin), sp.label});
    prev_len = s.length();
  }
  // With crossfade a span start can be pulled into the previous segment's tail;
  // clamp so the output spans still satisfy the invariants.
  for (std::size_t k = 1; k < out.spans.size(); ++k) {
    out.spans[k].start_sample = std::max(out.spans[k].start_sample, out.spans[k - 1].end_sample);
    out.spans[k].end_sample = std::max(out.spans[k].end_sample, out.spans[k].start_sample + 1);
  }
  return out;
}

SplicedUtterance maybe_shuffle(const Utterance& utt, const std::vector<SyllableSpan>& spans, Rng& rng,
                               double p_shuffle, double crossfade_ms) {
  const std::size_t n = spans.size();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  const bool draw = rng.uniform() < p_shuffle;
  if (!draw || n < 2) {
    validate_spans(spans, utt.samples.size());
    return {utt, spans, perm, false};
  }
  const auto identity = perm;
  do {
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
  } while (perm == identity);
  return shuffle_splice(utt, spans, perm, crossfade_ms);
}

double mix_scale(double primary_energy, double secondary_energy, double snr_db) {
  return std::sqrt(primary_energy / (secondary_energy * std::pow(10.0, snr_db / 10.0)));
}

MixResult mix_pair(const Utterance& primary, const Utterance& secondary, Rng& rng, const MixSpec& spec) {
  if (primary.samples.empty() || secondary.samples.empty()) throw ArgumentError("mix_pair needs non-empty utterances");
  if (spec.max_overlap <= 0 || spec.max_overlap > 1) throw ArgumentError("max_overlap must be in (0, 1]");
  if (spec.snr_db_hi < spec.snr_db_lo) throw ArgumentError("snr range is reversed");
  const std::size_t np = primary.samples.size(), ns = secondary.samples.size();
  const std::size_t cap = std::max<std::size_t>(1, static_cast<std::size_t>(spec.max_overlap * static_cast<double>(np)));
  const std::size_t len = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(std::min(cap, ns))));
  const auto start_p = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(np - len)));
  const auto start_s = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(ns - len)));
  const double snr = rng.uniform(spec.snr_db_lo, spec.snr_db_hi);

  MixResult r{primary, false, start_p, len, snr, 0.0};
  double ep = 0, es = 0;
  for (std::size_t i = 0; i < len; ++i) {
    ep += static_cast<double>(primary.samples[start_p + i]) * primary.samples[start_p + i];
    es += static_cast<double>(secondary.samples[start_s + i]) * secondary.samples[start_s + i];
  }
  if (es == 0.0) return r;
  r.scale = mix_scale(ep, es, snr);
  r.mixed = true;
  for (std::size_t i = 0; i < len; ++i) {
    const double v = primary.samples[start_p + i] + r.scale * secondary.samples[start_s + i];
    r.utterance.samples[start_p + i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return r;
}

std::size_t BatchMixResult::selected() const {
  return static_cast<std::size_t>(std::count_if(partner.begin(), partner.end(), [](const auto& p) { return p.has_value(); }));
}

BatchMixResult batch_mix(const std::vector<Utterance>& batch, Rng& rng, double p_mix, const MixSpec& spec) {
  BatchMixResult out{batch, std::vector<std::optional<std::size_t>>(batch.size())};
  const std::size_t b = batch.size();
  for (std::size_t i = 0; i < b; ++i) {
    if (!(rng.uniform() < p_mix) || b < 2) continue;
    std::size_t j = static_cast<std::size_t>(rng.uniform_int(b - 1));
    if (j >= i) ++j;
    out.batch[i] = mix_pair(batch[i], batch[j], rng, spec).utterance;
    out.partner[i] = j;
  }
  return out;
}

}  // namespace distillab
