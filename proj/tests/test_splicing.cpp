#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "distillab/corpus.hpp"
#include "distillab/errors.hpp"
#include "distillab/splicing.hpp"
#include "test_util.hpp"

using namespace distillab;

namespace {

Utterance ramp(std::size_t n) {
  Utterance u{"u", std::vector<float>(n)};
  for (std::size_t i = 0; i < n; ++i) u.samples[i] = static_cast<float>(i) / static_cast<float>(n);
  return u;
}

// Random utterance with 1..6 random spans.
std::pair<Utterance, std::vector<SyllableSpan>> random_case(Rng& rng) {
  const std::size_t n = static_cast<std::size_t>(rng.uniform_int(50, 400));
  Utterance u{"r", std::vector<float>(n)};
  for (auto& x : u.samples) x = static_cast<float>(rng.uniform(-1, 1));
  std::vector<std::size_t> cuts;
  const auto k = rng.uniform_int(1, 6);
  while (static_cast<std::int64_t>(cuts.size()) < 2 * k) {
    const auto c = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n)));
    if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<SyllableSpan> spans;
  for (std::size_t i = 0; i < cuts.size(); i += 2) spans.push_back({cuts[i], cuts[i + 1], "s" + std::to_string(i / 2)});
  return {u, spans};
}

std::vector<std::size_t> random_perm(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.uniform_int(i)]);
  return p;
}

}  // namespace

TEST_CASE("alignment parsing") {
  auto t = parse_alignment_text("utt1 0.000 0.250 KA\n");
  CHECK(t.at("utt1") == std::vector<SyllableSpan>{{0, 4000, "KA"}});

  t = parse_alignment_text("u 0.25 0.25 B\nu 0 0.25 A\n");
  REQUIRE(t.at("u").size() == 2);
  CHECK(t.at("u")[0] == SyllableSpan{0, 4000, "A"});
  CHECK(t.at("u")[1] == SyllableSpan{4000, 8000, "B"});

  try {
    parse_alignment_text("u 0 0.25 A\n\nu 0.1875 0.125 B\n");
    FAIL("overlap accepted");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_alignment_text("u 0 -0.1 A\n"), ParseError);
  CHECK_THROWS_AS(parse_alignment_text("u 0 0.1 A.B\n"), ParseError);
  CHECK_THROWS_AS(parse_alignment_text("u 0 x A\n"), ParseError);
  CHECK_THROWS_AS(parse_alignment_text("u 0 0.1\n"), ParseError);

  const std::map<std::string, std::size_t> lengths{{"u", 3000}};
  try {
    parse_alignment_text("u 0 0.1 A\nu 0.1 0.1 B\n", &lengths);
    FAIL("span past end accepted");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("alignment write then parse is identity") {
  Rng rng(1);
  SpanTable table;
  for (int u = 0; u < 50; ++u) {
    auto [utt, spans] = random_case(rng);
    table["utt" + std::to_string(u)] = spans;
  }
  CHECK(parse_alignment_text(format_alignment(table)) == table);
  testutil::TempDir dir("align");
  write_alignment(table, dir / "a.txt");
  CHECK(parse_alignment(dir / "a.txt") == table);
}

TEST_CASE("lexicon parsing") {
  auto lex = parse_lexicon_text("hello\thh ah . l ow\na\tah\n");
  REQUIRE(lex.size() == 2);
  CHECK(lex[0].syllables == std::vector<std::vector<std::string>>{{"hh", "ah"}, {"l", "ow"}});
  CHECK(lex[1].syllables.size() == 1);
  CHECK_THROWS_AS(parse_lexicon_text("bad\t.\n"), ParseError);
  CHECK_THROWS_AS(parse_lexicon_text("bad\t\n"), ParseError);
  CHECK_THROWS_AS(parse_lexicon_text("bad\ta . . b\n"), ParseError);
  CHECK_THROWS_AS(parse_lexicon_text("nofield\n"), ParseError);
  // Variants are fine; a repeated identical line is not.
  CHECK(parse_lexicon_text("read\tr iy d\nread\tr eh d\n").size() == 2);
  try {
    parse_lexicon_text("x\ta\ny\tb\nx\ta\n");
    FAIL("duplicate accepted");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("segments partition the utterance") {
  const auto u = ramp(100);
  const std::vector<SyllableSpan> spans{{10, 30, "a"}, {40, 60, "b"}, {60, 90, "c"}};
  const auto seg = segment(spans, 100);
  CHECK(seg.leading.begin == 0);
  CHECK(seg.leading.end == 10);
  REQUIRE(seg.segments.size() == 3);
  CHECK(seg.segments[0].end == 40);
  CHECK(seg.segments[1].end == 60);
  CHECK(seg.segments[2].end == 100);

  CHECK_THROWS_AS(segment({{10, 30, "a"}, {20, 40, "b"}}, 100), ArgumentError);
  CHECK_THROWS_AS(segment({{10, 130, "a"}}, 100), ArgumentError);
  CHECK_THROWS_AS(segment({{10, 10, "a"}}, 100), ArgumentError);
}

TEST_CASE("shuffle_splice") {
  SUBCASE("identity is bit-exact") {
    const auto u = ramp(100);
    const std::vector<SyllableSpan> spans{{10, 30, "a"}, {40, 60, "b"}};
    const auto out = shuffle_splice(u, spans, {0, 1});
    CHECK(out.utterance.samples == u.samples);
    CHECK(out.spans == spans);
    CHECK_FALSE(out.shuffled);
  }
  SUBCASE("swapping two equal halves") {
    const auto u = ramp(90);
    const std::vector<SyllableSpan> spans{{10, 50, "a"}, {50, 90, "b"}};
    const auto out = shuffle_splice(u, spans, {1, 0});
    std::vector<float> expect(u.samples.begin(), u.samples.begin() + 10);
    expect.insert(expect.end(), u.samples.begin() + 50, u.samples.end());
    expect.insert(expect.end(), u.samples.begin() + 10, u.samples.begin() + 50);
    CHECK(out.utterance.samples == expect);
    CHECK(out.spans[0] == SyllableSpan{10, 50, "b"});
    CHECK(out.spans[1] == SyllableSpan{50, 90, "a"});
    CHECK(out.shuffled);
  }
  SUBCASE("non-bijective permutations are rejected") {
    const auto u = ramp(100);
    const std::vector<SyllableSpan> spans{{10, 30, "a"}, {40, 60, "b"}};
    CHECK_THROWS_AS(shuffle_splice(u, spans, {0, 0}), ArgumentError);
    CHECK_THROWS_AS(shuffle_splice(u, spans, {0}), ArgumentError);
    CHECK_THROWS_AS(shuffle_splice(u, spans, {0, 2}), ArgumentError);
  }
  SUBCASE("random permutations conserve length and sample multiset") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
      auto [u, spans] = random_case(rng);
      const auto out = shuffle_splice(u, spans, random_perm(spans.size(), rng));
      REQUIRE(out.utterance.samples.size() == u.samples.size());
      auto a = u.samples, b = out.utterance.samples;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      CHECK(a == b);
      validate_spans(out.spans, out.utterance.samples.size());
      // Every output span carries the samples of its source span.
      for (std::size_t k = 0; k < out.spans.size(); ++k) {
        const auto& src = spans[out.permutation[k]];
        const auto& dst = out.spans[k];
        CHECK(dst.label == src.label);
        CHECK(std::equal(u.samples.begin() + src.start_sample, u.samples.begin() + src.end_sample,
                         out.utterance.samples.begin() + dst.start_sample));
      }
    }
  }
  SUBCASE("crossfade shortens by the overlap and keeps spans valid") {
    const auto u = ramp(4000);
    const std::vector<SyllableSpan> spans{{500, 1500, "a"}, {1500, 2500, "b"}, {2600, 3800, "c"}};
    const auto out = shuffle_splice(u, spans, {2, 0, 1}, 5.0);
    CHECK(out.utterance.samples.size() == 4000 - 3 * 80);
    validate_spans(out.spans, out.utterance.samples.size());
    CHECK_THROWS_AS(shuffle_splice(u, spans, {2, 0, 1}, -1.0), ArgumentError);
  }
}

TEST_CASE("maybe_shuffle") {
  const auto u = ramp(300);
  const std::vector<SyllableSpan> spans{{10, 60, "a"}, {70, 120, "b"}, {150, 200, "c"}, {220, 290, "d"}};
  Rng rng(3);
  for (int i = 0; i < 100; ++i) CHECK_FALSE(maybe_shuffle(u, spans, rng, 0.0).shuffled);

  const std::vector<SyllableSpan> one{{10, 60, "a"}};
  const auto kept = maybe_shuffle(u, one, rng, 1.0);
  CHECK_FALSE(kept.shuffled);
  CHECK(kept.utterance.samples == u.samples);

  for (int i = 0; i < 100; ++i) {
    const auto s = maybe_shuffle(u, spans, rng, 1.0);
    CHECK(s.shuffled);
    CHECK(s.utterance.samples != u.samples);
  }

  // Exactly one draw is consumed when the utterance is left alone.
  Rng a(4), b(4);
  maybe_shuffle(u, spans, a, 0.0);
  b.uniform();
  CHECK(a.next_u64() == b.next_u64());

  Rng c(5), d(5);
  CHECK(maybe_shuffle(u, spans, c).utterance.samples == maybe_shuffle(u, spans, d).utterance.samples);

  Rng mc(6);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) hits += maybe_shuffle(u, spans, mc, 0.375).shuffled;
  CHECK(std::abs(hits / 10000.0 - 0.375) <= 0.01);
}

TEST_CASE("mixing") {
  CHECK(mix_scale(2.0, 2.0, 0.0) == doctest::Approx(1.0));
  CHECK(mix_scale(2.0, 2.0, 10.0) == doctest::Approx(std::sqrt(0.1)));
  CHECK(mix_scale(4.0, 1.0, 0.0) == doctest::Approx(2.0));

  Rng rng(7);
  Utterance p{"p", std::vector<float>(1000)}, s{"s", std::vector<float>(800)};
  for (auto& x : p.samples) x = static_cast<float>(0.2 * rng.normal());
  for (auto& x : s.samples) x = static_cast<float>(0.2 * rng.normal());

  SUBCASE("region-level SNR matches the draw") {
    for (int i = 0; i < 20; ++i) {
      const auto r = mix_pair(p, s, rng);
      REQUIRE(r.mixed);
      CHECK(r.region_length >= 1);
      CHECK(r.region_length <= 500);
      CHECK(r.snr_db >= 0.0);
      CHECK(r.snr_db < 10.0);
      double ep = 0, en = 0;
      for (std::size_t k = 0; k < r.region_length; ++k) {
        const double a = p.samples[r.region_start + k];
        const double added = r.utterance.samples[r.region_start + k] - a;
        ep += a * a;
        en += added * added;
      }
      CHECK(10 * std::log10(ep / en) == doctest::Approx(r.snr_db).epsilon(1e-3));
      // Outside the region nothing changes.
      for (std::size_t k = 0; k < r.region_start; ++k) CHECK(r.utterance.samples[k] == p.samples[k]);
    }
  }
  SUBCASE("silent secondary leaves the primary untouched") {
    Utterance quiet{"q", std::vector<float>(800, 0.0f)};
    const auto r = mix_pair(p, quiet, rng);
    CHECK_FALSE(r.mixed);
    CHECK(r.utterance.samples == p.samples);
  }
  SUBCASE("output is clipped") {
    Utterance loud = p;
    for (auto& x : loud.samples) x = 0.99f;
    const auto r = mix_pair(loud, s, rng, MixSpec{0.0, 0.0, 1.0});
    for (float x : r.utterance.samples) CHECK(std::abs(x) <= 1.0f);
  }
}

TEST_CASE("batch_mix") {
  Rng rng(8);
  std::vector<Utterance> batch;
  for (int i = 0; i < 6; ++i) {
    Utterance u{"b" + std::to_string(i), std::vector<float>(200)};
    for (auto& x : u.samples) x = static_cast<float>(0.1 * rng.normal());
    batch.push_back(u);
  }
  auto none = batch_mix(batch, rng, 0.0);
  CHECK(none.selected() == 0);
  for (std::size_t i = 0; i < batch.size(); ++i) CHECK(none.batch[i] == batch[i]);

  const std::vector<Utterance> single{batch[0]};
  auto lone = batch_mix(single, rng, 1.0);
  CHECK(lone.selected() == 0);
  CHECK(lone.batch[0] == batch[0]);

  auto all = batch_mix(batch, rng, 1.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    REQUIRE(all.partner[i]);
    CHECK(*all.partner[i] != i);
  }

  Rng mc(9);
  std::size_t mixed = 0;
  for (int b = 0; b < 10002 / 6; ++b) mixed += batch_mix(batch, mc, 0.15).selected();
  CHECK(std::abs(static_cast<double>(mixed) / (10002 / 6 * 6) - 0.15) <= 0.01);
}

TEST_CASE("wav round trip") {
  testutil::TempDir dir("wav");
  std::vector<float> y{0.0f, 0.5f, -0.5f, 1.0f, -1.0f, 1.5f, -2.0f, 0.123456f};
  write_wav(dir / "a.wav", y);
  const auto u = read_wav(dir / "a.wav");
  CHECK(u.id == "a");
  CHECK(u.sample_rate == 16000);
  REQUIRE(u.samples.size() == y.size());
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(u.samples[i] == quantize_pcm16(y[i]));
  CHECK(u.samples[5] == 1.0f);
  CHECK(u.samples[6] == -1.0f);
  std::ofstream(dir / "junk.wav") << "not a wav";
  CHECK_THROWS_AS(read_wav(dir / "junk.wav"), FormatError);
  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), IoError);
}

TEST_CASE("synthetic corpus") {
  CorpusSpec spec;
  spec.n_utts = 30;
  spec.seed = 11;
  testutil::TempDir a("corpA"), b("corpB");
  const auto ca = generate_synthetic_corpus(spec, a.path());
  generate_synthetic_corpus(spec, b.path());

  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  for (const char* f : {"alignment.txt", "transcripts.txt", "wav.list", "lexicon.txt", "corpus.json",
                        "wav/utt00000.wav", "wav/utt00029.wav"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }

  const auto loaded = load_corpus(a.path());
  REQUIRE(loaded.items.size() == 30);
  CHECK(loaded.vocab == ca.vocab);
  CHECK(loaded.vocab.size() == 12);
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(loaded.items[i].utterance.samples == ca.items[i].utterance.samples);
    CHECK(loaded.items[i].spans == ca.items[i].spans);
    CHECK(loaded.items[i].transcript == ca.items[i].transcript);
    CHECK(loaded.items[i].transcript.size() >= 2);
    CHECK(loaded.items[i].transcript.size() <= 5);
  }
  CHECK(loaded.train().size() == 27);
  CHECK(loaded.dev().size() == 3);
  CHECK(parse_lexicon(a / "lexicon.txt").size() == 12);

  // Same label, same sound.
  CHECK(synthesize_syllable("ka", spec) == synthesize_syllable("ka", spec));
  CHECK(synthesize_syllable("ka", spec) != synthesize_syllable("ki", spec));

  spec.n_utts = 0;
  testutil::TempDir e("corpE");
  generate_synthetic_corpus(spec, e.path());
  CHECK(load_corpus(e.path()).items.empty());

  spec.inventory = 1;
  CHECK_THROWS_AS(generate_synthetic_corpus(spec, e.path()), ArgumentError);
  spec.inventory = 12;
  spec.min_syllable_ms = 30;
  CHECK_THROWS_AS(generate_synthetic_corpus(spec, e.path()), ArgumentError);
}

TEST_CASE("alignments of 1000 generated utterances validate") {
  CorpusSpec spec;
  spec.n_utts = 1000;
  spec.seed = 12;
  testutil::TempDir dir("corp1k");
  const auto c = generate_synthetic_corpus(spec, dir.path());
  std::map<std::string, std::size_t> lengths;
  for (const auto& item : c.items) lengths[item.utterance.id] = item.utterance.samples.size();
  const auto table = parse_alignment(dir / "alignment.txt", &lengths);
  CHECK(table.size() == 1000);
  for (const auto& [id, spans] : table) CHECK_NOTHROW(validate_spans(spans, lengths.at(id)));
}
