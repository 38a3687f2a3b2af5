#include <doctest.h>

#include <cmath>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "distillab/checkpoint.hpp"
#include "distillab/errors.hpp"
#include "distillab/model.hpp"
#include "test_util.hpp"

using namespace distillab;

namespace {

std::vector<float> noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> w(n);
  for (auto& x : w) x = static_cast<float>(0.3 * rng.normal());
  return w;
}

ModelConfig tiny(int layers) {
  ModelConfig c;
  c.conv_layers = {{8, 4, 2}, {8, 3, 2}};
  c.d_model = 8;
  c.n_layers = layers;
  c.n_heads = 2;
  c.ffn_dim = 16;
  c.dtype = DType::f64;
  return c;
}

bool same(const Tensor<float>& a, const Tensor<float>& b) { return a == b; }

}  // namespace

TEST_CASE("desk conv stack maps one second to 198 frames") {
  const auto cfg = ModelConfig::desk_teacher();
  CHECK(cfg.frames_for(16000) == 198);
  Rng rng(1);
  auto model = AcousticModel<float>::random(cfg, rng);
  Graph<float> g(Mode::eval, false);
  const auto wav = noise(16000, 2);
  auto feats = model.forward_features(g, wav);
  CHECK(feats.shape() == Shape{198, 64});

  // Identical input gives bit-identical frames.
  Graph<float> g2(Mode::eval, false);
  CHECK(same(model.forward_features(g2, wav).value(), feats.value()));
}

TEST_CASE("one receptive field gives one frame, one sample less is rejected") {
  const auto cfg = ModelConfig::desk_teacher();
  const std::size_t rf = cfg.receptive_field();
  CHECK(rf == 225);
  CHECK(cfg.frames_for(rf) == 1);
  CHECK(cfg.frames_for(rf - 1) == 0);
  Rng rng(3);
  auto model = AcousticModel<float>::random(cfg, rng);
  Graph<float> g(Mode::eval, false);
  const auto wav = noise(rf, 4);
  CHECK(model.forward_features(g, wav).dim(0) == 1);
  const std::vector<float> short_wav(wav.begin(), wav.end() - 1);
  CHECK_THROWS_AS(model.forward_features(g, short_wav), InputTooShortError);
}

TEST_CASE("encoder returns n_layers + 1 states of equal shape") {
  auto cfg = ModelConfig::desk_student();
  Rng rng(5);
  auto model = AcousticModel<float>::random(cfg, rng);
  Graph<float> g(Mode::eval, false);
  auto hs = model.forward(g, noise(4000, 6));
  REQUIRE(hs.size() == 5);
  for (std::size_t l = 0; l < hs.size(); ++l) CHECK(hs[l].shape() == hs[0].shape());
  CHECK(hs[0].dim(1) == 64);
}

TEST_CASE("layerdrop") {
  auto cfg = ModelConfig::desk_student();
  const auto wav = noise(3000, 8);

  SUBCASE("p = 1 in train mode passes the input straight through") {
    cfg.layerdrop_p = 1.0;
    Rng init(7);
    auto model = AcousticModel<float>::random(cfg, init);
    Graph<float> g(Mode::train, false);
    Rng rng(9);
    auto hs = model.forward(g, wav, &rng);
    CHECK(same(hs[cfg.n_layers].value(), hs[0].value()));

    // Eval mode ignores layerdrop.
    Graph<float> ge(Mode::eval, false);
    auto he = model.forward(ge, wav);
    CHECK_FALSE(same(he[cfg.n_layers].value(), he[0].value()));
  }
  SUBCASE("p = 0 makes train and eval agree") {
    Rng init(7);
    auto model = AcousticModel<float>::random(cfg, init);
    Graph<float> gt(Mode::train, false), ge(Mode::eval, false);
    Rng rng(9);
    auto a = model.forward(gt, wav, &rng);
    auto b = model.forward(ge, wav);
    for (std::size_t l = 0; l < a.size(); ++l) CHECK(same(a[l].value(), b[l].value()));
  }
  SUBCASE("intermediate p skips some blocks and keeps shapes") {
    cfg.layerdrop_p = 0.5;
    Rng init(7);
    auto model = AcousticModel<float>::random(cfg, init);
    Graph<float> g(Mode::train, false);
    Rng rng(11);
    auto hs = model.forward(g, wav, &rng);
    for (std::size_t l = 0; l < hs.size(); ++l) CHECK(hs[l].shape() == hs[0].shape());
  }
}

TEST_CASE("padding never leaks into valid frames") {
  auto cfg = tiny(2);
  Rng rng(12);
  auto model = AcousticModel<double>::random(cfg, rng);
  const std::size_t valid = 5, padded = 3;
  Tensor<double> proj(Shape{valid + padded, 8});
  for (auto& x : proj.data()) x = rng.normal();
  FrameMask mask = FrameMask::none(valid + padded);
  for (std::size_t t = valid; t < valid + padded; ++t) mask.padded[t] = 1;

  Graph<double> g1(Mode::eval, false);
  auto a = model.encode(g1, g1.constant(proj), nullptr, &mask);

  Tensor<double> other = proj;
  for (std::size_t t = valid; t < valid + padded; ++t)
    for (std::size_t c = 0; c < 8; ++c) other(t, c) = 100.0 * rng.normal();
  Graph<double> g2(Mode::eval, false);
  auto b = model.encode(g2, g2.constant(other), nullptr, &mask);

  for (std::size_t t = 0; t < valid; ++t)
    for (std::size_t c = 0; c < 8; ++c) CHECK(a[2].value()(t, c) == doctest::Approx(b[2].value()(t, c)).epsilon(1e-12));
}

TEST_CASE("parameter counts") {
  CHECK(param_count(tiny(0)).encoder == 0);
  const auto one = param_count(tiny(3)), two = param_count(tiny(6));
  CHECK(two.encoder == 2 * one.encoder);
  CHECK(two.conv == one.conv);

  const auto t = param_count(ModelConfig::desk_teacher()), s = param_count(ModelConfig::desk_student());
  CHECK(2 * s.encoder == t.encoder);
  const double big_ratio = static_cast<double>(param_count(ModelConfig::distil_shape()).total()) /
                           static_cast<double>(param_count(ModelConfig::xlsr53_shape()).total());
  CHECK(big_ratio > 0.45);
  CHECK(big_ratio < 0.55);

  // The formula agrees with the parameters the model actually allocates.
  for (const auto& cfg : {ModelConfig::desk_teacher(), ModelConfig::desk_student(), tiny(3)}) {
    AcousticModel<float> m(cfg);
    std::size_t n = 0;
    for (const auto* p : std::as_const(m).parameters()) n += p->value.size();
    // mask_emb is a parameter of the model but is counted under "other".
    CHECK(n == param_count(cfg).total());
  }
}

TEST_CASE("config validation and presets") {
  auto c = tiny(2);
  c.n_heads = 3;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = tiny(2);
  c.conv_layers.clear();
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = tiny(2);
  c.layerdrop_p = 1.5;
  CHECK_THROWS_AS(c.validate(), ArgumentError);

  CHECK(ModelConfig::preset("xlsr53-shape").n_layers == 24);
  CHECK(ModelConfig::preset("xlsr53-shape").conv_layers.size() == 6);
  CHECK(ModelConfig::preset("distil-shape").n_layers == 12);
  CHECK_THROWS_AS(ModelConfig::preset("nope"), ArgumentError);

  nlohmann::json j = ModelConfig::desk_teacher();
  CHECK(j.get<ModelConfig>() == ModelConfig::desk_teacher());
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

Checkpoint random_checkpoint(int layers, std::uint64_t seed) {
  Rng rng(seed);
  return AcousticModel<double>::random(tiny(layers), rng).to_checkpoint();
}

nlohmann::json read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  return nlohmann::json::parse(in);
}

void write_manifest(const std::filesystem::path& dir, const nlohmann::json& j) {
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << j.dump(1);
}

}  // namespace

TEST_CASE("checkpoint save and load round-trip bit-exactly") {
  testutil::TempDir dir("ckpt");
  const auto ckpt = random_checkpoint(3, 20);
  save_checkpoint(ckpt, dir.path());
  const auto back = load_checkpoint(dir.path());
  CHECK(back.config == ckpt.config);
  REQUIRE(back.tensors.size() == ckpt.tensors.size());
  for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) CHECK(back.tensors[i] == ckpt.tensors[i]);

  // Model built from the reloaded checkpoint reproduces the original forward pass.
  auto a = AcousticModel<double>::from_checkpoint(ckpt);
  auto b = AcousticModel<double>::from_checkpoint(back);
  std::vector<double> wav(200);
  Rng rng(21);
  for (auto& x : wav) x = rng.normal();
  Graph<double> ga(Mode::eval, false), gb(Mode::eval, false);
  CHECK(a.forward(ga, wav)[3].value() == b.forward(gb, wav)[3].value());
}

TEST_CASE("f32 checkpoints load into f64 models") {
  testutil::TempDir dir("ckpt32");
  auto cfg = tiny(2);
  cfg.dtype = DType::f32;
  Rng rng(22);
  auto m = AcousticModel<float>::random(cfg, rng);
  save_checkpoint(m.to_checkpoint(), dir.path());
  auto back = load_checkpoint(dir.path());
  CHECK(back.tensors.front().dtype == DType::f32);
  auto d = AcousticModel<double>::from_checkpoint(back);
  CHECK(d.parameters().front()->value[0] == static_cast<double>(m.parameters().front()->value[0]));
}

TEST_CASE("corrupt checkpoints are rejected") {
  testutil::TempDir dir("bad");
  const auto ckpt = random_checkpoint(2, 23);
  save_checkpoint(ckpt, dir.path());
  const auto good = read_manifest(dir.path());
  const auto blob_size = std::filesystem::file_size(dir / "params.bin");

  SUBCASE("truncated blob") {
    std::filesystem::resize_file(dir / "params.bin", blob_size - 8);
    CHECK_THROWS_AS(load_checkpoint(dir.path()), FormatError);
  }
  SUBCASE("trailing bytes") {
    std::filesystem::resize_file(dir / "params.bin", blob_size + 4);
    CHECK_THROWS_AS(load_checkpoint(dir.path()), FormatError);
  }
  SUBCASE("unknown dtype names the entry") {
    auto j = good;
    j["tensors"][1]["dtype"] = "bf16";
    write_manifest(dir.path(), j);
    const std::string name = j["tensors"][1]["name"];
    CHECK_THROWS_WITH_AS(load_checkpoint(dir.path()), doctest::Contains(name.c_str()), FormatError);
  }
  SUBCASE("overlapping spans") {
    auto j = good;
    j["tensors"][2]["offset"] = j["tensors"][2]["offset"].get<std::uint64_t>() - 8;
    write_manifest(dir.path(), j);
    CHECK_THROWS_AS(load_checkpoint(dir.path()), FormatError);
  }
  SUBCASE("length inconsistent with shape") {
    auto j = good;
    j["tensors"][0]["length"] = j["tensors"][0]["length"].get<std::uint64_t>() + 8;
    write_manifest(dir.path(), j);
    CHECK_THROWS_AS(load_checkpoint(dir.path()), FormatError);
  }
  SUBCASE("non-canonical name") {
    auto j = good;
    j["tensors"][0]["name"] = "encoder.0.weight";
    write_manifest(dir.path(), j);
    CHECK_THROWS_AS(load_checkpoint(dir.path()), FormatError);
  }
  SUBCASE("zero-indexed encoder layer") {
    auto j = good;
    for (auto& e : j["tensors"]) {
      std::string n = e["name"];
      if (n.rfind("enc.1.", 0) == 0) e["name"] = "enc.0." + n.substr(6);
    }
    write_manifest(dir.path(), j);
    CHECK_THROWS_AS(load_checkpoint(dir.path()), FormatError);
  }
  SUBCASE("not json") {
    std::ofstream(dir / "manifest.json", std::ios::trunc) << "{ nope";
    CHECK_THROWS_AS(load_checkpoint(dir.path()), FormatError);
  }
  SUBCASE("missing directory") { CHECK_THROWS_AS(load_checkpoint(dir / "absent"), IoError); }
}

TEST_CASE("manifest order does not matter") {
  testutil::TempDir dir("order");
  const auto ckpt = random_checkpoint(2, 24);
  save_checkpoint(ckpt, dir.path());
  auto j = read_manifest(dir.path());
  auto& entries = j["tensors"];
  std::reverse(entries.begin(), entries.end());
  Rng rng(25);
  for (std::size_t i = entries.size() - 1; i > 0; --i) std::swap(entries[i], entries[rng.uniform_int(i + 1)]);
  write_manifest(dir.path(), j);
  const auto back = load_checkpoint(dir.path());
  REQUIRE(back.tensors.size() == ckpt.tensors.size());
  for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) CHECK(back.tensors[i] == ckpt.tensors[i]);
}

namespace {

void check_copied(const Checkpoint& student, const Checkpoint& teacher, int s, int t) {
  for (const auto& blob : student.tensors) {
    const std::string prefix = "enc." + std::to_string(s) + ".";
    if (blob.name.rfind(prefix, 0) != 0) continue;
    const auto& src = teacher.at("enc." + std::to_string(t) + "." + blob.name.substr(prefix.size()));
    CHECK(blob.bytes == src.bytes);
    CHECK(blob.shape == src.shape);
  }
}

}  // namespace

TEST_CASE("layer-jumping and continuous initialization") {
  const auto teacher = random_checkpoint(8, 30);

  auto jump = layer_jump_init(teacher, 4);
  REQUIRE(jump.mapping);
  CHECK(jump.mapping->pairs == std::vector<std::pair<int, int>>{{1, 2}, {2, 4}, {3, 6}, {4, 8}});
  CHECK(jump.config.n_layers == 4);
  for (auto [s, t] : jump.mapping->pairs) check_copied(jump, teacher, s, t);

  auto cont = continuous_init(teacher, 4);
  CHECK(cont.mapping->pairs == std::vector<std::pair<int, int>>{{1, 1}, {2, 2}, {3, 3}, {4, 4}});
  for (auto [s, t] : cont.mapping->pairs) check_copied(cont, teacher, s, t);

  for (const auto* st : {&jump, &cont}) {
    for (const auto& blob : teacher.tensors) {
      if (blob.name.rfind("conv.", 0) == 0 || blob.name.rfind("proj.", 0) == 0) CHECK(st->at(blob.name) == blob);
    }
  }

  // Students load and run on a one-second waveform.
  auto model = AcousticModel<double>::from_checkpoint(jump);
  Graph<double> g(Mode::eval, false);
  std::vector<double> wav(16000);
  Rng rng(31);
  for (auto& x : wav) x = rng.normal();
  CHECK(model.forward(g, wav).size() == 5);

  // Surgery output survives a save/load cycle with its mapping.
  testutil::TempDir dir("jump");
  save_checkpoint(jump, dir.path());
  CHECK(load_checkpoint(dir.path()).mapping == jump.mapping);
}

TEST_CASE("deep teachers and depth errors") {
  const auto deep = random_checkpoint(24, 32);
  const auto jump = layer_jump_init(deep, 12);
  CHECK(jump.mapping->pairs.back() == std::pair{12, 24});
  for (int i = 1; i <= 12; ++i) CHECK(jump.mapping->pairs[i - 1] == std::pair{i, 2 * i});
  const auto cont = continuous_init(deep, 12);
  CHECK(cont.mapping->pairs.back() == std::pair{12, 12});

  const auto ten = random_checkpoint(10, 33);
  CHECK_THROWS_WITH_AS(layer_jump_init(ten, 6), doctest::Contains("10"), DepthError);
  CHECK_THROWS_AS(continuous_init(ten, 11), DepthError);

  const auto same_depth = continuous_init(ten, 10);
  for (int i = 1; i <= 10; ++i) check_copied(same_depth, ten, i, i);
}
