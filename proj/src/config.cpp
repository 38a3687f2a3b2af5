#include "distillab/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "distillab/errors.hpp"

namespace distillab {

using nlohmann::json;

namespace {

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ArgumentError(std::string("config section '") + section + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ArgumentError(std::string("unknown config key '") + section + "." + key + "'");
  }
}

template <typename V>
void read(const json& j, const char* key, V& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

json distil_json(const DistillConfig& d) {
  return json{{"lr", d.lr},
              {"steps", d.steps},
              {"batch_size", d.batch_size},
              {"shuffle_prob", d.p_shuffle},
              {"mix_prob", d.p_mix},
              {"crossfade_ms", d.crossfade_ms},
              {"snr_db", {d.mix.snr_db_lo, d.mix.snr_db_hi}},
              {"max_overlap", d.mix.max_overlap},
              {"init", std::string(init_mode_name(d.init_mode))},
              {"student_depth", d.student_depth},
              {"freeze_conv", d.freeze_conv},
              {"pairs", d.pairs}};
}

void distil_from(const json& j, DistillConfig& d) {
  check_keys(j, "distil",
             {"lr", "steps", "batch_size", "shuffle_prob", "mix_prob", "crossfade_ms", "snr_db", "max_overlap", "init",
              "student_depth", "freeze_conv", "pairs"});
  read(j, "lr", d.lr);
  read(j, "steps", d.steps);
  read(j, "batch_size", d.batch_size);
  read(j, "shuffle_prob", d.p_shuffle);
  read(j, "mix_prob", d.p_mix);
  read(j, "crossfade_ms", d.crossfade_ms);
  if (j.contains("snr_db")) {
    j.at("snr_db").at(0).get_to(d.mix.snr_db_lo);
    j.at("snr_db").at(1).get_to(d.mix.snr_db_hi);
  }
  read(j, "max_overlap", d.mix.max_overlap);
  if (j.contains("init")) d.init_mode = parse_init_mode(j.at("init").get<std::string>());
  read(j, "student_depth", d.student_depth);
  read(j, "freeze_conv", d.freeze_conv);
  read(j, "pairs", d.pairs);
}

json finetune_json(const FinetuneConfig& f) {
  return json{{"peak_lr", f.schedule.peak_lr},
              {"warmup_updates", f.schedule.warmup_steps},
              {"hold_updates", f.schedule.hold_steps},
              {"total_updates", f.schedule.total_steps},
              {"steps", f.steps},
              {"accum", f.accum},
              {"freeze_conv", f.freeze_conv},
              {"mask",
               {{"frame_coverage", f.mask.frame_coverage},
                {"channel_coverage", f.mask.channel_coverage},
                {"frame_span", f.mask.frame_span},
                {"channel_span", f.mask.channel_span}}}};
}

void finetune_from(const json& j, FinetuneConfig& f) {
  check_keys(j, "finetune",
             {"peak_lr", "warmup_updates", "hold_updates", "total_updates", "steps", "accum", "freeze_conv", "mask"});
  read(j, "peak_lr", f.schedule.peak_lr);
  read(j, "warmup_updates", f.schedule.warmup_steps);
  read(j, "hold_updates", f.schedule.hold_steps);
  read(j, "total_updates", f.schedule.total_steps);
  read(j, "steps", f.steps);
  read(j, "accum", f.accum);
  read(j, "freeze_conv", f.freeze_conv);
  if (j.contains("mask")) {
    const auto& m = j.at("mask");
    check_keys(m, "finetune.mask", {"frame_coverage", "channel_coverage", "frame_span", "channel_span"});
    read(m, "frame_coverage", f.mask.frame_coverage);
    read(m, "channel_coverage", f.mask.channel_coverage);
    read(m, "frame_span", f.mask.frame_span);
    read(m, "channel_span", f.mask.channel_span);
  }
}

}  // namespace

void RunConfig::resolve() {
  corpus.seed = seed;
  distil.seed = seed;
  finetune.seed = seed;
  corpus.validate();
  distil.validate();
  finetune.validate();
  if (cka_max_frames < 2) throw ArgumentError("cka.max_frames must be at least 2");
}

void to_json(json& j, const RunConfig& c) {
  json corpus = c.corpus;
  corpus.erase("seed");
  j = json{{"seed", c.seed},
           {"corpus", corpus},
           {"distil", distil_json(c.distil)},
           {"finetune", finetune_json(c.finetune)},
           {"cka", {{"max_frames", c.cka_max_frames}}}};
}

void from_json(const json& j, RunConfig& c) {
  c = RunConfig{};
  check_keys(j, "", {"seed", "corpus", "distil", "finetune", "cka", "command"});
  try {
    read(j, "seed", c.seed);
    if (j.contains("corpus")) {
      check_keys(j.at("corpus"), "corpus", {"n_utts", "inventory", "syllables_per_utt", "syllable_ms"});
      j.at("corpus").get_to(c.corpus);
    }
    if (j.contains("distil")) distil_from(j.at("distil"), c.distil);
    if (j.contains("finetune")) finetune_from(j.at("finetune"), c.finetune);
    if (j.contains("cka")) {
      check_keys(j.at("cka"), "cka", {"max_frames"});
      read(j.at("cka"), "max_frames", c.cka_max_frames);
    }
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return j.get<RunConfig>();
}

void write_run_config(const RunConfig& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << json(c).dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace distillab
