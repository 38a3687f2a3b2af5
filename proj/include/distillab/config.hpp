#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json_fwd.hpp>

#include "distillab/corpus.hpp"
#include "distillab/distill.hpp"
#include "distillab/finetune.hpp"

namespace distillab {

// Every tunable of every subcommand. One seed drives all of them; the
// per-module seed fields are overwritten by `seed` on resolve.
struct RunConfig {
  std::uint64_t seed = 0;
  CorpusSpec corpus;
  DistillConfig distil;
  FinetuneConfig finetune;
  std::size_t cka_max_frames = 4096;

  // Copies `seed` into the module configs and validates each of them.
  void resolve();
};

void to_json(nlohmann::json& j, const RunConfig& c);
// Missing keys keep their defaults; unknown keys are an ArgumentError.
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::filesystem::path& path);
void write_run_config(const RunConfig& c, const std::filesystem::path& path);

}  // namespace distillab
