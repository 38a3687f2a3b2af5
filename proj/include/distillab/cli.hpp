#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "distillab/config.hpp"

namespace distillab::cli {

// Bad invocation; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Command {
  std::string name;  // gen-corpus, splice, init, distil, finetune, eval, cka, run-ablation
  RunConfig config;
  std::filesystem::path out;
  std::filesystem::path corpus;
  std::filesystem::path teacher;
  std::filesystem::path student;  // optional distil start point
  std::filesystem::path model;    // finetune / eval input, cka model A
  std::filesystem::path model_b;  // cka model B
  std::string preset;             // init without a teacher
  std::string split = "dev";      // eval / cka probe split: dev, train or all
  int depth_override = -1;        // init --depth for presets
};

// `args` excludes the program name. Throws UsageError; returns a command
// with an empty name when help was requested (the text goes to `help_out`).
Command parse_args(const std::vector<std::string>& args, std::ostream& help_out);

// Runs a parsed command: 0 on success, 1 on runtime failure.
int run(const Command& cmd, std::ostream& out, std::ostream& err);

// parse_args + run with the 0/1/2 exit contract.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// A checkpoint directory, or a run directory holding `student/` or `model/`.
std::filesystem::path resolve_checkpoint(const std::filesystem::path& path);

}  // namespace distillab::cli
