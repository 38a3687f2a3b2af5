#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "distillab/autograd.hpp"
#include "distillab/checkpoint.hpp"
#include "distillab/corpus.hpp"
#include "distillab/model.hpp"
#include "distillab/splicing.hpp"

namespace distillab {

// (student_layer, teacher_layer) indices into HiddenStates. Index 0 (the
// encoder input) is allowed.
using LayerPairSet = std::vector<std::pair<int, int>>;

// Throws ArgumentError on out-of-range or repeated pairs.
void validate_pairs(const LayerPairSet& pairs, int student_depth, int teacher_depth);

// Student layers s = round(d_s·k/3) for k = 1, 2, 3 (deduplicated, never 0),
// each paired with teacher layer round(s·d_t/d_s), i.e. 2s when d_t = 2·d_s.
// Always contains (d_s, d_t).
LayerPairSet default_pairs(int student_depth, int teacher_depth);

// Mean squared difference over unmasked frames and all channels.
template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b, const FrameMask* mask = nullptr);

// Σ over pairs of mse(student[s], teacher[t]). Teacher states are read by
// value into the student's graph, so no gradient reaches the teacher.
template <typename T>
Var<T> distill_loss(Graph<T>& g, const HiddenStates<T>& student, const HiddenStates<T>& teacher,
                    const LayerPairSet& pairs, const FrameMask* mask = nullptr);

enum class InitMode { jump, continuous, random };
std::string_view init_mode_name(InitMode m);
InitMode parse_init_mode(std::string_view s);

// Student checkpoint of depth `depth` (0 means half the teacher) derived
// from `teacher` by `mode`. Random init keeps the teacher's widths.
Checkpoint init_student(const Checkpoint& teacher, InitMode mode, int depth, std::uint64_t seed);

struct DistillConfig {
  double lr = 2.0e-4;
  int steps = 500;
  int batch_size = 6;
  double p_shuffle = 0.375;
  double p_mix = 0.15;
  double crossfade_ms = 0.0;
  MixSpec mix;
  InitMode init_mode = InitMode::jump;
  int student_depth = 0;
  bool freeze_conv = true;
  LayerPairSet pairs;  // empty: default_pairs
  std::uint64_t seed = 0;

  void validate() const;
};

struct DistillResult {
  Checkpoint student;
  std::vector<double> trace;  // mean per-utterance loss of each completed step
  bool aborted = false;       // a non-finite loss stopped training; `student` is the last good state
  std::string abort_reason;
};

// Trains a student against the frozen teacher on `items`. Each step takes
// the next batch_size utterances of a per-epoch shuffled order, splices each
// one with probability p_shuffle, mixes within the batch, then takes one Adam
// step on the batch-mean loss.
DistillResult train_distill(const Checkpoint& teacher, const Checkpoint& student_init,
                            const std::vector<const CorpusItem*>& items, const DistillConfig& cfg);

// Convenience: init_student then train_distill.
DistillResult train_distill(const Checkpoint& teacher, const std::vector<const CorpusItem*>& items,
                            const DistillConfig& cfg);

// Mean eval-mode distillation loss over `items`, without augmentation.
double eval_distill_loss(const Checkpoint& teacher, const Checkpoint& student,
                         const std::vector<const CorpusItem*>& items, const LayerPairSet& pairs);

// `step,loss` CSV, steps numbered from 1.
void write_trace(const std::vector<double>& trace, const std::filesystem::path& path);

extern template Var<float> mse(const Var<float>&, const Var<float>&, const FrameMask*);
extern template Var<double> mse(const Var<double>&, const Var<double>&, const FrameMask*);
extern template Var<float> distill_loss(Graph<float>&, const HiddenStates<float>&, const HiddenStates<float>&,
                                        const LayerPairSet&, const FrameMask*);
extern template Var<double> distill_loss(Graph<double>&, const HiddenStates<double>&, const HiddenStates<double>&,
                                         const LayerPairSet&, const FrameMask*);

}  // namespace distillab
