#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "distillab/autograd.hpp"
#include "distillab/checkpoint.hpp"
#include "distillab/corpus.hpp"
#include "distillab/model.hpp"

namespace distillab {

// Linear warmup from 0, constant hold, linear decay to 0. Steps count
// optimizer updates.
struct TriStageSchedule {
  double peak_lr = 1.0e-4;
  long warmup_steps = 2000;
  long hold_steps = 8000;
  long total_steps = 20000;

  void validate() const;
};

// Learning rate at update `step`; 0 beyond total_steps.
double tri_stage_lr(long step, const TriStageSchedule& sched);

struct MaskSpec {
  double frame_coverage = 0.55;
  double channel_coverage = 0.25;
  int frame_span = 10;
  int channel_span = 8;

  void validate() const;
};

// Nonzero entries mark masked frames / channels.
struct MaskRecord {
  std::vector<std::uint8_t> frames;
  std::vector<std::uint8_t> channels;

  std::size_t masked_frames() const;
  std::size_t masked_channels() const;
};

// Draws span starts uniformly until ceil(coverage · n) distinct positions are
// covered, for frames and channels independently. A positive coverage needs
// more positions than the span length (InputTooShortError otherwise).
MaskRecord sample_mask(std::size_t frames, std::size_t channels, const MaskSpec& spec, Rng& rng);

// Masked frames become `embedding`, masked channels become 0.
template <typename T>
Var<T> apply_mask(const Var<T>& x, const MaskRecord& mask, const Var<T>& embedding);

// sample_mask + apply_mask.
template <typename T>
Var<T> mask_features(const Var<T>& x, const MaskSpec& spec, Rng& rng, const Var<T>& embedding,
                     MaskRecord* record = nullptr);

// −log Σ over CTC alignments of Π softmax(logits). Blank is class 0 and
// target labels lie in 1..V. Computed in log space by the forward-backward
// recursions; throws InfeasibleTargetError when T frames cannot fit the target.
template <typename T>
Var<T> ctc_loss(const Var<T>& logits, std::span<const int> target);

// Frame argmax, merge repeats, drop blanks.
template <typename T>
std::vector<int> ctc_greedy_decode(const Tensor<T>& logits);

std::size_t edit_distance(std::span<const std::string> hyp, std::span<const std::string> ref);
// Levenshtein distance over |ref|; ArgumentError for an empty reference.
double token_error_rate(std::span<const std::string> hyp, std::span<const std::string> ref);

// Layer norm then linear map d_model -> vocab + 1. Tensors are stored as
// head.ln.gamma, head.ln.beta, head.weight, head.bias.
template <typename T>
struct CtcHead {
  Parameter<T> ln_gamma{"head.ln.gamma", {}, {}}, ln_beta{"head.ln.beta", {}, {}};
  Parameter<T> weight{"head.weight", {}, {}}, bias{"head.bias", {}, {}};

  CtcHead() = default;
  CtcHead(std::size_t d_model, std::size_t vocab_size, Rng& rng);
  static CtcHead from_checkpoint(const Checkpoint& ckpt);

  std::size_t classes() const { return weight.value.dim(0); }
  Var<T> forward(Graph<T>& g, const Var<T>& hidden);
  std::vector<Parameter<T>*> parameters() { return {&ln_gamma, &ln_beta, &weight, &bias}; }
  std::vector<const Parameter<T>*> parameters() const { return {&ln_gamma, &ln_beta, &weight, &bias}; }
};

// Encoder plus CTC head plus output vocabulary.
template <typename T>
class CtcModel {
 public:
  // Uses the checkpoint's head if present, otherwise attaches a fresh one
  // for `vocab` drawn from `rng`.
  CtcModel(const Checkpoint& ckpt, const std::vector<std::string>& vocab, Rng& rng);
  explicit CtcModel(const Checkpoint& ckpt);

  Checkpoint to_checkpoint() const;
  std::vector<Parameter<T>*> parameters();
  AcousticModel<T>& encoder() { return encoder_; }
  CtcHead<T>& head() { return head_; }
  const std::vector<std::string>& vocab() const { return vocab_; }

  // Logits [frames × (V+1)]. With `mask` set (train mode) the projected
  // features are masked before the encoder.
  Var<T> logits(Graph<T>& g, std::span<const T> waveform, Rng* rng = nullptr, const MaskSpec* mask = nullptr);
  std::vector<std::string> decode(std::span<const T> waveform);
  // Label ids 1..V of `tokens`; ArgumentError on unknown tokens.
  std::vector<int> encode_tokens(const std::vector<std::string>& tokens) const;

 private:
  AcousticModel<T> encoder_;
  CtcHead<T> head_;
  std::vector<std::string> vocab_;
};

struct FinetuneConfig {
  TriStageSchedule schedule;
  MaskSpec mask;
  long steps = 2000;  // utterance-level micro-steps
  int accum = 8;      // micro-steps per optimizer update
  bool freeze_conv = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EvalRow {
  int epoch = 0;
  std::string split;
  double cer = 0.0;
  bool operator==(const EvalRow&) const = default;
};

struct FinetuneResult {
  Checkpoint model;  // includes head.* tensors and vocab
  std::vector<EvalRow> report;
  std::vector<double> trace;  // mean CTC loss per optimizer update
  bool aborted = false;
  std::string abort_reason;
};

struct Hypothesis {
  std::string id;
  std::vector<std::string> tokens;
};

struct EvalResult {
  double cer = 0.0;  // Σ edits / Σ reference tokens
  std::vector<Hypothesis> hypotheses;
};

EvalResult evaluate(const Checkpoint& model, const std::vector<const CorpusItem*>& items);

// CTC fine-tuning on `train`, reporting dev CER before training (epoch 0)
// and after every pass over `train` (plus a final partial epoch, if any).
FinetuneResult finetune(const Checkpoint& model, const std::vector<std::string>& vocab,
                        const std::vector<const CorpusItem*>& train, const std::vector<const CorpusItem*>& dev,
                        const FinetuneConfig& cfg);

// `epoch,split,cer` CSV.
void write_report(const std::vector<EvalRow>& rows, const std::filesystem::path& path);
// `utt-id<TAB>tokens` lines.
void write_hypotheses(const std::vector<Hypothesis>& hyps, const std::filesystem::path& path);

extern template struct CtcHead<float>;
extern template struct CtcHead<double>;
extern template class CtcModel<float>;
extern template class CtcModel<double>;

}  // namespace distillab
