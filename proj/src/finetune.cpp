#include "distillab/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "distillab/errors.hpp"
#include "distillab/ops.hpp"
#include "distillab/optim.hpp"

namespace distillab {

void TriStageSchedule::validate() const {
  if (warmup_steps < 0 || hold_steps < 0 || total_steps < 0) throw ArgumentError("schedule lengths must be non-negative");
  if (warmup_steps + hold_steps > total_steps) throw ArgumentError("warmup + hold exceeds total schedule length");
  if (!(peak_lr >= 0) || !std::isfinite(peak_lr)) throw ArgumentError("peak_lr must be a non-negative number");
}

double tri_stage_lr(long step, const TriStageSchedule& s) {
  if (step < 0 || step > s.total_steps) return 0.0;
  if (step < s.warmup_steps) return s.peak_lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
  const long decay_start = s.warmup_steps + s.hold_steps;
  if (step <= decay_start) return s.peak_lr;
  const long decay = s.total_steps - decay_start;
  return s.peak_lr * static_cast<double>(s.total_steps - step) / static_cast<double>(decay);
}

void MaskSpec::validate() const {
  if (!(frame_coverage >= 0 && frame_coverage <= 1) || !(channel_coverage >= 0 && channel_coverage <= 1)) {
    throw ArgumentError("mask coverages must lie in [0,1]");
  }
  if (frame_span < 1 || channel_span < 1) throw ArgumentError("mask span lengths must be positive");
}

std::size_t MaskRecord::masked_frames() const {
  return static_cast<std::size_t>(std::count_if(frames.begin(), frames.end(), [](auto v) { return v != 0; }));
}

std::size_t MaskRecord::masked_channels() const {
  return static_cast<std::size_t>(std::count_if(channels.begin(), channels.end(), [](auto v) { return v != 0; }));
}

namespace {

std::vector<std::uint8_t> sample_spans(std::size_t n, double coverage, int span_len, Rng& rng, const char* what) {
  std::vector<std::uint8_t> hit(n, 0);
  if (coverage <= 0) return hit;
  const auto span = static_cast<std::size_t>(span_len);
  if (n <= span) {
    throw InputTooShortError(std::string(what) + ": " + std::to_string(n) + " positions cannot hold a span of " +
                             std::to_string(span));
  }
  // The tiny slack keeps e.g. 0.55 · 200 from rounding up to 111.
  const auto target = std::min(n, static_cast<std::size_t>(std::ceil(coverage * static_cast<double>(n) - 1e-9)));
  std::size_t covered = 0;
  while (covered < target) {
    const auto start = static_cast<std::size_t>(rng.uniform_int(n - span + 1));
    for (std::size_t i = start; i < start + span; ++i) {
      if (!hit[i]) {
        hit[i] = 1;
        ++covered;
      }
    }
  }
  return hit;
}

}  // namespace

MaskRecord sample_mask(std::size_t frames, std::size_t channels, const MaskSpec& spec, Rng& rng) {
  spec.validate();
  MaskRecord r;
  r.frames = sample_spans(frames, spec.frame_coverage, spec.frame_span, rng, "frame mask");
  r.channels = sample_spans(channels, spec.channel_coverage, spec.channel_span, rng, "channel mask");
  return r;
}

template <typename T>
Var<T> apply_mask(const Var<T>& x, const MaskRecord& mask, const Var<T>& embedding) {
  Var<T> y = x;
  if (mask.masked_frames() > 0) y = replace_rows(y, mask.frames, embedding);
  if (mask.masked_channels() > 0) y = zero_columns(y, mask.channels);
  return y;
}

template <typename T>
Var<T> mask_features(const Var<T>& x, const MaskSpec& spec, Rng& rng, const Var<T>& embedding, MaskRecord* record) {
  if (x.value().rank() != 2) throw DimensionError("mask_features expects [T×c], got " + shape_str(x.shape()));
  MaskRecord r = sample_mask(x.dim(0), x.dim(1), spec, rng);
  Var<T> y = apply_mask(x, r, embedding);
  if (record) *record = std::move(r);
  return y;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

template <typename T>
Var<T> ctc_loss(const Var<T>& logits, std::span<const int> target) {
  if (logits.value().rank() != 2) throw DimensionError("ctc_loss expects [T×(V+1)] logits, got " + shape_str(logits.shape()));
  const std::size_t frames = logits.dim(0), classes = logits.dim(1);
  std::size_t needed = target.size();
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] < 1 || static_cast<std::size_t>(target[i]) >= classes) {
      throw ArgumentError("ctc target label " + std::to_string(target[i]) + " outside 1.." + std::to_string(classes - 1));
    }
    if (i > 0 && target[i] == target[i - 1]) ++needed;
  }
  if (frames < needed) {
    throw InfeasibleTargetError("ctc target needs at least " + std::to_string(needed) + " frames, logits have " +
                                std::to_string(frames));
  }

  // Log-softmax per frame.
  const auto& z = logits.value();
  std::vector<double> logp(frames * classes);
  for (std::size_t t = 0; t < frames; ++t) {
    double m = kNegInf;
    for (std::size_t k = 0; k < classes; ++k) m = std::max(m, static_cast<double>(z(t, k)));
    if (!std::isfinite(m)) throw NumericError("ctc_loss: non-finite logits at frame " + std::to_string(t));
    double s = 0;
    for (std::size_t k = 0; k < classes; ++k) s += std::exp(static_cast<double>(z(t, k)) - m);
    const double lse = m + std::log(s);
    for (std::size_t k = 0; k < classes; ++k) logp[t * classes + k] = static_cast<double>(z(t, k)) - lse;
  }

  // Extended label sequence: blank, l1, blank, l2, ..., blank.
  const std::size_t states = 2 * target.size() + 1;
  std::vector<int> ext(states, 0);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  auto skip_ok = [&](std::size_t s) { return s >= 2 && ext[s] != 0 && ext[s] != ext[s - 2]; };

  std::vector<double> alpha(frames * states, kNegInf), beta(frames * states, kNegInf);
  alpha[0] = logp[0];
  if (states > 1) alpha[1] = logp[static_cast<std::size_t>(ext[1])];
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double a = alpha[(t - 1) * states + s];
      if (s >= 1) a = log_add(a, alpha[(t - 1) * states + s - 1]);
      if (skip_ok(s)) a = log_add(a, alpha[(t - 1) * states + s - 2]);
      alpha[t * states + s] = a == kNegInf ? kNegInf : a + logp[t * classes + static_cast<std::size_t>(ext[s])];
    }
  }
  const std::size_t last = (frames - 1) * states;
  beta[last + states - 1] = 0.0;
  if (states > 1) beta[last + states - 2] = 0.0;
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      double b = kNegInf;
      for (std::size_t next = s; next <= s + 2 && next < states; ++next) {
        if (next == s + 2 && !skip_ok(next)) continue;
        const double v = beta[(t + 1) * states + next];
        if (v == kNegInf) continue;
        b = log_add(b, v + logp[(t + 1) * classes + static_cast<std::size_t>(ext[next])]);
      }
      beta[t * states + s] = b;
    }
  }
  double log_total = alpha[last + states - 1];
  if (states > 1) log_total = log_add(log_total, alpha[last + states - 2]);

  // d(−log P)/dz[t,k] = softmax[t,k] − Σ_{s: ext[s]=k} exp(α_t(s) + β_t(s) − log P).
  Tensor<T> dz(Shape{frames, classes});
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < classes; ++k) dz(t, k) = static_cast<T>(std::exp(logp[t * classes + k]));
    for (std::size_t s = 0; s < states; ++s) {
      const double ab = alpha[t * states + s] + beta[t * states + s];
      if (ab == kNegInf) continue;
      dz(t, static_cast<std::size_t>(ext[s])) -= static_cast<T>(std::exp(ab - log_total));
    }
  }
  return logits.graph().record(Tensor<T>::scalar(static_cast<T>(-log_total)), {logits},
                               [logits, dz = std::move(dz)](Graph<T>& g, const Tensor<T>&, const Tensor<T>& dy) {
                                 if (auto* gx = g.grad_target(logits)) {
                                   auto out = gx->data();
                                   const auto in = dz.data();
                                   for (std::size_t i = 0; i < out.size(); ++i) out[i] += dy[0] * in[i];
                                 }
                               });
}

template <typename T>
std::vector<int> ctc_greedy_decode(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw DimensionError("ctc_greedy_decode expects [T×(V+1)] logits");
  std::vector<int> out;
  int prev = -1;
  for (std::size_t t = 0; t < logits.dim(0); ++t) {
    int best = 0;
    for (std::size_t k = 1; k < logits.dim(1); ++k)
      if (logits(t, k) > logits(t, static_cast<std::size_t>(best))) best = static_cast<int>(k);
    if (best != prev && best != 0) out.push_back(best);
    prev = best;
  }
  return out;
}

std::size_t edit_distance(std::span<const std::string> hyp, std::span<const std::string> ref) {
  std::vector<std::size_t> row(ref.size() + 1);
  for (std::size_t j = 0; j <= ref.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (hyp[i - 1] == ref[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[ref.size()];
}

double token_error_rate(std::span<const std::string> hyp, std::span<const std::string> ref) {
  if (ref.empty()) throw ArgumentError("token_error_rate: reference is empty");
  return static_cast<double>(edit_distance(hyp, ref)) / static_cast<double>(ref.size());
}

template <typename T>
CtcHead<T>::CtcHead(std::size_t d_model, std::size_t vocab_size, Rng& rng) {
  const Shape d{d_model};
  ln_gamma.value = Tensor<T>(d, T(1));
  ln_beta.value = Tensor<T>(d);
  weight.value = Tensor<T>(Shape{vocab_size + 1, d_model});
  const double std_dev = 1.0 / std::sqrt(static_cast<double>(d_model));
  for (auto& w : weight.value.data()) w = static_cast<T>(std_dev * rng.normal());
  bias.value = Tensor<T>(Shape{vocab_size + 1});
}

template <typename T>
CtcHead<T> CtcHead<T>::from_checkpoint(const Checkpoint& ckpt) {
  CtcHead h;
  for (auto* p : h.parameters()) p->value = ckpt.at(p->name).template to_tensor<T>();
  const std::size_t d = static_cast<std::size_t>(ckpt.config.d_model);
  if (h.ln_gamma.value.shape() != Shape{d} || h.ln_beta.value.shape() != Shape{d} || h.weight.value.rank() != 2 ||
      h.weight.value.dim(1) != d || h.bias.value.shape() != Shape{h.weight.value.dim(0)}) {
    throw FormatError("checkpoint head tensors have inconsistent shapes");
  }
  if (h.weight.value.dim(0) != ckpt.vocab.size() + 1) {
    throw FormatError("checkpoint head has " + std::to_string(h.weight.value.dim(0)) + " outputs for a vocabulary of " +
                      std::to_string(ckpt.vocab.size()));
  }
  return h;
}

template <typename T>
Var<T> CtcHead<T>::forward(Graph<T>& g, const Var<T>& hidden) {
  const Var<T> h = layer_norm(hidden, g.param(ln_gamma), g.param(ln_beta));
  return linear(h, g.param(weight), g.param(bias));
}

template <typename T>
CtcModel<T>::CtcModel(const Checkpoint& ckpt, const std::vector<std::string>& vocab, Rng& rng)
    : encoder_(AcousticModel<T>::from_checkpoint(ckpt)), vocab_(vocab) {
  if (vocab.empty()) throw ArgumentError("CTC model needs a non-empty vocabulary");
  if (ckpt.has_head()) {
    if (ckpt.vocab != vocab) throw ArgumentError("checkpoint head vocabulary differs from the corpus vocabulary");
    head_ = CtcHead<T>::from_checkpoint(ckpt);
  } else {
    head_ = CtcHead<T>(static_cast<std::size_t>(ckpt.config.d_model), vocab.size(), rng);
  }
}

template <typename T>
CtcModel<T>::CtcModel(const Checkpoint& ckpt) : encoder_(AcousticModel<T>::from_checkpoint(ckpt)), vocab_(ckpt.vocab) {
  if (!ckpt.has_head()) throw FormatError("checkpoint has no CTC head; fine-tune it first");
  head_ = CtcHead<T>::from_checkpoint(ckpt);
}

template <typename T>
Checkpoint CtcModel<T>::to_checkpoint() const {
  Checkpoint c = encoder_.to_checkpoint();
  for (const auto* p : head_.parameters()) c.tensors.push_back(TensorBlob::from_tensor(p->name, p->value));
  c.vocab = vocab_;
  return c;
}

template <typename T>
std::vector<Parameter<T>*> CtcModel<T>::parameters() {
  auto ps = encoder_.parameters();
  for (auto* p : head_.parameters()) ps.push_back(p);
  return ps;
}

template <typename T>
Var<T> CtcModel<T>::logits(Graph<T>& g, std::span<const T> waveform, Rng* rng, const MaskSpec* mask) {
  Var<T> x = encoder_.project(g, encoder_.forward_features(g, waveform));
  // Utterances too short for one frame span are left unmasked.
  if (mask && g.mode() == Mode::train && x.dim(0) > static_cast<std::size_t>(mask->frame_span)) {
    if (!rng) throw ArgumentError("masking needs a random generator");
    x = mask_features(x, *mask, *rng, g.param(encoder_.mask_embedding()));
  }
  const auto hs = encoder_.encode(g, x, rng);
  return head_.forward(g, hs.states.back());
}

template <typename T>
std::vector<std::string> CtcModel<T>::decode(std::span<const T> waveform) {
  Graph<T> g(Mode::eval, false);
  std::vector<std::string> out;
  for (int id : ctc_greedy_decode(logits(g, waveform).value())) out.push_back(vocab_[static_cast<std::size_t>(id - 1)]);
  return out;
}

template <typename T>
std::vector<int> CtcModel<T>::encode_tokens(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  for (const auto& tok : tokens) {
    const auto it = std::find(vocab_.begin(), vocab_.end(), tok);
    if (it == vocab_.end()) throw ArgumentError("token '" + tok + "' is not in the vocabulary");
    ids.push_back(static_cast<int>(it - vocab_.begin()) + 1);
  }
  return ids;
}

template Var<float> apply_mask(const Var<float>&, const MaskRecord&, const Var<float>&);
template Var<double> apply_mask(const Var<double>&, const MaskRecord&, const Var<double>&);
template Var<float> mask_features(const Var<float>&, const MaskSpec&, Rng&, const Var<float>&, MaskRecord*);
template Var<double> mask_features(const Var<double>&, const MaskSpec&, Rng&, const Var<double>&, MaskRecord*);
template Var<float> ctc_loss(const Var<float>&, std::span<const int>);
template Var<double> ctc_loss(const Var<double>&, std::span<const int>);
template std::vector<int> ctc_greedy_decode(const Tensor<float>&);
template std::vector<int> ctc_greedy_decode(const Tensor<double>&);
template struct CtcHead<float>;
template struct CtcHead<double>;
template class CtcModel<float>;
template class CtcModel<double>;

void FinetuneConfig::validate() const {
  schedule.validate();
  mask.validate();
  if (steps < 0) throw ArgumentError("steps must be non-negative");
  if (accum < 1) throw ArgumentError("accum must be at least 1");
}

namespace {

EvalResult evaluate_model(CtcModel<float>& model, const std::vector<const CorpusItem*>& items) {
  EvalResult r;
  std::size_t edits = 0, ref_tokens = 0;
  for (const auto* item : items) {
    Hypothesis h{item->utterance.id, model.decode(item->utterance.samples)};
    edits += edit_distance(h.tokens, item->transcript);
    ref_tokens += item->transcript.size();
    r.hypotheses.push_back(std::move(h));
  }
  if (ref_tokens == 0) throw ArgumentError("evaluation set has no reference tokens");
  r.cer = static_cast<double>(edits) / static_cast<double>(ref_tokens);
  return r;
}

}  // namespace

EvalResult evaluate(const Checkpoint& ckpt, const std::vector<const CorpusItem*>& items) {
  CtcModel<float> model(ckpt);
  return evaluate_model(model, items);
}

FinetuneResult finetune(const Checkpoint& ckpt, const std::vector<std::string>& vocab,
                        const std::vector<const CorpusItem*>& train, const std::vector<const CorpusItem*>& dev,
                        const FinetuneConfig& cfg) {
  cfg.validate();
  if (cfg.steps > 0 && train.empty()) throw ArgumentError("fine-tuning needs at least one training utterance");
  Rng master(cfg.seed);
  Rng head_rng = master.fork(), order_rng = master.fork(), aug_rng = master.fork();
  CtcModel<float> model(ckpt, vocab, head_rng);
  model.encoder().set_conv_trainable(!cfg.freeze_conv);
  const auto params = model.parameters();
  std::vector<std::vector<int>> targets;
  for (const auto* item : train) targets.push_back(model.encode_tokens(item->transcript));

  FinetuneResult result;
  auto report = [&](int epoch) {
    if (!dev.empty()) result.report.push_back({epoch, "dev", evaluate_model(model, dev).cer});
  };
  report(0);

  AdamState<float> adam;
  std::vector<std::size_t> order(train.size());
  std::size_t cursor = order.size();
  int epoch = 0;
  long update = 0;
  double pending_loss = 0;
  int pending = 0;
  zero_grads(params);
  for (long step = 0; step < cfg.steps; ++step) {
    if (cursor == order.size()) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.uniform_int(i)]);
      cursor = 0;
    }
    const std::size_t idx = order[cursor++];
    double v = 0;
    {
      Graph<float> g(Mode::train, true);
      try {
        const Var<float> z = model.logits(g, train[idx]->utterance.samples, &aug_rng, &cfg.mask);
        const Var<float> loss = ctc_loss(z, targets[idx]);
        v = loss.value()[0];
        if (std::isfinite(v)) g.backward(scale(loss, 1.0f / static_cast<float>(cfg.accum)));
      } catch (const NumericError&) {
        v = std::nan("");
      }
    }
    if (!std::isfinite(v)) {
      result.aborted = true;
      result.abort_reason = "non-finite CTC loss at step " + std::to_string(step + 1);
      break;
    }
    pending_loss += v;
    ++pending;
    if (pending == cfg.accum || step + 1 == cfg.steps) {
      ++update;
      adam.lr = tri_stage_lr(update, cfg.schedule);
      try {
        adam_step(params, adam);
      } catch (const NumericError& e) {
        result.aborted = true;
        result.abort_reason = "update " + std::to_string(update) + ": " + e.what();
        break;
      }
      zero_grads(params);
      result.trace.push_back(pending_loss / pending);
      pending_loss = 0;
      pending = 0;
    }
    if (cursor == order.size()) report(++epoch);
  }
  if (!result.aborted && cursor != order.size() && cfg.steps > 0) report(epoch + 1);
  result.model = model.to_checkpoint();
  return result;
}

void write_report(const std::vector<EvalRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,split,cer\n";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f", r.cer);
    out << r.epoch << ',' << r.split << ',' << buf << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_hypotheses(const std::vector<Hypothesis>& hyps, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& h : hyps) {
    out << h.id << '\t';
    for (std::size_t i = 0; i < h.tokens.size(); ++i) out << (i ? " " : "") << h.tokens[i];
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace distillab
