#include "distillab/distill.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "distillab/errors.hpp"
#include "distillab/ops.hpp"
#include "distillab/optim.hpp"

namespace distillab {

void validate_pairs(const LayerPairSet& pairs, int student_depth, int teacher_depth) {
  std::set<std::pair<int, int>> seen;
  for (auto [s, t] : pairs) {
    if (s < 0 || s > student_depth || t < 0 || t > teacher_depth) {
      throw ArgumentError("layer pair (" + std::to_string(s) + "," + std::to_string(t) + ") is outside student depth " +
                          std::to_string(student_depth) + " / teacher depth " + std::to_string(teacher_depth));
    }
    if (!seen.insert({s, t}).second) {
      throw ArgumentError("layer pair (" + std::to_string(s) + "," + std::to_string(t) + ") appears twice");
    }
  }
}

LayerPairSet default_pairs(int student_depth, int teacher_depth) {
  if (student_depth < 1) throw DepthError("student depth must be at least 1");
  if (teacher_depth < 2 * student_depth) {
    throw DepthError("default pairs need teacher depth >= 2 × student depth; teacher has " +
                     std::to_string(teacher_depth) + ", student " + std::to_string(student_depth));
  }
  LayerPairSet out;
  for (int k = 1; k <= 3; ++k) {
    const int s = static_cast<int>(std::lround(student_depth * k / 3.0));
    if (s < 1 || (!out.empty() && out.back().first == s)) continue;
    out.emplace_back(s, static_cast<int>(std::lround(static_cast<double>(s) * teacher_depth / student_depth)));
  }
  return out;
}

template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b, const FrameMask* mask) {
  if (a.shape() != b.shape() || a.value().rank() != 2) {
    throw DimensionError("mse: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " differ");
  }
  const std::size_t frames = a.dim(0), d = a.dim(1);
  if (mask && mask->size() != frames) {
    throw DimensionError("mse: mask covers " + std::to_string(mask->size()) + " frames, input has " +
                         std::to_string(frames));
  }
  std::vector<std::uint8_t> skip = mask ? mask->padded : std::vector<std::uint8_t>(frames, 0);
  const auto valid = static_cast<std::size_t>(std::count(skip.begin(), skip.end(), 0));
  if (valid == 0) throw DegenerateInputError("mse: every frame is masked");
  const T inv = T(1) / static_cast<T>(valid * d);

  const auto& av = a.value();
  const auto& bv = b.value();
  double total = 0;
  for (std::size_t t = 0; t < frames; ++t) {
    if (skip[t]) continue;
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = static_cast<double>(av(t, c)) - static_cast<double>(bv(t, c));
      total += diff * diff;
    }
  }
  return a.graph().record(
      Tensor<T>::scalar(static_cast<T>(total * inv)), {a, b},
      [a, b, skip = std::move(skip), inv, frames, d](Graph<T>& g, const Tensor<T>&, const Tensor<T>& dy) {
        Tensor<T>* ga = g.grad_target(a);
        Tensor<T>* gb = g.grad_target(b);
        const auto& av = a.value();
        const auto& bv = b.value();
        const T k = T(2) * inv * dy[0];
        for (std::size_t t = 0; t < frames; ++t) {
          if (skip[t]) continue;
          for (std::size_t c = 0; c < d; ++c) {
            const T v = k * (av(t, c) - bv(t, c));
            if (ga) (*ga)(t, c) += v;
            if (gb) (*gb)(t, c) -= v;
          }
        }
      });
}

template <typename T>
Var<T> distill_loss(Graph<T>& g, const HiddenStates<T>& student, const HiddenStates<T>& teacher,
                    const LayerPairSet& pairs, const FrameMask* mask) {
  validate_pairs(pairs, static_cast<int>(student.size()) - 1, static_cast<int>(teacher.size()) - 1);
  Var<T> total = g.constant(Tensor<T>::scalar(T(0)));
  for (auto [s, t] : pairs) {
    const Var<T> target = g.constant(teacher[static_cast<std::size_t>(t)].value());
    total = add(total, mse(student[static_cast<std::size_t>(s)], target, mask));
  }
  return total;
}

template Var<float> mse(const Var<float>&, const Var<float>&, const FrameMask*);
template Var<double> mse(const Var<double>&, const Var<double>&, const FrameMask*);
template Var<float> distill_loss(Graph<float>&, const HiddenStates<float>&, const HiddenStates<float>&,
                                 const LayerPairSet&, const FrameMask*);
template Var<double> distill_loss(Graph<double>&, const HiddenStates<double>&, const HiddenStates<double>&,
                                  const LayerPairSet&, const FrameMask*);

std::string_view init_mode_name(InitMode m) {
  switch (m) {
    case InitMode::jump: return "jump";
    case InitMode::continuous: return "continuous";
    case InitMode::random: return "random";
  }
  return "?";
}

InitMode parse_init_mode(std::string_view s) {
  if (s == "jump") return InitMode::jump;
  if (s == "continuous") return InitMode::continuous;
  if (s == "random") return InitMode::random;
  throw ArgumentError("unknown init mode '" + std::string(s) + "' (expected jump, continuous or random)");
}

Checkpoint init_student(const Checkpoint& teacher, InitMode mode, int depth, std::uint64_t seed) {
  if (depth == 0) depth = std::max(1, teacher.config.n_layers / 2);
  switch (mode) {
    case InitMode::jump: return layer_jump_init(teacher, depth);
    case InitMode::continuous: return continuous_init(teacher, depth);
    case InitMode::random: break;
  }
  if (depth < 1) throw DepthError("student depth must be at least 1");
  ModelConfig cfg = teacher.config;
  cfg.n_layers = depth;
  Rng rng(seed);
  return AcousticModel<float>::random(cfg, rng).to_checkpoint();
}

void DistillConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError(std::string(name) + " must lie in [0,1]");
  };
  prob(p_shuffle, "p_shuffle");
  prob(p_mix, "p_mix");
  if (steps < 1) throw ArgumentError("steps must be at least 1");
  if (batch_size < 1) throw ArgumentError("batch_size must be at least 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ArgumentError("lr must be a non-negative number");
  if (crossfade_ms < 0) throw ArgumentError("crossfade_ms must be non-negative");
  if (student_depth < 0) throw ArgumentError("student_depth must be non-negative");
}

namespace {

bool same_conv(const Checkpoint& a, const Checkpoint& b) {
  for (const auto& t : a.tensors) {
    if (t.name.rfind("conv.", 0) != 0) continue;
    const TensorBlob* other = b.find(t.name);
    if (!other || !(*other == t)) return false;
  }
  return true;
}

}  // namespace

DistillResult train_distill(const Checkpoint& teacher_ckpt, const Checkpoint& student_init,
                            const std::vector<const CorpusItem*>& items, const DistillConfig& cfg) {
  cfg.validate();
  if (items.empty()) throw ArgumentError("distillation needs at least one utterance");
  auto teacher = AcousticModel<float>::from_checkpoint(teacher_ckpt);
  auto student = AcousticModel<float>::from_checkpoint(student_init);
  const int d_s = student.config().n_layers, d_t = teacher.config().n_layers;
  const LayerPairSet pairs = cfg.pairs.empty() ? default_pairs(d_s, d_t) : cfg.pairs;
  validate_pairs(pairs, d_s, d_t);
  student.set_conv_trainable(!cfg.freeze_conv);
  // A frozen conv stack equal to the teacher's produces the teacher's features.
  const bool share_features = cfg.freeze_conv && same_conv(student_init, teacher_ckpt);

  Rng master(cfg.seed);
  Rng order_rng = master.fork(), aug_rng = master.fork(), drop_rng = master.fork();
  const auto params = student.parameters();
  AdamState<float> adam;
  adam.lr = cfg.lr;

  std::vector<std::size_t> order(items.size());
  std::size_t cursor = order.size();
  auto next_index = [&] {
    if (cursor == order.size()) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.uniform_int(i)]);
      cursor = 0;
    }
    return order[cursor++];
  };

  DistillResult result;
  const auto b = static_cast<std::size_t>(cfg.batch_size);
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<Utterance> batch;
    for (std::size_t k = 0; k < b; ++k) {
      const CorpusItem& item = *items[next_index()];
      batch.push_back(maybe_shuffle(item.utterance, item.spans, aug_rng, cfg.p_shuffle, cfg.crossfade_ms).utterance);
    }
    batch = batch_mix(batch, aug_rng, cfg.p_mix, cfg.mix).batch;

    zero_grads(params);
    double step_loss = 0;
    for (const auto& utt : batch) {
      Graph<float> tg(Mode::eval, false);
      Graph<float> sg(Mode::train, true);
      double v = 0;
      try {
        const Var<float> feats = teacher.forward_features(tg, utt.samples);
        const auto th = teacher.forward_encoder(tg, feats);
        const auto sh = share_features ? student.forward_encoder(sg, sg.constant(feats.value()), &drop_rng)
                                       : student.forward(sg, utt.samples, &drop_rng);
        const Var<float> loss = distill_loss(sg, sh, th, pairs);
        v = loss.value()[0];
        if (std::isfinite(v)) sg.backward(scale(loss, 1.0f / static_cast<float>(b)));
      } catch (const NumericError&) {
        // Non-finite activations (softmax rejects them) count as a NaN loss.
        v = std::nan("");
      }
      if (!std::isfinite(v)) {
        result.aborted = true;
        result.abort_reason = "non-finite distillation loss at step " + std::to_string(step + 1);
        break;
      }
      step_loss += v / static_cast<double>(b);
    }
    if (!result.aborted) {
      try {
        adam_step(params, adam);
      } catch (const NumericError& e) {
        result.aborted = true;
        result.abort_reason = "step " + std::to_string(step + 1) + ": " + e.what();
      }
    }
    if (result.aborted) break;
    result.trace.push_back(step_loss);
  }
  result.student = student.to_checkpoint();
  result.student.mapping = student_init.mapping;
  return result;
}

DistillResult train_distill(const Checkpoint& teacher, const std::vector<const CorpusItem*>& items,
                            const DistillConfig& cfg) {
  cfg.validate();
  return train_distill(teacher, init_student(teacher, cfg.init_mode, cfg.student_depth, cfg.seed), items, cfg);
}

double eval_distill_loss(const Checkpoint& teacher_ckpt, const Checkpoint& student_ckpt,
                         const std::vector<const CorpusItem*>& items, const LayerPairSet& pairs_in) {
  if (items.empty()) throw ArgumentError("eval_distill_loss needs at least one utterance");
  auto teacher = AcousticModel<float>::from_checkpoint(teacher_ckpt);
  auto student = AcousticModel<float>::from_checkpoint(student_ckpt);
  const LayerPairSet pairs =
      pairs_in.empty() ? default_pairs(student.config().n_layers, teacher.config().n_layers) : pairs_in;
  double total = 0;
  for (const auto* item : items) {
    Graph<float> tg(Mode::eval, false), sg(Mode::eval, false);
    const auto th = teacher.forward(tg, item->utterance.samples);
    const auto sh = student.forward(sg, item->utterance.samples);
    total += distill_loss(sg, sh, th, pairs).value()[0];
  }
  return total / static_cast<double>(items.size());
}

void write_trace(const std::vector<double>& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i + 1, trace[i]);
    out << buf;
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace distillab
