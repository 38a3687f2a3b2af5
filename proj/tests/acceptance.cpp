// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "distillab/cka.hpp"
#include "distillab/cli.hpp"
#include "distillab/distill.hpp"
#include "distillab/errors.hpp"
#include "distillab/finetune.hpp"
#include "distillab/ops.hpp"
#include "distillab/optim.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace distillab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += "failed: " + what;
    }
  }
  void note(const std::string& s) {
    if (!detail.empty()) detail += "; ";
    detail += s;
  }
};

std::string num(double v, const char* fmt = "%.3g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

Tensor<double> uniform(Rng& rng, Shape s, double scale = 1.0) {
  Tensor<double> t(std::move(s));
  for (auto& v : t.data()) v = scale * rng.uniform(-1.0, 1.0);
  return t;
}

std::vector<const CorpusItem*> all_items(const Corpus& c) {
  std::vector<const CorpusItem*> out;
  for (const auto& i : c.items) out.push_back(&i);
  return out;
}

Checkpoint random_model(ModelConfig cfg, std::uint64_t seed) {
  Rng rng(seed);
  return AcousticModel<float>::random(cfg, rng).to_checkpoint();
}

ModelConfig toy(int layers) {
  ModelConfig c;
  c.conv_layers = {{6, 4, 2}, {6, 3, 2}};
  c.d_model = 8;
  c.n_layers = layers;
  c.n_heads = 2;
  c.ffn_dim = 12;
  c.dtype = DType::f64;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// ---------------------------------------------------------------------------

Outcome zero_loss_identity() {
  Outcome r;
  testutil::TempDir dir("acc1");
  CorpusSpec spec;
  spec.n_utts = 5;
  spec.seed = 1;
  const auto corpus = generate_synthetic_corpus(spec, dir.path());
  const auto teacher_ckpt = random_model(ModelConfig::desk_teacher(), 11);
  auto teacher = AcousticModel<float>::from_checkpoint(teacher_ckpt);
  auto student = AcousticModel<float>::from_checkpoint(teacher_ckpt);
  LayerPairSet pairs;
  for (int l = 0; l <= teacher.config().n_layers; ++l) pairs.emplace_back(l, l);
  double worst = 0;
  for (const auto& item : corpus.items) {
    Graph<float> tg(Mode::eval, false), sg(Mode::train, true);
    const auto th = teacher.forward(tg, item.utterance.samples);
    const auto sh = student.forward(sg, item.utterance.samples);
    worst = std::max(worst, static_cast<double>(distill_loss(sg, sh, th, pairs).value()[0]));
  }
  r.require(worst < 1e-6, "loss " + num(worst) + " >= 1e-6");
  r.note("max loss " + num(worst) + " over " + std::to_string(corpus.items.size()) + " utterances, 9 identity pairs");
  return r;
}

Outcome gradient_suite() {
  Outcome r;
  Rng rng(2);
  double worst_core = 0;
  auto weigh = [](Graph<double>& g, Var<double> v) {
    Tensor<double> w(v.shape());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::cos(1.3 * static_cast<double>(i) + 0.2);
    return sum(mul(v, g.constant(w)));
  };
  using Fn = std::function<Var<double>(Graph<double>&, const std::vector<Var<double>>&)>;
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t m = 1 + rng.uniform_int(4), k = 1 + rng.uniform_int(4), n = 1 + rng.uniform_int(4);
    const std::size_t stride = 1 + rng.uniform_int(2), kw = 1 + rng.uniform_int(3);
    std::vector<std::uint8_t> rows(m, 0), cols(n, 0);
    rows[0] = 1;
    cols[n - 1] = 1;
    const std::vector<std::pair<Fn, std::vector<Tensor<double>>>> cases{
        {[&](Graph<double>& g, const std::vector<Var<double>>& in) { return weigh(g, matmul(in[0], in[1])); },
         {uniform(rng, {m, k}), uniform(rng, {k, n})}},
        {[&](Graph<double>& g, const std::vector<Var<double>>& in) { return weigh(g, matmul_nt(in[0], in[1])); },
         {uniform(rng, {m, k}), uniform(rng, {n, k})}},
        {[&](Graph<double>& g, const std::vector<Var<double>>& in) { return weigh(g, softmax(in[0])); },
         {uniform(rng, {m, n}, 2.0)}},
        {[&](Graph<double>& g, const std::vector<Var<double>>& in) {
           return weigh(g, layer_norm(in[0], in[1], in[2]));
         },
         {uniform(rng, {m, n + 1}, 2.0), uniform(rng, {n + 1}), uniform(rng, {n + 1})}},
        {[&](Graph<double>& g, const std::vector<Var<double>>& in) { return weigh(g, gelu(in[0])); },
         {uniform(rng, {m, n}, 3.0)}},
        {[&](Graph<double>& g, const std::vector<Var<double>>& in) {
           return weigh(g, linear(in[0], in[1], in[2]));
         },
         {uniform(rng, {m, k}), uniform(rng, {n, k}), uniform(rng, {n})}},
        {[&](Graph<double>& g, const std::vector<Var<double>>& in) {
           return weigh(g, concat_cols<double>({slice_cols(transpose(in[0]), 0, 1), add_row(in[1], in[2])}));
         },
         {uniform(rng, {3, m}), uniform(rng, {m, n}), uniform(rng, {n})}},
        {[&](Graph<double>& g, const std::vector<Var<double>>& in) { return weigh(g, conv1d(in[0], in[1], stride)); },
         {uniform(rng, {(m - 1) * stride + kw, k}), uniform(rng, {n, k, kw})}},
        {[&](Graph<double>& g, const std::vector<Var<double>>& in) {
           return weigh(g, zero_columns(replace_rows(in[0], rows, in[1]), cols));
         },
         {uniform(rng, {m, n}), uniform(rng, {n})}},
        {[&](Graph<double>&, const std::vector<Var<double>>& in) { return mean(sub(in[0], in[1])); },
         {uniform(rng, {m, n}), uniform(rng, {m, n})}},
    };
    for (const auto& [f, inputs] : cases) worst_core = std::max(worst_core, grad_check(f, inputs));
  }
  r.require(worst_core < 1e-4, "core op error " + num(worst_core));

  // Full distillation graph through a toy student against a toy teacher.
  auto teacher = AcousticModel<double>::random(toy(4), rng);
  auto student = AcousticModel<double>::random(toy(2), rng);
  std::vector<double> wav(36);
  for (auto& x : wav) x = rng.normal();
  Graph<double> tg(Mode::eval, false);
  const auto th = teacher.forward(tg, wav);
  const auto pairs = default_pairs(2, 4);
  const double distil_err = grad_check(
      [&](Graph<double>& g) {
        auto sh = student.forward(g, wav);
        return distill_loss(g, sh, th, pairs);
      },
      student.parameters());
  r.require(distil_err < 1e-3, "distill graph error " + num(distil_err));

  // CTC loss through the encoder and a head.
  Rng head_rng(3);
  CtcHead<double> head(8, 3, head_rng);
  auto params = student.parameters();
  for (auto* p : head.parameters()) params.push_back(p);
  const std::vector<int> target{1, 3};
  const double ctc_err = grad_check(
      [&](Graph<double>& g) {
        auto sh = student.forward(g, wav);
        return ctc_loss(head.forward(g, sh[2]), target);
      },
      params);
  r.require(ctc_err < 1e-3, "ctc graph error " + num(ctc_err));
  r.note("core " + num(worst_core) + ", distill " + num(distil_err) + ", ctc " + num(ctc_err));
  return r;
}

Outcome surgery_exactness() {
  Outcome r;
  const auto teacher = random_model(ModelConfig::desk_teacher(), 13);
  auto same_layer = [&](const Checkpoint& student, int s, int t) {
    const std::string sp = "enc." + std::to_string(s) + ".", tp = "enc." + std::to_string(t) + ".";
    int n = 0;
    for (const auto& blob : student.tensors) {
      if (blob.name.rfind(sp, 0) != 0) continue;
      const auto* src = teacher.find(tp + blob.name.substr(sp.size()));
      if (!src || src->bytes != blob.bytes || src->shape != blob.shape) return false;
      ++n;
    }
    return n == 16;
  };
  auto front_copied = [&](const Checkpoint& student) {
    for (const auto& blob : student.tensors) {
      if (blob.name.rfind("enc.", 0) == 0) continue;
      if (!(teacher.at(blob.name) == blob)) return false;
    }
    return true;
  };
  const auto jump = layer_jump_init(teacher, 4);
  const auto cont = continuous_init(teacher, 4);
  for (int i = 1; i <= 4; ++i) {
    r.require(same_layer(jump, i, 2 * i), "jump layer " + std::to_string(i) + " != teacher " + std::to_string(2 * i));
    r.require(same_layer(cont, i, i), "continuous layer " + std::to_string(i));
  }
  r.require(jump.config.n_layers == 4 && cont.config.n_layers == 4, "student depth");
  r.require(front_copied(jump) && front_copied(cont), "conv/projection copies");
  const auto& jp = jump.mapping->pairs;
  r.require(std::find(jp.begin(), jp.end(), std::pair{4, 8}) != jp.end(), "mapping lacks (4,8)");
  r.require(cont.mapping->pairs == std::vector<std::pair<int, int>>{{1, 1}, {2, 2}, {3, 3}, {4, 4}},
            "continuous mapping");
  r.note("jump {2,4,6,8} and continuous {1,2,3,4} bit-identical");
  return r;
}

Outcome cka_suite() {
  Outcome r;
  Rng rng(4);
  double self_err = 0, inv_err = 0, sym_err = 0, oracle_err = 0, lo = 1, hi = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10 + rng.uniform_int(30), d = 2 + rng.uniform_int(8);
    Tensor<double> x(Shape{n, d});
    for (auto& v : x.data()) v = rng.normal();
    // Random orthogonal matrix by Gram-Schmidt.
    Tensor<double> q(Shape{d, d});
    for (auto& v : q.data()) v = rng.normal();
    for (std::size_t c = 0; c < d; ++c) {
      for (std::size_t p = 0; p < c; ++p) {
        double dot = 0;
        for (std::size_t i = 0; i < d; ++i) dot += q(i, c) * q(i, p);
        for (std::size_t i = 0; i < d; ++i) q(i, c) -= dot * q(i, p);
      }
      double norm = 0;
      for (std::size_t i = 0; i < d; ++i) norm += q(i, c) * q(i, c);
      for (std::size_t i = 0; i < d; ++i) q(i, c) /= std::sqrt(norm);
    }
    Tensor<double> scaled = x;
    for (auto& v : scaled.data()) v *= 3.7;
    self_err = std::max(self_err, std::abs(linear_cka(x, x) - 1));
    inv_err = std::max(inv_err, std::abs(linear_cka(x, oracle::matmul(x, q)) - 1));
    inv_err = std::max(inv_err, std::abs(linear_cka(x, scaled) - 1));
    Tensor<double> y(Shape{n, 1 + rng.uniform_int(9)});
    for (auto& v : y.data()) v = rng.normal();
    const double xy = linear_cka(x, y);
    sym_err = std::max(sym_err, std::abs(xy - linear_cka(y, x)));
    lo = std::min(lo, xy);
    hi = std::max(hi, xy);
  }
  for (int trial = 0; trial < 10; ++trial) {
    Tensor<double> a(Shape{20, 5}), b(Shape{20, 7});
    for (auto& v : a.data()) v = rng.normal();
    for (auto& v : b.data()) v = rng.normal();
    oracle_err = std::max(oracle_err, std::abs(linear_cka(a, b) - oracle::linear_cka(a, b)));
  }
  r.require(self_err <= 1e-6, "self-CKA error " + num(self_err));
  r.require(inv_err <= 1e-6, "invariance error " + num(inv_err));
  r.require(sym_err <= 1e-10, "symmetry error " + num(sym_err));
  r.require(oracle_err <= 1e-10, "oracle error " + num(oracle_err));
  r.require(lo >= 0 && hi <= 1 + 1e-9, "range [" + num(lo) + ", " + num(hi) + "]");

  testutil::TempDir dir("acc4");
  CorpusSpec spec;
  spec.n_utts = 10;
  spec.seed = 4;
  const auto corpus = generate_synthetic_corpus(spec, dir.path());
  const auto model = random_model(ModelConfig::desk_teacher(), 14);
  const auto m = interlayer_matrix(model, model, all_items(corpus));
  double diag = 0, mlo = 1, mhi = 0;
  for (std::size_t i = 0; i < m.values.dim(0); ++i) {
    diag = std::max(diag, std::abs(m(i, i) - 1));
    for (std::size_t j = 0; j < m.values.dim(1); ++j) {
      mlo = std::min(mlo, m(i, j));
      mhi = std::max(mhi, m(i, j));
    }
  }
  r.require(diag <= 1e-6, "interlayer diagonal error " + num(diag));
  r.require(mlo >= 0 && mhi <= 1 + 1e-9, "interlayer range");
  r.note("self " + num(self_err) + ", invariance " + num(inv_err) + ", symmetry " + num(sym_err) + ", oracle " +
         num(oracle_err) + ", 9x9 diagonal " + num(diag));
  return r;
}

Outcome splicing_conservation() {
  Outcome r;
  Rng rng(5);
  int length_bad = 0, multiset_bad = 0, identity_bad = 0;
  for (int u = 0; u < 1000; ++u) {
    Utterance utt;
    utt.id = "u" + std::to_string(u);
    const std::size_t n_spans = 1 + rng.uniform_int(6);
    std::vector<SyllableSpan> spans;
    std::size_t pos = rng.uniform_int(50);
    for (std::size_t s = 0; s < n_spans; ++s) {
      const std::size_t len = 1 + rng.uniform_int(200);
      spans.push_back({pos, pos + len, "s" + std::to_string(s)});
      pos += len + rng.uniform_int(30);
    }
    utt.samples.resize(pos + rng.uniform_int(50));
    for (auto& x : utt.samples) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    std::vector<std::size_t> perm(n_spans);
    for (std::size_t i = 0; i < n_spans; ++i) perm[i] = i;
    const auto ident = shuffle_splice(utt, spans, perm);
    identity_bad += ident.utterance.samples != utt.samples;
    for (std::size_t i = n_spans; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_int(i)]);
    const auto out = shuffle_splice(utt, spans, perm);
    length_bad += out.utterance.samples.size() != utt.samples.size();
    auto a = out.utterance.samples, b = utt.samples;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    multiset_bad += a != b;
  }
  r.require(length_bad == 0, std::to_string(length_bad) + " length changes");
  r.require(multiset_bad == 0, std::to_string(multiset_bad) + " multiset changes");
  r.require(identity_bad == 0, std::to_string(identity_bad) + " identity mismatches");

  Utterance utt{"x", std::vector<float>(300, 0.0f), kSampleRate};
  for (std::size_t i = 0; i < 300; ++i) utt.samples[i] = static_cast<float>(i);
  const std::vector<SyllableSpan> spans{{0, 100, "a"}, {100, 200, "b"}, {200, 300, "c"}};
  Rng draw(6);
  int shuffled = 0;
  for (int i = 0; i < 10000; ++i) shuffled += maybe_shuffle(utt, spans, draw, 0.375).shuffled;
  const double shuffle_rate = shuffled / 10000.0;
  r.require(std::abs(shuffle_rate - 0.375) <= 0.01, "shuffle rate " + num(shuffle_rate));

  std::vector<Utterance> batch;
  for (int i = 0; i < 6; ++i) {
    Utterance b{"b" + std::to_string(i), std::vector<float>(400), kSampleRate};
    for (auto& x : b.samples) x = static_cast<float>(draw.uniform(-0.5, 0.5));
    batch.push_back(b);
  }
  std::size_t mixed = 0, slots = 0;
  while (slots < 10000) {
    mixed += batch_mix(batch, draw, 0.15).selected();
    slots += batch.size();
  }
  const double mix_rate = static_cast<double>(mixed) / static_cast<double>(slots);
  r.require(std::abs(mix_rate - 0.15) <= 0.01, "mix rate " + num(mix_rate));
  r.note("1000 utterances conserved; shuffle rate " + num(shuffle_rate, "%.4f") + ", mix rate " +
         num(mix_rate, "%.4f") + " over " + std::to_string(slots) + " slots");
  return r;
}

Outcome ctc_oracle() {
  Outcome r;
  Rng rng(6);
  double worst = 0;
  int cases = 0, infeasible_ok = 0, infeasible = 0;
  for (std::size_t frames = 1; frames <= 4; ++frames)
    for (int v = 1; v <= 3; ++v) {
      std::vector<std::vector<int>> targets{{}};
      for (int a = 1; a <= v; ++a) {
        targets.push_back({a});
        for (int b = 1; b <= v; ++b) targets.push_back({a, b});
      }
      for (const auto& target : targets)
        for (int draw = 0; draw < 4; ++draw) {
          Tensor<double> logits(Shape{frames, static_cast<std::size_t>(v + 1)});
          for (auto& x : logits.data()) x = 2.0 * rng.normal();
          const double expect = oracle::ctc_brute_force(logits, target);
          ++cases;
          Graph<double> g;
          if (std::isinf(expect)) {
            ++infeasible;
            try {
              ctc_loss(g.leaf(logits), target);
            } catch (const InfeasibleTargetError&) {
              ++infeasible_ok;
            }
            continue;
          }
          worst = std::max(worst, std::abs(ctc_loss(g.leaf(logits), target).value()[0] - expect));
        }
    }
  r.require(worst <= 1e-8, "max CTC difference " + num(worst));
  r.require(infeasible_ok == infeasible, "infeasible targets not rejected");
  const TriStageSchedule s;
  const double l0 = tri_stage_lr(0, s), l1 = tri_stage_lr(2000, s), l2 = tri_stage_lr(10000, s),
               l3 = tri_stage_lr(20000, s);
  r.require(l0 == 0 && l1 == 1e-4 && l2 == 1e-4 && l3 == 0,
            "tri-stage lr " + num(l0) + "," + num(l1) + "," + num(l2) + "," + num(l3));
  r.note(std::to_string(cases) + " cases, max difference " + num(worst) + ", " + std::to_string(infeasible) +
         " infeasible rejected; lr {0,2000,10000,20000} = {" + num(l0) + "," + num(l1) + "," + num(l2) + "," +
         num(l3) + "}");
  return r;
}

// Desk recipe: CTC-train an 8-layer teacher from random init, distil a
// 4-layer student with jump init and splicing, then fine-tune the distilled
// student and a random-init student under the same budget.
Outcome desk_distillation() {
  Outcome r;
  testutil::TempDir dir("acc7");
  CorpusSpec spec;
  spec.n_utts = 200;
  spec.inventory = 12;
  spec.seed = 7;
  const auto corpus = generate_synthetic_corpus(spec, dir.path());
  const auto train = corpus.train(), dev = corpus.dev();

  FinetuneConfig teacher_ft;
  teacher_ft.steps = 7200;
  teacher_ft.accum = 4;
  teacher_ft.schedule = {2e-3, 100, 900, 1800};
  teacher_ft.mask.frame_coverage = 0.3;
  teacher_ft.mask.channel_coverage = 0.15;
  teacher_ft.freeze_conv = false;
  teacher_ft.seed = 7;
  const auto t0 = std::chrono::steady_clock::now();
  const auto teacher_run = finetune(random_model(ModelConfig::desk_teacher(), 7), corpus.vocab, train, dev, teacher_ft);
  const auto t1 = std::chrono::steady_clock::now();
  const double teacher_cer = teacher_run.report.back().cer;
  r.require(!teacher_run.aborted, "teacher fine-tuning aborted");
  r.require(teacher_cer < 0.3, "teacher CER " + num(teacher_cer));
  const Checkpoint& teacher = teacher_run.model;

  DistillConfig dc;  // lr 2e-4, 500 steps, batch 6, p_shuffle 0.375, p_mix 0.15, jump init
  dc.seed = 7;
  const auto init = init_student(teacher, InitMode::jump, 4, dc.seed);
  const auto pairs = default_pairs(4, 8);
  const double before = eval_distill_loss(teacher, init, dev, pairs);
  const auto distilled = train_distill(teacher, init, train, dc);
  const double after = eval_distill_loss(teacher, distilled.student, dev, pairs);
  const auto t2 = std::chrono::steady_clock::now();
  r.require(!distilled.aborted, "distillation aborted");
  r.require(after < 0.5 * before, "dev distill loss " + num(before) + " -> " + num(after));
  double head = 0, tail = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    head += distilled.trace[i] / 10;
    tail += distilled.trace[distilled.trace.size() - 1 - i] / 10;
  }
  r.require(tail < 0.5 * head, "trace " + num(head) + " -> " + num(tail));

  FinetuneConfig student_ft = teacher_ft;
  student_ft.steps = 2000;
  student_ft.schedule = {2e-3, 50, 250, 500};
  const auto ft_distilled = finetune(distilled.student, corpus.vocab, train, dev, student_ft);
  const auto scratch = init_student(teacher, InitMode::random, 4, dc.seed);
  const auto ft_scratch = finetune(scratch, corpus.vocab, train, dev, student_ft);
  const auto t3 = std::chrono::steady_clock::now();
  const double cer_d = ft_distilled.report.back().cer, cer_s = ft_scratch.report.back().cer;
  r.require(cer_d <= cer_s, "distilled CER " + num(cer_d) + " > scratch CER " + num(cer_s));

  auto secs = [](auto a, auto b) { return num(std::chrono::duration<double>(b - a).count(), "%.0f"); };
  r.note("teacher CER " + num(teacher_cer) + " (" + secs(t0, t1) + "s); dev distill loss " + num(before) + " -> " +
         num(after) + ", trace " + num(head) + " -> " + num(tail) + " (" + secs(t1, t2) + "s); student CER distilled " +
         num(cer_d) + " vs scratch " + num(cer_s) + " (" + secs(t2, t3) + "s)");
  return r;
}

Outcome ablation_reproducibility() {
  Outcome r;
  testutil::TempDir dir("acc8");
  auto run = [](std::vector<std::string> args) {
    std::ostringstream out, err;
    return cli::main_entry(args, out, err);
  };
  const std::string corpus = (dir / "corpus").string(), teacher = (dir / "teacher").string();
  r.require(run({"gen-corpus", "--out", corpus, "--n-utts", "24", "--seed", "8"}) == 0, "gen-corpus");
  r.require(run({"init", "--preset", "desk-teacher", "--out", teacher, "--seed", "8"}) == 0, "init teacher");
  for (const char* out : {"a", "b"}) {
    r.require(run({"run-ablation", "--teacher", teacher, "--corpus", corpus, "--out", (dir / out).string(), "--steps",
                   "8", "--batch-size", "3", "--seed", "8"}) == 0,
              std::string("run-ablation ") + out);
  }
  int compared = 0;
  for (const char* cell : {"jump-splice", "jump-nosplice", "continuous-splice", "continuous-nosplice"}) {
    const auto a = slurp(dir / "a" / cell / "trace.csv"), b = slurp(dir / "b" / cell / "trace.csv");
    r.require(!a.empty() && a == b, std::string(cell) + " traces differ");
    compared += !a.empty() && a == b;
  }
  r.require(slurp(dir / "a" / "ablation.csv") == slurp(dir / "b" / "ablation.csv"), "ablation tables differ");
  r.note(std::to_string(compared) + "/4 traces byte-identical");
  return r;
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "zero-loss identity", 10, zero_loss_identity},
      {2, "gradient suite", 120, gradient_suite},
      {3, "surgery exactness", 5, surgery_exactness},
      {4, "CKA suite", 60, cka_suite},
      {5, "splicing conservation", 120, splicing_conservation},
      {6, "CTC oracle equivalence", 60, ctc_oracle},
      {7, "desk-scale distillation effectiveness", 1800, desk_distillation},
      {8, "ablation reproducibility", 600, ablation_reproducibility},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.ok = false;
      o.note(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_s) o.require(false, "runtime " + num(secs, "%.1f") + "s over " + num(c.budget_s, "%.0f") + "s");
    failed += !o.ok;
    std::printf("criterion %d: %s  %s  [%.1fs] %s\n", c.id, o.ok ? "PASS" : "FAIL", c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
