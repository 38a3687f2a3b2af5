#include "distillab/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "distillab/cka.hpp"
#include "distillab/errors.hpp"

namespace distillab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flag values that override the config file when given.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config;
  std::optional<int> n_utts, inventory;
  std::optional<double> lr, shuffle_prob, mix_prob, crossfade_ms;
  std::optional<int> steps, batch_size, depth;
  std::optional<std::string> init, pairs;
  std::optional<bool> freeze_conv;
  std::optional<long> ft_steps;
  std::optional<int> accum;
  std::optional<double> peak_lr, mask_frames, mask_channels;
  std::optional<long> warmup, hold, total;
  std::optional<std::size_t> max_frames;
};

LayerPairSet parse_pairs(const std::string& text) {
  LayerPairSet out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int s = 0, t = 0;
    char colon = 0;
    std::istringstream is(item);
    if (!(is >> s >> colon >> t) || colon != ':' || !(is >> std::ws).eof()) {
      throw UsageError("--pairs: expected s:t[,s:t...], got '" + text + "'");
    }
    out.emplace_back(s, t);
  }
  if (out.empty()) throw UsageError("--pairs: no pairs given");
  return out;
}

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("DISTILLAB_SEED");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (*end != '\0' || v[0] == '-') throw UsageError(std::string("DISTILLAB_SEED is not an unsigned integer: ") + v);
  return s;
}

void apply(const Overrides& o, Command& cmd) {
  bool seed_in_file = false;
  if (o.config) {
    std::ifstream in(*o.config);
    if (!in) throw UsageError("cannot open config " + *o.config);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      const json j = json::parse(ss.str());
      cmd.config = j.get<RunConfig>();
      seed_in_file = j.contains("seed");
    } catch (const json::exception& e) {
      throw UsageError(*o.config + ": " + e.what());
    } catch (const ArgumentError& e) {
      throw UsageError(*o.config + ": " + e.what());
    }
  }
  auto& c = cmd.config;
  if (o.seed) {
    c.seed = *o.seed;
  } else if (!seed_in_file) {
    if (auto s = env_seed()) c.seed = *s;
  }
  if (o.n_utts) c.corpus.n_utts = *o.n_utts;
  if (o.inventory) c.corpus.inventory = *o.inventory;
  if (o.lr) c.distil.lr = *o.lr;
  if (o.shuffle_prob) c.distil.p_shuffle = *o.shuffle_prob;
  if (o.mix_prob) c.distil.p_mix = *o.mix_prob;
  if (o.crossfade_ms) c.distil.crossfade_ms = *o.crossfade_ms;
  if (o.steps) c.distil.steps = *o.steps;
  if (o.batch_size) c.distil.batch_size = *o.batch_size;
  if (o.depth) c.distil.student_depth = *o.depth;
  if (o.init) {
    try {
      c.distil.init_mode = parse_init_mode(*o.init);
    } catch (const ArgumentError& e) {
      throw UsageError(e.what());
    }
  }
  if (o.pairs) c.distil.pairs = parse_pairs(*o.pairs);
  if (o.freeze_conv) c.distil.freeze_conv = c.finetune.freeze_conv = *o.freeze_conv;
  if (o.ft_steps) c.finetune.steps = *o.ft_steps;
  if (o.accum) c.finetune.accum = *o.accum;
  if (o.peak_lr) c.finetune.schedule.peak_lr = *o.peak_lr;
  if (o.warmup) c.finetune.schedule.warmup_steps = *o.warmup;
  if (o.hold) c.finetune.schedule.hold_steps = *o.hold;
  if (o.total) c.finetune.schedule.total_steps = *o.total;
  if (o.mask_frames) c.finetune.mask.frame_coverage = *o.mask_frames;
  if (o.mask_channels) c.finetune.mask.channel_coverage = *o.mask_channels;
  if (o.max_frames) c.cka_max_frames = *o.max_frames;
  try {
    c.resolve();
  } catch (const ArgumentError& e) {
    throw UsageError(std::string("invalid configuration: ") + e.what());
  }
}

json command_json(const Command& cmd) {
  json j{{"name", cmd.name}, {"out", cmd.out.string()}};
  auto put = [&](const char* key, const fs::path& p) {
    if (!p.empty()) j[key] = p.string();
  };
  put("corpus", cmd.corpus);
  put("teacher", cmd.teacher);
  put("student", cmd.student);
  put("model", cmd.model);
  put("model_b", cmd.model_b);
  if (!cmd.preset.empty()) j["preset"] = cmd.preset;
  if (cmd.name == "eval" || cmd.name == "cka") j["split"] = cmd.split;
  if (cmd.depth_override >= 0) j["depth"] = cmd.depth_override;
  return j;
}

std::vector<const CorpusItem*> pick(const Corpus& corpus, const std::string& split) {
  if (split == "dev") return corpus.dev();
  if (split == "train") return corpus.train();
  std::vector<const CorpusItem*> all;
  for (const auto& i : corpus.items) all.push_back(&i);
  return all;
}

// Creates the run directory, drops a stale completion marker and records
// the resolved configuration.
void begin_run(const Command& cmd) {
  std::error_code ec;
  fs::create_directories(cmd.out, ec);
  if (ec) throw IoError("cannot create " + cmd.out.string() + ": " + ec.message());
  fs::remove(cmd.out / "COMPLETE", ec);
  json j = cmd.config;
  j["command"] = command_json(cmd);
  std::ofstream out(cmd.out / "config.resolved.json", std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + (cmd.out / "config.resolved.json").string());
}

void finish_run(const Command& cmd) {
  std::ofstream out(cmd.out / "COMPLETE", std::ios::trunc);
  out << "ok\n";
  if (!out) throw IoError("cannot write completion marker in " + cmd.out.string());
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------

int run_gen_corpus(const Command& cmd, std::ostream& out) {
  begin_run(cmd);
  const auto corpus = generate_synthetic_corpus(cmd.config.corpus, cmd.out);
  out << "wrote " << corpus.items.size() << " utterances to " << cmd.out.string() << '\n';
  finish_run(cmd);
  return 0;
}

int run_splice(const Command& cmd, std::ostream& out) {
  const auto corpus = load_corpus(cmd.corpus);
  begin_run(cmd);
  Rng rng(cmd.config.seed);
  Corpus spliced;
  spliced.vocab = corpus.vocab;
  std::string perms;
  std::size_t shuffled = 0;
  for (const auto& item : corpus.items) {
    auto s = maybe_shuffle(item.utterance, item.spans, rng, cmd.config.distil.p_shuffle, cmd.config.distil.crossfade_ms);
    CorpusItem o{s.utterance, s.spans, {}};
    for (const auto& sp : s.spans) o.transcript.push_back(sp.label);
    perms += item.utterance.id + '\t';
    for (std::size_t k = 0; k < s.permutation.size(); ++k) perms += (k ? " " : "") + std::to_string(s.permutation[k]);
    perms += '\n';
    shuffled += s.shuffled ? 1 : 0;
    spliced.items.push_back(std::move(o));
  }
  write_corpus(spliced, cmd.out);
  std::ofstream(cmd.out / "permutations.txt", std::ios::trunc) << perms;
  out << "shuffled " << shuffled << " of " << corpus.items.size() << " utterances\n";
  finish_run(cmd);
  return 0;
}

int run_init(const Command& cmd, std::ostream& out) {
  if (!cmd.teacher.empty()) {
    const auto teacher = load_checkpoint(resolve_checkpoint(cmd.teacher));
    const auto& d = cmd.config.distil;
    const auto student = init_student(teacher, d.init_mode, d.student_depth, cmd.config.seed);
    begin_run(cmd);
    save_checkpoint(student, cmd.out / "student");
    out << init_mode_name(d.init_mode) << " init: " << student.config.n_layers << "-layer student from "
        << teacher.config.n_layers << "-layer teacher\n";
  } else {
    ModelConfig mc;
    try {
      mc = ModelConfig::preset(cmd.preset);
    } catch (const ArgumentError& e) {
      throw UsageError(e.what());
    }
    if (cmd.depth_override >= 0) mc.n_layers = cmd.depth_override;
    begin_run(cmd);
    Rng rng(cmd.config.seed);
    save_checkpoint(AcousticModel<float>::random(mc, rng).to_checkpoint(), cmd.out / "model");
    out << "random " << cmd.preset << " model with " << param_count(mc).total() << " parameters\n";
  }
  finish_run(cmd);
  return 0;
}

int run_distil(const Command& cmd, std::ostream& out, std::ostream& err) {
  const auto teacher = load_checkpoint(resolve_checkpoint(cmd.teacher));
  const auto corpus = load_corpus(cmd.corpus);
  const auto& cfg = cmd.config.distil;
  const Checkpoint init = cmd.student.empty()
                              ? init_student(teacher, cfg.init_mode, cfg.student_depth, cmd.config.seed)
                              : load_checkpoint(resolve_checkpoint(cmd.student));
  const LayerPairSet pairs =
      cfg.pairs.empty() ? default_pairs(init.config.n_layers, teacher.config.n_layers) : cfg.pairs;
  validate_pairs(pairs, init.config.n_layers, teacher.config.n_layers);
  begin_run(cmd);
  const auto dev = corpus.dev();
  const double before = dev.empty() ? 0.0 : eval_distill_loss(teacher, init, dev, pairs);
  const auto res = train_distill(teacher, init, corpus.train(), cfg);
  save_checkpoint(res.student, cmd.out / "student");
  write_trace(res.trace, cmd.out / "trace.csv");
  json summary{{"steps_completed", res.trace.size()}, {"aborted", res.aborted}};
  if (!dev.empty()) {
    summary["dev_loss_before"] = before;
    summary["dev_loss_after"] = eval_distill_loss(teacher, res.student, dev, pairs);
  }
  write_json(summary, cmd.out / "summary.json");
  if (res.aborted) {
    err << "distillation aborted: " << res.abort_reason << '\n';
    return 1;
  }
  out << "distilled " << res.trace.size() << " steps, final loss " << res.trace.back() << '\n';
  finish_run(cmd);
  return 0;
}

int run_finetune(const Command& cmd, std::ostream& out, std::ostream& err) {
  const auto model = load_checkpoint(resolve_checkpoint(cmd.model));
  const auto corpus = load_corpus(cmd.corpus);
  begin_run(cmd);
  const auto res = finetune(model, corpus.vocab, corpus.train(), corpus.dev(), cmd.config.finetune);
  save_checkpoint(res.model, cmd.out / "model");
  write_trace(res.trace, cmd.out / "trace.csv");
  write_report(res.report, cmd.out / "report.csv");
  if (res.aborted) {
    err << "fine-tuning aborted: " << res.abort_reason << '\n';
    return 1;
  }
  if (!res.report.empty()) out << "dev CER " << fixed(res.report.back().cer) << '\n';
  finish_run(cmd);
  return 0;
}

int run_eval(const Command& cmd, std::ostream& out) {
  const auto model = load_checkpoint(resolve_checkpoint(cmd.model));
  if (!model.has_head()) throw FormatError(cmd.model.string() + " has no CTC head; fine-tune it first");
  const auto corpus = load_corpus(cmd.corpus);
  begin_run(cmd);
  const auto r = evaluate(model, pick(corpus, cmd.split));
  write_report({{0, cmd.split, r.cer}}, cmd.out / "report.csv");
  write_hypotheses(r.hypotheses, cmd.out / "hyp.txt");
  out << cmd.split << " CER " << fixed(r.cer) << '\n';
  finish_run(cmd);
  return 0;
}

int run_cka(const Command& cmd, std::ostream& out) {
  const auto a = load_checkpoint(resolve_checkpoint(cmd.model));
  const auto b = load_checkpoint(resolve_checkpoint(cmd.model_b));
  const auto corpus = load_corpus(cmd.corpus);
  begin_run(cmd);
  const auto m = interlayer_matrix(a, b, pick(corpus, cmd.split), cmd.config.cka_max_frames);
  export_heatmap(m, cmd.out / "cka.csv", cmd.out / "cka.pgm");
  out << "wrote " << m.values.dim(0) << "x" << m.values.dim(1) << " CKA matrix\n";
  finish_run(cmd);
  return 0;
}

int run_ablation(const Command& cmd, std::ostream& out, std::ostream& err) {
  const auto teacher = load_checkpoint(resolve_checkpoint(cmd.teacher));
  const auto corpus = load_corpus(cmd.corpus);
  begin_run(cmd);
  const auto train = corpus.train(), dev = corpus.dev();
  std::string table = "init,splice,final_loss,dev_loss,dev_cer\n";
  int status = 0;
  for (InitMode mode : {InitMode::jump, InitMode::continuous}) {
    for (bool splice : {true, false}) {
      const std::string name = std::string(init_mode_name(mode)) + (splice ? "-splice" : "-nosplice");
      DistillConfig cfg = cmd.config.distil;
      cfg.init_mode = mode;
      if (!splice) cfg.p_shuffle = 0.0;
      const auto init = init_student(teacher, mode, cfg.student_depth, cmd.config.seed);
      const auto pairs = cfg.pairs.empty() ? default_pairs(init.config.n_layers, teacher.config.n_layers) : cfg.pairs;
      const auto res = train_distill(teacher, init, train, cfg);
      const fs::path dir = cmd.out / name;
      save_checkpoint(res.student, dir / "student");
      write_trace(res.trace, dir / "trace.csv");
      std::string cer = "-";
      if (res.aborted) {
        err << name << ": " << res.abort_reason << '\n';
        status = 1;
      } else if (cmd.config.finetune.steps > 0 && !dev.empty()) {
        const auto ft = finetune(res.student, corpus.vocab, train, dev, cmd.config.finetune);
        save_checkpoint(ft.model, dir / "model");
        write_report(ft.report, dir / "report.csv");
        if (!ft.report.empty()) cer = fixed(ft.report.back().cer);
      }
      const std::string final_loss = res.trace.empty() ? "-" : fixed(res.trace.back());
      const std::string dev_loss = dev.empty() ? "-" : fixed(eval_distill_loss(teacher, res.student, dev, pairs));
      table += std::string(init_mode_name(mode)) + ',' + (splice ? "on" : "off") + ',' + final_loss + ',' + dev_loss +
               ',' + cer + '\n';
    }
  }
  std::ofstream(cmd.out / "ablation.csv", std::ios::trunc) << table;
  out << table;
  if (status == 0) finish_run(cmd);
  return status;
}

}  // namespace

fs::path resolve_checkpoint(const fs::path& path) {
  for (const fs::path& p : {path, path / "student", path / "model"}) {
    if (fs::exists(p / "manifest.json")) return p;
  }
  throw IoError("no checkpoint at " + path.string());
}

Command parse_args(const std::vector<std::string>& args, std::ostream& help_out) {
  CLI::App app{"Hidden-state distillation lab for toy speech encoders", "distillab"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");
  Command cmd;
  Overrides o;
  std::string out_dir, corpus, teacher, student, model, model_b;

  auto common = [&](CLI::App* sub, bool needs_out = true) {
    sub->add_option("--seed", o.seed, "Random seed (default: DISTILLAB_SEED or 0)");
    sub->add_option("--config", o.config, "JSON run configuration; flags override it");
    auto* opt = sub->add_option("--out", out_dir, "Run directory");
    if (needs_out) opt->required();
  };
  auto prob = [](CLI::App* sub, const char* flag, std::optional<double>& dst, const char* help) {
    sub->add_option(flag, dst, help)->check(CLI::Range(0.0, 1.0));
  };
  auto distil_flags = [&](CLI::App* sub) {
    sub->add_option("--steps", o.steps, "Distillation steps")->check(CLI::PositiveNumber);
    sub->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
    sub->add_option("--batch-size", o.batch_size, "Utterances per step")->check(CLI::PositiveNumber);
    prob(sub, "--shuffle-prob", o.shuffle_prob, "Probability of splicing an utterance");
    prob(sub, "--mix-prob", o.mix_prob, "Probability of mixing an utterance within the batch");
    sub->add_option("--crossfade-ms", o.crossfade_ms, "Crossfade at splice joins")->check(CLI::NonNegativeNumber);
    sub->add_option("--depth", o.depth, "Student depth (0: half the teacher)")->check(CLI::NonNegativeNumber);
    sub->add_option("--pairs", o.pairs, "Layer pairs s:t[,s:t...]");
    sub->add_option("--freeze-conv", o.freeze_conv, "Freeze the conv feature extractor (true/false)");
  };
  auto finetune_flags = [&](CLI::App* sub) {
    sub->add_option("--accum", o.accum, "Utterances per optimizer update")->check(CLI::PositiveNumber);
    sub->add_option("--peak-lr", o.peak_lr, "Peak learning rate")->check(CLI::NonNegativeNumber);
    sub->add_option("--warmup", o.warmup, "Warmup updates")->check(CLI::NonNegativeNumber);
    sub->add_option("--hold", o.hold, "Hold updates")->check(CLI::NonNegativeNumber);
    sub->add_option("--total", o.total, "Total scheduled updates")->check(CLI::NonNegativeNumber);
    prob(sub, "--mask-frames", o.mask_frames, "Fraction of frames masked");
    prob(sub, "--mask-channels", o.mask_channels, "Fraction of channels masked");
  };
  auto split_opt = [&](CLI::App* sub) {
    sub->add_option("--split", cmd.split, "dev, train or all")->check(CLI::IsMember({"dev", "train", "all"}));
  };

  auto* gen = app.add_subcommand("gen-corpus", "Synthesize the mini-language corpus");
  common(gen);
  gen->add_option("--n-utts", o.n_utts, "Number of utterances")->check(CLI::PositiveNumber);
  gen->add_option("--inventory", o.inventory, "Syllable inventory size");

  auto* splice = app.add_subcommand("splice", "Shuffle syllables of a corpus into a new corpus");
  common(splice);
  splice->add_option("--corpus", corpus, "Input corpus directory")->required();
  prob(splice, "--shuffle-prob", o.shuffle_prob, "Probability of splicing an utterance");
  splice->add_option("--crossfade-ms", o.crossfade_ms, "Crossfade at splice joins")->check(CLI::NonNegativeNumber);

  auto* init = app.add_subcommand("init", "Initialize a student from a teacher, or a random preset model");
  common(init);
  auto* t_opt = init->add_option("--teacher", teacher, "Teacher checkpoint");
  auto* p_opt = init->add_option("--preset", cmd.preset, "Random model preset instead of a teacher");
  t_opt->excludes(p_opt);
  init->add_option("--mode", o.init, "jump, continuous or random")
      ->check(CLI::IsMember({"jump", "continuous", "random"}));
  init->add_option("--depth", o.depth, "Student depth, or preset depth override")->check(CLI::NonNegativeNumber);

  auto* distil = app.add_subcommand("distil", "Distil a teacher into a student");
  common(distil);
  distil->add_option("--teacher", teacher, "Teacher checkpoint")->required();
  distil->add_option("--corpus", corpus, "Corpus directory")->required();
  distil->add_option("--student", student, "Start from this student instead of initializing one");
  distil->add_option("--init", o.init, "jump, continuous or random")
      ->check(CLI::IsMember({"jump", "continuous", "random"}));
  distil_flags(distil);

  auto* ft = app.add_subcommand("finetune", "CTC fine-tuning with a tri-stage schedule");
  common(ft);
  ft->add_option("--model", model, "Encoder checkpoint")->required();
  ft->add_option("--corpus", corpus, "Corpus directory")->required();
  ft->add_option("--steps", o.ft_steps, "Utterance-level micro-steps")->check(CLI::NonNegativeNumber);
  ft->add_option("--freeze-conv", o.freeze_conv, "Freeze the conv feature extractor (true/false)");
  finetune_flags(ft);

  auto* ev = app.add_subcommand("eval", "Greedy CTC decoding and CER");
  common(ev);
  ev->add_option("--model", model, "Fine-tuned checkpoint")->required();
  ev->add_option("--corpus", corpus, "Corpus directory")->required();
  split_opt(ev);

  auto* cka = app.add_subcommand("cka", "Inter-layer linear CKA between two models");
  common(cka);
  cka->add_option("--a", model, "Model A (rows)")->required();
  cka->add_option("--b", model_b, "Model B (columns)")->required();
  cka->add_option("--corpus", corpus, "Probe corpus")->required();
  cka->add_option("--max-frames", o.max_frames, "Probe frame cap")->check(CLI::PositiveNumber);
  split_opt(cka);

  auto* abl = app.add_subcommand("run-ablation", "Distil with init {jump, continuous} x splicing {on, off}");
  common(abl);
  abl->add_option("--teacher", teacher, "Teacher checkpoint")->required();
  abl->add_option("--corpus", corpus, "Corpus directory")->required();
  distil_flags(abl);
  abl->add_option("--finetune-steps", o.ft_steps, "Fine-tune each student for this many micro-steps (0: skip)")
      ->check(CLI::NonNegativeNumber);
  finetune_flags(abl);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::ostringstream sink;
    app.exit(e, help_out, sink);
    return {};
  } catch (const CLI::CallForAllHelp& e) {
    std::ostringstream sink;
    app.exit(e, help_out, sink);
    return {};
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  cmd.name = app.get_subcommands().front()->get_name();
  cmd.out = out_dir;
  cmd.corpus = corpus;
  cmd.teacher = teacher;
  cmd.student = student;
  cmd.model = model;
  cmd.model_b = model_b;
  if (cmd.name == "init") {
    if (teacher.empty() && cmd.preset.empty()) throw UsageError("init needs --teacher or --preset");
    if (!cmd.preset.empty()) {
      if (o.depth) cmd.depth_override = *o.depth;
      o.depth.reset();
    }
  }
  // The ablation wrapper skips fine-tuning unless asked.
  if (cmd.name == "run-ablation" && !o.ft_steps && !o.config) o.ft_steps = 0;
  apply(o, cmd);
  return cmd;
}

int run(const Command& cmd, std::ostream& out, std::ostream& err) {
  try {
    if (cmd.name == "gen-corpus") return run_gen_corpus(cmd, out);
    if (cmd.name == "splice") return run_splice(cmd, out);
    if (cmd.name == "init") return run_init(cmd, out);
    if (cmd.name == "distil") return run_distil(cmd, out, err);
    if (cmd.name == "finetune") return run_finetune(cmd, out, err);
    if (cmd.name == "eval") return run_eval(cmd, out);
    if (cmd.name == "cka") return run_cka(cmd, out);
    if (cmd.name == "run-ablation") return run_ablation(cmd, out, err);
    err << "unknown command '" << cmd.name << "'\n";
    return 2;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Command cmd;
  try {
    cmd = parse_args(args, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nrun with --help for usage\n";
    return 2;
  }
  if (cmd.name.empty()) return 0;
  return run(cmd, out, err);
}

}  // namespace distillab::cli
