#include "distillab/model.hpp"

#include <cmath>
#include <set>

#include "distillab/checkpoint.hpp"
#include "distillab/ops.hpp"

namespace distillab {

void ModelConfig::validate() const {
  if (conv_layers.empty()) throw ArgumentError("model config: conv_layers must not be empty");
  for (const auto& c : conv_layers) {
    if (c.channels < 1 || c.kernel < 1 || c.stride < 1) {
      throw ArgumentError("model config: conv layer needs positive channels/kernel/stride");
    }
  }
  if (d_model < 1 || n_heads < 1 || ffn_dim < 1 || n_layers < 0) {
    throw ArgumentError("model config: d_model, n_heads, ffn_dim must be positive and n_layers non-negative");
  }
  if (d_model % n_heads != 0) {
    throw ArgumentError("model config: d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                        std::to_string(n_heads));
  }
  if (!(layerdrop_p >= 0.0 && layerdrop_p <= 1.0)) throw ArgumentError("model config: layerdrop_p must lie in [0,1]");
}

std::size_t ModelConfig::receptive_field() const {
  // Walk backwards: one output frame needs k samples of the last layer's
  // input, each further frame needs `stride` more.
  std::size_t field = 1;
  for (auto it = conv_layers.rbegin(); it != conv_layers.rend(); ++it) {
    field = (field - 1) * static_cast<std::size_t>(it->stride) + static_cast<std::size_t>(it->kernel);
  }
  return field;
}

std::size_t ModelConfig::frames_for(std::size_t samples) const {
  std::size_t t = samples;
  for (const auto& c : conv_layers) {
    const auto k = static_cast<std::size_t>(c.kernel);
    if (t < k) return 0;
    t = (t - k) / static_cast<std::size_t>(c.stride) + 1;
  }
  return t;
}

ModelConfig ModelConfig::desk_teacher() {
  ModelConfig c;
  c.conv_layers = {{64, 10, 5}, {64, 8, 4}, {64, 4, 2}, {64, 4, 2}};
  c.d_model = 64;
  c.n_layers = 8;
  c.n_heads = 4;
  c.ffn_dim = 256;
  c.layerdrop_p = 0.0;
  return c;
}

ModelConfig ModelConfig::desk_student() {
  ModelConfig c = desk_teacher();
  c.n_layers = 4;
  return c;
}

ModelConfig ModelConfig::xlsr53_shape() {
  ModelConfig c;
  c.conv_layers = {{512, 10, 5}, {512, 3, 2}, {512, 3, 2}, {512, 3, 2}, {512, 2, 2}, {512, 2, 2}};
  c.d_model = 1024;
  c.n_layers = 24;
  c.n_heads = 16;
  c.ffn_dim = 4096;
  c.layerdrop_p = 0.1;
  return c;
}

ModelConfig ModelConfig::distil_shape() {
  ModelConfig c = xlsr53_shape();
  c.n_layers = 12;
  return c;
}

ModelConfig ModelConfig::preset(std::string_view name) {
  if (name == "desk-teacher") return desk_teacher();
  if (name == "desk-student") return desk_student();
  if (name == "xlsr53-shape") return xlsr53_shape();
  if (name == "distil-shape") return distil_shape();
  throw ArgumentError("unknown model preset '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  nlohmann::json conv = nlohmann::json::array();
  for (const auto& l : c.conv_layers) conv.push_back({l.channels, l.kernel, l.stride});
  j = nlohmann::json{{"conv_layers", conv},         {"d_model", c.d_model}, {"n_layers", c.n_layers},
                     {"n_heads", c.n_heads},        {"ffn_dim", c.ffn_dim}, {"layerdrop_p", c.layerdrop_p},
                     {"dtype", dtype_name(c.dtype)}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.conv_layers.clear();
  for (const auto& l : j.at("conv_layers")) {
    if (!l.is_array() || l.size() != 3) throw FormatError("conv_layers entries must be [channels, kernel, stride]");
    c.conv_layers.push_back({l[0].get<int>(), l[1].get<int>(), l[2].get<int>()});
  }
  c.d_model = j.at("d_model").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.ffn_dim = j.at("ffn_dim").get<int>();
  c.layerdrop_p = j.value("layerdrop_p", 0.0);
  c.dtype = parse_dtype(j.value("dtype", std::string("f32")));
}

ParamCount param_count(const ModelConfig& config) {
  config.validate();
  ParamCount n;
  std::size_t c_in = 1;
  for (const auto& l : config.conv_layers) {
    const auto c_out = static_cast<std::size_t>(l.channels);
    n.conv += c_out * c_in * static_cast<std::size_t>(l.kernel) + c_out + 2 * c_out;
    c_in = c_out;
  }
  const auto d = static_cast<std::size_t>(config.d_model);
  const auto f = static_cast<std::size_t>(config.ffn_dim);
  n.other = 2 * c_in + d * c_in + d + d;
  const std::size_t per_block = 2 * d + 4 * (d * d + d) + 2 * d + (f * d + f) + (d * f + d);
  n.encoder = per_block * static_cast<std::size_t>(config.n_layers);
  return n;
}

std::size_t FrameMask::valid_count() const {
  std::size_t n = 0;
  for (auto p : padded) n += p ? 0 : 1;
  return n;
}

template <typename T>
Tensor<T> sinusoidal_positions(std::size_t frames, std::size_t d) {
  Tensor<T> pe(Shape{frames, d});
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      pe(t, i) = static_cast<T>(std::sin(static_cast<double>(t) * freq));
      if (i + 1 < d) pe(t, i + 1) = static_cast<T>(std::cos(static_cast<double>(t) * freq));
    }
  return pe;
}

namespace {

template <typename T>
Parameter<T> make_param(std::string name, Shape shape, T fill = T(0)) {
  return Parameter<T>{std::move(name), Tensor<T>(std::move(shape), fill), Tensor<T>(), true};
}

template <typename T>
void fill_normal(Parameter<T>& p, Rng& rng, double stddev) {
  for (auto& v : p.value.data()) v = static_cast<T>(rng.normal() * stddev);
}

}  // namespace

template <typename T>
AcousticModel<T>::AcousticModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  config_.dtype = dtype_of<T>();
  std::size_t c_in = 1;
  for (std::size_t i = 0; i < config_.conv_layers.size(); ++i) {
    const auto& l = config_.conv_layers[i];
    const auto c_out = static_cast<std::size_t>(l.channels);
    const std::string pre = "conv." + std::to_string(i) + ".";
    conv_.push_back(ConvBlock{
        make_param<T>(pre + "weight", {c_out, c_in, static_cast<std::size_t>(l.kernel)}),
        make_param<T>(pre + "bias", {c_out}),
        make_param<T>(pre + "ln.gamma", {c_out}, T(1)),
        make_param<T>(pre + "ln.beta", {c_out}),
    });
    c_in = c_out;
  }
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto f = static_cast<std::size_t>(config_.ffn_dim);
  feat_ln_gamma_ = make_param<T>("proj.ln.gamma", {c_in}, T(1));
  feat_ln_beta_ = make_param<T>("proj.ln.beta", {c_in});
  proj_w_ = make_param<T>("proj.weight", {d, c_in});
  proj_b_ = make_param<T>("proj.bias", {d});
  mask_emb_ = make_param<T>("proj.mask_emb", {d});
  for (int l = 1; l <= config_.n_layers; ++l) {
    const std::string pre = "enc." + std::to_string(l) + ".";
    blocks_.push_back(EncoderBlock{
        make_param<T>(pre + "ln1.gamma", {d}, T(1)),
        make_param<T>(pre + "ln1.beta", {d}),
        make_param<T>(pre + "attn.q.weight", {d, d}),
        make_param<T>(pre + "attn.q.bias", {d}),
        make_param<T>(pre + "attn.k.weight", {d, d}),
        make_param<T>(pre + "attn.k.bias", {d}),
        make_param<T>(pre + "attn.v.weight", {d, d}),
        make_param<T>(pre + "attn.v.bias", {d}),
        make_param<T>(pre + "attn.out.weight", {d, d}),
        make_param<T>(pre + "attn.out.bias", {d}),
        make_param<T>(pre + "ln2.gamma", {d}, T(1)),
        make_param<T>(pre + "ln2.beta", {d}),
        make_param<T>(pre + "ffn.fc1.weight", {f, d}),
        make_param<T>(pre + "ffn.fc1.bias", {f}),
        make_param<T>(pre + "ffn.fc2.weight", {d, f}),
        make_param<T>(pre + "ffn.fc2.bias", {d}),
    });
  }
}

template <typename T>
AcousticModel<T> AcousticModel<T>::random(ModelConfig config, Rng& rng) {
  AcousticModel m(std::move(config));
  std::size_t c_in = 1;
  for (std::size_t i = 0; i < m.conv_.size(); ++i) {
    const auto& l = m.config_.conv_layers[i];
    fill_normal(m.conv_[i].weight, rng, std::sqrt(2.0 / static_cast<double>(c_in * l.kernel)));
    c_in = static_cast<std::size_t>(l.channels);
  }
  const double d = m.config_.d_model;
  const double f = m.config_.ffn_dim;
  fill_normal(m.proj_w_, rng, 1.0 / std::sqrt(static_cast<double>(c_in)));
  for (auto& v : m.mask_emb_.value.data()) v = static_cast<T>(rng.uniform());
  // Residual-branch outputs are shrunk with depth so the stream stays O(1).
  const double depth_scale = 1.0 / std::sqrt(2.0 * std::max(1, m.config_.n_layers));
  for (auto& b : m.blocks_) {
    fill_normal(b.wq, rng, 1.0 / std::sqrt(d));
    fill_normal(b.wk, rng, 1.0 / std::sqrt(d));
    fill_normal(b.wv, rng, 1.0 / std::sqrt(d));
    fill_normal(b.wo, rng, depth_scale / std::sqrt(d));
    fill_normal(b.w1, rng, 1.0 / std::sqrt(d));
    fill_normal(b.w2, rng, depth_scale / std::sqrt(f));
  }
  return m;
}

template <typename T>
std::vector<Parameter<T>*> AcousticModel<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& c : conv_) {
    out.insert(out.end(), {&c.weight, &c.bias, &c.ln_gamma, &c.ln_beta});
  }
  out.insert(out.end(), {&feat_ln_gamma_, &feat_ln_beta_, &proj_w_, &proj_b_, &mask_emb_});
  for (auto& b : blocks_) {
    out.insert(out.end(), {&b.ln1_gamma, &b.ln1_beta, &b.wq, &b.bq, &b.wk, &b.bk, &b.wv, &b.bv, &b.wo, &b.bo,
                           &b.ln2_gamma, &b.ln2_beta, &b.w1, &b.b1, &b.w2, &b.b2});
  }
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> AcousticModel<T>::parameters() const {
  auto mut = const_cast<AcousticModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

template <typename T>
void AcousticModel<T>::set_conv_trainable(bool trainable) {
  for (auto& c : conv_) {
    c.weight.trainable = c.bias.trainable = c.ln_gamma.trainable = c.ln_beta.trainable = trainable;
  }
}

template <typename T>
AcousticModel<T> AcousticModel<T>::from_checkpoint(const Checkpoint& ckpt) {
  AcousticModel m(ckpt.config);
  std::set<std::string> expected;
  for (auto* p : m.parameters()) {
    expected.insert(p->name);
    const TensorBlob* blob = ckpt.find(p->name);
    if (!blob) throw FormatError("checkpoint is missing tensor '" + p->name + "'");
    if (blob->shape != p->value.shape()) {
      throw FormatError("checkpoint tensor '" + p->name + "' has shape " + shape_str(blob->shape) + ", model expects " +
                        shape_str(p->value.shape()));
    }
    p->value = blob->to_tensor<T>();
  }
  for (const auto& blob : ckpt.tensors) {
    if (!expected.count(blob.name) && blob.name.rfind("head.", 0) != 0) {
      throw FormatError("checkpoint tensor '" + blob.name + "' does not belong to this model");
    }
  }
  return m;
}

template <typename T>
Checkpoint AcousticModel<T>::to_checkpoint() const {
  Checkpoint c;
  c.config = config_;
  for (const auto* p : parameters()) c.tensors.push_back(TensorBlob::from_tensor(p->name, p->value));
  return c;
}

template <typename T>
Var<T> AcousticModel<T>::forward_features(Graph<T>& g, std::span<const T> waveform) {
  const std::size_t field = config_.receptive_field();
  if (waveform.size() < field) {
    throw InputTooShortError("waveform of " + std::to_string(waveform.size()) +
                             " samples is shorter than the receptive field of " + std::to_string(field));
  }
  double mu = 0;
  for (T v : waveform) mu += v;
  mu /= static_cast<double>(waveform.size());
  double var = 0;
  for (T v : waveform) var += (v - mu) * (v - mu);
  var /= static_cast<double>(waveform.size());
  const double inv = 1.0 / std::sqrt(var + 1e-5);
  Tensor<T> x(Shape{waveform.size(), 1});
  for (std::size_t i = 0; i < waveform.size(); ++i) x[i] = static_cast<T>((waveform[i] - mu) * inv);

  Var<T> h = g.constant(std::move(x));
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    auto& c = conv_[i];
    h = conv1d(h, g.param(c.weight), static_cast<std::size_t>(config_.conv_layers[i].stride));
    h = add_row(h, g.param(c.bias));
    h = layer_norm(h, g.param(c.ln_gamma), g.param(c.ln_beta));
    h = gelu(h);
  }
  return h;
}

template <typename T>
Var<T> AcousticModel<T>::project(Graph<T>& g, const Var<T>& features) {
  Var<T> h = layer_norm(features, g.param(feat_ln_gamma_), g.param(feat_ln_beta_));
  return linear(h, g.param(proj_w_), g.param(proj_b_));
}

template <typename T>
Var<T> AcousticModel<T>::block_forward(Graph<T>& g, EncoderBlock& b, const Var<T>& x, const Tensor<T>* attn_bias) {
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto heads = static_cast<std::size_t>(config_.n_heads);
  const std::size_t hd = d / heads;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(hd));

  Var<T> h = layer_norm(x, g.param(b.ln1_gamma), g.param(b.ln1_beta));
  Var<T> q = linear(h, g.param(b.wq), g.param(b.bq));
  Var<T> k = linear(h, g.param(b.wk), g.param(b.bk));
  Var<T> v = linear(h, g.param(b.wv), g.param(b.bv));
  Var<T> bias;
  if (attn_bias) bias = g.constant(*attn_bias);
  std::vector<Var<T>> outs;
  outs.reserve(heads);
  for (std::size_t i = 0; i < heads; ++i) {
    Var<T> scores = scale(matmul_nt(slice_cols(q, i * hd, hd), slice_cols(k, i * hd, hd)), inv_sqrt);
    if (attn_bias) scores = add(scores, bias);
    outs.push_back(matmul(softmax(scores, -1), slice_cols(v, i * hd, hd)));
  }
  Var<T> attn = heads == 1 ? outs.front() : concat_cols(outs);
  Var<T> x1 = add(x, linear(attn, g.param(b.wo), g.param(b.bo)));

  Var<T> h2 = layer_norm(x1, g.param(b.ln2_gamma), g.param(b.ln2_beta));
  Var<T> ff = linear(gelu(linear(h2, g.param(b.w1), g.param(b.b1))), g.param(b.w2), g.param(b.b2));
  return add(x1, ff);
}

template <typename T>
HiddenStates<T> AcousticModel<T>::encode(Graph<T>& g, const Var<T>& projected, Rng* rng, const FrameMask* mask) {
  if (projected.value().rank() != 2 || projected.dim(1) != static_cast<std::size_t>(config_.d_model)) {
    throw DimensionError("encode: expected [T×" + std::to_string(config_.d_model) + "], got " +
                         shape_str(projected.shape()));
  }
  const std::size_t frames = projected.dim(0);
  Tensor<T> bias_table;
  const Tensor<T>* attn_bias = nullptr;
  if (mask) {
    if (mask->size() != frames) {
      throw DimensionError("frame mask covers " + std::to_string(mask->size()) + " frames, input has " +
                           std::to_string(frames));
    }
    if (mask->valid_count() != frames) {
      // Padded keys get a large negative logit, i.e. exactly zero weight.
      bias_table = Tensor<T>(Shape{frames, frames});
      for (std::size_t r = 0; r < frames; ++r)
        for (std::size_t c = 0; c < frames; ++c)
          if (mask->padded[c]) bias_table(r, c) = T(-1e9);
      attn_bias = &bias_table;
    }
  }

  HiddenStates<T> hs;
  Var<T> x = add(projected, g.constant(sinusoidal_positions<T>(frames, static_cast<std::size_t>(config_.d_model))));
  hs.states.push_back(x);
  const bool drop = g.mode() == Mode::train && config_.layerdrop_p > 0.0;
  if (drop && !rng) throw ArgumentError("encode: layerdrop in train mode needs a random generator");
  for (auto& b : blocks_) {
    if (drop && rng->uniform() < config_.layerdrop_p) {
      hs.states.push_back(x);
      continue;
    }
    x = block_forward(g, b, x, attn_bias);
    hs.states.push_back(x);
  }
  return hs;
}

template <typename T>
HiddenStates<T> AcousticModel<T>::forward_encoder(Graph<T>& g, const Var<T>& features, Rng* rng,
                                                  const FrameMask* mask) {
  return encode(g, project(g, features), rng, mask);
}

template <typename T>
HiddenStates<T> AcousticModel<T>::forward(Graph<T>& g, std::span<const T> waveform, Rng* rng) {
  return forward_encoder(g, forward_features(g, waveform), rng);
}

template Tensor<float> sinusoidal_positions<float>(std::size_t, std::size_t);
template Tensor<double> sinusoidal_positions<double>(std::size_t, std::size_t);
template class AcousticModel<float>;
template class AcousticModel<double>;

}  // namespace distillab
