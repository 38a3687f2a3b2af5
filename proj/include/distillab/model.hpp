#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "distillab/autograd.hpp"
#include "distillab/rng.hpp"

namespace distillab {

struct ConvLayerSpec {
  int channels = 0;
  int kernel = 0;
  int stride = 1;

  bool operator==(const ConvLayerSpec&) const = default;
};

// Shape of a wav2vec2-style network: strided conv feature extractor, linear
// projection to d_model, then a stack of pre-norm transformer blocks.
struct ModelConfig {
  std::vector<ConvLayerSpec> conv_layers;
  int d_model = 64;
  int n_layers = 8;
  int n_heads = 4;
  int ffn_dim = 256;
  double layerdrop_p = 0.0;
  DType dtype = DType::f32;

  void validate() const;

  // Samples consumed by one output frame of the conv stack.
  std::size_t receptive_field() const;
  // Frames produced for `samples` input samples (0 when too short).
  std::size_t frames_for(std::size_t samples) const;

  bool operator==(const ModelConfig&) const = default;

  // 4 conv layers, d_model 64, 8 encoder layers, 4 heads, ffn 256.
  static ModelConfig desk_teacher();
  // desk_teacher with 4 encoder layers.
  static ModelConfig desk_student();
  // 6 conv layers of 512 channels, 24 layers of width 1024, 16 heads.
  static ModelConfig xlsr53_shape();
  // xlsr53_shape with 12 encoder layers.
  static ModelConfig distil_shape();
  static ModelConfig preset(std::string_view name);
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct ParamCount {
  std::size_t conv = 0;
  std::size_t encoder = 0;
  std::size_t other = 0;
  std::size_t total() const { return conv + encoder + other; }
};

// Exact trainable-parameter count of an AcousticModel built from `config`.
ParamCount param_count(const ModelConfig& config);

// Per-frame padding flags for a padded batch: nonzero marks padding.
struct FrameMask {
  std::vector<std::uint8_t> padded;

  std::size_t size() const { return padded.size(); }
  std::size_t valid_count() const;
  static FrameMask none(std::size_t frames) { return FrameMask{std::vector<std::uint8_t>(frames, 0)}; }
};

// states[0] is the encoder input (projection + positional encoding);
// states[l] is the output of encoder block l.
template <typename T>
struct HiddenStates {
  std::vector<Var<T>> states;

  std::size_t size() const { return states.size(); }
  const Var<T>& operator[](std::size_t l) const { return states.at(l); }
};

struct Checkpoint;

template <typename T>
class AcousticModel {
 public:
  struct ConvBlock {
    Parameter<T> weight, bias, ln_gamma, ln_beta;
  };
  struct EncoderBlock {
    Parameter<T> ln1_gamma, ln1_beta;
    Parameter<T> wq, bq, wk, bk, wv, bv, wo, bo;
    Parameter<T> ln2_gamma, ln2_beta;
    Parameter<T> w1, b1, w2, b2;
  };

  // Zero weights, unit norm gains. Use `random` for a trainable start.
  explicit AcousticModel(ModelConfig config);
  static AcousticModel random(ModelConfig config, Rng& rng);
  static AcousticModel from_checkpoint(const Checkpoint& ckpt);
  Checkpoint to_checkpoint() const;

  const ModelConfig& config() const { return config_; }

  // All parameters in canonical order with canonical names.
  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;

  void set_conv_trainable(bool trainable);

  // Raw waveform -> [frames×c_last]. The waveform is normalized to zero
  // mean and unit variance first.
  Var<T> forward_features(Graph<T>& g, std::span<const T> waveform);
  // Conv features -> [frames×d_model].
  Var<T> project(Graph<T>& g, const Var<T>& features);
  // Projected frames -> hidden states. Adds positional encoding, then runs
  // the blocks; in train mode each block is skipped with probability
  // layerdrop_p (one draw from `rng` per block when layerdrop_p > 0).
  HiddenStates<T> encode(Graph<T>& g, const Var<T>& projected, Rng* rng = nullptr, const FrameMask* mask = nullptr);
  // project + encode.
  HiddenStates<T> forward_encoder(Graph<T>& g, const Var<T>& features, Rng* rng = nullptr,
                                  const FrameMask* mask = nullptr);
  HiddenStates<T> forward(Graph<T>& g, std::span<const T> waveform, Rng* rng = nullptr);

  Parameter<T>& mask_embedding() { return mask_emb_; }
  std::vector<ConvBlock>& conv_blocks() { return conv_; }
  std::vector<EncoderBlock>& encoder_blocks() { return blocks_; }

 private:
  Var<T> block_forward(Graph<T>& g, EncoderBlock& b, const Var<T>& x, const Tensor<T>* attn_bias);

  ModelConfig config_;
  std::vector<ConvBlock> conv_;
  Parameter<T> feat_ln_gamma_, feat_ln_beta_, proj_w_, proj_b_, mask_emb_;
  std::vector<EncoderBlock> blocks_;
};

// Fixed sinusoidal position table [frames×d].
template <typename T>
Tensor<T> sinusoidal_positions(std::size_t frames, std::size_t d);

extern template class AcousticModel<float>;
extern template class AcousticModel<double>;

}  // namespace distillab
