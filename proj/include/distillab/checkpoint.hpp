#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "distillab/model.hpp"
#include "distillab/tensor.hpp"

namespace distillab {

// One named tensor as raw little-endian bytes in its stored dtype.
struct TensorBlob {
  std::string name;
  DType dtype = DType::f32;
  Shape shape;
  std::vector<std::uint8_t> bytes;

  template <typename T>
  Tensor<T> to_tensor() const;
  template <typename T>
  static TensorBlob from_tensor(std::string name, const Tensor<T>& t);

  bool operator==(const TensorBlob&) const = default;
};

// (student_layer, teacher_layer) pairs, 1-indexed.
struct LayerMapping {
  std::vector<std::pair<int, int>> pairs;
  bool operator==(const LayerMapping&) const = default;
};

// Named-tensor manifest plus config. Tensor names follow
// `conv.<i>.*`, `proj.*`, `enc.<l>.*` (l 1-indexed) and, for models with a
// CTC head attached, `head.*`.
struct Checkpoint {
  ModelConfig config;
  std::vector<TensorBlob> tensors;
  std::optional<LayerMapping> mapping;
  // Output symbols of the CTC head; non-empty iff `head.*` tensors exist.
  std::vector<std::string> vocab;

  const TensorBlob* find(std::string_view name) const;
  const TensorBlob& at(std::string_view name) const;
  bool has_head() const { return !vocab.empty(); }
};

// Writes `dir/manifest.json` and `dir/params.bin`, creating `dir`.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);

// Reads and validates a checkpoint directory; nothing is returned unless
// every manifest entry is consistent with the blob. Manifest entry order
// does not matter.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Student layer i <- teacher layer 2i for i = 1..d_s. Requires d_t >= 2·d_s.
Checkpoint layer_jump_init(const Checkpoint& teacher, int student_depth);

// Student layer i <- teacher layer i for i = 1..d_s. Requires d_t >= d_s.
Checkpoint continuous_init(const Checkpoint& teacher, int student_depth);

// Copies conv and projection tensors and the encoder layers named by
// `mapping`. Both init strategies reduce to this.
Checkpoint init_from_mapping(const Checkpoint& teacher, const LayerMapping& mapping);

}  // namespace distillab
