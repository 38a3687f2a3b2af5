#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "distillab/checkpoint.hpp"
#include "distillab/corpus.hpp"
#include "distillab/tensor.hpp"

namespace distillab {

// values(i, j) compares layer row_layers[i] of model A with layer
// col_layers[j] of model B.
struct CkaMatrix {
  std::vector<int> row_layers;
  std::vector<int> col_layers;
  Tensor<double> values;

  double operator()(std::size_t i, std::size_t j) const { return values(i, j); }
};

// Linear CKA of activation matrices x[n×d1], y[n×d2] with column-mean
// centering: ‖YcᵀXc‖²_F / (‖XcᵀXc‖_F · ‖YcᵀYc‖_F).
double linear_cka(const Tensor<double>& x, const Tensor<double>& y);

// Concatenated per-layer activations of `model` over `probe` (layer 0 is the
// encoder input), eval mode.
std::vector<Tensor<double>> collect_activations(const Checkpoint& model, const std::vector<const CorpusItem*>& probe);

// Keeps rows floor(k·n/max_rows) for k < max_rows when n > max_rows.
std::vector<std::size_t> subsample_rows(std::size_t n, std::size_t max_rows);

CkaMatrix interlayer_matrix(const Checkpoint& a, const Checkpoint& b, const std::vector<const CorpusItem*>& probe,
                            std::size_t max_frames = 4096);

// Matrix from already collected activations; cells are computed in parallel.
CkaMatrix interlayer_matrix(const std::vector<Tensor<double>>& a, const std::vector<Tensor<double>>& b);

// CSV with 6 decimals and layer labels on both axes; 8-bit binary PGM with
// pixel round(255·clamp(v, 0, 1)), row i = layer i of model A.
void export_heatmap(const CkaMatrix& m, const std::filesystem::path& csv, const std::filesystem::path& pgm);
CkaMatrix read_cka_csv(const std::filesystem::path& csv);

}  // namespace distillab
