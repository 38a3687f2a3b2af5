#include "distillab/cka.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "distillab/errors.hpp"
#include "distillab/kernels.hpp"
#include "distillab/model.hpp"

namespace distillab {

namespace {

// Column-mean centered copy. Throws when nothing is left after centering.
Tensor<double> centered(const Tensor<double>& x) {
  if (x.rank() != 2) throw DimensionError("activation matrix must be 2-D, got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (n < 2) throw DegenerateInputError("CKA needs at least 2 rows, got " + std::to_string(n));
  std::vector<double> mean(d, 0.0);
  double raw = 0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      const double v = x(r, c);
      if (!std::isfinite(v)) throw NumericError("non-finite activation at row " + std::to_string(r));
      mean[c] += v;
      raw += v * v;
    }
  for (auto& m : mean) m /= static_cast<double>(n);
  Tensor<double> out(x.shape());
  double left = 0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      out(r, c) = x(r, c) - mean[c];
      left += out(r, c) * out(r, c);
    }
  if (left <= 1e-24 * raw || left == 0.0) throw DegenerateInputError("activation matrix is constant over rows");
  return out;
}

// ‖AᵀB‖²_F for centered a[n×p], b[n×q].
double cross_sq(const Tensor<double>& a, const Tensor<double>& b) {
  const std::size_t n = a.dim(0), p = a.dim(1), q = b.dim(1);
  std::vector<double> m(p * q);
  kernels::gemm_tn<double>(p, q, n, a.data(), b.data(), m);
  double s = 0;
  for (double v : m) s += v * v;
  return s;
}

}  // namespace

double linear_cka(const Tensor<double>& x, const Tensor<double>& y) {
  if (x.rank() != 2 || y.rank() != 2 || x.dim(0) != y.dim(0)) {
    throw DimensionError("linear_cka: row counts of " + shape_str(x.shape()) + " and " + shape_str(y.shape()) +
                         " differ");
  }
  const auto xc = centered(x), yc = centered(y);
  return cross_sq(yc, xc) / (std::sqrt(cross_sq(xc, xc)) * std::sqrt(cross_sq(yc, yc)));
}

std::vector<Tensor<double>> collect_activations(const Checkpoint& ckpt, const std::vector<const CorpusItem*>& probe) {
  if (probe.empty()) throw ArgumentError("probe set is empty");
  auto model = AcousticModel<float>::from_checkpoint(ckpt);
  const std::size_t layers = static_cast<std::size_t>(model.config().n_layers) + 1;
  const std::size_t d = static_cast<std::size_t>(model.config().d_model);
  std::vector<std::vector<double>> rows(layers);
  for (const auto* item : probe) {
    Graph<float> g(Mode::eval, false);
    const auto hs = model.forward(g, item->utterance.samples);
    for (std::size_t l = 0; l < layers; ++l) {
      const auto& v = hs[l].value();
      rows[l].insert(rows[l].end(), v.data().begin(), v.data().end());
    }
  }
  std::vector<Tensor<double>> out;
  out.reserve(layers);
  for (auto& r : rows) {
    const std::size_t n = r.size() / d;
    out.emplace_back(Shape{n, d}, std::move(r));
  }
  return out;
}

std::vector<std::size_t> subsample_rows(std::size_t n, std::size_t max_rows) {
  if (max_rows == 0) throw ArgumentError("max_frames must be positive");
  std::vector<std::size_t> idx;
  if (n <= max_rows) {
    idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
  }
  idx.reserve(max_rows);
  for (std::size_t k = 0; k < max_rows; ++k) idx.push_back(k * n / max_rows);
  return idx;
}

namespace {

Tensor<double> take_rows(const Tensor<double>& x, const std::vector<std::size_t>& idx) {
  const std::size_t d = x.dim(1);
  Tensor<double> out(Shape{idx.size(), d});
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::copy_n(x.ptr() + idx[r] * d, d, out.ptr() + r * d);
  return out;
}

}  // namespace

CkaMatrix interlayer_matrix(const Checkpoint& a, const Checkpoint& b, const std::vector<const CorpusItem*>& probe,
                            std::size_t max_frames) {
  auto acts_a = collect_activations(a, probe);
  auto acts_b = collect_activations(b, probe);
  const std::size_t n = acts_a[0].dim(0);
  if (acts_b[0].dim(0) != n) {
    throw DimensionError("models produce " + std::to_string(n) + " and " + std::to_string(acts_b[0].dim(0)) +
                         " probe frames");
  }
  const auto idx = subsample_rows(n, max_frames);
  for (auto& t : acts_a) t = take_rows(t, idx);
  for (auto& t : acts_b) t = take_rows(t, idx);
  return interlayer_matrix(acts_a, acts_b);
}

CkaMatrix interlayer_matrix(const std::vector<Tensor<double>>& a, const std::vector<Tensor<double>>& b) {
  if (a.empty() || b.empty()) throw ArgumentError("interlayer_matrix needs at least one layer per model");
  std::vector<Tensor<double>> ca, cb;
  for (const auto& t : a) ca.push_back(centered(t));
  for (const auto& t : b) {
    if (t.dim(0) != a[0].dim(0)) throw DimensionError("activation row counts differ between models");
    cb.push_back(centered(t));
  }
  std::vector<double> na(ca.size()), nb(cb.size());
  for (std::size_t i = 0; i < ca.size(); ++i) na[i] = std::sqrt(cross_sq(ca[i], ca[i]));
  for (std::size_t j = 0; j < cb.size(); ++j) nb[j] = std::sqrt(cross_sq(cb[j], cb[j]));

  CkaMatrix m;
  for (std::size_t i = 0; i < ca.size(); ++i) m.row_layers.push_back(static_cast<int>(i));
  for (std::size_t j = 0; j < cb.size(); ++j) m.col_layers.push_back(static_cast<int>(j));
  m.values = Tensor<double>(Shape{ca.size(), cb.size()});
  const auto cells = static_cast<std::ptrdiff_t>(ca.size() * cb.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < cells; ++c) {
    const auto i = static_cast<std::size_t>(c) / cb.size(), j = static_cast<std::size_t>(c) % cb.size();
    m.values(i, j) = cross_sq(cb[j], ca[i]) / (na[i] * nb[j]);
  }
  return m;
}

void export_heatmap(const CkaMatrix& m, const std::filesystem::path& csv, const std::filesystem::path& pgm) {
  const std::size_t rows = m.values.dim(0), cols = m.values.dim(1);
  {
    std::ofstream out(csv, std::ios::trunc);
    if (!out) throw IoError("cannot write " + csv.string());
    out << "a\\b";
    for (int l : m.col_layers) out << ',' << l;
    out << '\n';
    char buf[32];
    for (std::size_t i = 0; i < rows; ++i) {
      out << m.row_layers[i];
      for (std::size_t j = 0; j < cols; ++j) {
        std::snprintf(buf, sizeof buf, ",%.6f", m.values(i, j));
        out << buf;
      }
      out << '\n';
    }
    if (!out) throw IoError("failed writing " + csv.string());
  }
  std::ofstream out(pgm, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + pgm.string());
  out << "P5\n" << cols << ' ' << rows << "\n255\n";
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = std::clamp(m.values(i, j), 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::floor(255.0 * v + 0.5))));
    }
  if (!out) throw IoError("failed writing " + pgm.string());
}

CkaMatrix read_cka_csv(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw IoError("cannot open " + csv.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    return out;
  };
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(csv.string() + ": empty file", lineno);
  CkaMatrix m;
  const auto head = split(line);
  try {
    for (std::size_t j = 1; j < head.size(); ++j) m.col_layers.push_back(std::stoi(head[j]));
    std::vector<double> vals;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto f = split(line);
      if (f.size() != head.size()) throw ParseError(csv.string() + ": wrong field count", lineno);
      m.row_layers.push_back(std::stoi(f[0]));
      for (std::size_t j = 1; j < f.size(); ++j) vals.push_back(std::stod(f[j]));
    }
    if (m.row_layers.empty() || m.col_layers.empty()) throw ParseError(csv.string() + ": no cells", lineno);
    m.values = Tensor<double>(Shape{m.row_layers.size(), m.col_layers.size()}, std::move(vals));
  } catch (const std::logic_error&) {
    throw ParseError(csv.string() + ": bad number", lineno);
  }
  return m;
}

}  // namespace distillab
