#include "distillab/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <regex>
#include <set>

#include <nlohmann/json.hpp>

namespace distillab {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace fs = std::filesystem;
using nlohmann::json;

template <typename T>
Tensor<T> TensorBlob::to_tensor() const {
  const std::size_t n = numel(shape);
  std::vector<T> out(n);
  if (dtype == DType::f32) {
    std::vector<float> raw(n);
    std::memcpy(raw.data(), bytes.data(), n * sizeof(float));
    std::copy(raw.begin(), raw.end(), out.begin());
  } else {
    std::vector<double> raw(n);
    std::memcpy(raw.data(), bytes.data(), n * sizeof(double));
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>(raw[i]);
  }
  return Tensor<T>(shape, std::move(out));
}

template <typename T>
TensorBlob TensorBlob::from_tensor(std::string name, const Tensor<T>& t) {
  TensorBlob b;
  b.name = std::move(name);
  b.dtype = dtype_of<T>();
  b.shape = t.shape();
  b.bytes.resize(t.size() * sizeof(T));
  std::memcpy(b.bytes.data(), t.ptr(), b.bytes.size());
  return b;
}

template Tensor<float> TensorBlob::to_tensor<float>() const;
template Tensor<double> TensorBlob::to_tensor<double>() const;
template TensorBlob TensorBlob::from_tensor<float>(std::string, const Tensor<float>&);
template TensorBlob TensorBlob::from_tensor<double>(std::string, const Tensor<double>&);

const TensorBlob* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

const TensorBlob& Checkpoint::at(std::string_view name) const {
  const TensorBlob* t = find(name);
  if (!t) throw FormatError("checkpoint has no tensor '" + std::string(name) + "'");
  return *t;
}

namespace {

bool canonical_name(const std::string& name) {
  static const std::regex pattern(R"(^(conv\.(0|[1-9][0-9]*)|proj|enc\.[1-9][0-9]*|head)\.[A-Za-z0-9_]+(\.[A-Za-z0-9_]+)*$)");
  return std::regex_match(name, pattern);
}

// Encoder layer index of `enc.<l>.rest`, or 0 for other names.
int encoder_layer(const std::string& name, std::string* rest = nullptr) {
  if (name.rfind("enc.", 0) != 0) return 0;
  const auto dot = name.find('.', 4);
  if (rest) *rest = name.substr(dot + 1);
  return std::stoi(name.substr(4, dot - 4));
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());

  json entries = json::array();
  std::uint64_t offset = 0;
  std::ofstream blob(dir / "params.bin", std::ios::binary | std::ios::trunc);
  if (!blob) throw IoError("cannot write " + (dir / "params.bin").string());
  for (const auto& t : ckpt.tensors) {
    if (t.bytes.size() != numel(t.shape) * dtype_width(t.dtype)) {
      throw FormatError("tensor '" + t.name + "' byte size does not match its shape");
    }
    blob.write(reinterpret_cast<const char*>(t.bytes.data()), static_cast<std::streamsize>(t.bytes.size()));
    entries.push_back({{"name", t.name},
                       {"shape", t.shape},
                       {"dtype", dtype_name(t.dtype)},
                       {"offset", offset},
                       {"length", t.bytes.size()}});
    offset += t.bytes.size();
  }
  blob.close();
  if (!blob) throw IoError("failed writing " + (dir / "params.bin").string());

  json manifest{{"config", ckpt.config}, {"tensors", entries}};
  if (ckpt.mapping) {
    json pairs = json::array();
    for (auto [s, t] : ckpt.mapping->pairs) pairs.push_back({s, t});
    manifest["mapping"] = pairs;
  }
  if (!ckpt.vocab.empty()) manifest["vocab"] = ckpt.vocab;
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(1) << '\n';
  if (!out) throw IoError("failed writing " + (dir / "manifest.json").string());
}

Checkpoint load_checkpoint(const fs::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw IoError("cannot read " + (dir / "manifest.json").string());
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::exception& e) {
    throw FormatError("corrupt manifest " + (dir / "manifest.json").string() + ": " + e.what());
  }

  std::ifstream bf(dir / "params.bin", std::ios::binary);
  if (!bf) throw IoError("cannot read " + (dir / "params.bin").string());
  std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());

  Checkpoint ckpt;
  struct Entry {
    TensorBlob tensor;
    std::uint64_t offset;
  };
  std::vector<Entry> entries;
  try {
    ckpt.config = manifest.at("config").get<ModelConfig>();
    if (!manifest.at("tensors").is_array()) throw FormatError("manifest 'tensors' must be an array");
    std::set<std::string> seen;
    for (const auto& e : manifest.at("tensors")) {
      const std::string name = e.at("name").get<std::string>();
      if (!canonical_name(name)) throw FormatError("manifest entry '" + name + "' has a non-canonical name");
      if (!seen.insert(name).second) throw FormatError("manifest entry '" + name + "' appears twice");
      Entry entry;
      entry.tensor.name = name;
      try {
        entry.tensor.dtype = parse_dtype(e.at("dtype").get<std::string>());
      } catch (const FormatError& err) {
        throw FormatError("manifest entry '" + name + "': " + err.what());
      }
      for (const auto& extent : e.at("shape")) {
        const auto v = extent.get<std::int64_t>();
        if (v <= 0) throw FormatError("manifest entry '" + name + "' has a non-positive extent");
        entry.tensor.shape.push_back(static_cast<std::size_t>(v));
      }
      entry.offset = e.at("offset").get<std::uint64_t>();
      const auto length = e.at("length").get<std::uint64_t>();
      if (length != numel(entry.tensor.shape) * dtype_width(entry.tensor.dtype)) {
        throw FormatError("manifest entry '" + name + "' length " + std::to_string(length) + " does not equal " +
                          shape_str(entry.tensor.shape) + " × " + std::to_string(dtype_width(entry.tensor.dtype)));
      }
      if (entry.offset + length > blob.size()) {
        throw FormatError("manifest entry '" + name + "' extends past the end of params.bin (" +
                          std::to_string(blob.size()) + " bytes)");
      }
      entry.tensor.bytes.assign(blob.begin() + static_cast<std::ptrdiff_t>(entry.offset),
                                blob.begin() + static_cast<std::ptrdiff_t>(entry.offset + length));
      entries.push_back(std::move(entry));
    }
    if (manifest.contains("mapping")) {
      LayerMapping m;
      for (const auto& p : manifest.at("mapping")) m.pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
      ckpt.mapping = m;
    }
    if (manifest.contains("vocab")) ckpt.vocab = manifest.at("vocab").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError("corrupt manifest " + (dir / "manifest.json").string() + ": " + e.what());
  }

  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.offset < b.offset; });
  std::uint64_t cursor = 0;
  for (const auto& e : entries) {
    if (e.offset < cursor) throw FormatError("manifest entry '" + e.tensor.name + "' overlaps the previous tensor");
    if (e.offset > cursor) throw FormatError("manifest entry '" + e.tensor.name + "' leaves a gap in params.bin");
    cursor = e.offset + e.tensor.bytes.size();
  }
  if (cursor != blob.size()) {
    throw FormatError("params.bin has " + std::to_string(blob.size() - cursor) + " trailing bytes not in the manifest");
  }
  for (auto& e : entries) ckpt.tensors.push_back(std::move(e.tensor));
  return ckpt;
}

Checkpoint init_from_mapping(const Checkpoint& teacher, const LayerMapping& mapping) {
  const int d_t = teacher.config.n_layers;
  const int d_s = static_cast<int>(mapping.pairs.size());
  std::map<int, int> source;
  for (auto [s, t] : mapping.pairs) {
    if (s < 1 || s > d_s || source.count(s)) throw ArgumentError("layer mapping must cover student layers 1..d_s once");
    if (t < 1 || t > d_t) {
      throw DepthError("layer mapping references teacher layer " + std::to_string(t) + " of " + std::to_string(d_t));
    }
    source[s] = t;
  }

  Checkpoint student;
  student.config = teacher.config;
  student.config.n_layers = d_s;
  student.mapping = mapping;
  for (const auto& t : teacher.tensors) {
    if (t.name.rfind("conv.", 0) == 0 || t.name.rfind("proj.", 0) == 0) student.tensors.push_back(t);
  }
  for (int s = 1; s <= d_s; ++s) {
    for (const auto& t : teacher.tensors) {
      std::string rest;
      if (encoder_layer(t.name, &rest) != source[s]) continue;
      TensorBlob copy = t;
      copy.name = "enc." + std::to_string(s) + "." + rest;
      student.tensors.push_back(std::move(copy));
    }
  }
  return student;
}

Checkpoint layer_jump_init(const Checkpoint& teacher, int student_depth) {
  const int d_t = teacher.config.n_layers;
  if (student_depth < 1) throw DepthError("student depth must be at least 1");
  if (d_t < 2 * student_depth) {
    throw DepthError("layer-jumping init needs teacher depth >= 2 × student depth; teacher has " +
                     std::to_string(d_t) + " layers, student wants " + std::to_string(student_depth));
  }
  LayerMapping m;
  for (int i = 1; i <= student_depth; ++i) m.pairs.emplace_back(i, 2 * i);
  return init_from_mapping(teacher, m);
}

Checkpoint continuous_init(const Checkpoint& teacher, int student_depth) {
  const int d_t = teacher.config.n_layers;
  if (student_depth < 1) throw DepthError("student depth must be at least 1");
  if (d_t < student_depth) {
    throw DepthError("continuous init needs teacher depth >= student depth; teacher has " + std::to_string(d_t) +
                     " layers, student wants " + std::to_string(student_depth));
  }
  LayerMapping m;
  for (int i = 1; i <= student_depth; ++i) m.pairs.emplace_back(i, i);
  return init_from_mapping(teacher, m);
}

}  // namespace distillab
