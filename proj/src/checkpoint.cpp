// SPDX-License-Identifier: Apache-2.0

// Layout (all integers little-endian):
//   "RKDS" | u32 version | u32 len + arch_id bytes | f64 epsilon | u32 layer count
//   per layer: u32 kind | u32 in | u32 out | u32 stride | u32 tensor count
//     per tensor: u32 rank | u32 dims[rank] | f32 values[prod(dims)]

#include <bit>
#include <limits>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "rankdist/error.hpp"
#include "rankdist/model.hpp"

namespace rankdist {

namespace fs = std::filesystem;

namespace {

static_assert(std::numeric_limits<float>::is_iec559 && std::numeric_limits<double>::is_iec559);

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  const std::vector<unsigned char>& bytes() const { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + pos_, bytes_.begin() + pos_ + n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::CorruptData, "checkpoint is truncated");
  }

  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

void write_tensor(Writer& w, const std::vector<std::uint32_t>& dims, const std::vector<float>& values) {
  w.u32(static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) w.u32(d);
  for (float v : values) w.f32(v);
}

std::vector<float> read_tensor(Reader& r, const std::vector<std::uint32_t>& expected_dims) {
  const std::uint32_t rank = r.u32();
  std::vector<std::uint32_t> dims(rank);
  for (auto& d : dims) d = r.u32();
  if (dims != expected_dims) throw Error(ErrorCode::ShapeMismatch, "tensor shape does not match its layer");
  std::size_t count = 1;
  for (auto d : dims) count *= d;
  std::vector<float> values(count);
  for (auto& v : values) v = r.f32();
  return values;
}

std::vector<std::uint32_t> weight_dims(const LayerSpec& l) {
  const auto in = static_cast<std::uint32_t>(l.in);
  const auto out = static_cast<std::uint32_t>(l.out);
  if (l.kind == LayerKind::Conv) return {out, in, 3, 3};
  return {out, in};
}

}  // namespace

void save_checkpoint(const ScorerModel& model, const fs::path& path) {
  Writer w;
  w.raw("RKDS");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(model.arch_id.size()));
  w.raw(model.arch_id);
  w.f64(model.epsilon);
  w.u32(static_cast<std::uint32_t>(model.layers.size()));
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& l = model.layers[i];
    w.u32(static_cast<std::uint32_t>(l.kind));
    w.u32(static_cast<std::uint32_t>(l.in));
    w.u32(static_cast<std::uint32_t>(l.out));
    w.u32(static_cast<std::uint32_t>(l.stride));
    w.u32(l.has_params() ? 2 : 0);
    if (l.has_params()) {
      write_tensor(w, weight_dims(l), model.params[i].weight);
      write_tensor(w, {static_cast<std::uint32_t>(l.out)}, model.params[i].bias);
    }
  }
  // Write to a sibling temp file first so a failed write never leaves a
  // partial checkpoint at `path`.
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(w.bytes().data()),
              static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot move checkpoint to " + path.string());
}

ScorerModel load_checkpoint(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(ErrorCode::FileNotFound, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  Reader r({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});

  std::string magic;
  try {
    magic = r.raw(4);
  } catch (const Error&) {
    throw Error(ErrorCode::VersionMismatch, "file too short to be a checkpoint");
  }
  if (magic != "RKDS") throw Error(ErrorCode::VersionMismatch, "bad checkpoint magic");
  if (const auto version = r.u32(); version != kCheckpointVersion) {
    throw Error(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(version));
  }
  ScorerModel model;
  const std::uint32_t id_len = r.u32();
  if (id_len > 4096) throw Error(ErrorCode::CorruptData, "implausible arch id length");
  model.arch_id = r.raw(id_len);
  model.epsilon = r.f64();
  const std::uint32_t layer_count = r.u32();
  if (layer_count > 4096) throw Error(ErrorCode::CorruptData, "implausible layer count");
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    LayerSpec l;
    const std::uint32_t kind = r.u32();
    if (kind < 1 || kind > 4) throw Error(ErrorCode::CorruptData, "unknown layer kind");
    l.kind = static_cast<LayerKind>(kind);
    l.in = static_cast<int>(r.u32());
    l.out = static_cast<int>(r.u32());
    l.stride = static_cast<int>(r.u32());
    const std::uint32_t tensors = r.u32();
    if (tensors != (l.has_params() ? 2u : 0u)) {
      throw Error(ErrorCode::ShapeMismatch, "unexpected tensor count for layer " + std::to_string(i));
    }
    LayerParams<float> p;
    if (l.has_params()) {
      if (l.in < 1 || l.out < 1 || l.in > (1 << 20) || l.out > (1 << 20)) {
        throw Error(ErrorCode::CorruptData, "implausible layer size");
      }
      p.weight = read_tensor(r, weight_dims(l));
      p.bias = read_tensor(r, {static_cast<std::uint32_t>(l.out)});
    }
    model.layers.push_back(l);
    model.params.push_back(std::move(p));
  }
  if (!r.at_end()) throw Error(ErrorCode::CorruptData, "trailing bytes after checkpoint");
  validate_layers(model.layers);
  if (model.arch_id == kSmallV1 && model.layers != architecture(kSmallV1)) {
    throw Error(ErrorCode::ShapeMismatch, "layers do not match architecture " + model.arch_id);
  }
  return model;
}

}  // namespace rankdist
