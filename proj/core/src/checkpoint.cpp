// SPDX-License-Identifier: Apache-2.0
#include "mvse/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "mvse/error.hpp"

namespace mvse {

namespace {

constexpr char kMagic[4] = {'M', 'V', 'S', 'E'};
constexpr std::uint64_t kMaxRank = 8;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void f64s(const std::vector<double>& xs) {
    u64(xs.size());
    for (double x : xs) f64(x);
  }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  void need(std::uint64_t n, const char* what) const {
    if (n > data_.size() - pos_) throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::string str(const char* what) {
    const auto n = u64(what);
    need(n, what);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::vector<double> f64s(const char* what) {
    const auto n = u64(what);
    if (n > (data_.size() - pos_) / 8) throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
    std::vector<double> xs(n);
    for (auto& x : xs) x = f64(what);
    return xs;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string serialize_checkpoint(const MultiViewModel& model, const TrainingMetadata& meta) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.str(config_to_json(model.config()));
  const auto& n = model.normalization();
  w.f64s(n.osm_mean);
  w.f64s(n.osm_std);
  w.f64s(n.gs_mean);
  w.f64s(n.gs_std);
  w.u64(model.parameters().size());
  for (const auto& p : model.parameters()) {
    w.str(p->name);
    w.u32(static_cast<std::uint32_t>(p->value.rank()));
    for (auto d : p->value.shape()) w.u64(d);
    for (double x : p->value.data()) w.f64(x);
  }
  w.u64(meta.best_epoch);
  w.f64(meta.best_val_loss);
  w.u64(meta.seed);
  w.u32(crc32_of(w.buffer()));
  return std::move(w.buffer());
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic + 8) throw CheckpointError("checkpoint truncated: " + std::to_string(bytes.size()) + " bytes");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw CheckpointError("not a checkpoint (bad magic)");
  const auto body = bytes.substr(0, bytes.size() - 4);
  Reader tail(bytes.substr(bytes.size() - 4));
  if (tail.u32("checksum") != crc32_of(body)) throw CheckpointError("checkpoint checksum mismatch (truncated or corrupted file)");

  Reader r(body);
  r.u32("magic");
  const auto version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  ModelConfig config;
  try {
    config = config_from_json(r.str("config"));
  } catch (const Error& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  InputNormalization norm;
  norm.osm_mean = r.f64s("osm_mean");
  norm.osm_std = r.f64s("osm_std");
  norm.gs_mean = r.f64s("gs_mean");
  norm.gs_std = r.f64s("gs_std");

  ad::ParameterSet params;
  const auto count = r.u64("parameter count");
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name = r.str("parameter name");
    const auto rank = r.u32("parameter rank");
    if (rank == 0 || rank > kMaxRank) throw CheckpointError("parameter '" + name + "' has invalid rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.u64("parameter shape");
    std::uint64_t numel = 1;
    for (auto d : shape) {
      if (d != 0 && numel > bytes.size() / d) throw CheckpointError("parameter '" + name + "' is too large");
      numel *= d;
    }
    r.need(numel * 8, "parameter values");
    std::vector<double> values(numel);
    for (auto& x : values) x = r.f64("parameter values");
    if (params.contains(name)) throw CheckpointError("duplicate parameter '" + name + "'");
    params.add(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  TrainingMetadata meta;
  meta.best_epoch = r.u64("metadata");
  meta.best_val_loss = r.f64("metadata");
  meta.seed = r.u64("metadata");
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint metadata");

  try {
    return {MultiViewModel(std::move(config), std::move(params), std::move(norm)), meta};
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError(std::string("checkpoint does not match its config: ") + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

void save_checkpoint(const std::filesystem::path& path, const MultiViewModel& model, const TrainingMetadata& meta) {
  write_file_atomic(path, serialize_checkpoint(model, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace mvse
