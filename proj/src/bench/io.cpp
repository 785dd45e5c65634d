#include "ear/bench/io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ear/bench/config.hpp"
#include "ear/common/errors.hpp"

namespace ear::bench {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class Writer {
 public:
  explicit Writer(Bytes& out) : out_(out) {}

  template <class U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void raw(const std::string& s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void str(const std::string& s) {
    uint(std::uint32_t(s.size()));
    raw(s);
  }

 private:
  Bytes& out_;
};

class Reader {
 public:
  Reader(const Bytes& in, std::string what) : in_(in), what_(std::move(what)) {}

  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw ConfigError(what_ + ": truncated file");
  }
  template <class U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= U(U(in_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string str() { return raw(uint<std::uint32_t>()); }
  bool done() const { return pos_ == in_.size(); }

 private:
  const Bytes& in_;
  std::string what_;
  std::size_t pos_ = 0;
};

void expect_magic(Reader& r, const char* magic, const char* what) {
  if (r.raw(4) != magic) throw ConfigError(std::string(what) + ": bad magic, not a " + magic + " file");
}

}  // namespace

Bytes encode_dataset(const Dataset& ds) {
  const auto& d = ds.data;
  if (d.seq_len != ds.spec.seq_len || d.d_token != ds.spec.d_token) {
    throw DimensionError("dataset records do not match the task header");
  }
  Bytes out;
  Writer w(out);
  w.raw("EARD");
  w.uint(kDatasetVersion);
  w.str(to_json(ds.spec).dump());
  w.uint(std::uint64_t(d.size()));
  const std::size_t width = d.sequence_width();
  for (std::size_t i = 0; i < d.size(); ++i) {
    w.uint(d.labels[i]);
    for (std::size_t j = 0; j < width; ++j) w.f32(d.tokens[i * width + j]);
  }
  return out;
}

Dataset decode_dataset(const Bytes& bytes) {
  Reader r(bytes, "dataset");
  expect_magic(r, "EARD", "dataset");
  const auto version = r.uint<std::uint32_t>();
  if (version != kDatasetVersion) {
    throw ConfigError("dataset: unsupported version " + std::to_string(version));
  }
  Dataset ds;
  try {
    ds.spec = task_from_json(nlohmann::json::parse(r.str()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("dataset header: ") + e.what());
  }
  const auto n = r.uint<std::uint64_t>();
  ds.data = model::SequenceSet(ds.spec.seq_len, ds.spec.d_token);
  const std::size_t width = ds.data.sequence_width();
  r.need(n * (2 + 4 * width));
  ds.data.labels.reserve(n);
  ds.data.tokens.reserve(n * width);
  for (std::uint64_t i = 0; i < n; ++i) {
    ds.data.labels.push_back(r.uint<std::uint16_t>());
    for (std::size_t j = 0; j < width; ++j) ds.data.tokens.push_back(r.f32());
  }
  if (!r.done()) throw ConfigError("dataset: trailing bytes after the last record");
  return ds;
}

void write_dataset(const std::string& path, const Dataset& ds) {
  write_file(path, encode_dataset(ds));
}

Dataset read_dataset(const std::string& path) { return decode_dataset(read_file(path)); }

namespace {

void write_tensors(Writer& w, const model::ModelParams<float>& params, const std::string& prefix) {
  for (const auto& e : params.entries()) {
    w.str(prefix + e.name);
    w.uint(std::uint8_t(0));
    const auto& shape = e.tensor.shape();
    w.uint(std::uint8_t(shape.size()));
    for (auto d : shape) w.uint(std::uint64_t(d));
    for (float v : e.tensor.data()) w.f32(v);
  }
}

}  // namespace

Bytes encode_checkpoint(const Checkpoint& ckpt) {
  Bytes out;
  Writer w(out);
  w.raw("EARC");
  w.uint(kCheckpointVersion);
  const nlohmann::json header = {
      {"model", to_json(ckpt.model)}, {"train", to_json(ckpt.train)}, {"task", to_json(ckpt.task)}};
  w.str(header.dump());
  w.uint(std::uint32_t(ckpt.params.size() + ckpt.ema.size()));
  write_tensors(w, ckpt.params, "");
  write_tensors(w, ckpt.ema, "ema.");
  return out;
}

Checkpoint decode_checkpoint(const Bytes& bytes) {
  Reader r(bytes, "checkpoint");
  expect_magic(r, "EARC", "checkpoint");
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw ConfigError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  try {
    const auto header = nlohmann::json::parse(r.str());
    ckpt.model = model_from_json(header.at("model"));
    ckpt.train = train_from_json(header.at("train"));
    ckpt.task = task_from_json(header.at("task"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint header: ") + e.what());
  }
  const auto count = r.uint<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    if (r.uint<std::uint8_t>() != 0) throw ConfigError("checkpoint: tensor '" + name + "' is not f32");
    const auto rank = r.uint<std::uint8_t>();
    diff::Shape shape(rank);
    for (auto& d : shape) d = std::size_t(r.uint<std::uint64_t>());
    const std::size_t numel = diff::shape_numel(shape);
    r.need(4 * numel);
    std::vector<float> values(numel);
    for (auto& v : values) v = r.f32();
    const bool is_ema = name.rfind("ema.", 0) == 0;
    auto& target = is_ema ? ckpt.ema : ckpt.params;
    if (is_ema) name.erase(0, 4);
    // Groups are reassigned when a Model binds these params.
    target.add(std::move(name),
               diff::Tensor<float>::from_vector(std::move(shape), std::move(values), !is_ema),
               model::ParamGroup::backbone);
  }
  if (!r.done()) throw ConfigError("checkpoint: trailing bytes after the last tensor");
  return ckpt;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const Bytes& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw ConfigError("write to '" + path + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace ear::bench
