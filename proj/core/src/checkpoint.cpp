#include "drunet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace drunet {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(const char* p, std::size_t n) { out_.append(p, n); }

  void record(const std::string& name, const Tensor<float>& t) {
    u32(static_cast<std::uint32_t>(name.size()));
    bytes(name.data(), name.size());
    u32(static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) u32(static_cast<std::uint32_t>(d));
    for (float v : t.values()) f32(v);
  }

  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) {
      throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_) + " (need " +
                            std::to_string(n) + " more, " + std::to_string(in_.size() - pos_) + " left)");
    }
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_++])) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

  void record_into(const std::string& expected_name, Tensor<float>& dst) {
    const std::uint32_t len = u32();
    if (len > 4096) throw CheckpointError("checkpoint record name length " + std::to_string(len) + " is implausible");
    const std::string name = str(len);
    if (name != expected_name) {
      throw CheckpointError("checkpoint record '" + name + "' found where '" + expected_name + "' was expected");
    }
    const std::uint32_t rank = u32();
    if (rank != static_cast<std::uint32_t>(dst.rank())) {
      throw CheckpointError("checkpoint record '" + name + "' has rank " + std::to_string(rank));
    }
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(static_cast<int>(u32()));
    if (shape != dst.shape()) {
      throw CheckpointError("checkpoint record '" + name + "' has shape " + shape_str(shape) + ", model expects " +
                            shape_str(dst.shape()));
    }
    need(dst.numel() * 4);
    for (auto& v : dst.values()) v = f32();
  }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

void write_config(Writer& w, const ModelConfig& c) {
  w.i32(c.input_channels);
  w.i32(c.n_classes);
  w.i32(c.base_filters);
  for (int d : c.down_dilations) w.i32(d);
  w.i32(c.bridge_dilation);
  for (int d : c.up_dilations) w.i32(d);
}

ModelConfig read_config(Reader& r) {
  ModelConfig c;
  c.input_channels = r.i32();
  c.n_classes = r.i32();
  c.base_filters = r.i32();
  for (int& d : c.down_dilations) d = r.i32();
  c.bridge_dilation = r.i32();
  for (int& d : c.up_dilations) d = r.i32();
  return c;
}

}  // namespace

std::string encode_checkpoint(const Drunet<float>& model) {
  const auto& store = model.parameters();
  Writer w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u64(store.trainable_count());
  write_config(w, model.config());
  w.u32(static_cast<std::uint32_t>(store.size() + 2 * store.norm_count()));
  for (std::size_t i = 0; i < store.size(); ++i) w.record(store.name(i), store.at(i).value);
  for (std::size_t i = 0; i < store.norm_count(); ++i) {
    w.record(store.norm_name(i) + ".running_mean", store.norm(i).running_mean);
    w.record(store.norm_name(i) + ".running_var", store.norm(i).running_var);
  }
  return w.take();
}

Drunet<float> decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  const std::string magic = r.str(sizeof kCheckpointMagic);
  if (std::memcmp(magic.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw CheckpointError("not a drunet checkpoint (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t param_count = r.u64();
  ModelConfig config = read_config(r);
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint holds an invalid ") + e.what());
  }
  Drunet<float> model(config);
  auto& store = model.parameters();
  if (param_count != store.trainable_count()) {
    throw CheckpointError("checkpoint header declares " + std::to_string(param_count) +
                          " trainable parameters but its config builds " +
                          std::to_string(store.trainable_count()));
  }
  const std::uint32_t records = r.u32();
  if (records != store.size() + 2 * store.norm_count()) {
    throw CheckpointError("checkpoint has " + std::to_string(records) + " records, expected " +
                          std::to_string(store.size() + 2 * store.norm_count()));
  }
  for (std::size_t i = 0; i < store.size(); ++i) r.record_into(store.name(i), store.at(i).value);
  for (std::size_t i = 0; i < store.norm_count(); ++i) {
    r.record_into(store.norm_name(i) + ".running_mean", store.norm(i).running_mean);
    r.record_into(store.norm_name(i) + ".running_var", store.norm(i).running_var);
  }
  if (!r.done()) throw CheckpointError("checkpoint has trailing bytes");
  return model;
}

void save_checkpoint(const Drunet<float>& model, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(model);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Drunet<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace drunet
