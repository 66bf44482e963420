#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "finsent/model.hpp"

namespace finsent::model {

namespace {

constexpr char kMagic[8] = {'F', 'S', 'N', 'T', 'C', 'K', 'P', 'T'};
constexpr char kEndMagic[8] = {'F', 'S', 'N', 'T', 'E', 'N', 'D', '\0'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxRank = 8;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }

  template <typename UInt>
  void le(UInt value) {
    char buf[sizeof(UInt)];
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
      buf[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
    }
    bytes(buf, sizeof buf);
  }
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  void tensors(const CnnParams& params) {
    u32(static_cast<std::uint32_t>(params.tensors.size()));
    for (const auto& t : params.tensors) {
      str(t.name);
      u32(static_cast<std::uint32_t>(t.shape.size()));
      for (auto d : t.shape) u64(d);
      for (float v : t.values) f32(v);
    }
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(char* data, std::size_t n) {
    in_.read(data, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw Error("checkpoint: unexpected end of file");
  }

  template <typename UInt>
  UInt le() {
    unsigned char buf[sizeof(UInt)];
    bytes(reinterpret_cast<char*>(buf), sizeof buf);
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(buf[i]) << (8 * i);
    return v;
  }
  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::uint64_t u64() { return le<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::string str() {
    const auto n = u32();
    if (n > (1u << 24)) throw Error("checkpoint: implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

  CnnParams tensors() {
    CnnParams params;
    const auto count = u32();
    if (count > 4096) throw Error("checkpoint: implausible tensor count");
    for (std::uint32_t k = 0; k < count; ++k) {
      Tensor<float> t;
      t.name = str();
      const auto rank = u32();
      if (rank > kMaxRank) throw Error("checkpoint: implausible tensor rank");
      std::size_t n = 1;
      for (std::uint32_t r = 0; r < rank; ++r) {
        t.shape.push_back(static_cast<std::size_t>(u64()));
        n *= t.shape.back();
      }
      if (n > (std::size_t{1} << 31)) throw Error("checkpoint: implausible tensor size");
      t.values.resize(n);
      for (auto& v : t.values) v = f32();
      params.tensors.push_back(std::move(t));
    }
    return params;
  }

 private:
  std::istream& in_;
};

void check_shapes(const CnnParams& expected, const CnnParams& actual, const char* what) {
  if (actual.tensors.size() != expected.tensors.size()) {
    throw Error(std::string("checkpoint: ") + what + " tensor count does not match config");
  }
  for (std::size_t k = 0; k < actual.tensors.size(); ++k) {
    if (actual.tensors[k].shape != expected.tensors[k].shape ||
        actual.tensors[k].name != expected.tensors[k].name) {
      throw Error(std::string("checkpoint: ") + what + " tensor '" + actual.tensors[k].name +
                  "' does not match config");
    }
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  Writer w(out);
  const auto& cfg = ckpt.config;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);

  w.u64(cfg.feature_dim);
  w.u64(cfg.max_len);
  w.u64(cfg.filter_widths.size());
  for (auto fw : cfg.filter_widths) w.u64(fw);
  w.u64(cfg.filters_per_width);
  w.u64(cfg.hidden);
  w.f64(cfg.dropout_pooled);
  w.f64(cfg.dropout_hidden);
  w.u64(cfg.doc_feature_dim);
  w.u64(cfg.classes);
  w.f64(cfg.learning_rate);
  w.u64(cfg.batch_size);
  w.u64(cfg.epochs);
  w.u64(cfg.seed);

  w.u64(ckpt.state.epochs_done);

  w.u32(static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [key, value] : ckpt.metadata) {
    w.str(key);
    w.str(value);
  }

  w.tensors(ckpt.state.params);

  const auto& opt = ckpt.state.optimizer;
  w.u64(opt.step);
  w.f64(opt.beta1);
  w.f64(opt.beta2);
  w.f64(opt.epsilon);
  const bool has_moments = !opt.m.tensors.empty();
  w.u32(has_moments ? 1 : 0);
  if (has_moments) {
    w.tensors(opt.m);
    w.tensors(opt.v);
  }
  w.bytes(kEndMagic, sizeof kEndMagic);
  if (!out) throw Error("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  Reader r(in);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw Error("checkpoint: bad magic");
  if (const auto version = r.u32(); version != kVersion) {
    throw Error("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  auto& cfg = ckpt.config;
  cfg.feature_dim = r.u64();
  cfg.max_len = r.u64();
  const auto widths = r.u64();
  if (widths > 64) throw Error("checkpoint: implausible filter width count");
  cfg.filter_widths.clear();
  for (std::uint64_t i = 0; i < widths; ++i) cfg.filter_widths.push_back(r.u64());
  cfg.filters_per_width = r.u64();
  cfg.hidden = r.u64();
  cfg.dropout_pooled = r.f64();
  cfg.dropout_hidden = r.f64();
  cfg.doc_feature_dim = r.u64();
  cfg.classes = r.u64();
  cfg.learning_rate = r.f64();
  cfg.batch_size = r.u64();
  cfg.epochs = r.u64();
  cfg.seed = r.u64();
  cfg.validate();

  ckpt.state.epochs_done = r.u64();

  const auto meta = r.u32();
  for (std::uint32_t i = 0; i < meta; ++i) {
    auto key = r.str();
    ckpt.metadata[key] = r.str();
  }

  const CnnParams expected(cfg);
  ckpt.state.params = r.tensors();
  check_shapes(expected, ckpt.state.params, "parameter");

  auto& opt = ckpt.state.optimizer;
  opt.step = r.u64();
  opt.beta1 = r.f64();
  opt.beta2 = r.f64();
  opt.epsilon = r.f64();
  if (r.u32() != 0) {
    opt.m = r.tensors();
    opt.v = r.tensors();
    check_shapes(expected, opt.m, "optimizer");
    check_shapes(expected, opt.v, "optimizer");
  }
  char end[8];
  r.bytes(end, sizeof end);
  if (std::memcmp(end, kEndMagic, sizeof end) != 0) throw Error("checkpoint: missing end marker");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  write_checkpoint(out, checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace finsent::model
