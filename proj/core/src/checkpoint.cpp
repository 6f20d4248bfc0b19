#include "grouprec/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

#include "grouprec/error.hpp"

namespace grouprec {
namespace {

constexpr char kMagic[8] = {'G', 'R', 'P', 'R', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    uint(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : data_(std::move(data)) {}

  void bytes(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T uint() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::string str() {
    const auto n = uint<std::uint32_t>();
    need(n);
    std::string s(data_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
    }
  }
  std::vector<char> data_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string describe_schema(const Model& model) {
  std::ostringstream os;
  os << "checkpoint_version=" << kCheckpointVersion << "\n";
  os << "fields=" << model.schema.size() << "\n";
  for (std::size_t i = 0; i < model.schema.size(); ++i) {
    const auto& f = model.schema.fields[i];
    os << "field." << i << "=" << f.name << " kind=" << to_string(f.kind)
       << " vocab=" << f.vocab_size << "\n";
  }
  const auto& hp = model.hp;
  os << "d=" << hp.d << "\nheads=" << hp.heads << "\nhead_dim=" << hp.head_dim
     << "\ndense_width=" << hp.dense_width << "\nlayernorm_eps=" << hp.layernorm_eps
     << "\nseed=" << hp.seed << "\nattention_scale="
     << (hp.attention_scale == AttentionScale::head_dim ? "head_dim" : "model_dim")
     << "\ncriteria_encoding="
     << (hp.criteria_encoding == CriteriaEncoding::categorical ? "categorical" : "ordinal") << "\n";
  return os.str();
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.uint(kCheckpointVersion);
  w.uint(static_cast<std::uint32_t>(model.schema.size()));
  for (const auto& f : model.schema.fields) {
    w.str(f.name);
    w.uint(static_cast<std::uint8_t>(f.kind));
    w.uint(static_cast<std::uint64_t>(f.vocab_size));
  }
  const auto& hp = model.hp;
  w.uint(static_cast<std::uint64_t>(hp.d));
  w.uint(static_cast<std::uint64_t>(hp.heads));
  w.uint(static_cast<std::uint64_t>(hp.head_dim));
  w.uint(static_cast<std::uint64_t>(hp.dense_width));
  w.f64(hp.layernorm_eps);
  w.uint(hp.seed);
  w.uint(static_cast<std::uint8_t>(hp.attention_scale == AttentionScale::head_dim ? 0 : 1));
  w.uint(static_cast<std::uint8_t>(hp.criteria_encoding));

  // parameters() needs a mutable model; it only hands out pointers.
  auto blocks = const_cast<Model&>(model).parameters();
  w.uint(static_cast<std::uint64_t>(blocks.size()));
  for (const auto& b : blocks) {
    w.str(b.name);
    w.uint(static_cast<std::uint64_t>(b.value->rows()));
    w.uint(static_cast<std::uint64_t>(b.value->cols()));
    for (double v : b.value->values()) w.f64(v);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw CheckpointError("failed writing checkpoint: " + path.string());

  std::ofstream sidecar(path.string() + ".schema.txt", std::ios::trunc);
  sidecar << describe_schema(model);
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw CheckpointError("not a checkpoint (bad magic): " + path.string());
  }
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                          " (this build reads version " + std::to_string(kCheckpointVersion) + ")");
  }

  FieldSchema schema;
  const auto nfields = r.uint<std::uint32_t>();
  for (std::uint32_t i = 0; i < nfields; ++i) {
    FieldDesc f;
    f.name = r.str();
    const auto kind = r.uint<std::uint8_t>();
    if (kind > 3) throw CheckpointError("bad field kind in checkpoint");
    f.kind = static_cast<FieldKind>(kind);
    f.vocab_size = r.uint<std::uint64_t>();
    schema.fields.push_back(std::move(f));
  }
  Hyperparams hp;
  hp.d = r.uint<std::uint64_t>();
  hp.heads = r.uint<std::uint64_t>();
  hp.head_dim = r.uint<std::uint64_t>();
  hp.dense_width = r.uint<std::uint64_t>();
  hp.layernorm_eps = r.f64();
  hp.seed = r.uint<std::uint64_t>();
  const auto scale = r.uint<std::uint8_t>();
  const auto enc = r.uint<std::uint8_t>();
  if (scale > 1 || enc > 1) throw CheckpointError("bad enum value in checkpoint header");
  hp.attention_scale = scale == 0 ? AttentionScale::head_dim : AttentionScale::model_dim;
  hp.criteria_encoding = static_cast<CriteriaEncoding>(enc);

  Model model;
  try {
    model = build_model(schema, hp);
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint header invalid: ") + e.what());
  }
  auto blocks = model.parameters();
  const auto nblocks = r.uint<std::uint64_t>();
  if (nblocks != blocks.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(nblocks) + " parameter blocks, expected " +
                          std::to_string(blocks.size()));
  }
  for (auto& b : blocks) {
    const auto name = r.str();
    const auto rows = r.uint<std::uint64_t>();
    const auto cols = r.uint<std::uint64_t>();
    if (name != b.name || rows != b.value->rows() || cols != b.value->cols()) {
      throw CheckpointError("checkpoint block '" + name + "' does not match expected '" + b.name +
                            "' " + b.value->shape_string());
    }
    for (double& v : b.value->values()) v = r.f64();
  }
  if (!r.at_end()) throw CheckpointError("trailing bytes after checkpoint payload");
  return model;
}

}  // namespace grouprec
