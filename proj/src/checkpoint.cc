#include "shem/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "shem/settings.h"

namespace shem {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoints assume a little-endian host");

constexpr char kMagic[8] = {'S', 'H', 'E', 'M', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_ += s;
  }
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  template <typename T>
  T pod(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str(const char* what) {
    const auto n = pod<std::uint64_t>(what);
    need(n, what);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* p, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

std::string config_text(const ModelConfig& cfg) {
  ModelConfig copy = cfg;
  Settings s;
  bind_model_config(s, copy);
  return s.dump();
}

}  // namespace

std::string encode_checkpoint(const ShemModel& model, const Vocab& vocab, std::uint64_t step) {
  if (vocab.size() != model.lexical_vocab() || vocab.frames().size() != model.frame_vocab()) {
    throw ArgumentError("vocabulary does not match the model");
  }
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.str(config_text(model.config()));
  w.pod<std::uint64_t>(step);

  w.pod<std::uint64_t>(vocab.size() - Vocab::kSpecialCount);
  for (std::size_t i = Vocab::kSpecialCount; i < vocab.size(); ++i) w.str(vocab.tokens()[i]);
  const auto& names = vocab.frames().names();
  w.pod<std::uint64_t>(names.size() - kFirstRealFrame);
  for (std::size_t i = kFirstRealFrame; i < names.size(); ++i) w.str(names[i]);
  w.pod<std::uint64_t>(vocab.kept_frames().size());
  for (FrameId f : vocab.kept_frames()) w.pod<std::int32_t>(f);
  w.pod<std::uint64_t>(vocab.lexical_hash());
  w.pod<std::uint64_t>(vocab.frame_hash());

  const auto params = model.parameters();
  w.pod<std::uint64_t>(params.size());
  std::vector<float> buf;
  for (const Parameter* p : params) {
    w.str(p->name);
    w.pod<std::uint64_t>(p->rows);
    w.pod<std::uint64_t>(p->cols);
    buf.assign(p->value.begin(), p->value.end());
    w.raw(buf.data(), buf.size() * sizeof(float));
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  char magic[8];
  r.raw(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw CheckpointError("not a checkpoint file");
  const auto version = r.pod<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  Settings s;
  bind_model_config(s, ck.config);
  try {
    s.apply_text(r.str("configuration"));
    ck.config.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("bad stored configuration: ") + e.what());
  }
  ck.step = r.pod<std::uint64_t>("step");

  std::vector<std::string> tokens(r.pod<std::uint64_t>("token count"));
  for (auto& t : tokens) t = r.str("token");
  FrameTable frames;
  const auto n_frames = r.pod<std::uint64_t>("frame count");
  for (std::uint64_t i = 0; i < n_frames; ++i) frames.intern(r.str("frame name"));
  std::vector<FrameId> kept(r.pod<std::uint64_t>("kept frame count"));
  for (auto& f : kept) f = r.pod<std::int32_t>("kept frame");
  ck.vocab = Vocab(tokens, std::move(frames), std::move(kept));
  const auto lex_hash = r.pod<std::uint64_t>("lexical hash");
  const auto frame_hash = r.pod<std::uint64_t>("frame hash");
  if (lex_hash != ck.vocab.lexical_hash() || frame_hash != ck.vocab.frame_hash()) {
    throw CheckpointError("vocabulary hash mismatch");
  }

  ck.arrays.resize(r.pod<std::uint64_t>("parameter count"));
  for (auto& a : ck.arrays) {
    a.name = r.str("parameter name");
    a.rows = r.pod<std::uint64_t>("parameter rows");
    a.cols = r.pod<std::uint64_t>("parameter cols");
    a.values.resize(a.rows * a.cols);
    r.raw(a.values.data(), a.values.size() * sizeof(float), "parameter values");
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ShemModel& model,
                     const Vocab& vocab, std::uint64_t step) {
  const std::string bytes = encode_checkpoint(model, vocab, step);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

void restore_parameters(ShemModel& model, const Checkpoint& ckpt) {
  std::set<std::string> seen;
  for (const auto& a : ckpt.arrays) {
    const Parameter* p = model.find(a.name);
    if (!p || p->name != a.name) throw CheckpointError("unexpected parameter " + a.name);
  }
  for (const auto& a : ckpt.arrays) {
    const Parameter* p = model.find(a.name);
    if (p->rows != a.rows || p->cols != a.cols) {
      throw CheckpointError("shape mismatch for " + a.name + ": stored " + std::to_string(a.rows) +
                            "x" + std::to_string(a.cols) + ", model " + std::to_string(p->rows) +
                            "x" + std::to_string(p->cols));
    }
    if (!seen.insert(a.name).second) throw CheckpointError("duplicate parameter " + a.name);
  }
  for (const Parameter* p : model.parameters()) {
    if (!seen.count(p->name)) throw CheckpointError("missing parameter " + p->name);
  }
  for (const auto& a : ckpt.arrays) {
    Parameter* p = model.find(a.name);
    p->value.assign(a.values.begin(), a.values.end());
  }
}

std::unique_ptr<ShemModel> model_from_checkpoint(const Checkpoint& ckpt, const FrameGraph* graph) {
  auto model = std::make_unique<ShemModel>(ckpt.config, ckpt.vocab.size(),
                                           ckpt.vocab.frames().size(), graph);
  restore_parameters(*model, ckpt);
  return model;
}

}  // namespace shem
