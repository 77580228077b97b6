#include "storygen/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>
#include <vector>

namespace storygen {

std::uint64_t fnv1a64(const unsigned char* data, std::size_t n) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    hash ^= data[i];
    hash *= 0x100000001b3ull;
  }
  return hash;
}

namespace {

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<unsigned char>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<unsigned char>& buf, float v) {
  put_u32(buf, std::bit_cast<std::uint32_t>(v));
}

void put_bytes(std::vector<unsigned char>& buf, const std::string& s) {
  put_u64(buf, s.size());
  buf.insert(buf.end(), s.begin(), s.end());
}

class Reader {
 public:
  Reader(const std::vector<unsigned char>& data, std::size_t limit) : data_(data), limit_(limit) {}

  std::size_t pos() const { return pos_; }

  void need(std::size_t n, const char* what) {
    if (pos_ + n > limit_) {
      throw CheckpointError(CheckpointErrorKind::kParseError,
                            std::string("unexpected end of data reading ") + what);
    }
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 8;
    return v;
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  std::string bytes(const char* what) {
    std::uint64_t n = u64(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void skip_to(std::size_t p) { pos_ = p; }

  bool at_limit() const { return pos_ == limit_; }

 private:
  const std::vector<unsigned char>& data_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const ModelParameters<float>& params,
                     const RunConfig& config, const Vocabulary& vocab) {
  std::vector<unsigned char> buf;
  buf.insert(buf.end(), kCheckpointMagic, kCheckpointMagic + 8);
  put_u32(buf, kCheckpointVersion);
  put_bytes(buf, serialize_config(config));
  put_u64(buf, static_cast<std::uint64_t>(vocab.size()));
  for (int id = 0; id < vocab.size(); ++id) {
    put_bytes(buf, vocab.id_to_token[static_cast<std::size_t>(id)]);
    put_u64(buf, static_cast<std::uint64_t>(vocab.frequency[static_cast<std::size_t>(id)]));
  }
  auto named = params.named();
  put_u64(buf, named.size());
  for (const auto& [name, tensor] : named) {
    put_bytes(buf, name);
    put_u32(buf, static_cast<std::uint32_t>(tensor.rank()));
    for (int d : tensor.shape()) put_u32(buf, static_cast<std::uint32_t>(d));
    for (float v : tensor.values()) put_f32(buf, v);
  }
  put_u64(buf, fnv1a64(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointErrorKind::kIoError, "cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw CheckpointError(CheckpointErrorKind::kIoError, "write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrorKind::kIoError, "cannot open: " + path);
  std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw CheckpointError(CheckpointErrorKind::kIoError, "read failed: " + path);

  if (data.size() < 8 || std::memcmp(data.data(), kCheckpointMagic, 8) != 0) {
    throw CheckpointError(CheckpointErrorKind::kBadMagic, path + " is not a checkpoint");
  }
  if (data.size() < 12) {
    throw CheckpointError(CheckpointErrorKind::kChecksumMismatch, path + " is truncated");
  }
  std::uint32_t version = 0;
  for (int i = 0; i < 4; ++i) version |= static_cast<std::uint32_t>(data[8 + static_cast<std::size_t>(i)]) << (8 * i);
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointErrorKind::kVersionMismatch,
                          path + " has version " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
  }
  if (data.size() < 20) {
    throw CheckpointError(CheckpointErrorKind::kChecksumMismatch, path + " is truncated");
  }
  std::size_t body = data.size() - 8;
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(data[body + static_cast<std::size_t>(i)]) << (8 * i);
  if (fnv1a64(data.data(), body) != stored) {
    throw CheckpointError(CheckpointErrorKind::kChecksumMismatch,
                          path + " failed integrity verification");
  }

  Reader r(data, body);
  r.skip_to(12);
  LoadedCheckpoint loaded;
  std::string config_text = r.bytes("config");
  try {
    loaded.config = parse_config_text(config_text);
  } catch (const ConfigError& e) {
    throw CheckpointError(CheckpointErrorKind::kParseError, e.what());
  }

  std::uint64_t vocab_count = r.u64("vocab count");
  for (std::uint64_t i = 0; i < vocab_count; ++i) {
    std::string token = r.bytes("vocab token");
    std::uint64_t freq = r.u64("vocab frequency");
    loaded.vocab.id_to_token.push_back(token);
    loaded.vocab.frequency.push_back(static_cast<std::int64_t>(freq));
    loaded.vocab.token_to_id[token] = static_cast<int>(i);
  }
  if (loaded.vocab.size() < kNumSpecials) {
    throw CheckpointError(CheckpointErrorKind::kParseError, "vocabulary smaller than specials");
  }

  ModelConfig model_config;
  try {
    model_config = loaded.config.model_config(loaded.vocab.size());
    model_config.validate();
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointErrorKind::kParseError, e.what());
  }
  loaded.params = ModelParameters<float>::init(model_config, 0);
  // The named tensors are shared handles into loaded.params, so filling them
  // fills the model.
  auto named = loaded.params.named();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < named.size(); ++i) index[named[i].first] = i;

  std::uint64_t tensor_count = r.u64("tensor count");
  if (tensor_count != named.size()) {
    throw CheckpointError(CheckpointErrorKind::kParseError,
                          "tensor directory has " + std::to_string(tensor_count) +
                              " entries, model expects " + std::to_string(named.size()));
  }
  std::vector<bool> filled(named.size(), false);
  for (std::uint64_t t = 0; t < tensor_count; ++t) {
    std::string name = r.bytes("tensor name");
    auto it = index.find(name);
    if (it == index.end()) {
      throw CheckpointError(CheckpointErrorKind::kParseError, "unexpected tensor '" + name + "'");
    }
    if (filled[it->second]) {
      throw CheckpointError(CheckpointErrorKind::kParseError, "duplicate tensor '" + name + "'");
    }
    Tensor<float>& target = named[it->second].second;
    std::uint32_t ndim = r.u32("tensor rank");
    std::vector<int> shape;
    for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(static_cast<int>(r.u32("tensor dim")));
    if (shape != target.shape()) {
      throw CheckpointError(CheckpointErrorKind::kParseError,
                            "tensor '" + name + "' has shape " + shape_str(shape) + ", expected " +
                                shape_str(target.shape()));
    }
    auto& values = target.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = r.f32("tensor data");
    filled[it->second] = true;
  }
  if (!r.at_limit()) {
    throw CheckpointError(CheckpointErrorKind::kParseError, "trailing bytes after tensor data");
  }
  return loaded;
}

}  // namespace storygen
