#include "storygen/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace storygen {

namespace {

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + value + "'");
}

long long parse_int(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  long long parsed = 0;
  try {
    parsed = std::stoll(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + value + "'");
  }
  if (pos != value.size()) throw ConfigError(key + ": trailing characters in '" + value + "'");
  return parsed;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  // stoull would wrap a negative value around instead of failing.
  if (value.empty() || value[0] == '-') {
    throw ConfigError(key + ": expected an unsigned integer, got '" + value + "'");
  }
  std::size_t pos = 0;
  unsigned long long parsed = 0;
  try {
    parsed = std::stoull(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an unsigned integer, got '" + value + "'");
  }
  if (pos != value.size()) throw ConfigError(key + ": trailing characters in '" + value + "'");
  return parsed;
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double parsed = 0;
  try {
    parsed = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  if (pos != value.size()) throw ConfigError(key + ": trailing characters in '" + value + "'");
  return parsed;
}

struct KeyEntry {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeyEntry>& key_table() {
  auto str_entry = [](const char* key, std::string RunConfig::* field) {
    return KeyEntry{key, [field](RunConfig& c, const std::string& v) { c.*field = v; },
                    [field](const RunConfig& c) { return c.*field; }};
  };
  auto int_entry = [](const char* key, int RunConfig::* field) {
    return KeyEntry{key,
                    [key, field](RunConfig& c, const std::string& v) {
                      c.*field = static_cast<int>(parse_int(key, v));
                    },
                    [field](const RunConfig& c) { return std::to_string(c.*field); }};
  };
  auto bool_entry = [](const char* key, bool RunConfig::* field) {
    return KeyEntry{key,
                    [key, field](RunConfig& c, const std::string& v) {
                      c.*field = parse_bool(key, v);
                    },
                    [field](const RunConfig& c) { return c.*field ? "true" : "false"; }};
  };
  auto double_entry = [](const char* key, double RunConfig::* field) {
    return KeyEntry{key,
                    [key, field](RunConfig& c, const std::string& v) {
                      c.*field = parse_double(key, v);
                    },
                    [field](const RunConfig& c) { return format_double(c.*field); }};
  };
  static const std::vector<KeyEntry> table = {
      str_entry("data.train", &RunConfig::train_path),
      str_entry("data.dev", &RunConfig::dev_path),
      str_entry("data.format", &RunConfig::format),
      int_entry("data.min_freq", &RunConfig::min_freq),
      int_entry("data.max_context", &RunConfig::max_context),
      str_entry("model.variant", &RunConfig::variant),
      bool_entry("model.itf", &RunConfig::itf),
      int_entry("model.hidden", &RunConfig::hidden),
      int_entry("model.embedding", &RunConfig::embedding),
      int_entry("model.layers", &RunConfig::layers),
      double_entry("loss.coverage_lambda", &RunConfig::coverage_lambda),
      double_entry("loss.keyphrase_weight", &RunConfig::keyphrase_weight),
      double_entry("loss.reconstruction_weight", &RunConfig::reconstruction_weight),
      double_entry("loss.itf_alpha", &RunConfig::itf_alpha),
      double_entry("loss.itf_cap", &RunConfig::itf_cap),
      bool_entry("loss.normalize_q", &RunConfig::normalize_q),
      int_entry("decode.max_len", &RunConfig::max_len),
      bool_entry("decode.block_repeat", &RunConfig::block_repeat),
      bool_entry("decode.block_bigrams", &RunConfig::block_bigrams),
      int_entry("train.epochs", &RunConfig::epochs),
      int_entry("train.batch_size", &RunConfig::batch_size),
      double_entry("train.lr", &RunConfig::lr),
      KeyEntry{"train.seed",
               [](RunConfig& c, const std::string& v) { c.seed = parse_u64("train.seed", v); },
               [](const RunConfig& c) { return std::to_string(c.seed); }},
      int_entry("keyphrase.k", &RunConfig::k),
  };
  return table;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void set_config_key(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& entry : key_table()) {
    if (key == entry.key) {
      entry.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value, got '" + line +
                        "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    try {
      set_config_key(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void apply_env_overrides(RunConfig& config) {
  for (const auto& entry : key_table()) {
    std::string env_name = "STORYGEN_";
    for (const char* c = entry.key; *c; ++c) {
      env_name += *c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(*c)));
    }
    const char* value = std::getenv(env_name.c_str());
    if (value != nullptr) {
      try {
        entry.set(config, value);
      } catch (const ConfigError& e) {
        throw ConfigError(env_name + ": " + e.what());
      }
    }
  }
}

std::string serialize_config(const RunConfig& config) {
  std::vector<std::string> lines;
  for (const auto& entry : key_table()) {
    lines.push_back(std::string(entry.key) + "=" + entry.get(config));
  }
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

Variant RunConfig::variant_enum() const {
  try {
    return parse_variant(variant);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model.variant: ") + e.what());
  }
}

CorpusFormat RunConfig::format_enum() const {
  try {
    return parse_corpus_format(format);
  } catch (const DataError& e) {
    throw ConfigError(std::string("data.format: ") + e.what());
  }
}

ModelConfig RunConfig::model_config(int vocab_size) const {
  ModelConfig mc;
  mc.variant = variant_enum();
  mc.embedding_dim = embedding;
  mc.hidden_dim = hidden;
  mc.num_layers = layers;
  mc.vocab_size = vocab_size;
  mc.use_itf = itf;
  return mc;
}

LossConfig RunConfig::loss_config() const {
  LossConfig lc;
  lc.coverage_lambda = coverage_lambda;
  lc.keyphrase_weight = keyphrase_weight;
  lc.reconstruction_weight = reconstruction_weight;
  lc.itf_alpha = itf_alpha;
  lc.itf_weight_cap = itf_cap;
  lc.normalize_q = normalize_q;
  return lc;
}

DecodeConfig RunConfig::decode_config() const {
  DecodeConfig dc;
  dc.max_len = max_len;
  dc.block_immediate_repeat = block_repeat;
  dc.block_repeated_bigrams = block_bigrams;
  return dc;
}

void RunConfig::validate() const {
  auto positive = [](const char* key, long long v) {
    if (v < 1) throw ConfigError(std::string(key) + ": must be >= 1, got " + std::to_string(v));
  };
  positive("model.hidden", hidden);
  positive("model.embedding", embedding);
  positive("model.layers", layers);
  positive("data.min_freq", min_freq);
  positive("data.max_context", max_context);
  positive("decode.max_len", max_len);
  positive("train.epochs", epochs);
  positive("train.batch_size", batch_size);
  if (k < 0) throw ConfigError("keyphrase.k: must be >= 0 (0 keeps all candidates)");
  if (lr <= 0) throw ConfigError("train.lr: must be positive");
  variant_enum();
  format_enum();
  try {
    loss_config().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("loss: ") + e.what());
  }
}

}  // namespace storygen
