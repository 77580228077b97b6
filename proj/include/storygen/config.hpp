#pragma once

// Run configuration: flat dotted key=value files, environment overrides, and
// the merged view handed to training and evaluation. Precedence is
// defaults < config file < environment < command-line flags.

#include <cstdint>
#include <stdexcept>
#include <string>

#include "storygen/data.hpp"
#include "storygen/decode.hpp"
#include "storygen/losses.hpp"
#include "storygen/model.hpp"

namespace storygen {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct RunConfig {
  // data.*
  std::string train_path;
  std::string dev_path;
  std::string format = "jsonl";
  int min_freq = 1;
  int max_context = kDefaultMaxContextTokens;
  // model.*
  std::string variant = "baseline";
  bool itf = false;
  int hidden = 64;
  int embedding = 32;
  int layers = 2;
  // loss.*
  double coverage_lambda = 1.0;
  double keyphrase_weight = 0.9;
  double reconstruction_weight = 0.1;
  double itf_alpha = 0.4;
  double itf_cap = 100.0;
  bool normalize_q = false;
  // decode.*
  int max_len = 20;
  bool block_repeat = true;
  bool block_bigrams = true;
  // train.*
  int epochs = 30;
  int batch_size = 8;
  double lr = 0.001;
  std::uint64_t seed = 1;
  // keyphrase.*  (k = 0 means keep all candidates)
  int k = 5;

  Variant variant_enum() const;
  CorpusFormat format_enum() const;
  ModelConfig model_config(int vocab_size) const;
  LossConfig loss_config() const;
  DecodeConfig decode_config() const;

  void validate() const;  // throws ConfigError
};

// Assigns one canonical dotted key; throws ConfigError on unknown keys or
// unparsable values.
void set_config_key(RunConfig& config, const std::string& key, const std::string& value);

// key=value lines; '#' starts a comment; blank lines ignored.
RunConfig parse_config_text(const std::string& text, RunConfig base = {});
RunConfig load_config_file(const std::string& path, RunConfig base = {});

// Checks STORYGEN_<KEY> (dots become underscores, uppercased) for every key.
void apply_env_overrides(RunConfig& config);

// Deterministic serialization: every key, sorted, one per line.
std::string serialize_config(const RunConfig& config);

}  // namespace storygen
