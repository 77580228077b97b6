// Command-line surface: train / generate / evaluate / keyphrases / synth.
// Exit codes: 0 success, 2 configuration error, 3 data or checkpoint error,
// 4 numeric failure during training or evaluation.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "storygen/checkpoint.hpp"
#include "storygen/config.hpp"
#include "storygen/data.hpp"
#include "storygen/decode.hpp"
#include "storygen/keyphrase.hpp"
#include "storygen/metrics.hpp"
#include "storygen/model.hpp"
#include "storygen/special_tokens.hpp"
#include "storygen/tensor.hpp"
#include "storygen/train.hpp"

namespace {

using namespace storygen;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

// Tracks which common flags were set so they can override file/env values.
struct FlagOverrides {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<bool> itf;
  std::optional<int> k;
  std::optional<int> hidden;
  std::optional<int> embedding;
  std::optional<int> layers;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<double> coverage_lambda;
  std::optional<int> max_len;
  std::optional<std::string> format;
  std::optional<int> min_freq;
};

void add_common_flags(CLI::App* cmd, FlagOverrides& flags) {
  cmd->add_option("--config", flags.config_path, "Key=value config file");
  cmd->add_option("--seed", flags.seed, "Root random seed");
  cmd->add_option("--variant", flags.variant,
                  "baseline | keyphrase_add | context_concat | coverage | keyphrase_loss");
  cmd->add_flag("--itf,!--no-itf", flags.itf, "Inverse-token-frequency weighted reconstruction");
  cmd->add_option("--k", flags.k, "Keyphrase count (0 keeps all)");
  cmd->add_option("--hidden", flags.hidden, "GRU hidden units");
  cmd->add_option("--embedding", flags.embedding, "Embedding dimension");
  cmd->add_option("--layers", flags.layers, "Encoder/decoder layers");
  cmd->add_option("--epochs", flags.epochs, "Training epochs");
  cmd->add_option("--batch-size", flags.batch_size, "Batch size");
  cmd->add_option("--lr", flags.lr, "Adam learning rate");
  cmd->add_option("--coverage-lambda", flags.coverage_lambda, "Coverage penalty weight");
  cmd->add_option("--max-len", flags.max_len, "Maximum generated ending length");
  cmd->add_option("--format", flags.format, "Corpus format: csv | jsonl");
  cmd->add_option("--min-freq", flags.min_freq, "Vocabulary frequency cutoff");
}

// defaults < config file < environment < flags
RunConfig resolve_config(const FlagOverrides& flags) {
  RunConfig config;
  if (flags.config_path) config = load_config_file(*flags.config_path, std::move(config));
  apply_env_overrides(config);
  if (flags.seed) config.seed = *flags.seed;
  if (flags.variant) config.variant = *flags.variant;
  if (flags.itf) config.itf = *flags.itf;
  if (flags.k) config.k = *flags.k;
  if (flags.hidden) config.hidden = *flags.hidden;
  if (flags.embedding) config.embedding = *flags.embedding;
  if (flags.layers) config.layers = *flags.layers;
  if (flags.epochs) config.epochs = *flags.epochs;
  if (flags.batch_size) config.batch_size = *flags.batch_size;
  if (flags.lr) config.lr = *flags.lr;
  if (flags.coverage_lambda) config.coverage_lambda = *flags.coverage_lambda;
  if (flags.max_len) config.max_len = *flags.max_len;
  if (flags.format) config.format = *flags.format;
  if (flags.min_freq) config.min_freq = *flags.min_freq;
  config.validate();
  return config;
}

std::vector<StoryExample> load_and_encode(const std::string& path, const RunConfig& config,
                                          const Vocabulary& vocab) {
  auto examples = load_corpus(path, config.format_enum());
  int truncated = encode_examples(examples, vocab, config.max_context);
  if (truncated > 0) {
    std::cerr << "warning: truncated " << truncated << " context(s) to " << config.max_context
              << " tokens\n";
  }
  return examples;
}

std::vector<std::vector<double>> score_vectors(const std::vector<StoryExample>& examples, int k) {
  std::vector<std::vector<double>> scores;
  scores.reserve(examples.size());
  for (const auto& ex : examples) {
    scores.push_back(context_score_vector(ex.context_token_text, k));
  }
  return scores;
}

int cmd_train(const FlagOverrides& flags, const std::string& train_arg,
              const std::string& dev_arg, const std::string& out_path) {
  RunConfig config = resolve_config(flags);
  if (!train_arg.empty()) config.train_path = train_arg;
  if (!dev_arg.empty()) config.dev_path = dev_arg;
  if (config.train_path.empty()) {
    throw ConfigError("train: no corpus given (positional argument or data.train)");
  }

  auto examples = load_corpus(config.train_path, config.format_enum());
  if (examples.empty()) throw DataError(config.train_path + ": corpus is empty");
  Vocabulary vocab = build_vocab(examples, config.min_freq);
  int truncated = encode_examples(examples, vocab, config.max_context);
  if (truncated > 0) {
    std::cerr << "warning: truncated " << truncated << " context(s) to " << config.max_context
              << " tokens\n";
  }
  auto scores = score_vectors(examples, config.k);

  ModelConfig model_config = config.model_config(vocab.size());
  std::vector<StoryExample> dev_examples;
  std::vector<std::vector<double>> dev_scores;
  TrainHooks hooks;
  if (!config.dev_path.empty()) {
    dev_examples = load_and_encode(config.dev_path, config, vocab);
    dev_scores = score_vectors(dev_examples, config.k);
    hooks.dev_scorer = [&](const ModelParameters<float>& params, int) {
      return per_token_nll(params, model_config, dev_examples, dev_scores);
    };
  }
  hooks.on_epoch = [&](const EpochStats& stats) {
    std::printf("epoch=%d total=%.6f reconstruction=%.6f", stats.epoch, stats.total,
                stats.reconstruction);
    if (stats.has_coverage) std::printf(" coverage=%.6f", stats.coverage);
    if (stats.has_keyphrase) std::printf(" keyphrase=%.6f", stats.keyphrase);
    std::printf(" per_token_nll=%.6f", stats.per_token_nll);
    if (stats.has_dev) std::printf(" dev_nll=%.6f", stats.dev_score);
    std::printf("\n");
    std::fflush(stdout);
  };

  TrainResult result = train_model(examples, scores, vocab, config, hooks);
  save_checkpoint(out_path, result.params, config, vocab);
  save_checkpoint(out_path + ".best", result.best_params, config, vocab);
  std::printf("saved %s (final) and %s.best (epoch %d, score %.6f)\n", out_path.c_str(),
              out_path.c_str(), result.best_epoch, result.best_score);
  return 0;
}

int cmd_generate(const FlagOverrides& flags, const std::string& checkpoint_path,
                 const std::string& corpus_path, const std::string& out_path) {
  LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
  RunConfig config = loaded.config;
  // Flags and environment still override what the checkpoint stored.
  apply_env_overrides(config);
  if (flags.k) config.k = *flags.k;
  if (flags.max_len) config.max_len = *flags.max_len;
  if (flags.format) config.format = *flags.format;
  config.validate();

  auto examples = load_corpus(corpus_path, config.format_enum());
  int truncated = encode_examples(examples, loaded.vocab, config.max_context);
  if (truncated > 0) {
    std::cerr << "warning: truncated " << truncated << " context(s) to " << config.max_context
              << " tokens\n";
  }
  std::int64_t unknown = 0, total = 0;
  for (const auto& ex : examples) {
    for (std::size_t i = 0; i < ex.context_tokens.size(); ++i) {
      ++total;
      if (ex.context_tokens[i] == kUnkId && ex.context_token_text[i] != kUnkToken) ++unknown;
    }
  }
  if (unknown > 0) {
    std::cerr << "warning: " << unknown << " of " << total
              << " context tokens are outside the checkpoint vocabulary (mapped to "
              << kUnkToken << ")\n";
  }

  ModelConfig model_config = config.model_config(loaded.vocab.size());
  GenerationSet generations = generate_endings(loaded.params, model_config, examples, config.k,
                                               config.decode_config(), loaded.vocab);
  write_generations(out_path, generations);
  std::printf("wrote %zu generation(s) to %s\n", generations.size(), out_path.c_str());
  return 0;
}

nlohmann::ordered_json dist_json(const DistResult& d) {
  nlohmann::ordered_json obj;
  obj["ratio"] = d.ratio;
  obj["distinct"] = d.distinct;
  obj["total"] = d.total;
  if (d.undefined) obj["undefined"] = true;
  return obj;
}

int cmd_evaluate(const std::vector<std::string>& files, const std::string& out_path) {
  if (files.empty() || files.size() > 2) {
    throw ConfigError("evaluate: expected one or two generations files");
  }
  nlohmann::ordered_json report;
  report["files"] = files;
  nlohmann::ordered_json reports = nlohmann::ordered_json::array();
  std::vector<GenerationSet> sets;
  for (const auto& f : files) {
    sets.push_back(read_generations(f));
    EvalReport r = eval_report(sets.back());
    nlohmann::ordered_json obj;
    obj["file"] = f;
    obj["dist1"] = dist_json(r.dist1);
    obj["dist2"] = dist_json(r.dist2);
    obj["dist3"] = dist_json(r.dist3);
    reports.push_back(std::move(obj));
  }
  report["reports"] = std::move(reports);
  if (sets.size() == 2) {
    OverlapComparator comparator;
    WinRateResult wr = win_rate(sets[0], sets[1], comparator);
    nlohmann::ordered_json obj;
    obj["comparator"] = comparator.name();
    obj["pairs"] = wr.pairs;
    obj["wins_first"] = wr.wins_a;
    obj["win_rate_first"] = wr.win_rate_a;
    report["pairwise"] = std::move(obj);
  }
  std::string text = report.dump(2) + "\n";
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError("cannot open report file for writing: " + out_path);
    out << text;
  }
  return 0;
}

int cmd_keyphrases(const FlagOverrides& flags, const std::string& corpus_path) {
  RunConfig config = resolve_config(flags);
  auto examples = load_corpus(corpus_path, config.format_enum());
  // Extraction only needs token text; use a vocabulary over this corpus.
  Vocabulary vocab = build_vocab(examples, 1);
  encode_examples(examples, vocab, config.max_context);
  for (const auto& ex : examples) {
    std::printf("story %s\n", ex.story_id.c_str());
    std::vector<KeyphraseCandidate> retained;
    std::vector<double> p = context_score_vector(ex.context_token_text, config.k, &retained);
    for (const auto& cand : retained) {
      std::printf("  phrase \"%s\" raw=%.6f normalized=%.6f\n", cand.text().c_str(), cand.score,
                  cand.normalized_score);
    }
    std::printf("  p =");
    for (double v : p) std::printf(" %.6f", v);
    std::printf("\n");
  }
  return 0;
}

int cmd_synth(std::uint64_t seed, int n, const std::string& out_path) {
  auto examples = synth_corpus(seed, n);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + out_path);
  for (const auto& ex : examples) {
    nlohmann::ordered_json obj;
    obj["story_id"] = ex.story_id;
    obj["context"] = ex.context_sentences;
    obj["ending"] = ex.target_sentence;
    out << obj.dump() << "\n";
  }
  if (!out) throw DataError("write failed: " + out_path);
  std::printf("wrote %zu stories to %s\n", examples.size(), out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keyphrase-conditioned story ending generation"};
  app.require_subcommand(1);

  FlagOverrides flags;

  auto* train = app.add_subcommand("train", "Train a model and write checkpoints");
  std::string train_corpus, train_dev, train_out = "model.ckpt";
  train->add_option("corpus", train_corpus, "Training corpus path");
  train->add_option("--dev", train_dev, "Dev corpus for model selection");
  train->add_option("--out", train_out, "Checkpoint output path");
  add_common_flags(train, flags);

  auto* generate = app.add_subcommand("generate", "Generate endings from a checkpoint");
  std::string gen_checkpoint, gen_corpus, gen_out = "generations.jsonl";
  generate->add_option("checkpoint", gen_checkpoint, "Checkpoint path")->required();
  generate->add_option("corpus", gen_corpus, "Corpus path")->required();
  generate->add_option("--out", gen_out, "Generations output path");
  add_common_flags(generate, flags);

  auto* evaluate = app.add_subcommand("evaluate", "Diversity report over generations files");
  std::vector<std::string> eval_files;
  std::string eval_out;
  evaluate->add_option("files", eval_files, "One or two generations files")->expected(1, 2);
  evaluate->add_option("--out", eval_out, "Report output path (default stdout)");

  auto* keyphrases = app.add_subcommand("keyphrases", "Dump extracted keyphrases and p vectors");
  std::string kp_corpus;
  keyphrases->add_option("corpus", kp_corpus, "Corpus path")->required();
  add_common_flags(keyphrases, flags);

  auto* synth = app.add_subcommand("synth", "Write a synthetic toy corpus");
  std::string synth_out = "synth.jsonl";
  std::uint64_t synth_seed = 1;
  int synth_n = 200;
  synth->add_option("--out", synth_out, "Output corpus path");
  synth->add_option("--seed", synth_seed, "Corpus seed");
  synth->add_option("--n", synth_n, "Number of stories");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(flags, train_corpus, train_dev, train_out);
    if (generate->parsed()) return cmd_generate(flags, gen_checkpoint, gen_corpus, gen_out);
    if (evaluate->parsed()) return cmd_evaluate(eval_files, eval_out);
    if (keyphrases->parsed()) return cmd_keyphrases(flags, kp_corpus);
    if (synth->parsed()) return cmd_synth(synth_seed, synth_n, synth_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
