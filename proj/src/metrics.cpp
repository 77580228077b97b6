#include "storygen/metrics.hpp"

#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace storygen {

DistResult distinct_n(const GenerationSet& generations, int n) {
  if (n < 1 || n > 3) throw std::invalid_argument("distinct_n: n must be 1, 2 or 3");
  std::unordered_set<std::string> seen;
  DistResult result;
  for (const auto& rec : generations) {
    const auto& toks = rec.ending_tokens;
    if (static_cast<int>(toks.size()) < n) continue;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
      std::string key;
      for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j) {
        if (j != 0) key += '\x1f';
        key += toks[i + j];
      }
      seen.insert(key);
      result.total += 1;
    }
  }
  result.distinct = static_cast<std::int64_t>(seen.size());
  if (result.total == 0) {
    result.undefined = true;
    result.ratio = 0.0;
  } else {
    result.ratio = static_cast<double>(result.distinct) / static_cast<double>(result.total);
  }
  return result;
}

EvalReport eval_report(const GenerationSet& generations) {
  return {distinct_n(generations, 1), distinct_n(generations, 2), distinct_n(generations, 3)};
}

bool OverlapComparator::first_wins(const std::vector<std::string>& context_tokens,
                                   const std::vector<std::string>& ending_a,
                                   const std::vector<std::string>& ending_b) const {
  std::unordered_set<std::string> context(context_tokens.begin(), context_tokens.end());
  const auto& stop = english_stopword_set();
  auto overlap = [&](const std::vector<std::string>& ending) {
    std::unordered_set<std::string> shared;
    for (const auto& tok : ending) {
      if (stop.count(tok) == 0 && context.count(tok) != 0) shared.insert(tok);
    }
    return shared.size();
  };
  return overlap(ending_a) >= overlap(ending_b);
}

Winner compare_endings(const EndingComparator& comparator,
                       const std::vector<std::string>& context_tokens,
                       const std::vector<std::string>& ending_a,
                       const std::vector<std::string>& ending_b) {
  if (ending_a.empty() || ending_b.empty()) {
    throw std::invalid_argument("compare_endings: endings must be non-empty");
  }
  return comparator.first_wins(context_tokens, ending_a, ending_b) ? Winner::kA : Winner::kB;
}

WinRateResult win_rate(const GenerationSet& a, const GenerationSet& b,
                       const EndingComparator& comparator) {
  std::unordered_map<std::string, const GenerationRecord*> by_id;
  for (const auto& rec : b) by_id[rec.story_id] = &rec;
  WinRateResult result;
  for (const auto& rec_a : a) {
    auto it = by_id.find(rec_a.story_id);
    if (it == by_id.end()) {
      throw std::invalid_argument("win_rate: story '" + rec_a.story_id +
                                  "' missing from the second set");
    }
    const auto& rec_b = *it->second;
    std::vector<std::string> context_tokens;
    for (const auto& sent : rec_a.context_sentences) {
      for (auto& tok : tokenize(sent)) context_tokens.push_back(std::move(tok));
    }
    // Alternate which set sits in the tie-favored first position.
    bool a_first = result.pairs % 2 == 0;
    Winner w = a_first
                   ? compare_endings(comparator, context_tokens, rec_a.ending_tokens,
                                     rec_b.ending_tokens)
                   : compare_endings(comparator, context_tokens, rec_b.ending_tokens,
                                     rec_a.ending_tokens);
    bool a_won = a_first ? w == Winner::kA : w == Winner::kB;
    result.wins_a += a_won ? 1 : 0;
    result.pairs += 1;
  }
  result.win_rate_a =
      result.pairs == 0 ? 0.0 : static_cast<double>(result.wins_a) / result.pairs;
  return result;
}

void write_generations(const std::string& path, const GenerationSet& generations) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  for (const auto& rec : generations) {
    nlohmann::ordered_json obj;
    obj["story_id"] = rec.story_id;
    obj["context"] = rec.context_sentences;
    obj["ending"] = rec.ending_tokens;
    nlohmann::ordered_json phrases = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < rec.keyphrases.size(); ++i) {
      nlohmann::ordered_json ph;
      ph["phrase"] = rec.keyphrases[i];
      ph["score"] = i < rec.keyphrase_scores.size() ? rec.keyphrase_scores[i] : 0.0;
      phrases.push_back(std::move(ph));
    }
    obj["keyphrases"] = std::move(phrases);
    out << obj.dump() << "\n";
  }
  if (!out) throw DataError("write failed: " + path);
}

GenerationSet read_generations(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open generations file: " + path);
  GenerationSet set;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    GenerationRecord rec;
    try {
      rec.story_id = obj.at("story_id").get<std::string>();
      rec.context_sentences = obj.at("context").get<std::vector<std::string>>();
      rec.ending_tokens = obj.at("ending").get<std::vector<std::string>>();
      if (obj.contains("keyphrases")) {
        for (const auto& ph : obj["keyphrases"]) {
          rec.keyphrases.push_back(ph.at("phrase").get<std::string>());
          rec.keyphrase_scores.push_back(ph.at("score").get<double>());
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": bad record: " + e.what());
    }
    set.push_back(std::move(rec));
  }
  return set;
}

GenerationSet generate_endings(const ModelParameters<float>& params, const ModelConfig& config,
                               const std::vector<StoryExample>& examples, int k,
                               const DecodeConfig& decode_config, const Vocabulary& vocab) {
  GenerationSet set;
  for (const auto& ex : examples) {
    if (ex.context_tokens.empty()) {
      throw DataError("generate_endings: story " + ex.story_id + " is not encoded");
    }
    std::vector<KeyphraseCandidate> retained;
    std::vector<double> p = context_score_vector(ex.context_token_text, k, &retained);
    std::vector<int> ids = greedy_decode(params, config, ex.context_tokens, p, decode_config);
    GenerationRecord rec;
    rec.story_id = ex.story_id;
    rec.context_sentences = ex.context_sentences;
    for (int id : ids) rec.ending_tokens.push_back(vocab.token(id));
    for (const auto& cand : retained) {
      rec.keyphrases.push_back(cand.text());
      rec.keyphrase_scores.push_back(cand.normalized_score);
    }
    set.push_back(std::move(rec));
  }
  return set;
}

EvalReport evaluate_model(const ModelParameters<float>& params, const ModelConfig& config,
                          const std::vector<StoryExample>& examples, int k,
                          const DecodeConfig& decode_config, const Vocabulary& vocab) {
  if (examples.empty()) throw DataError("evaluate_model: empty corpus");
  return eval_report(generate_endings(params, config, examples, k, decode_config, vocab));
}

}  // namespace storygen
