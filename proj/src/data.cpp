#include "storygen/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "storygen/special_tokens.hpp"

namespace storygen {

namespace {

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

bool is_ascii_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

std::string lower_ascii(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

// Splits one whitespace-free word into tokens: leading punctuation chars,
// the core word (interior punctuation kept), trailing punctuation chars.
void split_word(const std::string& word, std::vector<std::string>& out) {
  std::size_t begin = 0, end = word.size();
  while (begin < end && is_ascii_punct(word[begin])) ++begin;
  while (end > begin && is_ascii_punct(word[end - 1])) --end;
  for (std::size_t i = 0; i < begin; ++i) out.push_back(std::string(1, word[i]));
  if (begin < end) out.push_back(word.substr(begin, end - begin));
  for (std::size_t i = end; i < word.size(); ++i) out.push_back(std::string(1, word[i]));
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string lowered = lower_ascii(text);
  std::size_t i = 0;
  while (i < lowered.size()) {
    while (i < lowered.size() && is_ascii_space(lowered[i])) ++i;
    std::size_t start = i;
    while (i < lowered.size() && !is_ascii_space(lowered[i])) ++i;
    if (i > start) split_word(lowered.substr(start, i - start), tokens);
  }
  return tokens;
}

bool is_punctuation_token(const std::string& token) {
  if (token.empty()) return false;
  return std::all_of(token.begin(), token.end(), is_ascii_punct);
}

CorpusFormat parse_corpus_format(const std::string& name) {
  if (name == "csv" || name == "rocstories-csv") return CorpusFormat::kRocstoriesCsv;
  if (name == "jsonl") return CorpusFormat::kJsonl;
  throw DataError("unknown corpus format '" + name + "' (expected csv or jsonl)");
}

namespace {

// RFC-4180-style records: quoted fields may contain commas, doubled quotes,
// and newlines. Returns one token-field list per record along with the line
// number the record started on.
std::vector<std::pair<int, std::vector<std::string>>> parse_csv(const std::string& content,
                                                                const std::string& path) {
  std::vector<std::pair<int, std::vector<std::string>>> records;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  int line = 1;
  int record_line = 1;
  auto end_field = [&] {
    fields.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    if (fields.empty() && !field_started && field.empty()) return;  // blank line
    end_field();
    records.emplace_back(record_line, fields);
    fields.clear();
  };
  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        // A trailing comma means the record has one more (empty) field.
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        record_line = line;
        break;
      default:
        field += c;
        field_started = true;
        break;
    }
  }
  if (in_quotes) {
    throw DataError(path + ":" + std::to_string(record_line) + ": unterminated quoted field");
  }
  end_record();
  return records;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<StoryExample> load_rocstories_csv(const std::string& path) {
  auto records = parse_csv(read_file(path), path);
  if (records.empty()) throw DataError(path + ": empty file, expected a header row");
  const auto& header = records[0].second;
  if (header.size() != 7) {
    throw DataError(path + ":" + std::to_string(records[0].first) + ": expected 7 columns " +
                    "(storyid, storytitle, sentence1..sentence5), got " +
                    std::to_string(header.size()));
  }
  std::vector<StoryExample> examples;
  for (std::size_t r = 1; r < records.size(); ++r) {
    int line = records[r].first;
    const auto& f = records[r].second;
    if (f.size() != 7) {
      throw DataError(path + ":" + std::to_string(line) + ": expected 7 columns, got " +
                      std::to_string(f.size()));
    }
    StoryExample ex;
    ex.story_id = f[0];
    ex.context_sentences = {f[2], f[3], f[4], f[5]};
    ex.target_sentence = f[6];
    if (tokenize(ex.target_sentence).empty()) {
      throw DataError(path + ":" + std::to_string(line) + ": fifth sentence is empty");
    }
    examples.push_back(std::move(ex));
  }
  return examples;
}

std::vector<StoryExample> load_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file: " + path);
  std::vector<StoryExample> examples;
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
    if (!obj.is_object() || !obj.contains("story_id") || !obj.contains("context") ||
        !obj.contains("ending")) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": record must have story_id, context, ending");
    }
    const auto& ctx = obj["context"];
    if (!ctx.is_array() || ctx.size() != 4) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": context must be an array of 4 strings");
    }
    StoryExample ex;
    try {
      ex.story_id = obj["story_id"].is_string() ? obj["story_id"].get<std::string>()
                                                : obj["story_id"].dump();
      for (const auto& s : ctx) ex.context_sentences.push_back(s.get<std::string>());
      ex.target_sentence = obj["ending"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": bad field type: " + e.what());
    }
    if (tokenize(ex.target_sentence).empty()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": ending is empty");
    }
    examples.push_back(std::move(ex));
  }
  return examples;
}

}  // namespace

std::vector<StoryExample> load_corpus(const std::string& path, CorpusFormat format) {
  switch (format) {
    case CorpusFormat::kRocstoriesCsv:
      return load_rocstories_csv(path);
    case CorpusFormat::kJsonl:
      return load_jsonl(path);
  }
  throw DataError("unhandled corpus format");
}

int Vocabulary::lookup(const std::string& tok) const {
  auto it = token_to_id.find(tok);
  return it == token_to_id.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) {
    throw std::out_of_range("vocabulary id " + std::to_string(id) + " out of range (size " +
                            std::to_string(size()) + ")");
  }
  return id_to_token[static_cast<std::size_t>(id)];
}

Vocabulary build_vocab(const std::vector<StoryExample>& examples, int min_freq) {
  if (examples.empty()) throw DataError("build_vocab: no examples");
  if (min_freq < 1) throw std::invalid_argument("build_vocab: min_freq must be >= 1");
  std::unordered_map<std::string, std::int64_t> counts;
  for (const auto& ex : examples) {
    for (const auto& sent : ex.context_sentences) {
      for (auto& tok : tokenize(sent)) counts[tok] += 1;
    }
    for (auto& tok : tokenize(ex.target_sentence)) counts[tok] += 1;
  }
  std::vector<std::pair<std::string, std::int64_t>> kept;
  std::int64_t dropped_total = 0;
  for (const auto& [tok, count] : counts) {
    if (count >= min_freq) {
      kept.emplace_back(tok, count);
    } else {
      dropped_total += count;
    }
  }
  // Count descending, token ascending: the id assignment is reproducible for
  // a given corpus regardless of hash-map iteration order.
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  auto n = static_cast<std::int64_t>(examples.size());
  vocab.id_to_token = {kPadToken, kSosToken, kEosToken, kUnkToken, kSentDelimToken};
  vocab.frequency = {1, n, n, std::max<std::int64_t>(1, dropped_total), 3 * n};
  for (auto& [tok, count] : kept) {
    vocab.id_to_token.push_back(tok);
    vocab.frequency.push_back(count);
  }
  for (int id = 0; id < vocab.size(); ++id) {
    vocab.token_to_id[vocab.id_to_token[static_cast<std::size_t>(id)]] = id;
  }
  return vocab;
}

int encode_examples(std::vector<StoryExample>& examples, const Vocabulary& vocab,
                    int max_context_tokens) {
  if (max_context_tokens < 1) {
    throw std::invalid_argument("encode_examples: max_context_tokens must be >= 1");
  }
  int truncated = 0;
  for (auto& ex : examples) {
    if (ex.context_sentences.size() != 4) {
      throw DataError("story " + ex.story_id + ": expected 4 context sentences, got " +
                      std::to_string(ex.context_sentences.size()));
    }
    ex.context_token_text.clear();
    for (std::size_t s = 0; s < 4; ++s) {
      if (s != 0) ex.context_token_text.push_back(kSentDelimToken);
      for (auto& tok : tokenize(ex.context_sentences[s])) {
        ex.context_token_text.push_back(std::move(tok));
      }
    }
    if (ex.context_token_text.empty()) {
      throw DataError("story " + ex.story_id + ": context has no tokens");
    }
    if (static_cast<int>(ex.context_token_text.size()) > max_context_tokens) {
      auto excess = ex.context_token_text.size() - static_cast<std::size_t>(max_context_tokens);
      ex.context_token_text.erase(ex.context_token_text.begin(),
                                  ex.context_token_text.begin() + static_cast<std::ptrdiff_t>(excess));
      ++truncated;
    }
    ex.context_tokens.clear();
    for (const auto& tok : ex.context_token_text) {
      ex.context_tokens.push_back(vocab.lookup(tok));
    }
    auto target = tokenize(ex.target_sentence);
    if (target.empty()) {
      throw DataError("story " + ex.story_id + ": target sentence has no tokens");
    }
    ex.target_tokens.clear();
    for (const auto& tok : target) ex.target_tokens.push_back(vocab.lookup(tok));
    ex.target_tokens.push_back(kEosId);
  }
  return truncated;
}

std::vector<Batch> make_batches(const std::vector<StoryExample>& examples,
                                const std::vector<std::vector<double>>& scores, int batch_size,
                                std::uint64_t seed) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  if (!scores.empty() && scores.size() != examples.size()) {
    throw std::invalid_argument("make_batches: scores not aligned with examples");
  }
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    Batch batch;
    std::size_t max_ctx = 0, max_tgt = 0;
    for (std::size_t i = start; i < stop; ++i) {
      const auto& ex = examples[order[i]];
      max_ctx = std::max(max_ctx, ex.context_tokens.size());
      max_tgt = std::max(max_tgt, ex.target_tokens.size());
    }
    for (std::size_t i = start; i < stop; ++i) {
      const auto& ex = examples[order[i]];
      std::vector<int> ctx = ex.context_tokens;
      ctx.resize(max_ctx, kPadId);
      std::vector<int> tgt = ex.target_tokens;
      tgt.resize(max_tgt, kPadId);
      batch.context.push_back(std::move(ctx));
      batch.context_lengths.push_back(static_cast<int>(ex.context_tokens.size()));
      batch.target.push_back(std::move(tgt));
      batch.target_lengths.push_back(static_cast<int>(ex.target_tokens.size()));
      batch.scores.push_back(scores.empty() ? std::vector<double>(ex.context_tokens.size(), 0.0)
                                            : scores[order[i]]);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace storygen
