#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "storygen/data.hpp"
#include "storygen/rng.hpp"
#include "storygen/special_tokens.hpp"

using namespace storygen;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = "/tmp/storygen_test_" + name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

StoryExample make_example(const std::string& id, const std::string& ending) {
  StoryExample ex;
  ex.story_id = id;
  ex.context_sentences = {"one .", "two .", "three .", "four ."};
  ex.target_sentence = ending;
  return ex;
}

}  // namespace

TEST_CASE("tokenizer lowercases, splits punctuation edges, keeps interiors") {
  CHECK(tokenize("Tom had a cat.") == std::vector<std::string>{"tom", "had", "a", "cat", "."});
  CHECK(tokenize("didn't stop!") == std::vector<std::string>{"didn't", "stop", "!"});
  CHECK(tokenize("\"Hello,\" she said...") ==
        std::vector<std::string>{"\"", "hello", ",", "\"", "she", "said", ".", ".", "."});
  CHECK(tokenize("  spaced    out  ") == std::vector<std::string>{"spaced", "out"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("one-two") == std::vector<std::string>{"one-two"});
}

TEST_CASE("tokenization is idempotent over rejoined output") {
  Rng rng(derive_seed(7, 70));
  const std::vector<std::string> pieces = {"Tom", "CAT.",  "didn't", "!!",  "a,b",
                                           "('x)", "23rd", "...",    "it's", "end."};
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    int n = 1 + static_cast<int>(rng.uniform_index(8));
    for (int i = 0; i < n; ++i) {
      if (i) text += " ";
      text += pieces[rng.uniform_index(pieces.size())];
    }
    auto once = tokenize(text);
    std::string rejoined;
    for (std::size_t i = 0; i < once.size(); ++i) {
      if (i) rejoined += " ";
      rejoined += once[i];
    }
    CHECK(tokenize(rejoined) == once);
  }
}

TEST_CASE("csv corpus loads with quoted fields and embedded commas") {
  std::string csv =
      "storyid,storytitle,sentence1,sentence2,sentence3,sentence4,sentence5\n"
      "s1,T,\"Anna said, \"\"go\"\".\",Second.,Third.,Fourth.,\"The end,\nreally.\"\n"
      "s2,T,A.,B.,C.,D.,E.\n";
  auto path = write_temp("ok.csv", csv);
  auto examples = load_corpus(path, CorpusFormat::kRocstoriesCsv);
  REQUIRE(examples.size() == 2);
  CHECK(examples[0].story_id == "s1");
  CHECK(examples[0].context_sentences[0] == "Anna said, \"go\".");
  CHECK(examples[0].target_sentence == "The end,\nreally.");
  CHECK(examples[1].target_sentence == "E.");
  std::remove(path.c_str());
}

TEST_CASE("csv errors carry line numbers") {
  auto path = write_temp("bad.csv",
                         "storyid,storytitle,sentence1,sentence2,sentence3,sentence4,sentence5\n"
                         "s1,T,A.,B.,C.,D.,E.\n"
                         "s2,T,only,three,cols\n");
  try {
    load_corpus(path, CorpusFormat::kRocstoriesCsv);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("csv rejects an empty fifth sentence") {
  auto path = write_temp("empty5.csv",
                         "storyid,storytitle,sentence1,sentence2,sentence3,sentence4,sentence5\n"
                         "s1,T,A.,B.,C.,D.,\n");
  CHECK_THROWS_AS(load_corpus(path, CorpusFormat::kRocstoriesCsv), DataError);
  std::remove(path.c_str());
}

TEST_CASE("jsonl corpus loads and validates") {
  std::string good =
      R"({"story_id":"a","context":["One.","Two.","Three.","Four."],"ending":"Five."})"
      "\n"
      R"({"story_id":"b","context":["1.","2.","3.","4."],"ending":"5."})"
      "\n";
  auto path = write_temp("ok.jsonl", good);
  auto examples = load_corpus(path, CorpusFormat::kJsonl);
  REQUIRE(examples.size() == 2);
  CHECK(examples[1].story_id == "b");
  CHECK(examples[1].context_sentences.size() == 4);
  std::remove(path.c_str());

  auto bad = write_temp("bad.jsonl",
                        R"({"story_id":"a","context":["One.","Two."],"ending":"Five."})"
                        "\n");
  try {
    load_corpus(bad, CorpusFormat::kJsonl);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":1:") != std::string::npos);
  }
  std::remove(bad.c_str());
}

TEST_CASE("vocabulary ordering and min_freq cutoff") {
  std::vector<StoryExample> examples = {make_example("x", "a b a")};
  examples[0].context_sentences = {"b c", "c", "c", "d"};
  // counts: a2 b2 c3 d1
  Vocabulary v1 = build_vocab(examples, 1);
  CHECK(v1.size() == kNumSpecials + 4);
  CHECK(v1.token(kNumSpecials + 0) == "c");   // highest count first
  CHECK(v1.token(kNumSpecials + 1) == "a");   // count ties break by token text
  CHECK(v1.token(kNumSpecials + 2) == "b");
  CHECK(v1.token(kNumSpecials + 3) == "d");
  CHECK(v1.lookup("zebra") == kUnkId);
  CHECK(v1.lookup(kEosToken) == kEosId);

  Vocabulary v2 = build_vocab(examples, 2);
  CHECK(v2.size() == kNumSpecials + 3);  // d dropped
  CHECK(v2.lookup("d") == kUnkId);
  CHECK(v2.frequency[kUnkId] >= 1);  // dropped mass lands on the unk budget
}

TEST_CASE("special token ids are pinned") {
  std::vector<StoryExample> examples = {make_example("x", "hello")};
  Vocabulary v = build_vocab(examples, 1);
  CHECK(v.lookup(kPadToken) == 0);
  CHECK(v.lookup(kSosToken) == 1);
  CHECK(v.lookup(kEosToken) == 2);
  CHECK(v.lookup(kUnkToken) == 3);
  CHECK(v.lookup(kSentDelimToken) == 4);
}

TEST_CASE("encoding inserts sentence delimiters and appends eos") {
  std::vector<StoryExample> examples = {make_example("x", "fin .")};
  examples[0].context_sentences = {"a .", "b .", "c .", "d ."};
  Vocabulary v = build_vocab(examples, 1);
  int truncated = encode_examples(examples, v);
  CHECK(truncated == 0);
  const auto& ex = examples[0];
  // a . <sd> b . <sd> c . <sd> d .
  REQUIRE(ex.context_tokens.size() == 11);
  CHECK(ex.context_tokens[2] == kSentDelimId);
  CHECK(ex.context_tokens[5] == kSentDelimId);
  CHECK(ex.context_tokens[8] == kSentDelimId);
  CHECK(ex.context_token_text[2] == kSentDelimToken);
  CHECK(ex.target_tokens.back() == kEosId);
  CHECK(ex.target_tokens.size() == 3);  // fin . <eos>
}

TEST_CASE("overlong contexts are left-truncated to the cap") {
  std::vector<StoryExample> examples = {make_example("x", "end .")};
  std::string many;
  for (int i = 0; i < 50; ++i) many += "w" + std::to_string(i) + " ";
  examples[0].context_sentences = {many, many, many, "last words here ."};
  Vocabulary v = build_vocab(examples, 1);
  int truncated = encode_examples(examples, v, 120);
  CHECK(truncated == 1);
  CHECK(examples[0].context_tokens.size() == 120);
  // The most recent context survives truncation.
  CHECK(examples[0].context_token_text.back() == ".");
  CHECK(examples[0].context_token_text[116] == "last");
  CHECK(examples[0].context_token_text.size() == examples[0].context_tokens.size());
}

TEST_CASE("non-special vocabulary frequencies sum to the corpus token count") {
  auto examples = synth_corpus(3, 40);
  Vocabulary v = build_vocab(examples, 1);
  long long corpus_tokens = 0;
  for (const auto& ex : examples) {
    for (const auto& s : ex.context_sentences) corpus_tokens += static_cast<long long>(tokenize(s).size());
    corpus_tokens += static_cast<long long>(tokenize(ex.target_sentence).size());
  }
  long long vocab_mass = 0;
  for (int id = kNumSpecials; id < v.size(); ++id) {
    vocab_mass += v.frequency[static_cast<std::size_t>(id)];
  }
  CHECK(vocab_mass == corpus_tokens);
}

TEST_CASE("batching covers every example once with the tail batch short") {
  auto examples = synth_corpus(11, 10);
  Vocabulary v = build_vocab(examples, 1);
  encode_examples(examples, v);
  auto batches = make_batches(examples, {}, 4, 123);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].context.size() == 4);
  CHECK(batches[1].context.size() == 4);
  CHECK(batches[2].context.size() == 2);

  std::multiset<int> seen, expect;
  for (std::size_t i = 0; i < examples.size(); ++i)
    expect.insert(static_cast<int>(examples[i].context_tokens.size()));
  for (const auto& b : batches) {
    for (std::size_t i = 0; i < b.context.size(); ++i) {
      seen.insert(b.context_lengths[i]);
      // padded width is shared per batch; rows beyond the length are PAD
      for (std::size_t j = static_cast<std::size_t>(b.context_lengths[i]); j < b.context[i].size(); ++j)
        CHECK(b.context[i][j] == kPadId);
      CHECK(b.scores[i].size() == static_cast<std::size_t>(b.context_lengths[i]));
    }
  }
  CHECK(seen == expect);
}

TEST_CASE("batch order is seed-deterministic") {
  auto examples = synth_corpus(17, 12);
  Vocabulary v = build_vocab(examples, 1);
  encode_examples(examples, v);
  auto a = make_batches(examples, {}, 4, 5);
  auto b = make_batches(examples, {}, 4, 5);
  auto c = make_batches(examples, {}, 4, 6);
  REQUIRE(a.size() == b.size());
  bool same_as_c = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].context == b[i].context);
    CHECK(a[i].target == b[i].target);
    if (a[i].context != c[i].context) same_as_c = false;
  }
  CHECK_FALSE(same_as_c);  // a different seed shuffles differently
}

TEST_CASE("synthetic corpus is reproducible and well-formed") {
  auto a = synth_corpus(42, 30);
  auto b = synth_corpus(42, 30);
  REQUIRE(a.size() == 30);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].context_sentences == b[i].context_sentences);
    CHECK(a[i].target_sentence == b[i].target_sentence);
    CHECK(a[i].context_sentences.size() == 4);
    CHECK(!a[i].target_sentence.empty());
    ids.insert(a[i].story_id);
  }
  CHECK(ids.size() == 30);  // distinct stories
  CHECK_THROWS_AS(synth_corpus(1, 1000000), std::invalid_argument);
}
