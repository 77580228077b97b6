#include <cmath>
#include <vector>

#include "doctest.h"
#include "storygen/model.hpp"
#include "storygen/special_tokens.hpp"
#include "storygen/tape.hpp"

using namespace storygen;

namespace {

ModelConfig small_config(Variant variant = Variant::kBaseline) {
  ModelConfig c;
  c.variant = variant;
  c.embedding_dim = 4;
  c.hidden_dim = 6;
  c.num_layers = 2;
  c.vocab_size = 12;
  return c;
}

// Encoder output with hand-chosen state rows, for attention unit tests.
EncoderOutput<double> fixed_encoder(Tape<double>& tape, const std::vector<std::vector<double>>& rows,
                                    const Tensor<double>& attn_enc) {
  EncoderOutput<double> enc;
  int h = static_cast<int>(rows[0].size());
  for (const auto& r : rows) {
    enc.state_rows.push_back(Tensor<double>::from_values({1, h}, std::vector<double>(r)));
  }
  enc.states = tape.concat(enc.state_rows, 0);
  enc.attn_proj = tape.matmul(enc.states, attn_enc);
  return enc;
}

}  // namespace

TEST_CASE("encoder emits one state row per context token") {
  auto config = small_config();
  auto params = ModelParameters<double>::init(config, 7);
  Tape<double> tape;
  std::vector<int> ids = {5, 6, 7, 4, 8, 9, 10};
  auto enc = encode(tape, ids, params, config);
  CHECK(enc.state_rows.size() == 7);
  CHECK(enc.states.shape() == std::vector<int>{7, config.hidden_dim});
  CHECK(enc.attn_proj.shape() == std::vector<int>{7, config.hidden_dim});
  CHECK(enc.finals.size() == 2);
  // The last state row and the top-layer final are the same tensor.
  CHECK(enc.finals.back().id() == enc.state_rows.back().id());
}

TEST_CASE("gru step with zero weights keeps the state at zero") {
  ModelConfig config = small_config();
  GruCell<double> cell;
  int h = 3, in = 2;
  cell.w_r = Tensor<double>::zeros({in, h});
  cell.w_z = Tensor<double>::zeros({in, h});
  cell.w_n = Tensor<double>::zeros({in, h});
  cell.u_r = Tensor<double>::zeros({h, h});
  cell.u_z = Tensor<double>::zeros({h, h});
  cell.u_n = Tensor<double>::zeros({h, h});
  cell.b_r = Tensor<double>::zeros({1, h});
  cell.b_z = Tensor<double>::zeros({1, h});
  cell.b_n = Tensor<double>::zeros({1, h});
  Tape<double> tape;
  auto x = Tensor<double>::from_values({1, in}, {1.0, -1.0});
  auto h0 = Tensor<double>::zeros({1, h});
  auto h1 = gru_cell_step(tape, cell, x, h0);
  // r=z=1/2, n=0, h' = 0 + 1/2 * (0 - 0) = 0
  for (double v : h1.values()) CHECK(v == doctest::Approx(0.0));
  (void)config;
}

TEST_CASE("attention over identical states is uniform") {
  Tape<double> tape;
  int h = 4;
  ModelConfig config = small_config();
  config.hidden_dim = h;
  config.vocab_size = 8;
  auto params = ModelParameters<double>::init(config, 3);
  std::vector<std::vector<double>> rows = {{0.3, -0.2, 0.5, 0.1},
                                           {0.3, -0.2, 0.5, 0.1},
                                           {0.3, -0.2, 0.5, 0.1}};
  auto enc = fixed_encoder(tape, rows, params.attn_enc);
  auto h_dec = Tensor<double>::from_values({1, h}, {0.1, 0.2, 0.3, 0.4});
  auto att = attend(tape, h_dec, enc, params);
  CHECK(att.weights.shape() == std::vector<int>{1, 3});
  for (double w : att.weights.values()) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("a one-hot attention row copies the selected encoder state") {
  Tape<double> tape;
  int h = 3;
  std::vector<std::vector<double>> rows = {{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}};
  auto states = tape.concat({Tensor<double>::from_values({1, h}, std::vector<double>(rows[0])),
                             Tensor<double>::from_values({1, h}, std::vector<double>(rows[1]))},
                            0);
  auto a = Tensor<double>::from_values({1, 2}, {1.0, 0.0});
  auto c = tape.matmul(a, states);
  CHECK(c.values() == std::vector<double>{1.0, 2.0, 3.0});

  // e = [ln 2, 0] weights the first state 2:1.
  Tape<double> t2;
  auto e = Tensor<double>::from_values({1, 2}, {std::log(2.0), 0.0});
  auto w = t2.softmax_rows(e);
  auto c2 = t2.matmul(w, states);
  for (int j = 0; j < h; ++j) {
    double expect = (2.0 * rows[0][static_cast<std::size_t>(j)] +
                     rows[1][static_cast<std::size_t>(j)]) / 3.0;
    CHECK(c2.values()[static_cast<std::size_t>(j)] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("keyphrase reshaping renormalizes and keeps zero scores neutral") {
  Tape<double> tape;
  auto a = Tensor<double>::from_values({1, 3}, {0.2, 0.5, 0.3});
  auto p = Tensor<double>::from_values({1, 3}, {0.0, 1.0, 0.0});
  auto adjusted = condition_attention(tape, a, p, Variant::kKeyphraseAdd);
  // (0.2, 1.5, 0.3) / 2
  CHECK(adjusted.values()[0] == doctest::Approx(0.1));
  CHECK(adjusted.values()[1] == doctest::Approx(0.75));
  CHECK(adjusted.values()[2] == doctest::Approx(0.15));
  double sum = 0.0;
  for (double v : adjusted.values()) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  auto zero = Tensor<double>::zeros({1, 3});
  auto same = condition_attention(tape, a, zero, Variant::kKeyphraseAdd);
  for (int j = 0; j < 3; ++j)
    CHECK(same.values()[static_cast<std::size_t>(j)] ==
          doctest::Approx(a.values()[static_cast<std::size_t>(j)]).epsilon(1e-12));

  auto neg = Tensor<double>::from_values({1, 3}, {0.0, -0.1, 0.0});
  CHECK_THROWS_AS(condition_attention(tape, a, neg, Variant::kKeyphraseAdd), std::invalid_argument);

  // Other variants pass the weights through untouched.
  auto untouched = condition_attention(tape, a, p, Variant::kBaseline);
  CHECK(untouched.id() == a.id());
}

TEST_CASE("a one-hot score vector selects that encoder state as keyphrase context") {
  Tape<double> tape;
  int h = 3;
  std::vector<std::vector<double>> rows = {{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}, {7.0, 8.0, 9.0}};
  EncoderOutput<double> enc;
  for (const auto& r : rows)
    enc.state_rows.push_back(Tensor<double>::from_values({1, h}, std::vector<double>(r)));
  enc.states = tape.concat(enc.state_rows, 0);
  auto p = Tensor<double>::from_values({1, 3}, {0.0, 0.0, 1.0});
  auto k = keyphrase_context(tape, p, enc);
  CHECK(k.values() == std::vector<double>{7.0, 8.0, 9.0});
}

TEST_CASE("context width doubles under concat conditioning") {
  auto base = small_config(Variant::kBaseline);
  auto cc = small_config(Variant::kContextConcat);
  CHECK(base.context_width() == base.hidden_dim);
  CHECK(cc.context_width() == 2 * cc.hidden_dim);
  auto params = ModelParameters<double>::init(cc, 1);
  CHECK(params.decoder[0].w_r.dim(0) == cc.embedding_dim + 2 * cc.hidden_dim);
  CHECK(params.decoder[1].w_r.dim(0) == cc.hidden_dim);
  auto bparams = ModelParameters<double>::init(base, 1);
  CHECK(bparams.decoder[0].w_r.dim(0) == base.embedding_dim + base.hidden_dim);
}

TEST_CASE("zero keyphrase scores reduce the additive variant to the baseline") {
  auto base_cfg = small_config(Variant::kBaseline);
  auto add_cfg = small_config(Variant::kKeyphraseAdd);
  auto params = ModelParameters<double>::init(base_cfg, 21);
  std::vector<int> context = {5, 6, 7, 8, 9};
  std::vector<int> target = {10, 11, kEosId};
  std::vector<double> zeros(context.size(), 0.0);

  Tape<double> t1(false);
  auto base_out = forward_teacher_forced(t1, context, target, {}, params, base_cfg);
  Tape<double> t2(false);
  auto add_out = forward_teacher_forced(t2, context, target, zeros, params, add_cfg);

  REQUIRE(base_out.logits.size() == add_out.logits.size());
  for (std::size_t t = 0; t < base_out.logits.size(); ++t) {
    const auto& a = base_out.logits[t].values();
    const auto& b = add_out.logits[t].values();
    for (std::size_t j = 0; j < a.size(); ++j) {
      CHECK(std::fabs(a[j] - b[j]) < 1e-6);
    }
  }
}

TEST_CASE("teacher forcing emits a distribution-shaped trace per target step") {
  auto config = small_config(Variant::kKeyphraseLoss);
  auto params = ModelParameters<double>::init(config, 5);
  std::vector<int> context = {5, 6, 7, 8};
  std::vector<int> target = {9, 10, 11, kEosId};
  std::vector<double> p = {0.0, 0.6, 0.4, 0.0};
  Tape<double> tape;
  auto out = forward_teacher_forced(tape, context, target, p, params, config);
  REQUIRE(out.logits.size() == 4);
  CHECK(out.trace.steps() == 4);
  CHECK(out.trace.src_len() == 4);
  for (int t = 0; t < 4; ++t) {
    CHECK(out.logits[static_cast<std::size_t>(t)].shape() ==
          std::vector<int>{1, config.vocab_size});
    auto row = out.trace.row_values(t);
    double sum = 0.0;
    for (double v : row) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  // q is the column sum of the trace rows.
  auto q = out.trace.q_values();
  REQUIRE(q.size() == 4);
  for (std::size_t j = 0; j < 4; ++j) {
    double manual = 0.0;
    for (int t = 0; t < 4; ++t) manual += out.trace.row_values(t)[j];
    CHECK(q[j] == doctest::Approx(manual).epsilon(1e-12));
  }
  // Coverage before the first step is zero; before step 2 it is row 0.
  auto c0 = out.trace.coverage_values(0);
  for (double v : c0) CHECK(v == 0.0);
  auto c1 = out.trace.coverage_values(1);
  auto r0 = out.trace.row_values(0);
  for (std::size_t j = 0; j < 4; ++j) CHECK(c1[j] == doctest::Approx(r0[j]));
}

TEST_CASE("score vector length mismatches are rejected") {
  auto config = small_config(Variant::kKeyphraseAdd);
  auto params = ModelParameters<double>::init(config, 2);
  Tape<double> tape;
  std::vector<double> p = {0.5, 0.5};  // context has 3 tokens
  CHECK_THROWS_AS(forward_teacher_forced(tape, {5, 6, 7}, {8, kEosId}, p, params, config),
                  std::invalid_argument);
  // ContextConcat cannot run without scores at all.
  auto cc = small_config(Variant::kContextConcat);
  auto cc_params = ModelParameters<double>::init(cc, 2);
  Tape<double> t2;
  CHECK_THROWS_AS(forward_teacher_forced(t2, {5, 6, 7}, {8, kEosId}, {}, cc_params, cc),
                  std::invalid_argument);
}

TEST_CASE("parameter init is seed-deterministic with the documented layout") {
  auto config = small_config();
  auto a = ModelParameters<float>::init(config, 11);
  auto b = ModelParameters<float>::init(config, 11);
  auto c = ModelParameters<float>::init(config, 12);
  auto an = a.named(), bn = b.named(), cn = c.named();
  REQUIRE(an.size() == bn.size());
  CHECK(an.size() == 2 + 9 * 4 + 5);  // embeddings, 4 gru cells, attention + output
  CHECK(an[0].first == "embed.enc");
  CHECK(an[2].first == "enc.0.w_r");
  CHECK(an.back().first == "out.b");
  bool any_diff = false;
  for (std::size_t i = 0; i < an.size(); ++i) {
    CHECK(an[i].first == bn[i].first);
    CHECK(an[i].second.values() == bn[i].second.values());
    if (an[i].second.values() != cn[i].second.values()) any_diff = true;
  }
  CHECK(any_diff);
  // Biases start at zero, weights inside the fan-in bound.
  for (const auto& [name, tensor] : an) {
    bool is_bias = name.find(".b_") != std::string::npos || name == "out.b";
    for (float v : tensor.values()) {
      if (is_bias) {
        CHECK(v == 0.0f);
      } else {
        CHECK(std::fabs(v) <= 1.0f);
      }
    }
  }
}

TEST_CASE("clone detaches storage but keeps values") {
  auto config = small_config();
  auto a = ModelParameters<float>::init(config, 4);
  auto b = a.clone();
  CHECK(b.embed_enc.values() == a.embed_enc.values());
  CHECK(b.embed_enc.id() != a.embed_enc.id());
  b.embed_enc.mutable_values()[0] += 1.0f;
  CHECK(b.embed_enc.values() != a.embed_enc.values());
}

TEST_CASE("variant names round-trip and bad names are rejected") {
  for (Variant v : {Variant::kBaseline, Variant::kKeyphraseAdd, Variant::kContextConcat,
                    Variant::kCoverageLoss, Variant::kKeyphraseLoss}) {
    CHECK(parse_variant(variant_name(v)) == v);
  }
  CHECK_THROWS_AS(parse_variant("attentive"), std::invalid_argument);
}
