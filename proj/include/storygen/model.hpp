#pragma once

// Encoder-decoder with additive attention and the keyphrase-conditioning
// variants. Multi-layer unidirectional GRUs on both sides; the decoder input
// at each step is the previous token's embedding concatenated with the
// attention context. Attention at step t uses the decoder state left by step
// t-1, which breaks the input-feeding cycle.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "storygen/rng.hpp"
#include "storygen/special_tokens.hpp"
#include "storygen/tape.hpp"
#include "storygen/tensor.hpp"

namespace storygen {

enum class Variant {
  kBaseline,
  kKeyphraseAdd,
  kContextConcat,
  kCoverageLoss,
  kKeyphraseLoss,
};

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kKeyphraseAdd: return "keyphrase_add";
    case Variant::kContextConcat: return "context_concat";
    case Variant::kCoverageLoss: return "coverage";
    case Variant::kKeyphraseLoss: return "keyphrase_loss";
  }
  return "?";
}

inline Variant parse_variant(const std::string& name) {
  if (name == "baseline") return Variant::kBaseline;
  if (name == "keyphrase_add") return Variant::kKeyphraseAdd;
  if (name == "context_concat") return Variant::kContextConcat;
  if (name == "coverage") return Variant::kCoverageLoss;
  if (name == "keyphrase_loss") return Variant::kKeyphraseLoss;
  throw std::invalid_argument(
      "unknown variant '" + name +
      "' (expected baseline, keyphrase_add, context_concat, coverage, keyphrase_loss)");
}

struct ModelConfig {
  Variant variant = Variant::kBaseline;
  int embedding_dim = 32;
  int hidden_dim = 64;
  int num_layers = 2;
  int vocab_size = 0;
  bool use_itf = false;

  // Width of the context fed to the decoder: ContextConcat prepends the
  // keyphrase context to the attention context.
  int context_width() const {
    return variant == Variant::kContextConcat ? 2 * hidden_dim : hidden_dim;
  }

  void validate() const {
    if (embedding_dim < 1 || hidden_dim < 1 || num_layers < 1 || vocab_size < 1) {
      throw std::invalid_argument("model config requires positive dimensions and vocab size");
    }
  }
};

template <typename T>
struct GruCell {
  Tensor<T> w_r, w_z, w_n;  // input weights [in x hidden]
  Tensor<T> u_r, u_z, u_n;  // recurrent weights [hidden x hidden]
  Tensor<T> b_r, b_z, b_n;  // biases [1 x hidden]
};

template <typename T>
struct ModelParameters {
  Tensor<T> embed_enc, embed_dec;         // [vocab x embedding]
  std::vector<GruCell<T>> encoder;        // layer 0 input = embedding
  std::vector<GruCell<T>> decoder;        // layer 0 input = embedding + context
  Tensor<T> attn_enc, attn_dec;           // [hidden x hidden]
  Tensor<T> attn_v;                       // [hidden x 1]
  Tensor<T> out_w;                        // [hidden x vocab]
  Tensor<T> out_b;                        // [1 x vocab]

  static ModelParameters init(const ModelConfig& config, std::uint64_t seed);

  // Stable name -> tensor listing; the order fixes optimizer-state and
  // checkpoint layout.
  std::vector<std::pair<std::string, Tensor<T>>> named() const;

  ModelParameters clone() const;
};

namespace detail {

template <typename T>
Tensor<T> uniform_init(Rng& rng, std::vector<int> shape, int fan_in) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<T> values(shape_numel(shape));
  for (auto& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>::make(std::move(shape), std::move(values), /*requires_grad=*/true);
}

template <typename T>
GruCell<T> init_gru_cell(Rng& rng, int in_dim, int hidden) {
  GruCell<T> cell;
  cell.w_r = uniform_init<T>(rng, {in_dim, hidden}, in_dim);
  cell.w_z = uniform_init<T>(rng, {in_dim, hidden}, in_dim);
  cell.w_n = uniform_init<T>(rng, {in_dim, hidden}, in_dim);
  cell.u_r = uniform_init<T>(rng, {hidden, hidden}, hidden);
  cell.u_z = uniform_init<T>(rng, {hidden, hidden}, hidden);
  cell.u_n = uniform_init<T>(rng, {hidden, hidden}, hidden);
  cell.b_r = Tensor<T>::zeros({1, hidden}, /*requires_grad=*/true);
  cell.b_z = Tensor<T>::zeros({1, hidden}, /*requires_grad=*/true);
  cell.b_n = Tensor<T>::zeros({1, hidden}, /*requires_grad=*/true);
  return cell;
}

template <typename T>
void collect_cell(std::vector<std::pair<std::string, Tensor<T>>>& out, const std::string& prefix,
                  const GruCell<T>& cell) {
  out.emplace_back(prefix + ".w_r", cell.w_r);
  out.emplace_back(prefix + ".w_z", cell.w_z);
  out.emplace_back(prefix + ".w_n", cell.w_n);
  out.emplace_back(prefix + ".u_r", cell.u_r);
  out.emplace_back(prefix + ".u_z", cell.u_z);
  out.emplace_back(prefix + ".u_n", cell.u_n);
  out.emplace_back(prefix + ".b_r", cell.b_r);
  out.emplace_back(prefix + ".b_z", cell.b_z);
  out.emplace_back(prefix + ".b_n", cell.b_n);
}

}  // namespace detail

template <typename T>
ModelParameters<T> ModelParameters<T>::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, 0x504152414dull));
  int v = config.vocab_size, e = config.embedding_dim, h = config.hidden_dim;
  ModelParameters<T> p;
  // Embedding rows feed the network as width-e vectors, so e is their fan-in.
  p.embed_enc = detail::uniform_init<T>(rng, {v, e}, e);
  p.embed_dec = detail::uniform_init<T>(rng, {v, e}, e);
  for (int l = 0; l < config.num_layers; ++l) {
    p.encoder.push_back(detail::init_gru_cell<T>(rng, l == 0 ? e : h, h));
  }
  for (int l = 0; l < config.num_layers; ++l) {
    int in = l == 0 ? e + config.context_width() : h;
    p.decoder.push_back(detail::init_gru_cell<T>(rng, in, h));
  }
  p.attn_enc = detail::uniform_init<T>(rng, {h, h}, h);
  p.attn_dec = detail::uniform_init<T>(rng, {h, h}, h);
  p.attn_v = detail::uniform_init<T>(rng, {h, 1}, h);
  p.out_w = detail::uniform_init<T>(rng, {h, v}, h);
  p.out_b = Tensor<T>::zeros({1, v}, /*requires_grad=*/true);
  return p;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> ModelParameters<T>::named() const {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  out.emplace_back("embed.enc", embed_enc);
  out.emplace_back("embed.dec", embed_dec);
  for (std::size_t l = 0; l < encoder.size(); ++l) {
    detail::collect_cell(out, "enc." + std::to_string(l), encoder[l]);
  }
  for (std::size_t l = 0; l < decoder.size(); ++l) {
    detail::collect_cell(out, "dec." + std::to_string(l), decoder[l]);
  }
  out.emplace_back("attn.enc", attn_enc);
  out.emplace_back("attn.dec", attn_dec);
  out.emplace_back("attn.v", attn_v);
  out.emplace_back("out.w", out_w);
  out.emplace_back("out.b", out_b);
  return out;
}

template <typename T>
ModelParameters<T> ModelParameters<T>::clone() const {
  auto copy_tensor = [](const Tensor<T>& t) {
    return Tensor<T>::make(t.shape(), t.values(), t.requires_grad());
  };
  auto copy_cell = [&](const GruCell<T>& c) {
    GruCell<T> out;
    out.w_r = copy_tensor(c.w_r);
    out.w_z = copy_tensor(c.w_z);
    out.w_n = copy_tensor(c.w_n);
    out.u_r = copy_tensor(c.u_r);
    out.u_z = copy_tensor(c.u_z);
    out.u_n = copy_tensor(c.u_n);
    out.b_r = copy_tensor(c.b_r);
    out.b_z = copy_tensor(c.b_z);
    out.b_n = copy_tensor(c.b_n);
    return out;
  };
  ModelParameters<T> out;
  out.embed_enc = copy_tensor(embed_enc);
  out.embed_dec = copy_tensor(embed_dec);
  for (const auto& c : encoder) out.encoder.push_back(copy_cell(c));
  for (const auto& c : decoder) out.decoder.push_back(copy_cell(c));
  out.attn_enc = copy_tensor(attn_enc);
  out.attn_dec = copy_tensor(attn_dec);
  out.attn_v = copy_tensor(attn_v);
  out.out_w = copy_tensor(out_w);
  out.out_b = copy_tensor(out_b);
  return out;
}

// r = sigmoid(x W_r + h U_r + b_r), z likewise,
// n = tanh(x W_n + r * (h U_n) + b_n), h' = n + z * (h - n)
template <typename T>
Tensor<T> gru_cell_step(Tape<T>& tape, const GruCell<T>& cell, const Tensor<T>& x,
                        const Tensor<T>& h) {
  Tensor<T> r = tape.sigmoid(tape.add(tape.add(tape.matmul(x, cell.w_r), tape.matmul(h, cell.u_r)),
                                      cell.b_r));
  Tensor<T> z = tape.sigmoid(tape.add(tape.add(tape.matmul(x, cell.w_z), tape.matmul(h, cell.u_z)),
                                      cell.b_z));
  Tensor<T> n = tape.tanh(tape.add(
      tape.add(tape.matmul(x, cell.w_n), tape.mul(r, tape.matmul(h, cell.u_n))), cell.b_n));
  return tape.add(n, tape.mul(z, tape.sub(h, n)));
}

template <typename T>
struct EncoderOutput {
  std::vector<Tensor<T>> state_rows;  // top-layer state per position, [1 x hidden]
  Tensor<T> states;                   // [T_src x hidden]
  Tensor<T> attn_proj;                // states * attn_enc, reused at every decoder step
  std::vector<Tensor<T>> finals;      // per-layer final state, decoder initialization
};

template <typename T>
EncoderOutput<T> encode(Tape<T>& tape, const std::vector<int>& context_ids,
                        const ModelParameters<T>& params, const ModelConfig& config) {
  if (context_ids.empty()) throw std::invalid_argument("encode: empty context");
  int h = config.hidden_dim;
  EncoderOutput<T> out;
  std::vector<Tensor<T>> state(params.encoder.size());
  for (auto& s : state) s = Tensor<T>::zeros({1, h});
  for (int id : context_ids) {
    Tensor<T> x = tape.embed_row(params.embed_enc, id);
    for (std::size_t l = 0; l < params.encoder.size(); ++l) {
      state[l] = gru_cell_step(tape, params.encoder[l], x, state[l]);
      x = state[l];
    }
    out.state_rows.push_back(state.back());
  }
  out.states = tape.concat(out.state_rows, /*axis=*/0);
  out.attn_proj = tape.matmul(out.states, params.attn_enc);
  out.finals = state;
  return out;
}

template <typename T>
struct AttentionResult {
  Tensor<T> scores;   // e, [1 x T_src]
  Tensor<T> weights;  // a = softmax(e), [1 x T_src]
  Tensor<T> context;  // c = a * h_enc, [1 x hidden]
};

template <typename T>
AttentionResult<T> attend(Tape<T>& tape, const Tensor<T>& h_dec, const EncoderOutput<T>& enc,
                          const ModelParameters<T>& params) {
  Tensor<T> dec_proj = tape.matmul(h_dec, params.attn_dec);
  Tensor<T> u = tape.tanh(tape.add_rows(enc.attn_proj, dec_proj));
  Tensor<T> e = tape.transpose(tape.matmul(u, params.attn_v));
  Tensor<T> a = tape.softmax_rows(e);
  Tensor<T> c = tape.matmul(a, enc.states);
  return {e, a, c};
}

// Converts a keyphrase score vector to a [1 x len] constant tensor.
template <typename T>
Tensor<T> score_vector_tensor(const std::vector<double>& p) {
  std::vector<T> values(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) values[i] = static_cast<T>(p[i]);
  return Tensor<T>::from_values({1, static_cast<int>(p.size())}, std::move(values));
}

// KeyphraseAdd reshapes the attention distribution: a' = (a + p) / L1(a + p).
// Every other variant leaves the weights untouched.
template <typename T>
Tensor<T> condition_attention(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& p,
                              Variant variant) {
  if (variant != Variant::kKeyphraseAdd) return a;
  if (!p.defined()) {
    throw std::invalid_argument("condition_attention: keyphrase scores required for keyphrase_add");
  }
  if (p.shape() != a.shape()) {
    throw std::invalid_argument("condition_attention: weights " + shape_str(a.shape()) +
                                " vs scores " + shape_str(p.shape()));
  }
  for (T v : p.values()) {
    if (v < T(0)) throw std::invalid_argument("condition_attention: negative keyphrase score");
  }
  Tensor<T> shifted = tape.add(a, p);
  // Entries are nonnegative, so the sum is the L1 norm (and is >= 1).
  return tape.div_by_scalar(shifted, tape.sum(shifted));
}

// k = sum_i p_i h_enc_i; static across decoder steps.
template <typename T>
Tensor<T> keyphrase_context(Tape<T>& tape, const Tensor<T>& p, const EncoderOutput<T>& enc) {
  return tape.matmul(p, enc.states);
}

template <typename T>
struct DecodeStep {
  Tensor<T> logits;               // [1 x vocab]
  std::vector<Tensor<T>> states;  // updated per-layer decoder states
  Tensor<T> attention;            // the attention row actually used for the context
};

template <typename T>
DecodeStep<T> decode_step_logits(Tape<T>& tape, int prev_token_id,
                                 const std::vector<Tensor<T>>& dec_states,
                                 const EncoderOutput<T>& enc, const Tensor<T>& p,
                                 const ModelParameters<T>& params, const ModelConfig& config) {
  AttentionResult<T> att = attend(tape, dec_states.back(), enc, params);
  Tensor<T> a = condition_attention(tape, att.weights, p, config.variant);
  Tensor<T> c = config.variant == Variant::kKeyphraseAdd ? tape.matmul(a, enc.states) : att.context;
  if (config.variant == Variant::kContextConcat) {
    if (!p.defined()) {
      throw std::invalid_argument("decode_step: keyphrase scores required for context_concat");
    }
    c = tape.concat(keyphrase_context(tape, p, enc), c, /*axis=*/1);
  }
  Tensor<T> x = tape.concat(tape.embed_row(params.embed_dec, prev_token_id), c, /*axis=*/1);
  DecodeStep<T> step;
  for (std::size_t l = 0; l < params.decoder.size(); ++l) {
    step.states.push_back(gru_cell_step(tape, params.decoder[l], x, dec_states[l]));
    x = step.states[l];
  }
  step.logits = tape.add(tape.matmul(step.states.back(), params.out_w), params.out_b);
  step.attention = a;
  return step;
}

// Same step but returning the vocabulary distribution instead of raw logits.
template <typename T>
DecodeStep<T> decode_step(Tape<T>& tape, int prev_token_id,
                          const std::vector<Tensor<T>>& dec_states, const EncoderOutput<T>& enc,
                          const Tensor<T>& p, const ModelParameters<T>& params,
                          const ModelConfig& config) {
  DecodeStep<T> step = decode_step_logits(tape, prev_token_id, dec_states, enc, p, params, config);
  step.logits = tape.softmax_rows(step.logits);
  return step;
}

template <typename T>
struct AttentionTrace {
  std::vector<Tensor<T>> rows;  // one [1 x T_src] row per decoder step

  int steps() const { return static_cast<int>(rows.size()); }
  int src_len() const { return rows.empty() ? 0 : rows.front().dim(1); }

  std::vector<double> row_values(int t) const {
    const auto& v = rows[static_cast<std::size_t>(t)].values();
    return std::vector<double>(v.begin(), v.end());
  }

  // Coverage before step t: elementwise sum of rows 0..t-1.
  std::vector<double> coverage_values(int t) const {
    std::vector<double> s(static_cast<std::size_t>(src_len()), 0.0);
    for (int i = 0; i < t; ++i) {
      const auto& v = rows[static_cast<std::size_t>(i)].values();
      for (std::size_t j = 0; j < v.size(); ++j) s[j] += static_cast<double>(v[j]);
    }
    return s;
  }

  std::vector<double> q_values() const { return coverage_values(steps()); }
};

template <typename T>
struct ForwardResult {
  std::vector<Tensor<T>> logits;  // one [1 x vocab] row per target position
  AttentionTrace<T> trace;
};

// Teacher-forced pass over the full target (which ends with EOS). The trace
// row for step t is the attention actually used at t (KeyphraseAdd records
// the adjusted distribution).
template <typename T>
ForwardResult<T> forward_teacher_forced(Tape<T>& tape, const std::vector<int>& context_ids,
                                        const std::vector<int>& target_ids,
                                        const std::vector<double>& p,
                                        const ModelParameters<T>& params,
                                        const ModelConfig& config) {
  if (target_ids.empty()) throw std::invalid_argument("forward_teacher_forced: empty target");
  EncoderOutput<T> enc = encode(tape, context_ids, params, config);
  Tensor<T> p_tensor;
  if (!p.empty()) {
    if (p.size() != context_ids.size()) {
      throw std::invalid_argument("forward_teacher_forced: score vector length " +
                                  std::to_string(p.size()) + " vs context length " +
                                  std::to_string(context_ids.size()));
    }
    p_tensor = score_vector_tensor<T>(p);
  }
  ForwardResult<T> out;
  std::vector<Tensor<T>> states = enc.finals;
  int prev = kSosId;
  for (int target : target_ids) {
    DecodeStep<T> step = decode_step_logits(tape, prev, states, enc, p_tensor, params, config);
    out.logits.push_back(step.logits);
    out.trace.rows.push_back(step.attention);
    states = std::move(step.states);
    prev = target;
  }
  return out;
}

}  // namespace storygen
