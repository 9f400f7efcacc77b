#include "pgsum/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "pgsum/beam_search.hpp"
#include "pgsum/random.hpp"

namespace pgsum {

void ModelConfig::validate() const {
  if (hidden_size < 1 || embedding_size < 1 || vocab_size < 1 || max_decode_len < 1 || max_input_len < 1) {
    throw std::invalid_argument("model config: every size must be >= 1");
  }
  if (vocab_size <= Vocabulary::kReserved) {
    throw std::invalid_argument("model config: vocab_size must exceed the reserved entries");
  }
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& c) {
  const std::size_t h = c.hidden_size, e = c.embedding_size, v = c.vocab_size;
  return {
      {"embedding", {v, e}},
      {"encoder_forward.weight", {e + h, 4 * h}},
      {"encoder_forward.bias", {1, 4 * h}},
      {"encoder_backward.weight", {e + h, 4 * h}},
      {"encoder_backward.bias", {1, 4 * h}},
      {"reduce_hidden.weight", {2 * h, h}},
      {"reduce_hidden.bias", {1, h}},
      {"reduce_cell.weight", {2 * h, h}},
      {"reduce_cell.bias", {1, h}},
      {"decoder.weight", {e + 2 * h + h, 4 * h}},
      {"decoder.bias", {1, 4 * h}},
      {"attention.encoder", {2 * h, 2 * h}},
      {"attention.decoder", {h, 2 * h}},
      {"attention.bias", {1, 2 * h}},
      {"attention.v", {2 * h, 1}},
      {"output.weight", {3 * h, v}},
      {"output.bias", {1, v}},
      {"gate.weight", {2 * h + h + e, 1}},
      {"gate.bias", {1, 1}},
  };
}

ModelParams ModelParams::initialize(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.config = config;
  const auto layout = parameter_layout(config);
  std::unordered_map<std::string, Shape> shapes(layout.begin(), layout.end());
  Rng rng(seed);
  p.for_each([&](std::string_view name, Tensor& t) {
    const std::string key(name);
    t = Tensor(shapes.at(key));
    const bool is_bias = key.ends_with("bias");
    if (!is_bias) {
      for (double& x : t.data()) x = rng.uniform(-0.1, 0.1);
    }
  });
  return p;
}

std::vector<Tensor*> ModelParams::tensors() {
  std::vector<Tensor*> out;
  for_each([&](std::string_view, Tensor& t) { out.push_back(&t); });
  return out;
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each([&](std::string_view, const Tensor& t) { ok = ok && t.all_finite(); });
  return ok;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](std::string_view, const Tensor& t) { n += t.size(); });
  return n;
}

// ---------------------------------------------------------------------------

std::string SourceText::word(std::size_t extended_id, const Vocabulary& vocab) const {
  if (extended_id < vocab_size) return vocab.word(extended_id);
  return oov_words.at(extended_id - vocab_size);
}

SourceText make_source(std::span<const std::string> tokens, const Vocabulary& vocab, std::size_t max_len) {
  if (tokens.empty()) throw std::invalid_argument("encode: empty input");
  SourceText src;
  src.vocab_size = vocab.size();
  const std::size_t n = std::min(tokens.size(), max_len);
  src.tokens.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(n));
  for (const std::string& tok : src.tokens) {
    const TokenId id = vocab.id(tok);
    src.ids.push_back(id);
    if (id != Vocabulary::kUnk || tok == Vocabulary::kUnkWord) {
      src.extended_ids.push_back(id);
      continue;
    }
    auto it = std::find(src.oov_words.begin(), src.oov_words.end(), tok);
    if (it == src.oov_words.end()) {
      src.oov_words.push_back(tok);
      it = src.oov_words.end() - 1;
    }
    src.extended_ids.push_back(src.vocab_size + static_cast<std::size_t>(it - src.oov_words.begin()));
  }
  return src;
}

EncodedPair encode_pair(std::span<const std::string> source, std::span<const std::string> reference,
                        const Vocabulary& vocab, const ModelConfig& config) {
  if (reference.empty()) throw std::invalid_argument("sequence_loss: empty reference");
  EncodedPair pair;
  pair.source = make_source(source, vocab, config.max_input_len);
  const std::size_t n = std::min(reference.size(), config.max_decode_len);
  pair.decoder_inputs.push_back(Vocabulary::kStart);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& w = reference[i];
    std::size_t target = vocab.id(w);
    if (target == Vocabulary::kUnk) {
      auto it = std::find(pair.source.oov_words.begin(), pair.source.oov_words.end(), w);
      if (it != pair.source.oov_words.end()) {
        target = pair.source.vocab_size + static_cast<std::size_t>(it - pair.source.oov_words.begin());
      }
    }
    pair.targets.push_back(target);
    pair.decoder_inputs.push_back(target < pair.source.vocab_size ? target : Vocabulary::kUnk);
  }
  pair.targets.push_back(Vocabulary::kStop);
  return pair;
}

// ---------------------------------------------------------------------------

std::vector<double> mix_distribution(std::span<const double> p_vocab, std::span<const double> attention,
                                     std::span<const std::size_t> extended_ids, double p_gen,
                                     std::size_t extended_size) {
  if (attention.size() != extended_ids.size()) {
    throw std::invalid_argument("mix_distribution: attention and source lengths differ");
  }
  if (extended_size < p_vocab.size()) throw std::invalid_argument("mix_distribution: extended size too small");
  std::vector<double> out(extended_size, 0.0);
  for (std::size_t w = 0; w < p_vocab.size(); ++w) out[w] = p_gen * p_vocab[w];
  const double copy = 1.0 - p_gen;
  for (std::size_t i = 0; i < attention.size(); ++i) {
    out.at(extended_ids[i]) += copy * attention[i];
  }
  return out;
}

ModelGraph::ModelGraph(const ModelParams& params, Tape& tape)
    : params_(params), tape_(tape), hidden_(params.config.hidden_size) {
  params.config.validate();
  w_.embedding = tape.parameter(params.embedding);
  w_.enc_fwd_w = tape.parameter(params.encoder_forward.weight);
  w_.enc_fwd_b = tape.parameter(params.encoder_forward.bias);
  w_.enc_bwd_w = tape.parameter(params.encoder_backward.weight);
  w_.enc_bwd_b = tape.parameter(params.encoder_backward.bias);
  w_.red_h_w = tape.parameter(params.reduce_hidden_weight);
  w_.red_h_b = tape.parameter(params.reduce_hidden_bias);
  w_.red_c_w = tape.parameter(params.reduce_cell_weight);
  w_.red_c_b = tape.parameter(params.reduce_cell_bias);
  w_.dec_w = tape.parameter(params.decoder.weight);
  w_.dec_b = tape.parameter(params.decoder.bias);
  w_.attn_enc = tape.parameter(params.attn_encoder);
  w_.attn_dec = tape.parameter(params.attn_decoder);
  w_.attn_b = tape.parameter(params.attn_bias);
  w_.attn_v = tape.parameter(params.attn_v);
  w_.out_w = tape.parameter(params.out_weight);
  w_.out_b = tape.parameter(params.out_bias);
  w_.gen_w = tape.parameter(params.gen_weight);
  w_.gen_b = tape.parameter(params.gen_bias);
}

std::pair<Var, Var> ModelGraph::lstm_cell(Var input, Var hidden, Var cell, Var weight, Var bias) {
  Tape& t = tape_;
  const Var gates = t.add(t.matmul(t.concat({input, hidden}, 1), weight), bias);
  const Var in_gate = t.sigmoid(t.slice(gates, 0, hidden_));
  const Var forget_gate = t.sigmoid(t.slice(gates, hidden_, hidden_));
  const Var candidate = t.tanh(t.slice(gates, 2 * hidden_, hidden_));
  const Var out_gate = t.sigmoid(t.slice(gates, 3 * hidden_, hidden_));
  const Var next_cell = t.add(t.mul(forget_gate, cell), t.mul(in_gate, candidate));
  const Var next_hidden = t.mul(out_gate, t.tanh(next_cell));
  return {next_hidden, next_cell};
}

EncoderStates ModelGraph::encode(std::span<const TokenId> ids) {
  if (ids.empty()) throw std::invalid_argument("encode: empty input");
  if (ids.size() > params_.config.max_input_len) {
    throw std::invalid_argument("encode: input longer than max_input_len");
  }
  Tape& t = tape_;
  const std::size_t n = ids.size();
  std::vector<Var> embedded;
  embedded.reserve(n);
  for (TokenId id : ids) {
    if (id >= params_.config.vocab_size) throw std::invalid_argument("encode: token id outside the vocabulary");
    embedded.push_back(t.embedding(w_.embedding, id));
  }

  const Var zero = t.constant(Tensor({1, hidden_}));
  std::vector<Var> fwd_h(n), bwd_h(n);
  Var h = zero, c = zero;
  for (std::size_t i = 0; i < n; ++i) {
    std::tie(h, c) = lstm_cell(embedded[i], h, c, w_.enc_fwd_w, w_.enc_fwd_b);
    fwd_h[i] = h;
  }
  const Var fwd_last_h = h, fwd_last_c = c;
  h = zero;
  c = zero;
  for (std::size_t i = n; i-- > 0;) {
    std::tie(h, c) = lstm_cell(embedded[i], h, c, w_.enc_bwd_w, w_.enc_bwd_b);
    bwd_h[i] = h;
  }
  const Var bwd_last_h = h, bwd_last_c = c;

  std::vector<Var> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = t.concat({fwd_h[i], bwd_h[i]}, 1);

  EncoderStates enc;
  enc.length = n;
  enc.states = t.concat(rows, 0);
  enc.features = t.matmul(enc.states, w_.attn_enc);
  enc.initial.hidden = t.tanh(t.add(t.matmul(t.concat({fwd_last_h, bwd_last_h}, 1), w_.red_h_w), w_.red_h_b));
  enc.initial.cell = t.tanh(t.add(t.matmul(t.concat({fwd_last_c, bwd_last_c}, 1), w_.red_c_w), w_.red_c_b));
  enc.initial.context = t.constant(Tensor({1, 2 * hidden_}));
  return enc;
}

ModelGraph::Step ModelGraph::step_nodes(std::size_t prev_token, const DecoderState& state,
                                        const EncoderStates& encoder, const StepHooks& hooks) {
  Tape& t = tape_;
  const TokenId input_id = prev_token < params_.config.vocab_size ? prev_token : Vocabulary::kUnk;
  const Var x = t.embedding(w_.embedding, input_id);
  auto [h, c] = lstm_cell(t.concat({x, state.context}, 1), state.hidden, state.cell, w_.dec_w, w_.dec_b);

  const Var query = t.add(t.matmul(h, w_.attn_dec), w_.attn_b);
  const Var energy = t.tanh(t.add(encoder.features, query));
  const Var attention = t.softmax(t.transpose(t.matmul(energy, w_.attn_v)));
  const Var context = t.matmul(attention, encoder.states);

  const Var logits = t.add(t.matmul(t.concat({h, context}, 1), w_.out_w), w_.out_b);
  const Var p_vocab = t.softmax(logits);

  Var gate_pre;
  if (hooks.gate_preactivation) {
    gate_pre = t.constant(Tensor::scalar(*hooks.gate_preactivation));
  } else {
    gate_pre = t.add(t.matmul(t.concat({context, h, x}, 1), w_.gen_w), w_.gen_b);
  }
  const Var p_gen = t.sigmoid(gate_pre);

  Step step;
  step.state = {h, c, context};
  step.p_vocab = p_vocab;
  step.attention = attention;
  step.p_gen = p_gen;
  return step;
}

ModelGraph::Step ModelGraph::decode_step(std::size_t prev_token, const DecoderState& state,
                                         const EncoderStates& encoder, const SourceText& source,
                                         const StepHooks& hooks) {
  if (source.tokens.size() != encoder.length || source.extended_ids.size() != encoder.length) {
    throw std::invalid_argument("decode_step: source has " + std::to_string(source.tokens.size()) +
                                " tokens but encoder states cover " + std::to_string(encoder.length));
  }
  Step step = step_nodes(prev_token, state, encoder, hooks);
  DecoderStepOutput& out = step.output;
  const auto pv = tape_.value(step.p_vocab).data();
  const auto att = tape_.value(step.attention).data();
  out.p_vocab.assign(pv.begin(), pv.end());
  out.attention.assign(att.begin(), att.end());
  out.p_gen = tape_.value(step.p_gen).item();
  out.p_final = mix_distribution(out.p_vocab, out.attention, source.extended_ids, out.p_gen, source.extended_size());
  return step;
}

Var ModelGraph::sequence_loss(const EncodedPair& pair) {
  Tape& t = tape_;
  const SourceText& src = pair.source;
  const EncoderStates enc = encode(src.ids);
  const std::size_t n = enc.length;
  const Var one = t.constant(Tensor::scalar(1.0));
  const Var minus_one = t.constant(Tensor::scalar(-1.0));

  std::vector<Var> log_probs;
  log_probs.reserve(pair.targets.size());
  DecoderState state = enc.initial;
  for (std::size_t step = 0; step < pair.targets.size(); ++step) {
    const Step s = step_nodes(pair.decoder_inputs[step], state, enc, {});
    state = s.state;
    const std::size_t target = pair.targets[step];

    std::optional<Var> generate;
    if (target < src.vocab_size) generate = t.mul(s.p_gen, t.slice(s.p_vocab, target, 1));

    std::optional<Var> copy;
    Tensor indicator({n, 1});
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (src.extended_ids[i] == target) {
        indicator[i] = 1.0;
        any = true;
      }
    }
    if (any) {
      const Var copy_gate = t.add(one, t.mul(minus_one, s.p_gen));
      copy = t.mul(copy_gate, t.matmul(s.attention, t.constant(std::move(indicator))));
    }

    Var prob;
    if (generate && copy) {
      prob = t.add(*generate, *copy);
    } else if (generate) {
      prob = *generate;
    } else if (copy) {
      prob = *copy;
    } else {
      prob = t.constant(Tensor::scalar(0.0));
    }
    log_probs.push_back(t.log(prob, kProbabilityFloor));
  }
  const std::size_t steps = log_probs.size();
  const Var mean_weights = t.constant(Tensor({steps, 1}, -1.0 / static_cast<double>(steps)));
  return t.matmul(t.concat(log_probs, 1), mean_weights);
}

// ---------------------------------------------------------------------------

EncoderStates encode(ModelGraph& graph, std::span<const TokenId> ids) { return graph.encode(ids); }

double sequence_loss(const EncodedPair& pair, const ModelParams& params) {
  Tape tape;
  ModelGraph graph(params, tape);
  return tape.value(graph.sequence_loss(pair)).item();
}

LossGradient loss_and_gradient(const EncodedPair& pair, const ModelParams& params) {
  Tape tape;
  ModelGraph graph(params, tape);
  const Var loss = graph.sequence_loss(pair);
  return {tape.value(loss).item(), gradient(tape, loss)};
}

namespace {

std::size_t argmax_lowest(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

void finish_tokens(DecodeResult& result, const SourceText& source, const Vocabulary& vocab) {
  result.ids.clear();
  result.tokens.clear();
  for (std::size_t id : result.step_tokens) {
    if (id == Vocabulary::kStop) break;
    result.ids.push_back(id);
    result.tokens.push_back(source.word(id, vocab));
  }
}

double safe_log(double p) { return std::log(std::max(p, std::numeric_limits<double>::min())); }

}  // namespace

DecodeResult greedy_decode(const SourceText& source, const ModelParams& params, const Vocabulary& vocab) {
  Tape tape;
  ModelGraph graph(params, tape);
  const EncoderStates enc = graph.encode(source.ids);
  DecodeResult result;
  DecoderState state = enc.initial;
  std::size_t prev = Vocabulary::kStart;
  for (std::size_t step = 0; step < params.config.max_decode_len; ++step) {
    ModelGraph::Step s = graph.decode_step(prev, state, enc, source);
    const std::size_t token = argmax_lowest(s.output.p_final);
    result.log_prob += safe_log(s.output.p_final[token]);
    result.step_tokens.push_back(token);
    result.trace.push_back(std::move(s.output));
    state = s.state;
    prev = token;
    if (token == Vocabulary::kStop) break;
  }
  finish_tokens(result, source, vocab);
  return result;
}

DecodeResult beam_decode(const SourceText& source, const ModelParams& params, const Vocabulary& vocab,
                         std::size_t beam_width) {
  if (beam_width == 0) throw std::invalid_argument("beam_decode: beam width must be >= 1");
  Tape tape;
  ModelGraph graph(params, tape);
  const EncoderStates enc = graph.encode(source.ids);

  struct State {
    DecoderState decoder;
    std::size_t prev = Vocabulary::kStart;
    std::vector<DecoderStepOutput> trace;
  };
  auto expand = [&](const State& st) {
    ModelGraph::Step s = graph.decode_step(st.prev, st.decoder, enc, source);
    std::vector<double> log_probs(s.output.p_final.size());
    std::transform(s.output.p_final.begin(), s.output.p_final.end(), log_probs.begin(), safe_log);
    return std::make_pair(std::move(log_probs), std::move(s));
  };
  auto advance = [](const State& st, const ModelGraph::Step& s, std::size_t token) {
    State next{s.state, token, st.trace};
    next.trace.push_back(s.output);
    return next;
  };

  BeamOptions options{beam_width, params.config.max_decode_len, Vocabulary::kStop};
  Hypothesis<State> best = beam_search(State{enc.initial, Vocabulary::kStart, {}}, options, expand, advance);

  DecodeResult result;
  result.step_tokens = std::move(best.tokens);
  result.trace = std::move(best.state.trace);
  result.log_prob = best.score;
  finish_tokens(result, source, vocab);

  DecodeResult greedy = greedy_decode(source, params, vocab);
  if (greedy.log_prob > result.log_prob) return greedy;
  return result;
}

}  // namespace pgsum
