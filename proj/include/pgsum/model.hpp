#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pgsum/autodiff.hpp"
#include "pgsum/tensor.hpp"
#include "pgsum/vocabulary.hpp"

namespace pgsum {

/// Probability floor applied before taking logs in the loss.
inline constexpr double kProbabilityFloor = 1e-12;

struct ModelConfig {
  std::size_t hidden_size = 32;
  std::size_t embedding_size = 32;
  std::size_t vocab_size = 0;
  std::size_t max_decode_len = 30;
  std::size_t max_input_len = 400;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LstmWeights {
  Tensor weight;  // (input + hidden) x 4*hidden, gate blocks i, f, g, o
  Tensor bias;    // 1 x 4*hidden

  friend bool operator==(const LstmWeights&, const LstmWeights&) = default;
};

/// Every trainable tensor of the pointer-generator.
struct ModelParams {
  ModelConfig config;

  Tensor embedding;  // vocab x embedding
  LstmWeights encoder_forward;
  LstmWeights encoder_backward;
  // Map the final encoder states (2*hidden) to the decoder's initial state.
  Tensor reduce_hidden_weight, reduce_hidden_bias;
  Tensor reduce_cell_weight, reduce_cell_bias;
  LstmWeights decoder;  // input is [embedding, previous context]
  // Additive attention: v . tanh(H W_enc + s W_dec + b)
  Tensor attn_encoder, attn_decoder, attn_bias, attn_v;
  // Vocabulary distribution from [decoder state, context].
  Tensor out_weight, out_bias;
  // Generation gate from [context, decoder state, decoder input].
  Tensor gen_weight, gen_bias;

  /// Weights uniform in [-0.1, 0.1], biases zero.
  static ModelParams initialize(const ModelConfig& config, std::uint64_t seed);

  /// Calls f(name, tensor) for every parameter in a fixed order.
  template <typename F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  std::vector<Tensor*> tensors();
  bool all_finite() const;
  std::size_t parameter_count() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  template <typename Self, typename F>
  static void visit(Self& p, F& f) {
    f("embedding", p.embedding);
    f("encoder_forward.weight", p.encoder_forward.weight);
    f("encoder_forward.bias", p.encoder_forward.bias);
    f("encoder_backward.weight", p.encoder_backward.weight);
    f("encoder_backward.bias", p.encoder_backward.bias);
    f("reduce_hidden.weight", p.reduce_hidden_weight);
    f("reduce_hidden.bias", p.reduce_hidden_bias);
    f("reduce_cell.weight", p.reduce_cell_weight);
    f("reduce_cell.bias", p.reduce_cell_bias);
    f("decoder.weight", p.decoder.weight);
    f("decoder.bias", p.decoder.bias);
    f("attention.encoder", p.attn_encoder);
    f("attention.decoder", p.attn_decoder);
    f("attention.bias", p.attn_bias);
    f("attention.v", p.attn_v);
    f("output.weight", p.out_weight);
    f("output.bias", p.out_bias);
    f("gate.weight", p.gen_weight);
    f("gate.bias", p.gen_bias);
  }
};

/// Expected (name, shape) list for a configuration, in for_each order.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& config);

// ---------------------------------------------------------------------------

/// Source tokens prepared for one forward pass. Out-of-vocabulary words are
/// fed to the encoder as UNK but stay copyable through extended ids
/// vocab_size + k, where k indexes `oov_words`.
struct SourceText {
  std::vector<std::string> tokens;
  std::vector<TokenId> ids;
  std::vector<std::size_t> extended_ids;
  std::vector<std::string> oov_words;
  std::size_t vocab_size = 0;

  std::size_t extended_size() const { return vocab_size + oov_words.size(); }
  /// Surface form of an extended id.
  std::string word(std::size_t extended_id, const Vocabulary& vocab) const;
};

/// Truncates to `max_len` tokens. Rejects empty input.
SourceText make_source(std::span<const std::string> tokens, const Vocabulary& vocab, std::size_t max_len);

/// A training example: targets end with STOP; decoder inputs start with
/// START and feed UNK for extended ids.
struct EncodedPair {
  SourceText source;
  std::vector<std::size_t> targets;
  std::vector<TokenId> decoder_inputs;
};

/// Reference words outside both the vocabulary and the source become UNK.
/// At most max_decode_len reference words are kept.
EncodedPair encode_pair(std::span<const std::string> source, std::span<const std::string> reference,
                        const Vocabulary& vocab, const ModelConfig& config);

// ---------------------------------------------------------------------------

struct DecoderState {
  Var hidden;
  Var cell;
  Var context;  // attention context from the previous step (zeros initially)
};

struct EncoderStates {
  Var states;    // length x 2*hidden, forward and backward halves
  Var features;  // states projected for attention
  DecoderState initial;
  std::size_t length = 0;
};

/// Distributions produced at one decoder step, as plain values.
struct DecoderStepOutput {
  std::vector<double> p_vocab;    // over the vocabulary
  std::vector<double> attention;  // over source positions
  double p_gen = 0.0;
  std::vector<double> p_final;    // over vocabulary + source OOV words
};

struct StepHooks {
  /// Replaces the gate pre-activation; +/-infinity forces p_gen to 1 or 0.
  std::optional<double> gate_preactivation;
};

/// p_gen * p_vocab(w) + (1 - p_gen) * sum of attention over positions holding w.
std::vector<double> mix_distribution(std::span<const double> p_vocab, std::span<const double> attention,
                                     std::span<const std::size_t> extended_ids, double p_gen,
                                     std::size_t extended_size);

/// Builds the model's computation on a tape. Parameters are watched on
/// construction and must outlive the graph.
class ModelGraph {
 public:
  ModelGraph(const ModelParams& params, Tape& tape);

  EncoderStates encode(std::span<const TokenId> ids);

  struct Step {
    DecoderStepOutput output;
    DecoderState state;
    Var p_vocab;
    Var attention;
    Var p_gen;
  };

  /// One decoder step. `source` must be aligned with `encoder`.
  Step decode_step(std::size_t prev_token, const DecoderState& state, const EncoderStates& encoder,
                   const SourceText& source, const StepHooks& hooks = {});

  /// Token-mean negative log-likelihood of the targets under the mixture.
  Var sequence_loss(const EncodedPair& pair);

  Tape& tape() { return tape_; }
  const ModelParams& params() const { return params_; }

 private:
  struct Watched {
    Var embedding;
    Var enc_fwd_w, enc_fwd_b, enc_bwd_w, enc_bwd_b;
    Var red_h_w, red_h_b, red_c_w, red_c_b;
    Var dec_w, dec_b;
    Var attn_enc, attn_dec, attn_b, attn_v;
    Var out_w, out_b;
    Var gen_w, gen_b;
  };

  std::pair<Var, Var> lstm_cell(Var input, Var hidden, Var cell, Var weight, Var bias);
  Step step_nodes(std::size_t prev_token, const DecoderState& state, const EncoderStates& encoder,
                  const StepHooks& hooks);

  const ModelParams& params_;
  Tape& tape_;
  Watched w_;
  std::size_t hidden_;
};

// ---------------------------------------------------------------------------

EncoderStates encode(ModelGraph& graph, std::span<const TokenId> ids);

double sequence_loss(const EncodedPair& pair, const ModelParams& params);

struct LossGradient {
  double loss = 0.0;
  GradientMap gradients;
};
LossGradient loss_and_gradient(const EncodedPair& pair, const ModelParams& params);

struct DecodeResult {
  std::vector<std::size_t> ids;          // extended ids, STOP excluded
  std::vector<std::string> tokens;       // surface forms of ids
  std::vector<std::size_t> step_tokens;  // emitted id per step, STOP included
  std::vector<DecoderStepOutput> trace;  // one entry per step
  double log_prob = 0.0;
};

/// Argmax of p_final each step (lowest id on ties) until STOP or
/// max_decode_len tokens.
DecodeResult greedy_decode(const SourceText& source, const ModelParams& params, const Vocabulary& vocab);

/// Highest accumulated log-probability among the beam's finished hypotheses
/// and the greedy hypothesis. Width 1 reproduces greedy_decode.
DecodeResult beam_decode(const SourceText& source, const ModelParams& params, const Vocabulary& vocab,
                         std::size_t beam_width);

}  // namespace pgsum
