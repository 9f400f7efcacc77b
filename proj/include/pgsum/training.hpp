#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pgsum/checkpoint.hpp"
#include "pgsum/corpus.hpp"
#include "pgsum/model.hpp"
#include "pgsum/vocabulary.hpp"

namespace pgsum {

struct Example {
  Tokens source;
  Tokens reference;
};

std::vector<Example> examples_from(std::span<const Document> docs);
std::vector<Example> examples_from(std::span<const ExtractPair> pairs);

struct Dataset {
  std::string name;
  std::vector<Example> train;
  std::vector<Example> valid;
};

enum class RegimeKind { PretrainExtracts, InDomain, OutOfDomain, MixDomain };

std::string_view to_string(RegimeKind kind);
std::optional<RegimeKind> parse_regime(std::string_view s);

/// InDomain trains on `target`, OutOfDomain and PretrainExtracts on `source`,
/// MixDomain on `source` and then on `target`.
struct Regime {
  RegimeKind kind = RegimeKind::InDomain;
  const Dataset* source = nullptr;
  const Dataset* target = nullptr;
  std::optional<ModelParams> init;

  void validate() const;
};

struct Hyperparams {
  double learning_rate = 0.5;
  std::size_t batch_size = 8;
  std::size_t eval_every = 25;
  std::size_t patience = 5;
  std::size_t max_steps = 1000;
  std::uint64_t seed = 1;
  double clip_norm = 2.0;
  std::size_t smoothing_window = 3;
  /// Fixed step count for PretrainExtracts and pretrain_then_finetune phase 1.
  std::size_t pretrain_steps = 200;
  /// When set, MixDomain phase 1 runs exactly this many steps instead of
  /// stopping early.
  std::optional<std::size_t> mix_phase1_steps;

  void validate() const;
};

struct HistoryRow {
  std::uint64_t step = 0;
  std::string phase;
  double train_loss = 0.0;  // mean over the steps since the previous row
  std::optional<double> valid_loss;
};

struct TrainResult {
  TrainState state;                  // params at the best validation loss
  std::vector<TrainState> phases;    // result of each phase, in order
  std::vector<std::string> phase_names;
  std::vector<HistoryRow> history;
};

/// Raised when a loss or parameter becomes non-finite. Carries the
/// parameters from before the failing update.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, TrainState last_good)
      : std::runtime_error(what), last_good_(std::move(last_good)) {}
  const TrainState& last_good() const { return last_good_; }

 private:
  TrainState last_good_;
};

/// Plain SGD on mean per-example gradients, clipped to a global norm.
/// Each phase shuffles with `hp.seed` once per epoch, evaluates every
/// `eval_every` steps, and stops once the window-averaged validation loss
/// has failed to improve on its best for more than `patience` evaluations.
/// Phases return their best-validation parameters; the next phase starts
/// from them unchanged.
TrainResult train(const Regime& regime, const ModelConfig& config, const Hyperparams& hp, const Vocabulary& vocab);

struct PretrainResult {
  TrainState pretrained;
  TrainResult finetuned;
};

/// Phase 1: hp.pretrain_steps steps on the extract pairs, no early stopping.
/// Phase 2: early-stopped training on the annotated set from those params.
PretrainResult pretrain_then_finetune(const Dataset& extracts, const Dataset& annotated, const ModelConfig& config,
                                      const Hyperparams& hp, const Vocabulary& vocab);

/// Mean sequence loss over a set of examples (0 for an empty set).
double mean_loss(std::span<const EncodedPair> pairs, const ModelParams& params);

std::vector<EncodedPair> encode_examples(std::span<const Example> examples, const Vocabulary& vocab,
                                         const ModelConfig& config);

/// step,phase,train_loss,valid_loss with an empty valid_loss when none was
/// computed.
void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> rows);

}  // namespace pgsum
