#include "pgsum/training.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "pgsum/errors.hpp"
#include "pgsum/random.hpp"

namespace pgsum {

std::vector<Example> examples_from(std::span<const Document> docs) {
  std::vector<Example> out;
  out.reserve(docs.size());
  for (const Document& d : docs) out.push_back({d.text_tokens, d.abstract_tokens});
  return out;
}

std::vector<Example> examples_from(std::span<const ExtractPair> pairs) {
  std::vector<Example> out;
  out.reserve(pairs.size());
  for (const ExtractPair& p : pairs) out.push_back({p.lead_tokens, p.description_tokens});
  return out;
}

std::string_view to_string(RegimeKind kind) {
  switch (kind) {
    case RegimeKind::PretrainExtracts:
      return "pretrain-extracts";
    case RegimeKind::InDomain:
      return "in-domain";
    case RegimeKind::OutOfDomain:
      return "out-of-domain";
    case RegimeKind::MixDomain:
      return "mix-domain";
  }
  return "in-domain";
}

std::optional<RegimeKind> parse_regime(std::string_view s) {
  for (RegimeKind k : {RegimeKind::PretrainExtracts, RegimeKind::InDomain, RegimeKind::OutOfDomain,
                       RegimeKind::MixDomain}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

void Regime::validate() const {
  const bool needs_source = kind != RegimeKind::InDomain;
  const bool needs_target = kind == RegimeKind::InDomain || kind == RegimeKind::MixDomain;
  if (needs_source && source == nullptr) {
    throw std::invalid_argument(std::string(to_string(kind)) + " training needs a source dataset");
  }
  if (needs_target && target == nullptr) {
    throw std::invalid_argument(std::string(to_string(kind)) + " training needs a target dataset");
  }
}

void Hyperparams::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning_rate must be > 0");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (eval_every == 0) throw std::invalid_argument("eval_every must be >= 1");
  if (max_steps == 0) throw std::invalid_argument("max_steps must be >= 1");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be > 0");
  if (smoothing_window == 0) throw std::invalid_argument("smoothing_window must be >= 1");
}

double mean_loss(std::span<const EncodedPair> pairs, const ModelParams& params) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const EncodedPair& p : pairs) total += sequence_loss(p, params);
  return total / static_cast<double>(pairs.size());
}

std::vector<EncodedPair> encode_examples(std::span<const Example> examples, const Vocabulary& vocab,
                                         const ModelConfig& config) {
  std::vector<EncodedPair> out;
  out.reserve(examples.size());
  for (const Example& e : examples) out.push_back(encode_pair(e.source, e.reference, vocab, config));
  return out;
}

namespace {

struct Phase {
  std::string name;
  std::vector<EncodedPair> train;
  std::vector<EncodedPair> valid;
  std::optional<std::size_t> fixed_steps;  // no early stopping when set
};

Phase make_phase(std::string name, const Dataset& data, const Vocabulary& vocab, const ModelConfig& config,
                 std::optional<std::size_t> fixed_steps) {
  if (data.train.empty()) throw std::invalid_argument("dataset '" + data.name + "' has no training examples");
  if (!fixed_steps && data.valid.empty()) {
    throw std::invalid_argument("dataset '" + data.name + "' has no validation examples for early stopping");
  }
  return {std::move(name), encode_examples(data.train, vocab, config), encode_examples(data.valid, vocab, config),
          fixed_steps};
}

double global_norm(const std::vector<Tensor>& grads) {
  double sq = 0.0;
  for (const Tensor& g : grads) {
    for (double x : g.data()) sq += x * x;
  }
  return std::sqrt(sq);
}

/// Cycles through the examples in a fresh seeded order every epoch.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : rng_(seed), order_(n) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    rng_.shuffle(std::span<std::size_t>(order_));
  }
  std::vector<std::size_t> next(std::size_t batch_size) {
    std::vector<std::size_t> batch;
    for (std::size_t i = 0; i < batch_size; ++i) {
      if (cursor_ == order_.size()) {
        rng_.shuffle(std::span<std::size_t>(order_));
        cursor_ = 0;
      }
      batch.push_back(order_[cursor_++]);
    }
    return batch;
  }

 private:
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

TrainState run_phase(const ModelParams& start, std::uint64_t start_step, const Phase& phase, const Hyperparams& hp,
                     std::vector<HistoryRow>& history) {
  TrainState current{start, start_step, std::numeric_limits<double>::infinity(), 0};
  const std::size_t steps = phase.fixed_steps ? *phase.fixed_steps : hp.max_steps;
  if (steps == 0) return current;

  TrainState best = current;
  BatchSampler sampler(phase.train.size(), hp.seed);
  const std::size_t batch_size = std::min(hp.batch_size, phase.train.size());
  std::vector<double> valid_losses;
  double best_smoothed = std::numeric_limits<double>::infinity();
  std::size_t bad_evals = 0;
  double interval_loss = 0.0;
  std::size_t interval_steps = 0;

  for (std::size_t s = 1; s <= steps; ++s) {
    std::vector<Tensor*> tensors = current.params.tensors();
    std::vector<Tensor> grads;
    grads.reserve(tensors.size());
    for (Tensor* t : tensors) grads.emplace_back(t->shape());

    double batch_loss = 0.0;
    for (std::size_t idx : sampler.next(batch_size)) {
      LossGradient lg = loss_and_gradient(phase.train[idx], current.params);
      batch_loss += lg.loss;
      for (std::size_t k = 0; k < tensors.size(); ++k) {
        const Tensor& g = lg.gradients.at(tensors[k]);
        for (std::size_t i = 0; i < g.size(); ++i) grads[k][i] += g[i];
      }
    }
    const double inv = 1.0 / static_cast<double>(batch_size);
    batch_loss *= inv;
    for (Tensor& g : grads) {
      for (double& x : g.data()) x *= inv;
    }
    const double norm = global_norm(grads);
    if (!std::isfinite(batch_loss) || !std::isfinite(norm)) {
      throw DivergenceError(phase.name + ": non-finite loss or gradient at step " + std::to_string(current.step + 1),
                            current);
    }
    const double scale = norm > hp.clip_norm ? hp.clip_norm / norm : 1.0;

    TrainState before = current;
    for (std::size_t k = 0; k < tensors.size(); ++k) {
      Tensor& p = *tensors[k];
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= hp.learning_rate * scale * grads[k][i];
    }
    if (!current.params.all_finite()) {
      throw DivergenceError(phase.name + ": parameters became non-finite at step " + std::to_string(current.step + 1),
                            before);
    }
    ++current.step;
    interval_loss += batch_loss;
    ++interval_steps;

    if (s % hp.eval_every != 0 && s != steps) continue;

    HistoryRow row{current.step, phase.name, interval_loss / static_cast<double>(interval_steps), std::nullopt};
    interval_loss = 0.0;
    interval_steps = 0;
    if (phase.valid.empty()) {
      history.push_back(row);
      continue;
    }
    const double valid = mean_loss(phase.valid, current.params);
    if (!std::isfinite(valid)) {
      throw DivergenceError(phase.name + ": non-finite validation loss at step " + std::to_string(current.step), best);
    }
    row.valid_loss = valid;
    history.push_back(row);
    if (phase.fixed_steps) continue;

    ++current.steps_since_best;
    if (valid < current.best_valid_loss) {
      current.best_valid_loss = valid;
      current.steps_since_best = 0;
      best = current;
    }
    valid_losses.push_back(valid);
    const std::size_t w = std::min(hp.smoothing_window, valid_losses.size());
    const double smoothed =
        std::accumulate(valid_losses.end() - static_cast<std::ptrdiff_t>(w), valid_losses.end(), 0.0) /
        static_cast<double>(w);
    if (smoothed < best_smoothed) {
      best_smoothed = smoothed;
      bad_evals = 0;
    } else if (++bad_evals > hp.patience) {
      break;
    }
  }
  if (phase.fixed_steps) return current;
  best.steps_since_best = current.step - best.step;
  best.step = current.step;
  return best;
}

TrainResult run_phases(ModelParams params, std::uint64_t start_step, const std::vector<Phase>& phases,
                       const Hyperparams& hp) {
  TrainResult result;
  result.state.params = std::move(params);
  result.state.step = start_step;
  for (const Phase& phase : phases) {
    result.state = run_phase(result.state.params, result.state.step, phase, hp, result.history);
    result.phases.push_back(result.state);
    result.phase_names.push_back(phase.name);
  }
  return result;
}

ModelParams starting_params(const std::optional<ModelParams>& init, const ModelConfig& config, const Hyperparams& hp,
                            const Vocabulary& vocab) {
  config.validate();
  if (config.vocab_size != vocab.size()) {
    throw std::invalid_argument("model vocab_size " + std::to_string(config.vocab_size) +
                                " does not match the vocabulary (" + std::to_string(vocab.size()) + " entries)");
  }
  if (!init) return ModelParams::initialize(config, hp.seed);
  if (init->config != config) throw std::invalid_argument("initial checkpoint was trained with a different config");
  return *init;
}

}  // namespace

TrainResult train(const Regime& regime, const ModelConfig& config, const Hyperparams& hp, const Vocabulary& vocab) {
  regime.validate();
  hp.validate();
  ModelParams params = starting_params(regime.init, config, hp, vocab);
  std::vector<Phase> phases;
  switch (regime.kind) {
    case RegimeKind::PretrainExtracts:
      phases.push_back(make_phase("pretrain", *regime.source, vocab, config, hp.pretrain_steps));
      break;
    case RegimeKind::InDomain:
      phases.push_back(make_phase("in-domain", *regime.target, vocab, config, std::nullopt));
      break;
    case RegimeKind::OutOfDomain:
      phases.push_back(make_phase("out-of-domain", *regime.source, vocab, config, std::nullopt));
      break;
    case RegimeKind::MixDomain:
      phases.push_back(make_phase("mix-source", *regime.source, vocab, config, hp.mix_phase1_steps));
      phases.push_back(make_phase("mix-target", *regime.target, vocab, config, std::nullopt));
      break;
  }
  return run_phases(std::move(params), 0, phases, hp);
}

PretrainResult pretrain_then_finetune(const Dataset& extracts, const Dataset& annotated, const ModelConfig& config,
                                      const Hyperparams& hp, const Vocabulary& vocab) {
  hp.validate();
  ModelParams params = starting_params(std::nullopt, config, hp, vocab);
  std::vector<HistoryRow> pre_history;
  PretrainResult result;
  if (hp.pretrain_steps > 0) {
    const Phase pre = make_phase("pretrain", extracts, vocab, config, hp.pretrain_steps);
    result.pretrained = run_phase(params, 0, pre, hp, pre_history);
  } else {
    result.pretrained.params = std::move(params);
  }
  const Phase fine = make_phase("finetune", annotated, vocab, config, std::nullopt);
  result.finetuned = run_phases(result.pretrained.params, result.pretrained.step, {fine}, hp);
  result.finetuned.history.insert(result.finetuned.history.begin(), pre_history.begin(), pre_history.end());
  return result;
}

void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "step,phase,train_loss,valid_loss\n";
  for (const HistoryRow& r : rows) {
    out << r.step << ',' << r.phase << ',' << r.train_loss << ',';
    if (r.valid_loss) out << *r.valid_loss;
    out << '\n';
  }
}

}  // namespace pgsum
