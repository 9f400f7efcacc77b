#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "pgsum/checkpoint.hpp"
#include "pgsum/errors.hpp"
#include "pgsum/metrics.hpp"
#include "pgsum/training.hpp"
#include "test_util.hpp"

using namespace pgsum;
using pgsum::testing::scratch_dir;

namespace {

struct Fixture {
  std::vector<Document> docs = generate_synthetic_corpus(6, 17);
  Vocabulary vocab = build_vocab(docs, 400);
  ModelConfig config = [this] {
    ModelConfig c;
    c.hidden_size = 8;
    c.embedding_size = 8;
    c.vocab_size = vocab.size();
    c.max_decode_len = 30;
    return c;
  }();

  Dataset dataset(std::string name, std::size_t first, std::size_t n_train, std::size_t n_valid) const {
    Dataset d{std::move(name), {}, {}};
    std::span<const Document> all(docs);
    d.train = examples_from(all.subspan(first, n_train));
    d.valid = examples_from(all.subspan(first + n_train, n_valid));
    return d;
  }
};

Hyperparams small_hp() {
  Hyperparams hp;
  hp.learning_rate = 1.0;
  hp.batch_size = 2;
  hp.eval_every = 5;
  hp.patience = 2;
  hp.max_steps = 60;
  hp.seed = 3;
  return hp;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

// Index of the evaluation at which the early-stopping rule halts, recomputed
// from the logged validation losses; the last index when it never triggers.
std::size_t expected_stop(const std::vector<double>& valid, std::size_t window, std::size_t patience) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t bad = 0;
  for (std::size_t i = 0; i < valid.size(); ++i) {
    const std::size_t lo = i + 1 >= window ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = lo; j <= i; ++j) sum += valid[j];
    const double smoothed = sum / static_cast<double>(i + 1 - lo);
    if (smoothed < best) {
      best = smoothed;
      bad = 0;
    } else if (++bad > patience) {
      return i;
    }
  }
  return valid.size() - 1;
}

std::vector<double> phase_valid_losses(const TrainResult& r, const std::string& phase) {
  std::vector<double> out;
  for (const HistoryRow& row : r.history) {
    if (row.phase == phase && row.valid_loss) out.push_back(*row.valid_loss);
  }
  return out;
}

}  // namespace

TEST(Train, OverfitsSinglePair) {
  // A one-pair corpus: the vocabulary comes from that pair alone.
  const auto docs = generate_synthetic_corpus(6, 17);
  for (std::size_t which : {0, 7}) {
    const std::vector<Document> pair{docs[which]};
    const Vocabulary vocab = build_vocab(pair, 1000);
    ModelConfig c;
    c.hidden_size = c.embedding_size = 16;
    c.vocab_size = vocab.size();
    const Dataset one{"one", examples_from(pair), examples_from(pair)};
    Hyperparams hp;
    hp.learning_rate = 5.0;
    hp.batch_size = 1;
    hp.eval_every = 10;
    hp.patience = 50;
    hp.max_steps = 200;
    hp.seed = 1;
    const auto pairs = encode_examples(one.train, vocab, c);
    const double initial = mean_loss(pairs, ModelParams::initialize(c, hp.seed));
    const TrainResult r = train({RegimeKind::InDomain, nullptr, &one, std::nullopt}, c, hp, vocab);
    EXPECT_LE(r.state.step, 200u);
    EXPECT_LE(mean_loss(pairs, r.state.params), 0.1 * initial);
    const DecodeResult out = greedy_decode(make_source(pair[0].text_tokens, vocab, c.max_input_len), r.state.params, vocab);
    EXPECT_EQ(out.tokens, pair[0].abstract_tokens);
    EXPECT_EQ(bleu_2(out.tokens, pair[0].abstract_tokens), 1.0);
  }
}

TEST(Train, PatienceRuleMatchesRecount) {
  Fixture f;
  const Dataset d = f.dataset("d", 0, 2, 2);
  for (std::size_t patience : {0, 1, 3}) {
    Hyperparams hp = small_hp();
    hp.patience = patience;
    hp.learning_rate = 2.0;
    hp.max_steps = 200;
    const TrainResult r = train({RegimeKind::InDomain, nullptr, &d, std::nullopt}, f.config, hp, f.vocab);
    const auto valid = phase_valid_losses(r, "in-domain");
    ASSERT_FALSE(valid.empty());
    EXPECT_EQ(valid.size() - 1, expected_stop(valid, hp.smoothing_window, patience)) << "patience " << patience;
    if (patience == 0) EXPECT_LT(r.history.back().step, hp.max_steps);
  }
}

TEST(Train, ReturnsBestNotLast) {
  Fixture f;
  const Dataset d = f.dataset("d", 0, 2, 2);
  Hyperparams hp = small_hp();
  hp.learning_rate = 2.0;
  hp.max_steps = 200;
  const TrainResult r = train({RegimeKind::InDomain, nullptr, &d, std::nullopt}, f.config, hp, f.vocab);
  const auto valid = phase_valid_losses(r, "in-domain");
  const double best = *std::min_element(valid.begin(), valid.end());
  EXPECT_EQ(r.state.best_valid_loss, best);
  const auto pairs = encode_examples(d.valid, f.vocab, f.config);
  EXPECT_EQ(mean_loss(pairs, r.state.params), best);
  for (double v : valid) EXPECT_LE(r.state.best_valid_loss, v);
  EXPECT_EQ(r.state.step, r.history.back().step);
}

TEST(Train, DeterministicUnderSeed) {
  Fixture f;
  const Dataset d = f.dataset("d", 0, 3, 2);
  const Hyperparams hp = small_hp();
  const TrainResult a = train({RegimeKind::InDomain, nullptr, &d, std::nullopt}, f.config, hp, f.vocab);
  const TrainResult b = train({RegimeKind::InDomain, nullptr, &d, std::nullopt}, f.config, hp, f.vocab);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].step, b.history[i].step);
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].valid_loss, b.history[i].valid_loss);
  }
  EXPECT_EQ(a.state, b.state);
  Hyperparams other = hp;
  other.seed = 4;
  EXPECT_NE(train({RegimeKind::InDomain, nullptr, &d, std::nullopt}, f.config, other, f.vocab).state.params, a.state.params);
}

TEST(Train, MixWithSameSetsIsInDomainTwice) {
  Fixture f;
  const Dataset s = f.dataset("s", 0, 3, 2);
  const Hyperparams hp = small_hp();
  const TrainResult mix = train({RegimeKind::MixDomain, &s, &s, std::nullopt}, f.config, hp, f.vocab);
  const TrainResult first = train({RegimeKind::InDomain, nullptr, &s, std::nullopt}, f.config, hp, f.vocab);
  const TrainResult second = train({RegimeKind::InDomain, nullptr, &s, first.state.params}, f.config, hp, f.vocab);
  ASSERT_EQ(mix.phases.size(), 2u);
  EXPECT_EQ(mix.phase_names, (std::vector<std::string>{"mix-source", "mix-target"}));
  EXPECT_EQ(mix.phases[0].params, first.state.params);
  EXPECT_EQ(mix.state.params, second.state.params);
  EXPECT_EQ(mix.state.best_valid_loss, second.state.best_valid_loss);
}

TEST(Train, MixPhaseBoundaryKeepsParams) {
  Fixture f;
  const Dataset s = f.dataset("news", 0, 3, 2);
  const Dataset t = f.dataset("opinion", 6, 3, 2);
  const Hyperparams hp = small_hp();
  const TrainResult mix = train({RegimeKind::MixDomain, &s, &t, std::nullopt}, f.config, hp, f.vocab);
  const TrainResult out = train({RegimeKind::OutOfDomain, &s, nullptr, std::nullopt}, f.config, hp, f.vocab);
  const TrainResult in = train({RegimeKind::InDomain, nullptr, &t, out.state.params}, f.config, hp, f.vocab);
  EXPECT_EQ(mix.phases[0].params, out.state.params);
  EXPECT_EQ(mix.state.params, in.state.params);
  // The step counter continues across the boundary.
  EXPECT_GT(mix.phases[1].step, mix.phases[0].step);
  for (std::size_t i = 1; i < mix.history.size(); ++i) EXPECT_GT(mix.history[i].step, mix.history[i - 1].step);
}

TEST(Train, FixedMixPhaseOne) {
  Fixture f;
  const Dataset s = f.dataset("s", 0, 3, 2), t = f.dataset("t", 6, 3, 2);
  Hyperparams hp = small_hp();
  hp.mix_phase1_steps = 7;
  const TrainResult mix = train({RegimeKind::MixDomain, &s, &t, std::nullopt}, f.config, hp, f.vocab);
  EXPECT_EQ(mix.phases[0].step, 7u);
}

TEST(Train, RejectsBadSetups) {
  Fixture f;
  const Dataset d = f.dataset("d", 0, 2, 1);
  const Dataset empty{"empty", {}, d.valid};
  const Dataset no_valid{"no-valid", d.train, {}};
  const Hyperparams hp = small_hp();
  EXPECT_THROW(train({RegimeKind::InDomain, nullptr, &empty, std::nullopt}, f.config, hp, f.vocab), std::invalid_argument);
  EXPECT_THROW(train({RegimeKind::InDomain, nullptr, &no_valid, std::nullopt}, f.config, hp, f.vocab),
               std::invalid_argument);
  EXPECT_THROW(train({RegimeKind::MixDomain, &d, nullptr, std::nullopt}, f.config, hp, f.vocab), std::invalid_argument);
  EXPECT_THROW(train({RegimeKind::MixDomain, nullptr, &d, std::nullopt}, f.config, hp, f.vocab), std::invalid_argument);
  EXPECT_THROW(train({RegimeKind::OutOfDomain, nullptr, &d, std::nullopt}, f.config, hp, f.vocab), std::invalid_argument);
  Hyperparams bad = hp;
  bad.batch_size = 0;
  EXPECT_THROW(train({RegimeKind::InDomain, nullptr, &d, std::nullopt}, f.config, bad, f.vocab), std::invalid_argument);
  ModelConfig wrong = f.config;
  wrong.vocab_size += 1;
  EXPECT_THROW(train({RegimeKind::InDomain, nullptr, &d, std::nullopt}, wrong, hp, f.vocab), std::invalid_argument);
}

TEST(Train, DivergenceKeepsLastGoodState) {
  Fixture f;
  const Dataset d = f.dataset("d", 0, 2, 1);
  {
    ModelParams init = ModelParams::initialize(f.config, 1);
    init.out_bias[5] = std::numeric_limits<double>::quiet_NaN();
    try {
      train({RegimeKind::InDomain, nullptr, &d, init}, f.config, small_hp(), f.vocab);
      FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
      EXPECT_EQ(e.last_good().step, 0u);
      EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
    }
  }
  {
    // Fixed-step phases return their last state, so rerunning up to the step
    // before the failure must reproduce last_good exactly.
    const Dataset extracts{"x", d.train, {}};
    Hyperparams hp = small_hp();
    hp.learning_rate = 1e308;
    hp.clip_norm = 1e10;
    hp.pretrain_steps = 50;
    std::uint64_t failed_at = 0;
    TrainState last_good;
    try {
      train({RegimeKind::PretrainExtracts, &extracts, nullptr, std::nullopt}, f.config, hp, f.vocab);
      FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
      const std::string msg = e.what();
      failed_at = std::stoull(msg.substr(msg.rfind("step ") + 5));
      last_good = e.last_good();
    }
    ASSERT_GE(failed_at, 1u);
    EXPECT_TRUE(last_good.params.all_finite());
    EXPECT_EQ(last_good.step, failed_at - 1);
    if (failed_at > 1) {
      hp.pretrain_steps = failed_at - 1;
      const TrainResult replay = train({RegimeKind::PretrainExtracts, &extracts, nullptr, std::nullopt}, f.config, hp, f.vocab);
      EXPECT_EQ(replay.state.params, last_good.params);
    } else {
      EXPECT_EQ(last_good.params, ModelParams::initialize(f.config, hp.seed));
    }
  }
}

TEST(Pretrain, ZeroBudgetEqualsPlainTraining) {
  Fixture f;
  const Dataset extracts{"extracts", f.dataset("e", 0, 2, 0).train, {}};
  const Dataset annotated = f.dataset("a", 6, 3, 2);
  Hyperparams hp = small_hp();
  hp.pretrain_steps = 0;
  const PretrainResult p = pretrain_then_finetune(extracts, annotated, f.config, hp, f.vocab);
  const TrainResult plain = train({RegimeKind::InDomain, nullptr, &annotated, std::nullopt}, f.config, hp, f.vocab);
  EXPECT_EQ(p.finetuned.state, plain.state);
  EXPECT_EQ(p.pretrained.params, ModelParams::initialize(f.config, hp.seed));
}

TEST(Pretrain, PhaseOneRunsFixedBudgetAndDecodes) {
  Fixture f;
  const auto leads = generate_synthetic_extracts(20, 2);
  const Dataset extracts{"extracts", examples_from(build_extract_pairs(leads).pairs), {}};
  const Dataset annotated = f.dataset("a", 6, 3, 2);
  Hyperparams hp = small_hp();
  hp.pretrain_steps = 30;
  const PretrainResult p = pretrain_then_finetune(extracts, annotated, f.config, hp, f.vocab);
  EXPECT_EQ(p.pretrained.step, 30u);
  EXPECT_GE(p.finetuned.state.step, 30u);
  EXPECT_EQ(p.finetuned.history.front().phase, "pretrain");
  EXPECT_EQ(p.finetuned.phase_names, (std::vector<std::string>{"finetune"}));
  const SourceText src = make_source(annotated.valid[0].source, f.vocab, f.config.max_input_len);
  EXPECT_FALSE(greedy_decode(src, p.pretrained.params, f.vocab).tokens.empty());
  // The regime form runs the same fixed phase.
  const TrainResult regime = train({RegimeKind::PretrainExtracts, &extracts, nullptr, std::nullopt}, f.config, hp, f.vocab);
  EXPECT_EQ(regime.state.params, p.pretrained.params);
}

TEST(History, CsvFormat) {
  const std::vector<HistoryRow> rows{{5, "in-domain", 2.5, 3.25}, {6, "pretrain", 1.0, std::nullopt}};
  const auto dir = scratch_dir("history");
  write_history_csv(dir / "h.csv", rows);
  EXPECT_EQ(read_file(dir / "h.csv"), "step,phase,train_loss,valid_loss\n5,in-domain,2.5,3.25\n6,pretrain,1,\n");
}

// --- checkpoints ----------------------------------------------------------------

namespace {

TrainState sample_state(const Fixture& f) {
  TrainState s{ModelParams::initialize(f.config, 5), 123, 0.875, 7};
  s.params.embedding[3] = -0.0;
  s.params.out_bias[1] = 1e-300;
  return s;
}

}  // namespace

TEST(Checkpoint, RoundTripIsByteIdentical) {
  Fixture f;
  const TrainState s = sample_state(f);
  const std::string bytes = encode_checkpoint(s);
  const TrainState back = decode_checkpoint(bytes);
  EXPECT_EQ(back, s);
  EXPECT_TRUE(std::signbit(back.params.embedding[3]));
  EXPECT_EQ(encode_checkpoint(back), bytes);

  const auto dir = scratch_dir("ckpt");
  save_checkpoint(s, dir / "a.ckpt");
  save_checkpoint(load_checkpoint(dir / "a.ckpt"), dir / "b.ckpt");
  EXPECT_EQ(read_file(dir / "a.ckpt"), read_file(dir / "b.ckpt"));
  EXPECT_EQ(read_file(dir / "a.ckpt"), bytes);
  EXPECT_FALSE(std::filesystem::exists(dir / "a.ckpt.tmp"));
  TrainState inf_best = s;
  inf_best.best_valid_loss = std::numeric_limits<double>::infinity();
  EXPECT_EQ(decode_checkpoint(encode_checkpoint(inf_best)), inf_best);
}

TEST(Checkpoint, DecodeInvariant) {
  Fixture f;
  Dataset d = f.dataset("d", 0, 3, 2);
  const TrainResult r = train({RegimeKind::InDomain, nullptr, &d, std::nullopt}, f.config, small_hp(), f.vocab);
  const auto dir = scratch_dir("ckpt-decode");
  save_checkpoint(r.state, dir / "m.ckpt");
  const TrainState back = load_checkpoint(dir / "m.ckpt");
  for (std::size_t i = 0; i < 5; ++i) {
    const SourceText src = make_source(f.docs[i].text_tokens, f.vocab, f.config.max_input_len);
    const DecodeResult a = greedy_decode(src, r.state.params, f.vocab);
    const DecodeResult b = greedy_decode(src, back.params, f.vocab);
    EXPECT_EQ(a.step_tokens, b.step_tokens);
    EXPECT_EQ(a.log_prob, b.log_prob);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t t = 0; t < a.trace.size(); ++t) EXPECT_EQ(a.trace[t].p_final, b.trace[t].p_final);
  }
}

TEST(Checkpoint, CorruptionIsRejected) {
  Fixture f;
  const std::string good = encode_checkpoint(sample_state(f));
  auto expect_error = [](const std::string& bytes, const std::string& fragment) {
    try {
      decode_checkpoint(bytes);
      ADD_FAILURE() << "accepted a bad checkpoint (" << fragment << ")";
    } catch (const DataError& e) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  };
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  expect_error(bad_magic, "magic");

  std::string bad_version = good;
  const std::uint32_t v2 = 2;
  std::memcpy(bad_version.data() + 8, &v2, sizeof(v2));
  expect_error(bad_version, "version 2");

  expect_error(good.substr(0, good.size() / 2), "truncated");
  expect_error(good.substr(0, 4), "truncated");
  expect_error(good + "x", "trailing");

  std::string flipped = good;
  flipped[good.size() / 2] ^= 0x01;
  expect_error(flipped, "checksum");

  std::string trailer = good;
  trailer[good.size() - 1] = '?';
  expect_error(trailer, "trailer");

  EXPECT_THROW(load_checkpoint("/nonexistent/x.ckpt"), DataError);
  const auto dir = scratch_dir("ckpt-corrupt");
  write_file(dir / "bad.ckpt", flipped);
  try {
    load_checkpoint(dir / "bad.ckpt");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.ckpt"), std::string::npos);
  }
}

TEST(Checkpoint, EveryTruncationIsRejected) {
  Fixture f;
  ModelConfig tiny = f.config;
  tiny.hidden_size = tiny.embedding_size = 1;
  const std::string good = encode_checkpoint(TrainState{ModelParams::initialize(tiny, 1), 1, 2.0, 0});
  for (std::size_t n = 0; n < good.size(); n += 7) EXPECT_THROW(decode_checkpoint(good.substr(0, n)), DataError) << n;
}
