#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pgsum/checkpoint.hpp"
#include "pgsum/commands.hpp"
#include "pgsum/config.hpp"
#include "pgsum/corpus.hpp"
#include "pgsum/errors.hpp"
#include "pgsum/metrics.hpp"
#include "test_util.hpp"

#ifndef PGSUM_CLI_PATH
#error "PGSUM_CLI_PATH must point at the pgsum executable"
#endif

using namespace pgsum;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string quote(const std::string& s) { return "'" + s + "'"; }

// Runs the CLI with stdout and stderr captured in `log`; returns the exit code.
int run_cli(const std::vector<std::string>& args, const fs::path& log) {
  std::string cmd = quote(PGSUM_CLI_PATH);
  for (const std::string& a : args) cmd += " " + quote(a);
  cmd += " > " + quote(log.string()) + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

std::set<std::string> listing(const fs::path& dir) {
  std::set<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) out.insert(fs::relative(e.path(), dir).string());
  return out;
}

// Every file of `a` except the manifest (which records its own out_dir)
// must exist in `b` with the same bytes.
void expect_same_outputs(const fs::path& a, const fs::path& b) {
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) names.insert(e.path().filename().string());
  std::set<std::string> other;
  for (const auto& e : fs::directory_iterator(b)) other.insert(e.path().filename().string());
  EXPECT_EQ(names, other);
  for (const std::string& n : names) {
    if (n == "manifest.json") continue;
    EXPECT_EQ(slurp(a / n), slurp(b / n)) << n;
  }
  json ma = json::parse(slurp(a / "manifest.json")), mb = json::parse(slurp(b / "manifest.json"));
  ma["config"].erase("out_dir");
  mb["config"].erase("out_dir");
  EXPECT_EQ(ma, mb);
}

struct Prepared {
  fs::path root, corpus, data;
};

Prepared synth_and_prepare(const std::string& name, std::size_t per_domain) {
  Prepared p;
  p.root = pgsum::testing::scratch_dir(name);
  const fs::path log = p.root / "log.txt";
  EXPECT_EQ(run_cli({"synth", "--per-domain", std::to_string(per_domain), "--out-dir", (p.root / "synth").string(),
                     "--seed", "4"},
                    log),
            0)
      << slurp(log);
  p.corpus = p.root / "synth" / "corpus.jsonl";
  p.data = p.root / "data";
  EXPECT_EQ(run_cli({"prepare", "--corpus", p.corpus.string(), "--out-dir", p.data.string(), "--seed", "4"}, log), 0)
      << slurp(log);
  return p;
}

}  // namespace

// --- config ---------------------------------------------------------------------

TEST(Config, ParsesCommentsAndBlankLines) {
  const RunConfig c = parse_config("# run\n\nhidden_size = 12\n  seed=9  \nregime = mix-domain\n");
  EXPECT_EQ(c.model.hidden_size, 12u);
  EXPECT_EQ(c.seed(), 9u);
  EXPECT_EQ(c.regime, RegimeKind::MixDomain);
  EXPECT_EQ(c.vocab_max_size, RunConfig{}.vocab_max_size);
}

TEST(Config, RejectsBadLines) {
  EXPECT_THROW(parse_config("hidden_size 12\n"), UsageError);
  EXPECT_THROW(parse_config("no_such_key = 1\n"), UsageError);
  EXPECT_THROW(parse_config("hidden_size = twelve\n"), UsageError);
  EXPECT_THROW(parse_config("regime = sideways\n"), UsageError);
  try {
    parse_config("seed = 1\nbogus = 2\n", "run.cfg");
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos) << e.what();
  }
}

TEST(Config, TextRoundTrip) {
  RunConfig c;
  c.model.hidden_size = 7;
  c.hp.learning_rate = 0.125;
  c.target_domain = Domain::News;
  c.decode_strategy = "beam";
  EXPECT_EQ(config_map(parse_config(to_config_text(c))), config_map(c));
}

TEST(Cli, FlagsOverrideFileOverrideDefaults) {
  const fs::path root = pgsum::testing::scratch_dir("cli-precedence");
  const fs::path cfg = root / "run.cfg";
  std::ofstream(cfg) << "seed = 4\nhidden_size = 6\nout_dir = " << (root / "from-file").string() << "\n";
  const fs::path log = root / "log.txt";
  ASSERT_EQ(run_cli({"--config", cfg.string(), "synth", "--per-domain", "2", "--seed", "9"}, log), 0) << slurp(log);
  ASSERT_TRUE(fs::exists(root / "from-file" / "manifest.json"));
  const json m = json::parse(slurp(root / "from-file" / "manifest.json"));
  EXPECT_EQ(m["config"]["seed"], "9");
  EXPECT_EQ(m["config"]["hidden_size"], "6");
  EXPECT_EQ(m["config"]["vocab_max_size"], std::to_string(RunConfig{}.vocab_max_size));
  EXPECT_EQ(m["seed"], 9);

  std::ostringstream expected;
  for (const Document& d : generate_synthetic_corpus(2, 9)) expected << serialize(d) << '\n';
  EXPECT_EQ(slurp(root / "from-file" / "corpus.jsonl"), expected.str());
}

// --- exit codes -----------------------------------------------------------------

TEST(Cli, ExitCodes) {
  const fs::path root = pgsum::testing::scratch_dir("cli-exit");
  const fs::path log = root / "log.txt";
  EXPECT_EQ(run_cli({"synth", "--per-domain", "1", "--out-dir", (root / "ok").string()}, log), 0) << slurp(log);
  EXPECT_EQ(run_cli({"no-such-command"}, log), 1);
  EXPECT_EQ(run_cli({"synth", "--no-such-flag"}, log), 1);
  EXPECT_EQ(run_cli({"synth", "--hidden-size", "lots"}, log), 1);
  std::ofstream(root / "bad.cfg") << "bogus = 1\n";
  EXPECT_EQ(run_cli({"--config", (root / "bad.cfg").string(), "synth"}, log), 1);
  EXPECT_EQ(run_cli({"prepare", "--corpus", (root / "missing.jsonl").string(), "--out-dir", (root / "p").string()}, log),
            2);
  std::ofstream(root / "junk.ckpt") << "not a checkpoint";
  EXPECT_EQ(run_cli({"decode", "--checkpoint", (root / "junk.ckpt").string(), "--data-dir", (root / "ok").string(),
                     (root / "ok" / "corpus.jsonl").string()},
                    log),
            2);
}

TEST(Cli, DivergenceExitsThreeAndKeepsLastGood) {
  const Prepared p = synth_and_prepare("cli-diverge", 10);
  const Vocabulary vocab = Vocabulary::load(p.data / "vocab.txt");
  ModelConfig mc;
  mc.hidden_size = mc.embedding_size = 4;
  mc.vocab_size = vocab.size();
  TrainState init{ModelParams::initialize(mc, 1)};
  init.params.out_bias[3] = std::numeric_limits<double>::quiet_NaN();
  save_checkpoint(init, p.root / "nan.ckpt");

  const fs::path log = p.root / "log.txt";
  const fs::path out = p.root / "train";
  EXPECT_EQ(run_cli({"train", "--data-dir", p.data.string(), "--init-checkpoint", (p.root / "nan.ckpt").string(),
                     "--hidden-size", "4", "--embedding-size", "4", "--target-domain", "news", "--out-dir",
                     out.string()},
                    log),
            3)
      << slurp(log);
  EXPECT_NE(slurp(log).find("diverged"), std::string::npos);
  ASSERT_TRUE(fs::exists(out / "last_good.ckpt"));
  EXPECT_EQ(load_checkpoint(out / "last_good.ckpt").step, 0u);
  EXPECT_FALSE(fs::exists(out / "model.ckpt"));
}

// --- prepare --------------------------------------------------------------------

TEST(Cli, PrepareSplitsSumToFilteredCount) {
  const Prepared p = synth_and_prepare("cli-prepare", 20);
  const auto kept = filter_pairs(ingest(p.corpus).documents);
  const std::size_t total = line_count(p.data / "train.jsonl") + line_count(p.data / "valid.jsonl") +
                            line_count(p.data / "test.jsonl");
  EXPECT_EQ(total, kept.size());
  EXPECT_EQ(kept.size(), 40u);
  std::size_t per_domain = 0;
  for (const char* split : {"train", "valid", "test"}) {
    for (const char* d : {"news", "opinion"}) per_domain += line_count(p.data / (std::string(split) + "." + d + ".jsonl"));
  }
  EXPECT_EQ(per_domain, total);
  EXPECT_TRUE(fs::exists(p.data / "vocab.txt"));
  EXPECT_TRUE(fs::exists(p.data / "manifest.json"));
}

TEST(Cli, PrepareRerunIsByteIdentical) {
  const Prepared p = synth_and_prepare("cli-prepare-rerun", 20);
  const fs::path log = p.root / "log.txt";
  const fs::path again = p.root / "again";
  ASSERT_EQ(run_cli({"prepare", "--corpus", p.corpus.string(), "--out-dir", again.string(), "--seed", "4"}, log), 0);
  expect_same_outputs(p.data, again);

  // The manifest alone is enough to repeat the run.
  const fs::path replay = p.root / "replay";
  ASSERT_EQ(run_cli({"rerun", (p.data / "manifest.json").string(), "--into", replay.string()}, log), 0) << slurp(log);
  expect_same_outputs(p.data, replay);
  const fs::path synth_replay = p.root / "synth-replay";
  ASSERT_EQ(run_cli({"rerun", (p.root / "synth" / "manifest.json").string(), "--into", synth_replay.string()}, log), 0);
  expect_same_outputs(p.root / "synth", synth_replay);
}

TEST(Cli, MissingInputLeavesNoOutput) {
  const fs::path root = pgsum::testing::scratch_dir("cli-missing");
  const fs::path out = root / "out";
  EXPECT_NE(run_cli({"prepare", "--corpus", (root / "absent.jsonl").string(), "--out-dir", out.string()}, root / "log"),
            0);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_NE(slurp(root / "log").find("absent.jsonl"), std::string::npos);
}

TEST(Cli, WritesOnlyInsideOutDir) {
  const Prepared p = synth_and_prepare("cli-confined", 10);
  const auto before = listing(p.root);
  const fs::path log = p.root / "log.txt";
  ASSERT_EQ(run_cli({"train", "--data-dir", p.data.string(), "--hidden-size", "4", "--embedding-size", "4",
                     "--max-steps", "10", "--eval-every", "5", "--target-domain", "news", "--out-dir",
                     (p.root / "model").string()},
                    log),
            0)
      << slurp(log);
  auto after = listing(p.root);
  for (const std::string& f : before) after.erase(f);
  for (const std::string& f : after) EXPECT_EQ(f.rfind("model", 0), 0u) << f;
  EXPECT_TRUE(after.contains("model/model.ckpt"));
  EXPECT_TRUE(after.contains("model/history.csv"));
  EXPECT_TRUE(after.contains("model/manifest.json"));
}

// --- baseline -------------------------------------------------------------------

TEST(Cli, BaselineFirstSentenceThreeDocs) {
  const fs::path root = pgsum::testing::scratch_dir("cli-baseline");
  const auto docs = generate_synthetic_corpus(2, 5);
  const std::vector<Document> three(docs.begin(), docs.begin() + 3);
  write_corpus(root / "three.jsonl", three);
  const fs::path log = root / "log.txt";
  ASSERT_EQ(run_cli({"baseline", "first-sentence", (root / "three.jsonl").string(), "--out-dir", (root / "b").string()},
                    log),
            0)
      << slurp(log);
  std::ifstream in(root / "b" / "outputs.txt");
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(lines[i], join_tokens(first_sentence(three[i].text_tokens)));

  const fs::path replay = root / "replay";
  ASSERT_EQ(run_cli({"rerun", (root / "b" / "manifest.json").string(), "--into", replay.string()}, log), 0);
  expect_same_outputs(root / "b", replay);
}

// --- analyze --------------------------------------------------------------------

TEST(Cli, AnalyzeAttentionMatchesHandCount) {
  const fs::path root = pgsum::testing::scratch_dir("cli-attention");
  Document d;
  d.id = "d1";
  d.domain = Domain::Opinion;
  d.text_tokens = {"smith", "praised", "acme", "films"};
  d.abstract_tokens = {"smith", "films"};
  const TokenAnnotation smith{"NNP", EntityType::Person, Subjectivity::None};
  const TokenAnnotation films{"NNS", EntityType::None, Subjectivity::None};
  d.annotations = Annotations{{smith,
                               {"VBD", EntityType::None, Subjectivity::StrongPositive},
                               {"NNP", EntityType::Organization, Subjectivity::None},
                               films},
                              {smith, films}};
  write_corpus(root / "corpus.jsonl", std::vector<Document>{d});
  // Peaks: smith, praised, acme, then a tie between smith and films.
  TraceRecord t{"d1", d.text_tokens, {"a", "b", "c", "d"},
                {{0.7, 0.1, 0.1, 0.1}, {0.1, 0.6, 0.2, 0.1}, {0.2, 0.1, 0.6, 0.1}, {0.4, 0.1, 0.1, 0.4}}, {}};
  write_traces(root / "traces.jsonl", {t});

  const fs::path log = root / "log.txt";
  ASSERT_EQ(run_cli({"analyze", "attention", (root / "corpus.jsonl").string(), "--traces",
                     (root / "traces.jsonl").string(), "--out-dir", (root / "a").string()},
                    log),
            0)
      << slurp(log);
  const json r = json::parse(slurp(root / "a" / "attention.json"));
  EXPECT_EQ(r["PERSON"], 50.0);
  EXPECT_EQ(r["ORGANIZATION"], 25.0);
  EXPECT_EQ(r["LOCATION"], 0.0);
  EXPECT_EQ(r["all_entities"], 75.0);
  EXPECT_EQ(r["noun"], 75.0);
  EXPECT_EQ(r["verb"], 25.0);
  EXPECT_EQ(r["positive"], 25.0);
  EXPECT_EQ(r["negative"], 0.0);
  EXPECT_EQ(r["summary_worthy_rate"], 0.5);
  EXPECT_EQ(r["output_tokens"], 4);

  const fs::path replay = root / "replay";
  ASSERT_EQ(run_cli({"rerun", (root / "a" / "manifest.json").string(), "--into", replay.string()}, log), 0);
  expect_same_outputs(root / "a", replay);
}

// --- overfit pipeline -----------------------------------------------------------

TEST(Cli, OverfitModelDecodesToBleuOne) {
  const fs::path root = pgsum::testing::scratch_dir("cli-overfit");
  const Document doc = generate_synthetic_corpus(6, 17)[0];
  const std::vector<Document> pair{doc};
  const fs::path data = root / "data";
  fs::create_directories(data);
  write_corpus(data / "train.jsonl", pair);
  write_corpus(data / "valid.jsonl", pair);
  build_vocab(pair, 1000).save(data / "vocab.txt");

  const fs::path log = root / "log.txt";
  const std::string domain(to_string(doc.domain));
  ASSERT_EQ(run_cli({"train", "--data-dir", data.string(), "--target-domain", domain, "--hidden-size", "16",
                     "--embedding-size", "16", "--learning-rate", "5", "--batch-size", "1", "--eval-every", "10",
                     "--patience", "50", "--max-steps", "200", "--seed", "1", "--out-dir", (root / "model").string()},
                    log),
            0)
      << slurp(log);
  ASSERT_EQ(run_cli({"decode", (data / "train.jsonl").string(), "--data-dir", data.string(), "--checkpoint",
                     (root / "model" / "model.ckpt").string(), "--out-dir", (root / "dec").string()},
                    log),
            0)
      << slurp(log);
  ASSERT_EQ(run_cli({"evaluate", (root / "dec" / "outputs.jsonl").string(), (data / "train.jsonl").string(),
                     "--per-pair", "--out-dir", (root / "eval").string()},
                    log),
            0)
      << slurp(log);
  const json scores = json::parse(slurp(root / "eval" / "scores.json"));
  EXPECT_EQ(scores["bleu"], 1.0);
  EXPECT_EQ(scores["rouge2"], 1.0);
  EXPECT_EQ(scores["rougeL"], 1.0);

  for (const char* step : {"model", "dec", "eval"}) {
    const fs::path replay = root / (std::string(step) + "-replay");
    ASSERT_EQ(run_cli({"rerun", (root / step / "manifest.json").string(), "--into", replay.string()}, log), 0)
        << step << ": " << slurp(log);
    expect_same_outputs(root / step, replay);
  }
}

TEST(Cli, RerunRejectsNonManifest) {
  const fs::path root = pgsum::testing::scratch_dir("cli-rerun-bad");
  std::ofstream(root / "m.json") << "{\"command\": \"synth\"}\n";
  EXPECT_EQ(run_cli({"rerun", (root / "m.json").string()}, root / "log"), 2);
  EXPECT_EQ(run_cli({"rerun", (root / "absent.json").string()}, root / "log"), 2);
}
