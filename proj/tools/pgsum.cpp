// pgsum: command-line driver for data preparation, training, decoding,
// evaluation, baselines and analyses.
//
// Settings come from defaults, then the --config file, then --<key> flags.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pgsum/commands.hpp"
#include "pgsum/errors.hpp"
#include "pgsum/training.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kDiverged = 3 };

std::string flag_name(const std::string& key) {
  std::string flag = "--" + key;
  for (char& c : flag) {
    if (c == '_') c = '-';
  }
  return flag;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pointer-generator summarization toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pgsum::kVersion));

  std::string config_path;
  app.add_option("--config", config_path, "key = value settings file");
  std::map<std::string, std::string> overrides;
  for (const pgsum::ConfigKey& key : pgsum::config_keys()) {
    app.add_option(flag_name(key.name), overrides[key.name], key.help)->group("Settings");
  }

  std::size_t per_domain = 50, n_extracts = 0;
  auto* synth = app.add_subcommand("synth", "write a synthetic two-domain corpus, extracts and lexicon");
  synth->add_option("--per-domain", per_domain, "documents per domain")->capture_default_str();
  synth->add_option("--extracts", n_extracts, "lead/description records (0 = none)")->capture_default_str();

  auto* prepare = app.add_subcommand("prepare", "filter, split and build the vocabulary");
  auto* train = app.add_subcommand("train", "train under the configured regime");
  auto* pretrain = app.add_subcommand("pretrain", "pre-train on extracts, then fine-tune on the target domain");

  std::string decode_input;
  auto* decode = app.add_subcommand("decode", "summarize every document of a corpus file");
  decode->add_option("input", decode_input, "corpus file")->required();

  std::string outputs, references;
  pgsum::EvaluateOptions eval_options;
  auto* evaluate = app.add_subcommand("evaluate", "ROUGE-2, ROUGE-L and BLEU against references");
  evaluate->add_option("outputs", outputs, "outputs.jsonl or one summary per line")->required();
  evaluate->add_option("references", references, "corpus file or one reference per line")->required();
  evaluate->add_flag("--per-pair", eval_options.per_pair, "also write per_pair.csv");
  evaluate->add_flag("--prf", eval_options.prf, "also report precision and F1");

  std::string baseline_which, baseline_corpus;
  std::optional<std::size_t> baseline_k;
  auto* baseline = app.add_subcommand("baseline", "lead baselines");
  baseline->add_option("which", baseline_which, "first-sentence or first-k")
      ->required()
      ->check(CLI::IsMember({"first-sentence", "first-k"}));
  baseline->add_option("corpus", baseline_corpus, "corpus file")->required();
  baseline->add_option("--k", baseline_k, "token count for first-k (default 22 news, 15 opinion)");

  pgsum::AnalyzeArgs analyze_args;
  std::string analyze_corpus, analyze_outputs, analyze_traces, analyze_training;
  auto* analyze = app.add_subcommand("analyze", "corpus and model analyses");
  analyze->add_option("which", analyze_args.which, "reuse, distribution, breakdown or attention")
      ->required()
      ->check(CLI::IsMember({"reuse", "distribution", "breakdown", "attention"}));
  analyze->add_option("corpus", analyze_corpus, "corpus file (gold abstracts and annotations)")->required();
  analyze->add_option("--outputs", analyze_outputs, "system outputs (breakdown)");
  analyze->add_option("--traces", analyze_traces, "traces.jsonl from decode (attention)");
  analyze->add_option("--training", analyze_training, "training corpus whose abstracts count as seen (breakdown)");
  analyze->add_option("--field", analyze_args.field, "pos, ne or subjectivity (distribution)")->capture_default_str();
  analyze->add_option("--side", analyze_args.side, "abstract or text (distribution)")->capture_default_str();

  std::string manifest_path;
  std::optional<std::string> rerun_out;
  auto* rerun = app.add_subcommand("rerun", "repeat the command recorded in a manifest.json");
  rerun->add_option("manifest", manifest_path, "manifest.json written by an earlier run")->required();
  rerun->add_option("--into", rerun_out, "output directory (default: the recorded out_dir)");

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    pgsum::RunConfig config = config_path.empty() ? pgsum::RunConfig{} : pgsum::load_config(config_path);
    for (const pgsum::ConfigKey& key : pgsum::config_keys()) {
      if (app.count(flag_name(key.name)) > 0) pgsum::set_config_value(config, key.name, overrides[key.name]);
    }

    std::ostream& log = std::cout;
    if (*synth) pgsum::run_synth(config, per_domain, n_extracts, log);
    if (*prepare) pgsum::run_prepare(config, log);
    if (*train) pgsum::run_train(config, log);
    if (*pretrain) pgsum::run_pretrain(config, log);
    if (*decode) pgsum::run_decode(config, decode_input, log);
    if (*evaluate) pgsum::run_evaluate(config, outputs, references, eval_options, log);
    if (*baseline) pgsum::run_baseline(config, baseline_which, baseline_corpus, baseline_k, log);
    if (*rerun) {
      std::optional<std::filesystem::path> into;
      if (rerun_out) into = *rerun_out;
      pgsum::run_from_manifest(manifest_path, into, log);
    }
    if (*analyze) {
      analyze_args.corpus = analyze_corpus;
      analyze_args.outputs = analyze_outputs;
      analyze_args.traces = analyze_traces;
      analyze_args.training = analyze_training;
      pgsum::run_analyze(config, analyze_args, log);
    }
  } catch (const pgsum::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const pgsum::DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << " (last good parameters saved as last_good.ckpt)\n";
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
