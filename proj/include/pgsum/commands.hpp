#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pgsum/analysis.hpp"
#include "pgsum/config.hpp"
#include "pgsum/metrics.hpp"

namespace pgsum {

inline constexpr std::string_view kVersion = "0.1.0";

/// Files a subcommand wrote, relative to its output directory.
struct CommandResult {
  std::vector<std::string> files;
};

CommandResult run_synth(const RunConfig& config, std::size_t n_per_domain, std::size_t n_extracts, std::ostream& log);

/// ingest -> filter -> per-domain split -> vocabulary from all training
/// documents. Writes train/valid/test.jsonl, per-domain copies named
/// <split>.<domain>.jsonl, and vocab.txt.
CommandResult run_prepare(const RunConfig& config, std::ostream& log);

/// Writes model.ckpt (best parameters), one checkpoint per phase, and
/// history.csv. On divergence writes last_good.ckpt and rethrows.
CommandResult run_train(const RunConfig& config, std::ostream& log);

/// Extract pre-training then fine-tuning on the target domain. Writes
/// pretrained.ckpt, model.ckpt and history.csv.
CommandResult run_pretrain(const RunConfig& config, std::ostream& log);

/// Decodes every document of `input`. Writes outputs.jsonl, outputs.txt and
/// traces.jsonl (input tokens, emitted tokens, attention rows, p_gen).
CommandResult run_decode(const RunConfig& config, const std::filesystem::path& input, std::ostream& log);

struct EvaluateOptions {
  bool per_pair = false;
  bool prf = false;
};
/// `outputs` is outputs.jsonl from decode/baseline or plain text with one
/// summary per line; `references` is a corpus file or plain text.
CommandResult run_evaluate(const RunConfig& config, const std::filesystem::path& outputs,
                           const std::filesystem::path& references, const EvaluateOptions& options, std::ostream& log);

CommandResult run_baseline(const RunConfig& config, const std::string& which, const std::filesystem::path& corpus,
                           std::optional<std::size_t> k, std::ostream& log);

struct AnalyzeArgs {
  std::string which;  // reuse | distribution | breakdown | attention
  std::filesystem::path corpus;
  std::filesystem::path outputs;
  std::filesystem::path traces;
  std::filesystem::path training;
  std::string field = "pos";
  std::string side = "abstract";
};
CommandResult run_analyze(const RunConfig& config, const AnalyzeArgs& args, std::ostream& log);

/// Reruns the command recorded in a manifest.json with its config snapshot and
/// arguments, optionally into another output directory. Relative paths in
/// the manifest resolve against the current directory.
CommandResult run_from_manifest(const std::filesystem::path& manifest,
                                const std::optional<std::filesystem::path>& out_dir, std::ostream& log);

// ---------------------------------------------------------------------------
// File helpers shared with tests

/// One entry per decoded document.
struct TraceRecord {
  std::string id;
  Tokens input;
  Tokens output;
  AttentionTrace attention;
  std::vector<double> p_gen;
};
std::vector<TraceRecord> read_traces(const std::filesystem::path& path);
void write_traces(const std::filesystem::path& path, const std::vector<TraceRecord>& records);

/// Summaries from outputs.jsonl ("output" field) or plain text lines.
std::vector<Tokens> read_summaries(const std::filesystem::path& path);
/// Abstracts from a corpus file, or plain text lines.
std::vector<Tokens> read_references(const std::filesystem::path& path);

std::vector<Document> load_corpus_strict(const std::filesystem::path& path, std::ostream& log);

}  // namespace pgsum
