#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pgsum/corpus.hpp"
#include "pgsum/model.hpp"
#include "pgsum/training.hpp"

namespace pgsum {

/// Everything a subcommand needs. Read from a flat "key = value" file;
/// command-line flags override file values, which override defaults.
struct RunConfig {
  // Paths
  std::filesystem::path corpus;
  std::filesystem::path extracts;
  std::filesystem::path lexicon;
  std::filesystem::path data_dir;  // output of `prepare`
  std::filesystem::path checkpoint;
  std::filesystem::path init_checkpoint;
  std::filesystem::path out_dir = "out";

  // Data preparation
  SplitSpec split_spec;
  std::size_t vocab_max_size = 5000;
  bool fallback_annotator = true;

  // Model and training
  ModelConfig model;
  Hyperparams hp;
  RegimeKind regime = RegimeKind::InDomain;
  Domain source_domain = Domain::News;
  Domain target_domain = Domain::Opinion;
  std::size_t target_limit = 0;  // 0 keeps every target training pair
  double extract_valid_frac = 0.1;

  // Decoding
  std::string decode_strategy = "greedy";
  std::size_t beam_width = 4;

  std::uint64_t seed() const { return hp.seed; }
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

/// Every recognized key, sorted by name.
const std::vector<ConfigKey>& config_keys();

/// Throws UsageError on an unknown key or malformed value.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);

/// Blank lines and lines starting with '#' are ignored.
RunConfig parse_config(std::string_view text, std::string_view source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Every key as "key = value", one per line, sorted.
std::string to_config_text(const RunConfig& config);
std::map<std::string, std::string> config_map(const RunConfig& config);

}  // namespace pgsum
