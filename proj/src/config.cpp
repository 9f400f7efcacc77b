#include "pgsum/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "pgsum/errors.hpp"

namespace pgsum {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw UsageError("config key '" + std::string(key) + "': '" + std::string(value) + "' is not " +
                   std::string(expected));
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "a non-negative integer");
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const std::string s(v);
    const double d = std::stod(s, &used);
    if (used != s.size()) bad_value(key, v, "a number");
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, v, "a number");
  }
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

// Shortest text that reads back to the same double.
std::string fmt_double(double d) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), d);
  return std::string(buf, end);
}

template <typename T>
ConfigKey size_key(std::string name, std::string help, T RunConfig::*field) {
  return {name, std::move(help),
          [name, field](RunConfig& c, std::string_view v) { c.*field = static_cast<T>(to_u64(name, v)); },
          [field](const RunConfig& c) { return std::to_string(c.*field); }};
}

ConfigKey path_key(std::string name, std::string help, std::filesystem::path RunConfig::*field) {
  return {name, std::move(help), [field](RunConfig& c, std::string_view v) { c.*field = std::filesystem::path(v); },
          [field](const RunConfig& c) { return (c.*field).string(); }};
}

template <typename Get, typename Set>
ConfigKey custom_key(std::string name, std::string help, Get get, Set set) {
  return {std::move(name), std::move(help), std::move(set), std::move(get)};
}

ConfigKey model_key(std::string name, std::string help, std::size_t ModelConfig::*field) {
  return {name, std::move(help),
          [name, field](RunConfig& c, std::string_view v) { c.model.*field = static_cast<std::size_t>(to_u64(name, v)); },
          [field](const RunConfig& c) { return std::to_string(c.model.*field); }};
}

ConfigKey hp_size_key(std::string name, std::string help, std::size_t Hyperparams::*field) {
  return {name, std::move(help),
          [name, field](RunConfig& c, std::string_view v) { c.hp.*field = static_cast<std::size_t>(to_u64(name, v)); },
          [field](const RunConfig& c) { return std::to_string(c.hp.*field); }};
}

ConfigKey hp_double_key(std::string name, std::string help, double Hyperparams::*field) {
  return {name, std::move(help), [name, field](RunConfig& c, std::string_view v) { c.hp.*field = to_double(name, v); },
          [field](const RunConfig& c) { return fmt_double(c.hp.*field); }};
}

ConfigKey domain_key(std::string name, std::string help, Domain RunConfig::*field) {
  return {name, std::move(help),
          [name, field](RunConfig& c, std::string_view v) {
            const auto d = parse_domain(v);
            if (!d) bad_value(name, v, "one of news, opinion, other");
            c.*field = *d;
          },
          [field](const RunConfig& c) { return std::string(to_string(c.*field)); }};
}

std::vector<ConfigKey> make_keys() {
  std::vector<ConfigKey> keys = {
      path_key("corpus", "corpus file (JSON Lines)", &RunConfig::corpus),
      path_key("extracts", "lead/description file (JSON Lines)", &RunConfig::extracts),
      path_key("lexicon", "subjectivity lexicon for the fallback annotator", &RunConfig::lexicon),
      path_key("data_dir", "directory written by prepare", &RunConfig::data_dir),
      path_key("checkpoint", "model checkpoint to decode with", &RunConfig::checkpoint),
      path_key("init_checkpoint", "checkpoint to start training from", &RunConfig::init_checkpoint),
      path_key("out_dir", "directory for every output of the run", &RunConfig::out_dir),
      custom_key(
          "split_train", "training fraction", [](const RunConfig& c) { return fmt_double(c.split_spec.train); },
          [](RunConfig& c, std::string_view v) { c.split_spec.train = to_double("split_train", v); }),
      custom_key(
          "split_valid", "validation fraction", [](const RunConfig& c) { return fmt_double(c.split_spec.valid); },
          [](RunConfig& c, std::string_view v) { c.split_spec.valid = to_double("split_valid", v); }),
      custom_key(
          "split_test", "test fraction", [](const RunConfig& c) { return fmt_double(c.split_spec.test); },
          [](RunConfig& c, std::string_view v) { c.split_spec.test = to_double("split_test", v); }),
      size_key("vocab_max_size", "vocabulary cap including reserved entries", &RunConfig::vocab_max_size),
      custom_key(
          "fallback_annotator", "annotate unannotated documents with the rule-based fallback",
          [](const RunConfig& c) { return std::string(c.fallback_annotator ? "true" : "false"); },
          [](RunConfig& c, std::string_view v) { c.fallback_annotator = to_bool("fallback_annotator", v); }),
      model_key("hidden_size", "LSTM hidden units", &ModelConfig::hidden_size),
      model_key("embedding_size", "word embedding width", &ModelConfig::embedding_size),
      model_key("max_decode_len", "maximum summary length", &ModelConfig::max_decode_len),
      model_key("max_input_len", "input truncation length", &ModelConfig::max_input_len),
      hp_double_key("learning_rate", "SGD step size", &Hyperparams::learning_rate),
      hp_size_key("batch_size", "examples per update", &Hyperparams::batch_size),
      hp_size_key("eval_every", "updates between validation evaluations", &Hyperparams::eval_every),
      hp_size_key("patience", "non-improving evaluations tolerated", &Hyperparams::patience),
      hp_size_key("max_steps", "update budget per early-stopped phase", &Hyperparams::max_steps),
      custom_key(
          "seed", "seed for initialization, shuffling and splits",
          [](const RunConfig& c) { return std::to_string(c.hp.seed); },
          [](RunConfig& c, std::string_view v) { c.hp.seed = to_u64("seed", v); }),
      hp_double_key("clip_norm", "global gradient norm cap", &Hyperparams::clip_norm),
      hp_size_key("smoothing_window", "validation losses averaged for early stopping", &Hyperparams::smoothing_window),
      hp_size_key("pretrain_steps", "fixed update count on extract pairs", &Hyperparams::pretrain_steps),
      custom_key(
          "mix_phase1_steps", "fixed update count for mix-domain phase 1 (0 = early stopping)",
          [](const RunConfig& c) { return std::to_string(c.hp.mix_phase1_steps.value_or(0)); },
          [](RunConfig& c, std::string_view v) {
            const auto n = to_u64("mix_phase1_steps", v);
            c.hp.mix_phase1_steps = n == 0 ? std::nullopt : std::optional<std::size_t>(n);
          }),
      custom_key(
          "regime", "in-domain, out-of-domain, mix-domain or pretrain-extracts",
          [](const RunConfig& c) { return std::string(to_string(c.regime)); },
          [](RunConfig& c, std::string_view v) {
            const auto r = parse_regime(v);
            if (!r) bad_value("regime", v, "one of in-domain, out-of-domain, mix-domain, pretrain-extracts");
            c.regime = *r;
          }),
      domain_key("source_domain", "domain trained on first (out-of-domain, mix-domain)", &RunConfig::source_domain),
      domain_key("target_domain", "domain trained and tested on (in-domain, mix-domain)", &RunConfig::target_domain),
      size_key("target_limit", "use only the first N target training pairs (0 = all)", &RunConfig::target_limit),
      custom_key(
          "extract_valid_frac", "share of extract pairs held out for validation",
          [](const RunConfig& c) { return fmt_double(c.extract_valid_frac); },
          [](RunConfig& c, std::string_view v) { c.extract_valid_frac = to_double("extract_valid_frac", v); }),
      custom_key(
          "decode_strategy", "greedy or beam", [](const RunConfig& c) { return c.decode_strategy; },
          [](RunConfig& c, std::string_view v) {
            if (v != "greedy" && v != "beam") bad_value("decode_strategy", v, "greedy or beam");
            c.decode_strategy = std::string(v);
          }),
      size_key("beam_width", "beam width for beam decoding", &RunConfig::beam_width),
  };
  std::sort(keys.begin(), keys.end(), [](const ConfigKey& a, const ConfigKey& b) { return a.name < b.name; });
  return keys;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = make_keys();
  return keys;
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  const auto& keys = config_keys();
  auto it = std::find_if(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name == key; });
  if (it == keys.end()) throw UsageError("unknown config key '" + std::string(key) + "'");
  it->set(config, trim(value));
}

RunConfig parse_config(std::string_view text, std::string_view source) {
  RunConfig config;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError(std::string(source) + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(std::string(source) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

std::map<std::string, std::string> config_map(const RunConfig& config) {
  std::map<std::string, std::string> out;
  for (const ConfigKey& k : config_keys()) out[k.name] = k.get(config);
  return out;
}

std::string to_config_text(const RunConfig& config) {
  std::string out;
  for (const auto& [k, v] : config_map(config)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace pgsum
