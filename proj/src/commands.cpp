#include "pgsum/commands.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pgsum/checkpoint.hpp"
#include "pgsum/errors.hpp"

namespace pgsum {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

void require_file(const fs::path& path, std::string_view what) {
  if (path.empty()) throw UsageError(std::string(what) + " path is not set");
  if (!fs::is_regular_file(path)) throw DataError(std::string(what) + " not found: " + path.string());
}

void require_dir(const fs::path& path, std::string_view what) {
  if (path.empty()) throw UsageError(std::string(what) + " path is not set");
  if (!fs::is_directory(path)) throw DataError(std::string(what) + " not found: " + path.string());
}

fs::path open_out_dir(const RunConfig& config) {
  if (config.out_dir.empty()) throw UsageError("out_dir is not set");
  fs::create_directories(config.out_dir);
  return config.out_dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Config snapshot plus arguments, enough to rerun the command.
void write_manifest(const fs::path& dir, std::string_view command, const RunConfig& config,
                    const std::map<std::string, std::string>& args, CommandResult& result) {
  result.files.push_back("manifest.json");
  json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["checkpoint_format"] = kCheckpointVersion;
  j["seed"] = config.seed();
  j["args"] = args;
  j["config"] = config_map(config);
  j["outputs"] = result.files;
  write_text(dir / "manifest.json", j.dump(2) + "\n");
}

std::optional<FallbackAnnotator> make_annotator(const RunConfig& config) {
  if (!config.fallback_annotator) return std::nullopt;
  SubjectivityLexicon lexicon;
  if (!config.lexicon.empty()) lexicon = SubjectivityLexicon::load(config.lexicon);
  return FallbackAnnotator(std::move(lexicon));
}

std::vector<Document> load_corpus(const fs::path& path, const RunConfig& config, std::ostream& log) {
  const auto annotator = make_annotator(config);
  IngestOptions options;
  if (annotator) options.annotator = &*annotator;
  IngestResult r = ingest(path, options);
  for (const std::string& w : r.warnings) log << "warning: " << w << '\n';
  if (r.skipped > 0) log << path.string() << ": skipped " << r.skipped << " malformed line(s)\n";
  return std::move(r.documents);
}

std::vector<Document> of_domain(std::span<const Document> docs, Domain d) {
  std::vector<Document> out;
  for (const Document& doc : docs) {
    if (doc.domain == d) out.push_back(doc);
  }
  return out;
}

struct PreparedData {
  std::vector<Document> train, valid, test;
  Vocabulary vocab;
};

PreparedData load_prepared(const RunConfig& config, std::ostream& log) {
  require_dir(config.data_dir, "data_dir");
  for (const char* name : {"train.jsonl", "valid.jsonl", "vocab.txt"}) require_file(config.data_dir / name, name);
  PreparedData data;
  data.train = load_corpus(config.data_dir / "train.jsonl", config, log);
  data.valid = load_corpus(config.data_dir / "valid.jsonl", config, log);
  if (fs::exists(config.data_dir / "test.jsonl")) data.test = load_corpus(config.data_dir / "test.jsonl", config, log);
  data.vocab = Vocabulary::load(config.data_dir / "vocab.txt");
  return data;
}

Dataset domain_dataset(const PreparedData& data, Domain d, std::size_t limit) {
  Dataset ds;
  ds.name = std::string(to_string(d));
  auto train_docs = of_domain(data.train, d);
  if (limit > 0 && train_docs.size() > limit) train_docs.resize(limit);
  ds.train = examples_from(train_docs);
  ds.valid = examples_from(of_domain(data.valid, d));
  return ds;
}

ModelConfig model_config(const RunConfig& config, const Vocabulary& vocab) {
  ModelConfig m = config.model;
  m.vocab_size = vocab.size();
  return m;
}

std::optional<ModelParams> initial_params(const RunConfig& config) {
  if (config.init_checkpoint.empty()) return std::nullopt;
  return load_checkpoint(config.init_checkpoint).params;
}

void log_history_tail(const TrainResult& r, std::ostream& log) {
  for (std::size_t i = 0; i < r.phases.size(); ++i) {
    log << "phase " << r.phase_names[i] << ": step " << r.phases[i].step << ", best valid loss "
        << r.phases[i].best_valid_loss << '\n';
  }
}

}  // namespace

std::vector<Document> load_corpus_strict(const fs::path& path, std::ostream& log) {
  RunConfig config;
  config.fallback_annotator = false;
  return load_corpus(path, config, log);
}

// ---------------------------------------------------------------------------

CommandResult run_synth(const RunConfig& config, std::size_t n_per_domain, std::size_t n_extracts, std::ostream& log) {
  if (n_per_domain == 0) throw UsageError("synth: --per-domain must be >= 1");
  const fs::path dir = open_out_dir(config);
  CommandResult result;
  const auto docs = generate_synthetic_corpus(n_per_domain, config.seed());
  write_corpus(dir / "corpus.jsonl", docs);
  result.files.push_back("corpus.jsonl");
  if (n_extracts > 0) {
    write_lead_descriptions(dir / "extracts.jsonl", generate_synthetic_extracts(n_extracts, config.seed()));
    result.files.push_back("extracts.jsonl");
  }
  write_lexicon(dir / "lexicon.txt", synthetic_lexicon());
  result.files.push_back("lexicon.txt");
  log << "wrote " << docs.size() << " documents";
  if (n_extracts > 0) log << " and " << n_extracts << " extract records";
  log << " to " << dir.string() << '\n';
  write_manifest(dir, "synth", config,
                 {{"per_domain", std::to_string(n_per_domain)}, {"extracts", std::to_string(n_extracts)}}, result);
  return result;
}

CommandResult run_prepare(const RunConfig& config, std::ostream& log) {
  require_file(config.corpus, "corpus");
  if (!config.lexicon.empty()) require_file(config.lexicon, "lexicon");
  config.split_spec.validate();
  const auto docs = load_corpus(config.corpus, config, log);
  const auto kept = filter_pairs(docs);
  if (kept.empty()) throw DataError("prepare: no documents left after length filtering");

  DatasetSplit all;
  std::map<Domain, DatasetSplit> per_domain;
  for (Domain d : {Domain::News, Domain::Opinion, Domain::Other}) {
    const auto subset = of_domain(kept, d);
    if (subset.empty()) continue;
    DatasetSplit s = split(subset, config.split_spec, config.seed());
    for (auto [from, to] : {std::pair{&s.train, &all.train}, {&s.valid, &all.valid}, {&s.test, &all.test}}) {
      to->insert(to->end(), from->begin(), from->end());
    }
    per_domain[d] = std::move(s);
  }
  if (all.train.empty()) throw DataError("prepare: the training split is empty");
  const Vocabulary vocab = build_vocab(all.train, config.vocab_max_size);

  const fs::path dir = open_out_dir(config);
  CommandResult result;
  for (auto [name, part] : {std::pair{"train", &all.train}, {"valid", &all.valid}, {"test", &all.test}}) {
    write_corpus(dir / (std::string(name) + ".jsonl"), *part);
    result.files.push_back(std::string(name) + ".jsonl");
  }
  for (const auto& [d, s] : per_domain) {
    for (auto [name, part] : {std::pair{"train", &s.train}, {"valid", &s.valid}, {"test", &s.test}}) {
      const std::string file = std::string(name) + "." + std::string(to_string(d)) + ".jsonl";
      write_corpus(dir / file, *part);
      result.files.push_back(file);
    }
  }
  vocab.save(dir / "vocab.txt");
  result.files.push_back("vocab.txt");

  log << "read " << docs.size() << ", kept " << kept.size() << " after filtering\n";
  log << "train " << all.train.size() << ", valid " << all.valid.size() << ", test " << all.test.size() << '\n';
  for (const auto& [d, s] : per_domain) {
    log << "  " << to_string(d) << ": " << s.train.size() << " / " << s.valid.size() << " / " << s.test.size() << '\n';
  }
  log << "vocabulary " << vocab.size() << " entries\n";
  write_manifest(dir, "prepare", config, {}, result);
  return result;
}

CommandResult run_train(const RunConfig& config, std::ostream& log) {
  if (!config.init_checkpoint.empty()) require_file(config.init_checkpoint, "init_checkpoint");
  config.hp.validate();
  const PreparedData data = load_prepared(config, log);
  const ModelConfig mc = model_config(config, data.vocab);

  const Dataset source = domain_dataset(data, config.source_domain, 0);
  const Dataset target = domain_dataset(data, config.target_domain, config.target_limit);
  Regime regime;
  regime.kind = config.regime;
  regime.source = &source;
  regime.target = &target;
  regime.init = initial_params(config);
  regime.validate();

  const fs::path dir = open_out_dir(config);
  CommandResult result;
  try {
    const TrainResult r = train(regime, mc, config.hp, data.vocab);
    for (std::size_t i = 0; i < r.phases.size(); ++i) {
      const std::string file = "phase" + std::to_string(i + 1) + "-" + r.phase_names[i] + ".ckpt";
      save_checkpoint(r.phases[i], dir / file);
      result.files.push_back(file);
    }
    save_checkpoint(r.state, dir / "model.ckpt");
    write_history_csv(dir / "history.csv", r.history);
    result.files.push_back("model.ckpt");
    result.files.push_back("history.csv");
    log_history_tail(r, log);
  } catch (const DivergenceError& e) {
    save_checkpoint(e.last_good(), dir / "last_good.ckpt");
    result.files.push_back("last_good.ckpt");
    write_manifest(dir, "train", config, {{"status", "diverged"}}, result);
    throw;
  }
  write_manifest(dir, "train", config, {}, result);
  return result;
}

CommandResult run_pretrain(const RunConfig& config, std::ostream& log) {
  require_file(config.extracts, "extracts");
  config.hp.validate();
  if (!(config.extract_valid_frac >= 0.0 && config.extract_valid_frac < 1.0)) {
    throw UsageError("extract_valid_frac must be in [0, 1)");
  }
  const PreparedData data = load_prepared(config, log);
  const ModelConfig mc = model_config(config, data.vocab);

  const LeadDescriptionFile file = read_lead_descriptions(config.extracts);
  for (const std::string& w : file.warnings) log << "warning: " << w << '\n';
  const ExtractSet set = build_extract_pairs(file.records);
  for (const std::string& w : set.warnings) log << "warning: " << w << '\n';
  if (set.pairs.empty()) throw DataError("pretrain: no usable extract pairs");
  log << set.pairs.size() << " extract pairs, " << set.extractive_fraction * 100.0 << "% extractive\n";

  Dataset extracts;
  extracts.name = "extracts";
  const auto all = examples_from(set.pairs);
  const std::size_t n_valid = static_cast<std::size_t>(config.extract_valid_frac * static_cast<double>(all.size()));
  extracts.train.assign(all.begin(), all.end() - static_cast<std::ptrdiff_t>(n_valid));
  extracts.valid.assign(all.end() - static_cast<std::ptrdiff_t>(n_valid), all.end());
  const Dataset target = domain_dataset(data, config.target_domain, config.target_limit);

  const fs::path dir = open_out_dir(config);
  CommandResult result;
  try {
    const PretrainResult r = pretrain_then_finetune(extracts, target, mc, config.hp, data.vocab);
    save_checkpoint(r.pretrained, dir / "pretrained.ckpt");
    save_checkpoint(r.finetuned.state, dir / "model.ckpt");
    write_history_csv(dir / "history.csv", r.finetuned.history);
    result.files = {"pretrained.ckpt", "model.ckpt", "history.csv"};
    log << "pretrained for " << r.pretrained.step << " steps\n";
    log_history_tail(r.finetuned, log);
  } catch (const DivergenceError& e) {
    save_checkpoint(e.last_good(), dir / "last_good.ckpt");
    result.files.push_back("last_good.ckpt");
    write_manifest(dir, "pretrain", config, {{"status", "diverged"}}, result);
    throw;
  }
  write_manifest(dir, "pretrain", config, {}, result);
  return result;
}

CommandResult run_decode(const RunConfig& config, const fs::path& input, std::ostream& log) {
  require_file(config.checkpoint, "checkpoint");
  require_file(input, "input");
  const fs::path vocab_path = config.data_dir / "vocab.txt";
  require_file(vocab_path, "vocabulary (data_dir/vocab.txt)");
  if (config.decode_strategy == "beam" && config.beam_width == 0) throw UsageError("beam_width must be >= 1");

  const Vocabulary vocab = Vocabulary::load(vocab_path);
  const ModelParams params = load_checkpoint(config.checkpoint).params;
  if (params.config.vocab_size != vocab.size()) {
    throw DataError("checkpoint vocab_size " + std::to_string(params.config.vocab_size) + " does not match " +
                    vocab_path.string() + " (" + std::to_string(vocab.size()) + " entries)");
  }
  const auto docs = load_corpus(input, config, log);

  const fs::path dir = open_out_dir(config);
  std::ofstream jsonl(dir / "outputs.jsonl", std::ios::binary | std::ios::trunc);
  std::ofstream txt(dir / "outputs.txt", std::ios::binary | std::ios::trunc);
  if (!jsonl || !txt) throw DataError("cannot write decode outputs in " + dir.string());
  std::vector<TraceRecord> traces;
  for (const Document& doc : docs) {
    const SourceText source = make_source(doc.text_tokens, vocab, params.config.max_input_len);
    const DecodeResult r = config.decode_strategy == "beam" ? beam_decode(source, params, vocab, config.beam_width)
                                                            : greedy_decode(source, params, vocab);
    json line;
    line["id"] = doc.id;
    line["output"] = join_tokens(r.tokens);
    line["log_prob"] = r.log_prob;
    jsonl << line.dump() << '\n';
    txt << join_tokens(r.tokens) << '\n';
    TraceRecord t{doc.id, source.tokens, r.tokens, output_attention(r), {}};
    for (std::size_t i = 0; i < r.tokens.size(); ++i) t.p_gen.push_back(r.trace[i].p_gen);
    traces.push_back(std::move(t));
  }
  jsonl.close();
  txt.close();
  write_traces(dir / "traces.jsonl", traces);
  CommandResult result{{"outputs.jsonl", "outputs.txt", "traces.jsonl"}};
  log << "decoded " << docs.size() << " documents (" << config.decode_strategy << ")\n";
  write_manifest(dir, "decode", config, {{"input", input.string()}}, result);
  return result;
}

CommandResult run_evaluate(const RunConfig& config, const fs::path& outputs, const fs::path& references,
                           const EvaluateOptions& options, std::ostream& log) {
  require_file(outputs, "outputs");
  require_file(references, "references");
  const auto out = read_summaries(outputs);
  const auto ref = read_references(references);
  if (out.size() != ref.size()) {
    throw DataError("evaluate: " + std::to_string(out.size()) + " outputs but " + std::to_string(ref.size()) +
                    " references");
  }
  const CorpusScore cs = evaluate_corpus(out, ref, options.prf);

  const fs::path dir = open_out_dir(config);
  CommandResult result{{"scores.json"}};
  json j;
  j["rouge2"] = cs.score.rouge2;
  j["rougeL"] = cs.score.rougeL;
  j["bleu"] = cs.score.bleu;
  j["avg_len"] = cs.score.avg_len;
  if (options.prf) {
    for (auto [name, prf] : {std::pair{"rouge2_prf", *cs.score.rouge2_prf}, {"rougeL_prf", *cs.score.rougeL_prf}}) {
      j[name] = {{"precision", prf.precision}, {"recall", prf.recall}, {"f1", prf.f1}};
    }
  }
  write_text(dir / "scores.json", j.dump(2) + "\n");
  if (options.per_pair) {
    std::ostringstream csv;
    csv.precision(17);
    csv << "index,rouge2,rougeL,bleu,length\n";
    for (std::size_t i = 0; i < cs.pairs.size(); ++i) {
      const PairScore& p = cs.pairs[i];
      csv << i << ',' << p.rouge2 << ',' << p.rougeL << ',' << p.bleu << ',' << p.length << '\n';
    }
    write_text(dir / "per_pair.csv", csv.str());
    result.files.push_back("per_pair.csv");
  }
  log << j.dump() << '\n';
  write_manifest(dir, "evaluate", config,
                 {{"outputs", outputs.string()},
                  {"references", references.string()},
                  {"per_pair", options.per_pair ? "true" : "false"},
                  {"prf", options.prf ? "true" : "false"}},
                 result);
  return result;
}

CommandResult run_baseline(const RunConfig& config, const std::string& which, const fs::path& corpus,
                           std::optional<std::size_t> k, std::ostream& log) {
  if (which != "first-sentence" && which != "first-k") {
    throw UsageError("baseline must be first-sentence or first-k, got '" + which + "'");
  }
  if (k && *k == 0) throw UsageError("baseline --k must be >= 1");
  require_file(corpus, "corpus");
  const auto docs = load_corpus(corpus, config, log);

  const fs::path dir = open_out_dir(config);
  std::ofstream jsonl(dir / "outputs.jsonl", std::ios::binary | std::ios::trunc);
  std::ofstream txt(dir / "outputs.txt", std::ios::binary | std::ios::trunc);
  if (!jsonl || !txt) throw DataError("cannot write baseline outputs in " + dir.string());
  for (const Document& doc : docs) {
    const Tokens out = which == "first-sentence" ? baseline_first_sentence(doc) : baseline_first_k(doc, k);
    json line;
    line["id"] = doc.id;
    line["output"] = join_tokens(out);
    jsonl << line.dump() << '\n';
    txt << join_tokens(out) << '\n';
  }
  jsonl.close();
  txt.close();
  CommandResult result{{"outputs.jsonl", "outputs.txt"}};
  log << which << ": " << docs.size() << " outputs\n";
  std::map<std::string, std::string> args{{"which", which}, {"corpus", corpus.string()}};
  if (k) args["k"] = std::to_string(*k);
  write_manifest(dir, "baseline", config, args, result);
  return result;
}

// ---------------------------------------------------------------------------

namespace {

json shares_json(const std::vector<CategoryShare>& shares) {
  json j = json::object();
  for (const CategoryShare& s : shares) j[s.category] = s.percent;
  return j;
}

std::map<std::string, std::vector<Document>> group_by_domain(const std::vector<Document>& docs) {
  std::map<std::string, std::vector<Document>> groups;
  groups["all"] = docs;
  for (const Document& d : docs) groups[std::string(to_string(d.domain))].push_back(d);
  return groups;
}

void analyze_reuse(const std::vector<Document>& docs, const fs::path& dir, CommandResult& result, std::ostream& log) {
  json j = json::object();
  std::ostringstream csv;
  csv.precision(17);
  csv << "domain,category,reuse_rate\n";
  const bool annotated = std::all_of(docs.begin(), docs.end(), [](const Document& d) { return d.annotations.has_value(); });
  for (const auto& [name, group] : group_by_domain(docs)) {
    json g;
    g["all"] = reuse_rate(group);
    csv << name << ",all," << g["all"].get<double>() << '\n';
    if (annotated) {
      for (PosClass p : {PosClass::Noun, PosClass::Verb, PosClass::Adjective, PosClass::Adverb, PosClass::Other}) {
        const double r = reuse_rate(group, p);
        g[std::string(to_string(p))] = r;
        csv << name << ',' << to_string(p) << ',' << r << '\n';
      }
    }
    j[name] = g;
  }
  write_text(dir / "reuse.json", j.dump(2) + "\n");
  write_text(dir / "reuse.csv", csv.str());
  result.files = {"reuse.json", "reuse.csv"};
  log << j.dump() << '\n';
}

void analyze_distribution(const std::vector<Document>& docs, const AnalyzeArgs& args, const RunConfig& config,
                          const fs::path& dir, CommandResult& result, std::ostream& log) {
  const auto field = parse_category_field(args.field);
  if (!field) throw UsageError("analyze distribution: --field must be pos, ne or subjectivity");
  const auto side = parse_token_side(args.side);
  if (!side) throw UsageError("analyze distribution: --side must be abstract or text");
  const auto annotator = make_annotator(config);
  json j = json::object();
  std::ostringstream csv;
  csv.precision(17);
  csv << "domain,category,count,percent\n";
  for (const auto& [name, group] : group_by_domain(docs)) {
    const auto shares = distribution_by_category(group, *field, *side, annotator ? &*annotator : nullptr);
    j[name] = shares_json(shares);
    for (const CategoryShare& s : shares) csv << name << ',' << s.category << ',' << s.count << ',' << s.percent << '\n';
  }
  write_text(dir / "distribution.json", j.dump(2) + "\n");
  write_text(dir / "distribution.csv", csv.str());
  result.files = {"distribution.json", "distribution.csv"};
  log << j.dump() << '\n';
}

void analyze_breakdown(const std::vector<Document>& docs, const AnalyzeArgs& args, const RunConfig& config,
                       const fs::path& dir, CommandResult& result, std::ostream& log) {
  const auto outputs = read_summaries(args.outputs);
  if (outputs.size() != docs.size()) {
    throw DataError("analyze breakdown: " + std::to_string(outputs.size()) + " outputs for " +
                    std::to_string(docs.size()) + " documents");
  }
  const auto training = load_corpus(args.training, config, log);
  std::vector<Tokens> gold, inputs;
  for (const Document& d : docs) {
    gold.push_back(d.abstract_tokens);
    inputs.push_back(d.text_tokens);
  }
  const BreakdownReport r = gold_token_breakdown(gold, outputs, inputs, abstract_vocabulary(training));
  json j;
  j["seen"] = {{"in_input", {{"gen", r.seen_in_input_generated},
                             {"mis", r.seen_in_input_missed},
                             {"total", r.seen_in_input_total}}},
               {"not_in_input", {{"gen", r.seen_not_in_input_generated},
                                 {"mis", r.seen_not_in_input_missed},
                                 {"total", r.seen_not_in_input_total}}}};
  j["unseen"] = r.unseen;
  j["gold_tokens"] = r.gold_tokens;
  std::ostringstream csv;
  csv.precision(17);
  csv << "cell,percent\n"
      << "seen_in_input_gen," << r.seen_in_input_generated << '\n'
      << "seen_in_input_mis," << r.seen_in_input_missed << '\n'
      << "seen_not_in_input_gen," << r.seen_not_in_input_generated << '\n'
      << "seen_not_in_input_mis," << r.seen_not_in_input_missed << '\n'
      << "unseen," << r.unseen << '\n';
  write_text(dir / "breakdown.json", j.dump(2) + "\n");
  write_text(dir / "breakdown.csv", csv.str());
  result.files = {"breakdown.json", "breakdown.csv"};
  log << j.dump() << '\n';
}

void analyze_attention(const std::vector<Document>& docs, const AnalyzeArgs& args, const RunConfig& config,
                       const fs::path& dir, CommandResult& result, std::ostream& log) {
  const auto traces = read_traces(args.traces);
  std::map<std::string, const Document*> by_id;
  for (const Document& d : docs) by_id[d.id] = &d;
  const auto annotator = make_annotator(config);

  std::vector<AttentionTrace> rows;
  std::vector<AnnotatedInput> inputs;
  std::vector<Tokens> input_tokens, gold;
  for (const TraceRecord& t : traces) {
    auto it = by_id.find(t.id);
    if (it == by_id.end()) throw DataError("analyze attention: trace '" + t.id + "' has no document in the corpus");
    const Document& d = *it->second;
    if (t.input.size() > d.text_tokens.size() ||
        !std::equal(t.input.begin(), t.input.end(), d.text_tokens.begin())) {
      throw DataError("analyze attention: trace '" + t.id + "' input does not match the document text");
    }
    std::vector<TokenAnnotation> anns;
    if (d.annotations) {
      anns.assign(d.annotations->text.begin(), d.annotations->text.begin() + static_cast<std::ptrdiff_t>(t.input.size()));
    } else if (annotator) {
      anns = annotator->annotate(t.input);
    } else {
      throw DataError("analyze attention: document '" + d.id + "' has no annotations");
    }
    rows.push_back(t.attention);
    inputs.push_back({t.input, std::move(anns)});
    input_tokens.push_back(t.input);
    gold.push_back(d.abstract_tokens);
  }
  AttentionReport r = attention_categorize(rows, inputs);
  r.summary_worthy_rate = summary_worthy_rate(rows, input_tokens, gold);
  json j;
  j["PERSON"] = r.person;
  j["ORGANIZATION"] = r.organization;
  j["LOCATION"] = r.location;
  j["all_entities"] = r.all_entities;
  j["noun"] = r.noun;
  j["verb"] = r.verb;
  j["positive"] = r.positive;
  j["negative"] = r.negative;
  j["summary_worthy_rate"] = r.summary_worthy_rate;
  j["output_tokens"] = r.output_tokens;
  std::ostringstream csv;
  csv.precision(17);
  csv << "category,percent\n";
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "output_tokens" || it.key() == "summary_worthy_rate") continue;
    csv << it.key() << ',' << it.value().get<double>() << '\n';
  }
  write_text(dir / "attention.json", j.dump(2) + "\n");
  write_text(dir / "attention.csv", csv.str());
  result.files = {"attention.json", "attention.csv"};
  log << j.dump() << '\n';
}

}  // namespace

CommandResult run_analyze(const RunConfig& config, const AnalyzeArgs& args, std::ostream& log) {
  const std::string& w = args.which;
  if (w != "reuse" && w != "distribution" && w != "breakdown" && w != "attention") {
    throw UsageError("analyze: unknown analysis '" + w + "' (reuse, distribution, breakdown, attention)");
  }
  require_file(args.corpus, "corpus");
  if (w == "breakdown") {
    require_file(args.outputs, "outputs");
    require_file(args.training, "training corpus");
  }
  if (w == "attention") require_file(args.traces, "traces");
  if (!config.lexicon.empty()) require_file(config.lexicon, "lexicon");

  const auto docs = load_corpus(args.corpus, config, log);
  const fs::path dir = open_out_dir(config);
  CommandResult result;
  if (w == "reuse") analyze_reuse(docs, dir, result, log);
  if (w == "distribution") analyze_distribution(docs, args, config, dir, result, log);
  if (w == "breakdown") analyze_breakdown(docs, args, config, dir, result, log);
  if (w == "attention") analyze_attention(docs, args, config, dir, result, log);

  std::map<std::string, std::string> margs{{"which", w}, {"corpus", args.corpus.string()}};
  if (!args.outputs.empty()) margs["outputs"] = args.outputs.string();
  if (!args.traces.empty()) margs["traces"] = args.traces.string();
  if (!args.training.empty()) margs["training"] = args.training.string();
  if (w == "distribution") {
    margs["field"] = args.field;
    margs["side"] = args.side;
  }
  write_manifest(dir, "analyze", config, margs, result);
  return result;
}

CommandResult run_from_manifest(const fs::path& manifest, const std::optional<fs::path>& out_dir, std::ostream& log) {
  require_file(manifest, "manifest");
  json j;
  try {
    j = json::parse(read_text(manifest));
  } catch (const json::exception& e) {
    throw DataError(manifest.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("command") || !j.contains("config") || !j.contains("args")) {
    throw DataError(manifest.string() + ": not a manifest (needs command, config and args)");
  }
  RunConfig config;
  for (const auto& [key, value] : j.at("config").items()) set_config_value(config, key, value.get<std::string>());
  if (out_dir) config.out_dir = *out_dir;
  const auto args = j.at("args").get<std::map<std::string, std::string>>();
  auto arg = [&](const std::string& key) -> std::string {
    auto it = args.find(key);
    return it == args.end() ? std::string() : it->second;
  };
  auto count = [&](const std::string& key) -> std::size_t {
    try {
      return std::stoul(arg(key));
    } catch (const std::exception&) {
      throw DataError(manifest.string() + ": argument '" + key + "' is not a count");
    }
  };

  const std::string command = j.at("command").get<std::string>();
  if (command == "synth") return run_synth(config, count("per_domain"), count("extracts"), log);
  if (command == "prepare") return run_prepare(config, log);
  if (command == "train") return run_train(config, log);
  if (command == "pretrain") return run_pretrain(config, log);
  if (command == "decode") return run_decode(config, arg("input"), log);
  if (command == "evaluate") {
    return run_evaluate(config, arg("outputs"), arg("references"),
                        EvaluateOptions{arg("per_pair") == "true", arg("prf") == "true"}, log);
  }
  if (command == "baseline") {
    std::optional<std::size_t> k;
    if (args.contains("k")) k = count("k");
    return run_baseline(config, arg("which"), arg("corpus"), k, log);
  }
  if (command == "analyze") {
    AnalyzeArgs a;
    a.which = arg("which");
    a.corpus = arg("corpus");
    a.outputs = arg("outputs");
    a.traces = arg("traces");
    a.training = arg("training");
    if (args.contains("field")) a.field = arg("field");
    if (args.contains("side")) a.side = arg("side");
    return run_analyze(config, a, log);
  }
  throw DataError(manifest.string() + ": unknown command '" + command + "'");
}

// ---------------------------------------------------------------------------

std::vector<TraceRecord> read_traces(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read traces " + path.string());
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      TraceRecord r;
      r.id = j.at("id").get<std::string>();
      r.input = j.at("input").get<Tokens>();
      if (j.contains("output")) r.output = j.at("output").get<Tokens>();
      r.attention = j.at("attention").get<AttentionTrace>();
      if (j.contains("p_gen")) r.p_gen = j.at("p_gen").get<std::vector<double>>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad trace record: " + e.what());
    }
  }
  return out;
}

void write_traces(const fs::path& path, const std::vector<TraceRecord>& records) {
  std::ostringstream out;
  for (const TraceRecord& r : records) {
    json j;
    j["id"] = r.id;
    j["input"] = r.input;
    j["output"] = r.output;
    j["attention"] = r.attention;
    j["p_gen"] = r.p_gen;
    out << j.dump() << '\n';
  }
  write_text(path, out.str());
}

namespace {

/// JSON Lines when every non-blank line parses as an object holding `field`;
/// otherwise plain text, one tokenized line per entry.
std::vector<Tokens> read_token_lines(const fs::path& path, std::string_view field) {
  const std::string text = read_text(path);
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();

  bool is_jsonl = !lines.empty();
  for (const std::string& l : lines) {
    if (l.empty() || l.front() != '{') {
      is_jsonl = false;
      break;
    }
  }
  std::vector<Tokens> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!is_jsonl) {
      out.push_back(tokenize(lines[i]));
      continue;
    }
    try {
      const json j = json::parse(lines[i]);
      out.push_back(tokenize(j.at(std::string(field)).get<std::string>()));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(i + 1) + ": missing \"" + std::string(field) +
                      "\": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<Tokens> read_summaries(const fs::path& path) { return read_token_lines(path, "output"); }

std::vector<Tokens> read_references(const fs::path& path) { return read_token_lines(path, "abstract"); }

}  // namespace pgsum
