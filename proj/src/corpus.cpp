#include "pgsum/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "pgsum/errors.hpp"
#include "pgsum/random.hpp"

namespace pgsum {

using nlohmann::json;

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::News: return "news";
    case Domain::Opinion: return "opinion";
    case Domain::Other: return "other";
  }
  return "other";
}

std::string_view to_string(EntityType e) {
  switch (e) {
    case EntityType::Person: return "PERSON";
    case EntityType::Organization: return "ORGANIZATION";
    case EntityType::Location: return "LOCATION";
    case EntityType::Other: return "OTHER";
    case EntityType::None: return "NONE";
  }
  return "NONE";
}

std::string_view to_string(Subjectivity s) {
  switch (s) {
    case Subjectivity::StrongPositive: return "positive";
    case Subjectivity::StrongNegative: return "negative";
    case Subjectivity::None: return "none";
  }
  return "none";
}

std::optional<Domain> parse_domain(std::string_view s) {
  const std::string l = to_lower(s);
  if (l == "news") return Domain::News;
  if (l == "opinion") return Domain::Opinion;
  if (l == "other") return Domain::Other;
  return std::nullopt;
}

std::optional<EntityType> parse_entity(std::string_view s) {
  const std::string l = to_lower(s);
  if (l == "person" || l == "per") return EntityType::Person;
  if (l == "organization" || l == "org") return EntityType::Organization;
  if (l == "location" || l == "loc") return EntityType::Location;
  if (l == "other" || l == "misc") return EntityType::Other;
  if (l == "none" || l == "o" || l.empty()) return EntityType::None;
  return std::nullopt;
}

std::optional<Subjectivity> parse_subjectivity(std::string_view s) {
  const std::string l = to_lower(s);
  if (l == "positive" || l == "strongpositive") return Subjectivity::StrongPositive;
  if (l == "negative" || l == "strongnegative") return Subjectivity::StrongNegative;
  if (l == "none" || l.empty()) return Subjectivity::None;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

namespace {

// Bytes >= 0x80 belong to multi-byte UTF-8 sequences; treat them as letters.
bool is_word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }
bool is_joiner(char c) { return c == '\'' || c == '-' || c == '.' || c == ',' || c == '/'; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text, bool lowercase) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      flush();
    } else if (is_word_char(c)) {
      current.push_back(lowercase ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    } else if (is_joiner(text[i]) && !current.empty() && is_word_char(static_cast<unsigned char>(current.back())) &&
               i + 1 < text.size() && is_word_char(static_cast<unsigned char>(text[i + 1]))) {
      current.push_back(text[i]);
    } else {
      flush();
      tokens.emplace_back(1, text[i]);
    }
  }
  flush();
  return tokens;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

bool is_sentence_terminator(std::string_view token) { return token == "." || token == "!" || token == "?"; }

std::vector<std::string> first_sentence(std::span<const std::string> tokens) {
  auto it = std::find_if(tokens.begin(), tokens.end(), [](const std::string& t) { return is_sentence_terminator(t); });
  if (it == tokens.end()) return {tokens.begin(), tokens.end()};
  return {tokens.begin(), it + 1};
}

// ---------------------------------------------------------------------------

SubjectivityLexicon SubjectivityLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read lexicon " + path.string());
  SubjectivityLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string word, polarity;
    if (!(fields >> word)) continue;
    fields >> polarity;
    auto s = parse_subjectivity(polarity);
    if (!s || *s == Subjectivity::None) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 'word positive|negative'");
    }
    lex.add(to_lower(word), *s);
  }
  return lex;
}

void SubjectivityLexicon::add(std::string word, Subjectivity s) { entries_[std::move(word)] = s; }

Subjectivity SubjectivityLexicon::lookup(std::string_view word) const {
  auto it = entries_.find(to_lower(word));
  return it == entries_.end() ? Subjectivity::None : it->second;
}

std::vector<std::pair<std::string, Subjectivity>> SubjectivityLexicon::sorted_entries() const {
  std::vector<std::pair<std::string, Subjectivity>> out(entries_.begin(), entries_.end());
  std::sort(out.begin(), out.end());
  return out;
}

void write_lexicon(const std::filesystem::path& path, const SubjectivityLexicon& lexicon) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write lexicon " + path.string());
  for (const auto& [word, s] : lexicon.sorted_entries()) out << word << ' ' << to_string(s) << '\n';
}

namespace {

const std::unordered_set<std::string> kOrgCues = {
    "inc", "corp", "corporation", "company", "co", "university", "college", "department", "association",
    "times", "bank", "group", "council", "committee", "party", "orchestra", "philharmonic", "club",
    "yankees", "mets", "giants", "jets", "knicks", "rangers", "nets", "senate", "congress"};

const std::unordered_set<std::string> kLocationWords = {
    "new", "york", "boston", "chicago", "washington", "london", "paris", "iraq", "texas", "california",
    "brooklyn", "manhattan", "queens", "bronx", "europe", "america", "china", "japan", "miss"};

const std::unordered_set<std::string> kFunctionWords = {
    "the", "a", "an", "and", "or", "but", "of", "in", "on", "at", "to", "for", "with", "by", "from",
    "as", "that", "this", "it", "its", "he", "she", "they", "his", "her", "their", "who", "which",
    "is", "was", "are", "were", "be", "been", "has", "had", "have", "not", "will", "would", "i"};

const std::unordered_set<std::string> kCommonVerbs = {
    "said", "says", "say", "is", "was", "are", "were", "be", "been", "has", "had", "have", "made", "make",
    "won", "win", "took", "take", "went", "go", "reviews", "discusses", "died", "issued", "trailed"};

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() > suffix.size() + 1 && s.substr(s.size() - suffix.size()) == suffix;
}

std::string guess_pos(const std::string& lower, bool capitalized) {
  if (lower.empty() || !is_word_char(static_cast<unsigned char>(lower[0]))) return ".";
  if (std::isdigit(static_cast<unsigned char>(lower[0]))) return "CD";
  if (kCommonVerbs.contains(lower)) return "VB";
  if (kFunctionWords.contains(lower)) return "DT";
  if (capitalized) return "NNP";
  if (ends_with(lower, "ly")) return "RB";
  if (ends_with(lower, "ing") || ends_with(lower, "ed") || ends_with(lower, "ize")) return "VB";
  if (ends_with(lower, "ous") || ends_with(lower, "ful") || ends_with(lower, "ive") || ends_with(lower, "able") ||
      ends_with(lower, "ible") || ends_with(lower, "al") || ends_with(lower, "ic") || ends_with(lower, "less")) {
    return "JJ";
  }
  return "NN";
}

}  // namespace

std::vector<TokenAnnotation> FallbackAnnotator::annotate(std::span<const std::string> tokens) const {
  std::vector<TokenAnnotation> out;
  out.reserve(tokens.size());
  bool sentence_start = true;
  for (const std::string& tok : tokens) {
    const std::string lower = to_lower(tok);
    const bool capitalized = !tok.empty() && std::isupper(static_cast<unsigned char>(tok[0]));
    TokenAnnotation ann;
    ann.pos = guess_pos(lower, capitalized && !sentence_start);
    if (kLocationWords.contains(lower) && (capitalized || lower == "iraq")) {
      ann.ne = EntityType::Location;
    } else if (capitalized && !sentence_start) {
      ann.ne = kOrgCues.contains(lower) ? EntityType::Organization : EntityType::Person;
    }
    ann.subjectivity = lexicon_.lookup(lower);
    out.push_back(std::move(ann));
    sentence_start = is_sentence_terminator(tok);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<TokenAnnotation> parse_annotation_list(const json& arr, std::size_t expected, const char* which) {
  if (!arr.is_array()) throw std::runtime_error(std::string("annotations.") + which + " must be an array");
  if (arr.size() != expected) {
    throw std::runtime_error(std::string("annotations.") + which + " has " + std::to_string(arr.size()) +
                             " records for " + std::to_string(expected) + " tokens");
  }
  std::vector<TokenAnnotation> out;
  out.reserve(arr.size());
  for (const json& rec : arr) {
    if (!rec.is_array() || rec.size() != 3) throw std::runtime_error("annotation record must be [pos, ne, subj]");
    TokenAnnotation a;
    a.pos = rec[0].get<std::string>();
    auto ne = parse_entity(rec[1].get<std::string>());
    auto subj = parse_subjectivity(rec[2].get<std::string>());
    if (!ne) throw std::runtime_error("unknown entity type '" + rec[1].get<std::string>() + "'");
    if (!subj) throw std::runtime_error("unknown subjectivity '" + rec[2].get<std::string>() + "'");
    a.ne = *ne;
    a.subjectivity = *subj;
    out.push_back(std::move(a));
  }
  return out;
}

json annotation_list_to_json(const std::vector<TokenAnnotation>& anns) {
  json arr = json::array();
  for (const auto& a : anns) arr.push_back({a.pos, to_string(a.ne), to_string(a.subjectivity)});
  return arr;
}

Document parse_document(const std::string& line, const IngestOptions& options) {
  const json j = json::parse(line);
  if (!j.is_object()) throw std::runtime_error("line is not a JSON object");
  for (const char* key : {"id", "domain", "text", "abstract"}) {
    if (!j.contains(key)) throw std::runtime_error(std::string("missing field \"") + key + "\"");
  }
  Document doc;
  doc.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
  auto domain = parse_domain(j.at("domain").get<std::string>());
  if (!domain) throw std::runtime_error("unknown domain '" + j.at("domain").get<std::string>() + "'");
  doc.domain = *domain;
  doc.section = j.value("section", std::string{});
  const std::string text = j.at("text").get<std::string>();
  const std::string abstract = j.at("abstract").get<std::string>();
  doc.text_tokens = tokenize(text);
  doc.abstract_tokens = tokenize(abstract);

  if (j.contains("annotations") && !j.at("annotations").is_null()) {
    const json& a = j.at("annotations");
    Annotations ann;
    ann.text = parse_annotation_list(a.at("text"), doc.text_tokens.size(), "text");
    ann.abstract = parse_annotation_list(a.at("abstract"), doc.abstract_tokens.size(), "abstract");
    doc.annotations = std::move(ann);
  } else if (options.annotator) {
    Annotations ann;
    ann.text = options.annotator->annotate(tokenize(text, false));
    ann.abstract = options.annotator->annotate(tokenize(abstract, false));
    doc.annotations = std::move(ann);
  }
  return doc;
}

}  // namespace

IngestResult parse_corpus(std::istream& in, const IngestOptions& options, std::string_view source) {
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      result.documents.push_back(parse_document(line, options));
    } catch (const std::exception& e) {
      ++result.skipped;
      result.warnings.push_back(std::string(source) + ":" + std::to_string(line_no) + ": skipped: " + e.what());
    }
  }
  return result;
}

IngestResult ingest(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read corpus file " + path.string());
  return parse_corpus(in, options, path.string());
}

std::string serialize(const Document& doc) {
  json j;
  j["id"] = doc.id;
  j["domain"] = to_string(doc.domain);
  j["section"] = doc.section;
  j["text"] = join_tokens(doc.text_tokens);
  j["abstract"] = join_tokens(doc.abstract_tokens);
  if (doc.annotations) {
    j["annotations"] = {{"text", annotation_list_to_json(doc.annotations->text)},
                        {"abstract", annotation_list_to_json(doc.annotations->abstract)}};
  }
  return j.dump();
}

void write_corpus(const std::filesystem::path& path, std::span<const Document> docs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write corpus file " + path.string());
  for (const Document& d : docs) out << serialize(d) << '\n';
  if (!out) throw DataError("failed writing corpus file " + path.string());
}

// ---------------------------------------------------------------------------

std::vector<Document> filter_pairs(std::span<const Document> docs) {
  std::vector<Document> kept;
  for (const Document& d : docs) {
    if (d.text_tokens.size() > kMinTextTokensExclusive && d.abstract_tokens.size() > kMinAbstractTokensExclusive) {
      kept.push_back(d);
    }
  }
  return kept;
}

Vocabulary build_vocab(std::span<const Document> docs, std::size_t max_size) {
  if (docs.empty()) throw std::invalid_argument("build_vocab: no documents");
  if (max_size <= Vocabulary::kReserved) {
    throw std::invalid_argument("build_vocab: max_size must exceed the " + std::to_string(Vocabulary::kReserved) +
                                " reserved entries");
  }
  std::unordered_map<std::string, std::size_t> counts;
  for (const Document& d : docs) {
    for (const auto& t : d.text_tokens) ++counts[t];
    for (const auto& t : d.abstract_tokens) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  ranked.reserve(counts.size());
  for (auto& [w, c] : counts) {
    if (!is_reserved_word(w)) ranked.emplace_back(w, c);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  const std::size_t keep = std::min(ranked.size(), max_size - Vocabulary::kReserved);
  std::vector<std::string> words;
  words.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) words.push_back(ranked[i].first);
  return Vocabulary(words);
}

void SplitSpec::validate() const {
  for (double f : {train, valid, test}) {
    if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("split fractions must lie in [0, 1]");
  }
  if (std::abs(train + valid + test - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must sum to 1");
  }
}

DatasetSplit split(std::span<const Document> docs, const SplitSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t n = docs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  // The epsilon keeps products like 0.15 * 100 = 15.000000000000002 and
  // 0.29 * 100 = 28.999999999999996 from flooring on representation error.
  auto portion = [n](double frac) { return static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9)); };
  const std::size_t n_valid = portion(spec.valid);
  const std::size_t n_test = portion(spec.test);
  const std::size_t n_train = n - n_valid - n_test;

  DatasetSplit out;
  for (std::size_t i = 0; i < n; ++i) {
    const Document& d = docs[order[i]];
    if (i < n_train) {
      out.train.push_back(d);
    } else if (i < n_train + n_valid) {
      out.valid.push_back(d);
    } else {
      out.test.push_back(d);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

ExtractSet build_extract_pairs(std::span<const LeadDescription> records) {
  ExtractSet out;
  std::size_t index = 0;
  for (const LeadDescription& r : records) {
    ++index;
    ExtractPair p;
    p.lead_tokens = tokenize(r.lead);
    p.description_tokens = tokenize(r.description);
    if (p.lead_tokens.empty() || p.description_tokens.empty()) {
      ++out.dropped;
      out.warnings.push_back("record " + std::to_string(index) + ": empty lead or description, dropped");
      continue;
    }
    p.is_extractive = p.description_tokens == first_sentence(p.lead_tokens);
    out.pairs.push_back(std::move(p));
  }
  if (!out.pairs.empty()) {
    const auto hits = std::count_if(out.pairs.begin(), out.pairs.end(), [](const ExtractPair& p) { return p.is_extractive; });
    out.extractive_fraction = static_cast<double>(hits) / static_cast<double>(out.pairs.size());
  }
  return out;
}

LeadDescriptionFile read_lead_descriptions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read extract-pair file " + path.string());
  LeadDescriptionFile out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      out.records.push_back({j.at("lead").get<std::string>(), j.at("description").get<std::string>()});
    } catch (const std::exception& e) {
      ++out.skipped;
      out.warnings.push_back(path.string() + ":" + std::to_string(line_no) + ": skipped: " + e.what());
    }
  }
  return out;
}

void write_lead_descriptions(const std::filesystem::path& path, std::span<const LeadDescription> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write extract-pair file " + path.string());
  for (const auto& r : records) out << json{{"lead", r.lead}, {"description", r.description}}.dump() << '\n';
}

}  // namespace pgsum
