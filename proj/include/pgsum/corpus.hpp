#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pgsum/vocabulary.hpp"

namespace pgsum {

using Tokens = std::vector<std::string>;

enum class Domain { News, Opinion, Other };
enum class EntityType { Person, Organization, Location, Other, None };
enum class Subjectivity { StrongPositive, StrongNegative, None };

std::string_view to_string(Domain d);
std::string_view to_string(EntityType e);
std::string_view to_string(Subjectivity s);
std::optional<Domain> parse_domain(std::string_view s);
std::optional<EntityType> parse_entity(std::string_view s);
std::optional<Subjectivity> parse_subjectivity(std::string_view s);

struct TokenAnnotation {
  std::string pos;  // tag as supplied (Penn or universal); see pos_class()
  EntityType ne = EntityType::None;
  Subjectivity subjectivity = Subjectivity::None;

  friend bool operator==(const TokenAnnotation&, const TokenAnnotation&) = default;
};

/// Parallel per-token records for a document's text and abstract.
struct Annotations {
  std::vector<TokenAnnotation> text;
  std::vector<TokenAnnotation> abstract;

  friend bool operator==(const Annotations&, const Annotations&) = default;
};

struct Document {
  std::string id;
  Domain domain = Domain::Other;
  std::string section;
  std::vector<std::string> text_tokens;      // lowercased
  std::vector<std::string> abstract_tokens;  // lowercased
  std::optional<Annotations> annotations;    // aligned 1:1 when present

  friend bool operator==(const Document&, const Document&) = default;
};

// ---------------------------------------------------------------------------
// Tokenization

std::string to_lower(std::string_view s);

/// Whitespace split with punctuation detached as separate tokens. A single
/// ' - . , or / between two alphanumerics stays inside the word ("don't",
/// "10-6", "u.s", "1,000").
std::vector<std::string> tokenize(std::string_view text, bool lowercase = true);

std::string join_tokens(std::span<const std::string> tokens);

bool is_sentence_terminator(std::string_view token);

/// Tokens up to and including the first ./!/? token; all tokens if none.
std::vector<std::string> first_sentence(std::span<const std::string> tokens);

// ---------------------------------------------------------------------------
// Annotation fallback

/// Strong-subjective word list. File format: "word positive|negative" per line.
class SubjectivityLexicon {
 public:
  SubjectivityLexicon() = default;
  static SubjectivityLexicon load(const std::filesystem::path& path);
  void add(std::string word, Subjectivity s);
  Subjectivity lookup(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }
  /// Entries sorted by word.
  std::vector<std::pair<std::string, Subjectivity>> sorted_entries() const;

 private:
  std::unordered_map<std::string, Subjectivity> entries_;
};

/// Rule-based stand-in for real taggers, so analyses run on unannotated
/// corpora. Capitalized non-initial tokens become PERSON, or ORGANIZATION /
/// LOCATION when a cue word matches; POS comes from suffix rules; subjectivity
/// from the lexicon.
class FallbackAnnotator {
 public:
  explicit FallbackAnnotator(SubjectivityLexicon lexicon = {}) : lexicon_(std::move(lexicon)) {}
  /// `tokens` in original case where available.
  std::vector<TokenAnnotation> annotate(std::span<const std::string> tokens) const;

 private:
  SubjectivityLexicon lexicon_;
};

// ---------------------------------------------------------------------------
// Corpus files (JSON Lines)

struct IngestOptions {
  /// Applied to documents that carry no annotations.
  const FallbackAnnotator* annotator = nullptr;
};

struct IngestResult {
  std::vector<Document> documents;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

IngestResult parse_corpus(std::istream& in, const IngestOptions& options = {}, std::string_view source = "<stream>");
/// Throws DataError when the file cannot be read.
IngestResult ingest(const std::filesystem::path& path, const IngestOptions& options = {});

std::string serialize(const Document& doc);
void write_corpus(const std::filesystem::path& path, std::span<const Document> docs);

// ---------------------------------------------------------------------------
// Dataset preparation

inline constexpr std::size_t kMinTextTokensExclusive = 15;
inline constexpr std::size_t kMinAbstractTokensExclusive = 10;

/// Keeps documents whose text is longer than 15 tokens and whose abstract is
/// longer than 10 tokens.
std::vector<Document> filter_pairs(std::span<const Document> docs);

/// Most frequent text and abstract words, ties broken lexicographically,
/// capped at `max_size` entries including the reserved ones.
Vocabulary build_vocab(std::span<const Document> docs, std::size_t max_size);

struct SplitSpec {
  double train = 0.75;
  double valid = 0.15;
  double test = 0.10;

  void validate() const;
};

struct DatasetSplit {
  std::vector<Document> train;
  std::vector<Document> valid;
  std::vector<Document> test;
};

/// Seeded shuffle, then floor(frac * N) documents to valid and test; train
/// takes the remainder.
DatasetSplit split(std::span<const Document> docs, const SplitSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Extract pairs

struct LeadDescription {
  std::string lead;
  std::string description;
};

struct ExtractPair {
  std::vector<std::string> lead_tokens;
  std::vector<std::string> description_tokens;
  bool is_extractive = false;

  friend bool operator==(const ExtractPair&, const ExtractPair&) = default;
};

struct ExtractSet {
  std::vector<ExtractPair> pairs;
  double extractive_fraction = 0.0;
  std::size_t dropped = 0;
  std::vector<std::string> warnings;
};

/// A pair is extractive when the lowercased, tokenized description equals
/// the lead's first sentence.
ExtractSet build_extract_pairs(std::span<const LeadDescription> records);

struct LeadDescriptionFile {
  std::vector<LeadDescription> records;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};
LeadDescriptionFile read_lead_descriptions(const std::filesystem::path& path);
void write_lead_descriptions(const std::filesystem::path& path, std::span<const LeadDescription> records);

// ---------------------------------------------------------------------------
// Synthetic data

/// Two template families. News abstracts mostly restate the first sentences;
/// Opinion abstracts open with "<critic> reviews" and add words the text does
/// not contain. Documents carry gold annotations.
std::vector<Document> generate_synthetic_corpus(std::size_t n_per_domain, std::uint64_t seed);

/// Lead paragraphs with descriptions; roughly 71% of descriptions repeat the
/// lead's first sentence.
std::vector<LeadDescription> generate_synthetic_extracts(std::size_t n, std::uint64_t seed);

/// Strong-subjective words used by the synthetic templates.
SubjectivityLexicon synthetic_lexicon();
void write_lexicon(const std::filesystem::path& path, const SubjectivityLexicon& lexicon);

}  // namespace pgsum
