#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "pgsum/corpus.hpp"
#include "pgsum/model.hpp"

namespace pgsum {

enum class PosClass { Noun, Verb, Adjective, Adverb, Other };

std::string_view to_string(PosClass p);
std::optional<PosClass> parse_pos_class(std::string_view s);
/// Penn Treebank (NN*, VB*, JJ*, RB*) or universal (NOUN, PROPN, VERB, ADJ,
/// ADV) tags; anything else is Other.
PosClass pos_class(std::string_view tag);

struct TokenCategory {
  PosClass pos = PosClass::Other;
  EntityType ne = EntityType::None;
  Subjectivity subjectivity = Subjectivity::None;

  friend bool operator==(const TokenCategory&, const TokenCategory&) = default;
};

TokenCategory categorize(const TokenAnnotation& annotation);

// ---------------------------------------------------------------------------
// Corpus characterization

/// Share of abstract tokens whose surface form occurs anywhere in the same
/// document's text, pooled over all documents. With a POS filter only
/// abstract tokens of that class count, which requires annotations.
/// Returns 0 when nothing is counted.
double reuse_rate(std::span<const Document> docs, std::optional<PosClass> pos_filter = std::nullopt);

enum class CategoryField { Pos, Ne, Subjectivity };
enum class TokenSide { Abstract, Text };

std::optional<CategoryField> parse_category_field(std::string_view s);
std::optional<TokenSide> parse_token_side(std::string_view s);

struct CategoryShare {
  std::string category;
  std::size_t count = 0;
  double percent = 0.0;
};

/// Percentage of tokens per category, every category of the field listed in
/// declaration order. Documents without annotations are annotated with
/// `fallback`; with no fallback they are rejected (std::invalid_argument).
std::vector<CategoryShare> distribution_by_category(std::span<const Document> docs, CategoryField field,
                                                    TokenSide side, const FallbackAnnotator* fallback = nullptr);

// ---------------------------------------------------------------------------
// Gold-token breakdown

struct BreakdownReport {
  // Percentages of all gold tokens.
  double seen_in_input_generated = 0.0;
  double seen_in_input_missed = 0.0;
  double seen_in_input_total = 0.0;
  double seen_not_in_input_generated = 0.0;
  double seen_not_in_input_missed = 0.0;
  double seen_not_in_input_total = 0.0;
  double unseen = 0.0;
  std::size_t gold_tokens = 0;
};

/// Classifies every gold token as seen or unseen in training abstracts and,
/// when seen, as present in the input or not. A gold token counts as
/// generated when the output still has an unclaimed occurrence of it; each
/// output occurrence certifies at most one gold occurrence.
BreakdownReport gold_token_breakdown(std::span<const Tokens> gold, std::span<const Tokens> outputs,
                                     std::span<const Tokens> inputs,
                                     const std::unordered_set<std::string>& training_abstract_vocab);

/// Token types of the given documents' abstracts.
std::unordered_set<std::string> abstract_vocabulary(std::span<const Document> docs);

// ---------------------------------------------------------------------------
// Attention analysis

/// Attention rows of one decoded output, one per emitted token (the STOP step
/// is not an output token).
using AttentionTrace = std::vector<std::vector<double>>;

AttentionTrace output_attention(const DecodeResult& result);

struct AnnotatedInput {
  Tokens tokens;
  std::vector<TokenAnnotation> annotations;  // aligned with tokens
};

struct AttentionReport {
  // Percentages of output tokens whose argmax-attention input token falls in
  // each category. Categories overlap.
  double person = 0.0;
  double organization = 0.0;
  double location = 0.0;
  double all_entities = 0.0;
  double noun = 0.0;
  double verb = 0.0;
  double positive = 0.0;
  double negative = 0.0;
  double summary_worthy_rate = 0.0;  // fraction, filled by callers that have gold abstracts
  std::size_t output_tokens = 0;
};

/// Input position with the highest weight; the lowest index wins ties.
std::size_t argmax_position(std::span<const double> attention);

AttentionReport attention_categorize(std::span<const AttentionTrace> traces, std::span<const AnnotatedInput> inputs);

/// Fraction of output tokens whose argmax-attention input token also occurs
/// in the document's gold abstract. 0 when there are no output tokens.
double summary_worthy_rate(std::span<const AttentionTrace> traces, std::span<const Tokens> inputs,
                           std::span<const Tokens> gold);

}  // namespace pgsum
