#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgsum/corpus.hpp"

namespace pgsum {

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Clipped bigram overlap. Recall is 0 when the reference has fewer than two
/// tokens; precision is 0 when the candidate has fewer than two.
PrfScore rouge_2_prf(std::span<const std::string> candidate, std::span<const std::string> reference);
double rouge_2(std::span<const std::string> candidate, std::span<const std::string> reference);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);
/// LCS over reference length (recall) and over candidate length (precision).
PrfScore rouge_l_prf(std::span<const std::string> candidate, std::span<const std::string> reference);
double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference);

/// Clipped unigram/bigram precisions with brevity penalty
/// min(1, exp(1 - |ref| / |cand|)). When no bigram matches but some unigram
/// does, the bigram numerator becomes 1 / (2 |cand|). The bigram denominator
/// is max(|cand| - 1, 1).
double bleu_2(std::span<const std::string> candidate, std::span<const std::string> reference);

struct Score {
  double rouge2 = 0.0;  // recall
  double rougeL = 0.0;  // recall
  double bleu = 0.0;
  double avg_len = 0.0;
  // Filled only when requested.
  std::optional<PrfScore> rouge2_prf;
  std::optional<PrfScore> rougeL_prf;
};

struct PairScore {
  double rouge2 = 0.0;
  double rougeL = 0.0;
  double bleu = 0.0;
  std::size_t length = 0;
};

struct CorpusScore {
  Score score;
  std::vector<PairScore> pairs;
};

/// Macro-average of per-pair scores. Throws std::invalid_argument when the
/// counts differ.
CorpusScore evaluate_corpus(std::span<const Tokens> outputs, std::span<const Tokens> references,
                            bool with_prf = false);

// ---------------------------------------------------------------------------
// Baselines

inline constexpr std::size_t kNewsLeadTokens = 22;
inline constexpr std::size_t kOpinionLeadTokens = 15;

Tokens baseline_first_sentence(std::span<const std::string> text);
Tokens baseline_first_sentence(const Document& doc);

/// First k tokens, k = 22 for News and 15 for Opinion. Other domains need an
/// explicit k (std::invalid_argument otherwise).
Tokens baseline_first_k(const Document& doc, std::optional<std::size_t> k = std::nullopt);
std::size_t lead_tokens_for(Domain domain);

}  // namespace pgsum
