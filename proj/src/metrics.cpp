#include "pgsum/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>

namespace pgsum {

namespace {

using Bigram = std::pair<std::string_view, std::string_view>;

std::map<Bigram, std::size_t> bigram_counts(std::span<const std::string> tokens) {
  std::map<Bigram, std::size_t> counts;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) ++counts[{tokens[i], tokens[i + 1]}];
  return counts;
}

std::map<std::string_view, std::size_t> unigram_counts(std::span<const std::string> tokens) {
  std::map<std::string_view, std::size_t> counts;
  for (const std::string& t : tokens) ++counts[t];
  return counts;
}

template <typename Key>
std::size_t clipped_matches(const std::map<Key, std::size_t>& cand, const std::map<Key, std::size_t>& ref) {
  std::size_t matches = 0;
  for (const auto& [gram, n] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) matches += std::min(n, it->second);
  }
  return matches;
}

double f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

PrfScore rouge_2_prf(std::span<const std::string> candidate, std::span<const std::string> reference) {
  PrfScore s;
  const auto cand = bigram_counts(candidate);
  const auto ref = bigram_counts(reference);
  const double matches = static_cast<double>(clipped_matches(cand, ref));
  if (reference.size() >= 2) s.recall = matches / static_cast<double>(reference.size() - 1);
  if (candidate.size() >= 2) s.precision = matches / static_cast<double>(candidate.size() - 1);
  s.f1 = f1(s.precision, s.recall);
  return s;
}

double rouge_2(std::span<const std::string> candidate, std::span<const std::string> reference) {
  return rouge_2_prf(candidate, reference).recall;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

PrfScore rouge_l_prf(std::span<const std::string> candidate, std::span<const std::string> reference) {
  PrfScore s;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  if (!reference.empty()) s.recall = lcs / static_cast<double>(reference.size());
  if (!candidate.empty()) s.precision = lcs / static_cast<double>(candidate.size());
  s.f1 = f1(s.precision, s.recall);
  return s;
}

double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
  return rouge_l_prf(candidate, reference).recall;
}

double bleu_2(std::span<const std::string> candidate, std::span<const std::string> reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double len_c = static_cast<double>(candidate.size());
  const double len_r = static_cast<double>(reference.size());
  const std::size_t uni = clipped_matches(unigram_counts(candidate), unigram_counts(reference));
  if (uni == 0) return 0.0;
  const std::size_t bi = clipped_matches(bigram_counts(candidate), bigram_counts(reference));
  const double p1 = static_cast<double>(uni) / len_c;
  const double bi_num = bi > 0 ? static_cast<double>(bi) : 1.0 / (2.0 * len_c);
  const double p2 = bi_num / static_cast<double>(std::max<std::size_t>(candidate.size() - 1, 1));
  const double bp = std::min(1.0, std::exp(1.0 - len_r / len_c));
  return bp * std::exp(0.5 * (std::log(p1) + std::log(p2)));
}

CorpusScore evaluate_corpus(std::span<const Tokens> outputs, std::span<const Tokens> references, bool with_prf) {
  if (outputs.size() != references.size()) {
    throw std::invalid_argument("evaluate: " + std::to_string(outputs.size()) + " outputs but " +
                                std::to_string(references.size()) + " references");
  }
  CorpusScore result;
  Score& s = result.score;
  PrfScore r2_sum, rl_sum;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    PairScore p;
    const PrfScore r2 = rouge_2_prf(outputs[i], references[i]);
    const PrfScore rl = rouge_l_prf(outputs[i], references[i]);
    p.rouge2 = r2.recall;
    p.rougeL = rl.recall;
    p.bleu = bleu_2(outputs[i], references[i]);
    p.length = outputs[i].size();
    result.pairs.push_back(p);
    s.rouge2 += p.rouge2;
    s.rougeL += p.rougeL;
    s.bleu += p.bleu;
    s.avg_len += static_cast<double>(p.length);
    r2_sum.precision += r2.precision;
    r2_sum.f1 += r2.f1;
    rl_sum.precision += rl.precision;
    rl_sum.f1 += rl.f1;
  }
  if (!outputs.empty()) {
    const double n = static_cast<double>(outputs.size());
    s.rouge2 /= n;
    s.rougeL /= n;
    s.bleu /= n;
    s.avg_len /= n;
    if (with_prf) {
      s.rouge2_prf = PrfScore{r2_sum.precision / n, s.rouge2, r2_sum.f1 / n};
      s.rougeL_prf = PrfScore{rl_sum.precision / n, s.rougeL, rl_sum.f1 / n};
    }
  } else if (with_prf) {
    s.rouge2_prf = PrfScore{};
    s.rougeL_prf = PrfScore{};
  }
  return result;
}

Tokens baseline_first_sentence(std::span<const std::string> text) { return first_sentence(text); }

Tokens baseline_first_sentence(const Document& doc) { return first_sentence(doc.text_tokens); }

std::size_t lead_tokens_for(Domain domain) {
  switch (domain) {
    case Domain::News:
      return kNewsLeadTokens;
    case Domain::Opinion:
      return kOpinionLeadTokens;
    case Domain::Other:
      break;
  }
  throw std::invalid_argument("baseline first-k: no default k for domain 'other'; pass k explicitly");
}

Tokens baseline_first_k(const Document& doc, std::optional<std::size_t> k) {
  const std::size_t n = std::min(k ? *k : lead_tokens_for(doc.domain), doc.text_tokens.size());
  return Tokens(doc.text_tokens.begin(), doc.text_tokens.begin() + static_cast<std::ptrdiff_t>(n));
}

}  // namespace pgsum
