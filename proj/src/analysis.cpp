#include "pgsum/analysis.hpp"

#include <array>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace pgsum {

std::string_view to_string(PosClass p) {
  switch (p) {
    case PosClass::Noun:
      return "noun";
    case PosClass::Verb:
      return "verb";
    case PosClass::Adjective:
      return "adjective";
    case PosClass::Adverb:
      return "adverb";
    case PosClass::Other:
      return "other";
  }
  return "other";
}

std::optional<PosClass> parse_pos_class(std::string_view s) {
  for (PosClass p : {PosClass::Noun, PosClass::Verb, PosClass::Adjective, PosClass::Adverb, PosClass::Other}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

PosClass pos_class(std::string_view tag) {
  if (tag.starts_with("NN") || tag == "NOUN" || tag == "PROPN") return PosClass::Noun;
  if (tag.starts_with("VB") || tag == "VERB") return PosClass::Verb;
  if (tag.starts_with("JJ") || tag == "ADJ") return PosClass::Adjective;
  if (tag.starts_with("RB") || tag == "ADV") return PosClass::Adverb;
  return PosClass::Other;
}

TokenCategory categorize(const TokenAnnotation& a) { return {pos_class(a.pos), a.ne, a.subjectivity}; }

double reuse_rate(std::span<const Document> docs, std::optional<PosClass> pos_filter) {
  std::size_t total = 0, reused = 0;
  for (const Document& doc : docs) {
    if (pos_filter && !doc.annotations) {
      throw std::invalid_argument("reuse_rate: document '" + doc.id + "' has no annotations for the POS filter");
    }
    const std::unordered_set<std::string> text(doc.text_tokens.begin(), doc.text_tokens.end());
    for (std::size_t i = 0; i < doc.abstract_tokens.size(); ++i) {
      if (pos_filter && pos_class(doc.annotations->abstract.at(i).pos) != *pos_filter) continue;
      ++total;
      if (text.contains(doc.abstract_tokens[i])) ++reused;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(reused) / static_cast<double>(total);
}

std::optional<CategoryField> parse_category_field(std::string_view s) {
  if (s == "pos") return CategoryField::Pos;
  if (s == "ne") return CategoryField::Ne;
  if (s == "subjectivity") return CategoryField::Subjectivity;
  return std::nullopt;
}

std::optional<TokenSide> parse_token_side(std::string_view s) {
  if (s == "abstract") return TokenSide::Abstract;
  if (s == "text") return TokenSide::Text;
  return std::nullopt;
}

namespace {

std::vector<std::string> category_names(CategoryField field) {
  std::vector<std::string> names;
  switch (field) {
    case CategoryField::Pos:
      for (PosClass p : {PosClass::Noun, PosClass::Verb, PosClass::Adjective, PosClass::Adverb, PosClass::Other}) {
        names.emplace_back(to_string(p));
      }
      break;
    case CategoryField::Ne:
      for (EntityType e : {EntityType::Person, EntityType::Organization, EntityType::Location, EntityType::Other,
                           EntityType::None}) {
        names.emplace_back(to_string(e));
      }
      break;
    case CategoryField::Subjectivity:
      for (Subjectivity s : {Subjectivity::StrongPositive, Subjectivity::StrongNegative, Subjectivity::None}) {
        names.emplace_back(to_string(s));
      }
      break;
  }
  return names;
}

std::string category_of(const TokenAnnotation& a, CategoryField field) {
  switch (field) {
    case CategoryField::Pos:
      return std::string(to_string(pos_class(a.pos)));
    case CategoryField::Ne:
      return std::string(to_string(a.ne));
    case CategoryField::Subjectivity:
      return std::string(to_string(a.subjectivity));
  }
  return {};
}

double percent(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

}  // namespace

std::vector<CategoryShare> distribution_by_category(std::span<const Document> docs, CategoryField field,
                                                    TokenSide side, const FallbackAnnotator* fallback) {
  std::vector<CategoryShare> shares;
  std::unordered_map<std::string, std::size_t> index;
  for (std::string& name : category_names(field)) {
    index[name] = shares.size();
    shares.push_back({std::move(name), 0, 0.0});
  }
  std::size_t total = 0;
  for (const Document& doc : docs) {
    const Tokens& tokens = side == TokenSide::Abstract ? doc.abstract_tokens : doc.text_tokens;
    std::vector<TokenAnnotation> computed;
    const std::vector<TokenAnnotation>* anns = nullptr;
    if (doc.annotations) {
      anns = side == TokenSide::Abstract ? &doc.annotations->abstract : &doc.annotations->text;
    } else if (fallback) {
      computed = fallback->annotate(tokens);
      anns = &computed;
    } else {
      throw std::invalid_argument("distribution_by_category: document '" + doc.id +
                                  "' has no annotations and no fallback annotator is enabled");
    }
    for (const TokenAnnotation& a : *anns) {
      ++shares[index.at(category_of(a, field))].count;
      ++total;
    }
  }
  for (CategoryShare& s : shares) s.percent = percent(s.count, total);
  return shares;
}

BreakdownReport gold_token_breakdown(std::span<const Tokens> gold, std::span<const Tokens> outputs,
                                     std::span<const Tokens> inputs,
                                     const std::unordered_set<std::string>& training_abstract_vocab) {
  if (gold.size() != outputs.size() || gold.size() != inputs.size()) {
    throw std::invalid_argument("gold_token_breakdown: " + std::to_string(gold.size()) + " gold, " +
                                std::to_string(outputs.size()) + " outputs, " + std::to_string(inputs.size()) +
                                " inputs");
  }
  std::array<std::size_t, 5> counts{};  // in-gen, in-mis, out-gen, out-mis, unseen
  std::size_t total = 0;
  for (std::size_t d = 0; d < gold.size(); ++d) {
    std::unordered_map<std::string, std::size_t> available;
    for (const std::string& t : outputs[d]) ++available[t];
    const std::unordered_set<std::string> input(inputs[d].begin(), inputs[d].end());
    for (const std::string& t : gold[d]) {
      ++total;
      auto it = available.find(t);
      const bool generated = it != available.end() && it->second > 0;
      if (generated) --it->second;
      if (!training_abstract_vocab.contains(t)) {
        ++counts[4];
        continue;
      }
      const std::size_t base = input.contains(t) ? 0 : 2;
      ++counts[base + (generated ? 0 : 1)];
    }
  }
  BreakdownReport r;
  r.gold_tokens = total;
  r.seen_in_input_generated = percent(counts[0], total);
  r.seen_in_input_missed = percent(counts[1], total);
  r.seen_in_input_total = percent(counts[0] + counts[1], total);
  r.seen_not_in_input_generated = percent(counts[2], total);
  r.seen_not_in_input_missed = percent(counts[3], total);
  r.seen_not_in_input_total = percent(counts[2] + counts[3], total);
  r.unseen = percent(counts[4], total);
  return r;
}

std::unordered_set<std::string> abstract_vocabulary(std::span<const Document> docs) {
  std::unordered_set<std::string> vocab;
  for (const Document& doc : docs) vocab.insert(doc.abstract_tokens.begin(), doc.abstract_tokens.end());
  return vocab;
}

AttentionTrace output_attention(const DecodeResult& result) {
  AttentionTrace trace;
  for (std::size_t i = 0; i < result.ids.size(); ++i) trace.push_back(result.trace.at(i).attention);
  return trace;
}

std::size_t argmax_position(std::span<const double> attention) {
  if (attention.empty()) throw std::invalid_argument("argmax_position: empty attention row");
  std::size_t best = 0;
  for (std::size_t i = 1; i < attention.size(); ++i) {
    if (attention[i] > attention[best]) best = i;
  }
  return best;
}

namespace {

void check_row(std::span<const double> row, std::size_t input_len, std::size_t doc) {
  if (row.size() != input_len) {
    throw std::invalid_argument("attention trace " + std::to_string(doc) + ": row covers " +
                                std::to_string(row.size()) + " positions but the input has " +
                                std::to_string(input_len) + " tokens");
  }
}

}  // namespace

AttentionReport attention_categorize(std::span<const AttentionTrace> traces, std::span<const AnnotatedInput> inputs) {
  if (traces.size() != inputs.size()) {
    throw std::invalid_argument("attention_categorize: " + std::to_string(traces.size()) + " traces but " +
                                std::to_string(inputs.size()) + " inputs");
  }
  std::size_t steps = 0, person = 0, org = 0, loc = 0, entities = 0, noun = 0, verb = 0, pos = 0, neg = 0;
  for (std::size_t d = 0; d < traces.size(); ++d) {
    const AnnotatedInput& input = inputs[d];
    if (input.annotations.size() != input.tokens.size()) {
      throw std::invalid_argument("attention_categorize: input " + std::to_string(d) +
                                  " annotations are not aligned with its tokens");
    }
    for (const std::vector<double>& row : traces[d]) {
      check_row(row, input.tokens.size(), d);
      const TokenCategory c = categorize(input.annotations[argmax_position(row)]);
      ++steps;
      person += c.ne == EntityType::Person;
      org += c.ne == EntityType::Organization;
      loc += c.ne == EntityType::Location;
      entities += c.ne != EntityType::None;
      noun += c.pos == PosClass::Noun;
      verb += c.pos == PosClass::Verb;
      pos += c.subjectivity == Subjectivity::StrongPositive;
      neg += c.subjectivity == Subjectivity::StrongNegative;
    }
  }
  AttentionReport r;
  r.output_tokens = steps;
  r.person = percent(person, steps);
  r.organization = percent(org, steps);
  r.location = percent(loc, steps);
  r.all_entities = percent(entities, steps);
  r.noun = percent(noun, steps);
  r.verb = percent(verb, steps);
  r.positive = percent(pos, steps);
  r.negative = percent(neg, steps);
  return r;
}

double summary_worthy_rate(std::span<const AttentionTrace> traces, std::span<const Tokens> inputs,
                           std::span<const Tokens> gold) {
  if (traces.size() != inputs.size() || traces.size() != gold.size()) {
    throw std::invalid_argument("summary_worthy_rate: traces, inputs and gold abstracts differ in count");
  }
  std::size_t steps = 0, worthy = 0;
  for (std::size_t d = 0; d < traces.size(); ++d) {
    const std::unordered_set<std::string> abstract(gold[d].begin(), gold[d].end());
    for (const std::vector<double>& row : traces[d]) {
      check_row(row, inputs[d].size(), d);
      ++steps;
      if (abstract.contains(inputs[d][argmax_position(row)])) ++worthy;
    }
  }
  return steps == 0 ? 0.0 : static_cast<double>(worthy) / static_cast<double>(steps);
}

}  // namespace pgsum
