#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "pgsum/analysis.hpp"
#include "pgsum/random.hpp"

using namespace pgsum;

namespace {

TokenAnnotation ann(std::string pos, EntityType ne = EntityType::None, Subjectivity s = Subjectivity::None) {
  return {std::move(pos), ne, s};
}

Document doc_with(Tokens text, Tokens abstract) {
  Document d;
  d.text_tokens = std::move(text);
  d.abstract_tokens = std::move(abstract);
  return d;
}

bool has(const Tokens& v, const std::string& w) { return std::find(v.begin(), v.end(), w) != v.end(); }

double pct(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

// Random fixtures over a small alphabet so that reuse, ties and repeats are common.
const std::vector<std::string> kTags{"NN", "NNS", "NNP", "VB", "VBD", "JJ", "RB", "DT", "NOUN", "VERB", "ADJ", "ADV", "."};

Tokens random_tokens(Rng& rng, std::size_t max_len) {
  Tokens t(rng.below(max_len + 1));
  for (auto& w : t) w = std::string(1, static_cast<char>('a' + rng.below(6)));
  return t;
}

TokenAnnotation random_annotation(Rng& rng) {
  return {kTags[rng.below(kTags.size())], static_cast<EntityType>(rng.below(5)),
          static_cast<Subjectivity>(rng.below(3))};
}

std::vector<Document> random_docs(Rng& rng) {
  std::vector<Document> docs(1 + rng.below(20));
  for (Document& d : docs) {
    d.text_tokens = random_tokens(rng, 12);
    d.abstract_tokens = random_tokens(rng, 6);
    Annotations a;
    for (std::size_t i = 0; i < d.text_tokens.size(); ++i) a.text.push_back(random_annotation(rng));
    for (std::size_t i = 0; i < d.abstract_tokens.size(); ++i) a.abstract.push_back(random_annotation(rng));
    d.annotations = a;
  }
  return docs;
}

// Attention rows with deliberate ties.
AttentionTrace random_trace(Rng& rng, std::size_t input_len, std::size_t steps) {
  AttentionTrace t(steps, std::vector<double>(input_len));
  for (auto& row : t) {
    for (double& x : row) x = static_cast<double>(rng.below(4));
  }
  return t;
}

std::size_t brute_argmax(const std::vector<double>& row) {
  double best = row[0];
  for (double x : row) best = std::max(best, x);
  for (std::size_t i = 0;; ++i) {
    if (row[i] == best) return i;
  }
}

bool brute_is_noun(const std::string& tag) {
  return tag == "NN" || tag == "NNS" || tag == "NNP" || tag == "NNPS" || tag == "NOUN" || tag == "PROPN";
}
bool brute_is_verb(const std::string& tag) {
  return tag == "VB" || tag == "VBD" || tag == "VBG" || tag == "VBN" || tag == "VBP" || tag == "VBZ" || tag == "VERB";
}

}  // namespace

// --- categories -----------------------------------------------------------------

TEST(PosClassTest, PennAndUniversalTags) {
  EXPECT_EQ(pos_class("NNS"), PosClass::Noun);
  EXPECT_EQ(pos_class("PROPN"), PosClass::Noun);
  EXPECT_EQ(pos_class("VBZ"), PosClass::Verb);
  EXPECT_EQ(pos_class("JJR"), PosClass::Adjective);
  EXPECT_EQ(pos_class("ADV"), PosClass::Adverb);
  EXPECT_EQ(pos_class("DT"), PosClass::Other);
  EXPECT_EQ(parse_pos_class("verb"), PosClass::Verb);
  EXPECT_FALSE(parse_pos_class("VERB"));
}

// --- reuse rate -----------------------------------------------------------------

TEST(ReuseRate, HandCounts) {
  const std::vector<Document> all{doc_with({"a", "b", "c"}, {"c", "a", "a"})};
  EXPECT_EQ(reuse_rate(all), 1.0);
  const std::vector<Document> half{doc_with({"x", "q"}, {"x", "y"})};
  EXPECT_EQ(reuse_rate(half), 0.5);
  EXPECT_EQ(reuse_rate(std::vector<Document>{}), 0.0);
  // Only the document's own text counts.
  const std::vector<Document> two{doc_with({"a"}, {"b"}), doc_with({"b"}, {"a"})};
  EXPECT_EQ(reuse_rate(two), 0.0);
}

TEST(ReuseRate, PosFilterNeedsAnnotations) {
  Document d = doc_with({"run", "dog"}, {"dog", "runs"});
  EXPECT_THROW(reuse_rate(std::vector<Document>{d}, PosClass::Noun), std::invalid_argument);
  d.annotations = Annotations{{ann("VB"), ann("NN")}, {ann("NN"), ann("VBZ")}};
  EXPECT_EQ(reuse_rate(std::vector<Document>{d}, PosClass::Noun), 1.0);
  EXPECT_EQ(reuse_rate(std::vector<Document>{d}, PosClass::Verb), 0.0);
  EXPECT_EQ(reuse_rate(std::vector<Document>{d}, PosClass::Adverb), 0.0);
}

TEST(ReuseRate, MatchesBruteForceRecount) {
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const auto docs = random_docs(rng);
    for (int filter = -1; filter < 5; ++filter) {
      std::size_t total = 0, reused = 0;
      for (const Document& d : docs) {
        for (std::size_t i = 0; i < d.abstract_tokens.size(); ++i) {
          if (filter >= 0 && pos_class(d.annotations->abstract[i].pos) != static_cast<PosClass>(filter)) continue;
          ++total;
          if (has(d.text_tokens, d.abstract_tokens[i])) ++reused;
        }
      }
      const double want = total == 0 ? 0.0 : static_cast<double>(reused) / static_cast<double>(total);
      const auto f = filter < 0 ? std::nullopt : std::optional<PosClass>(static_cast<PosClass>(filter));
      EXPECT_EQ(reuse_rate(docs, f), want);
    }
  }
}

// --- distributions --------------------------------------------------------------

TEST(Distribution, HandCounts) {
  Document d = doc_with({"a", "b", "c", "d"}, {"x"});
  d.annotations = Annotations{{ann("NN"), ann("NNS"), ann("NN"), ann("VB")}, {ann("NN")}};
  const auto shares = distribution_by_category(std::vector<Document>{d}, CategoryField::Pos, TokenSide::Text);
  ASSERT_EQ(shares.size(), 5u);
  EXPECT_EQ(shares[0].category, "noun");
  EXPECT_EQ(shares[0].percent, 75.0);
  EXPECT_EQ(shares[1].category, "verb");
  EXPECT_EQ(shares[1].percent, 25.0);
  const auto abs = distribution_by_category(std::vector<Document>{d}, CategoryField::Pos, TokenSide::Abstract);
  EXPECT_EQ(abs[0].percent, 100.0);
}

TEST(Distribution, StrongSubjectiveShare) {
  // 2 lexicon hits among 50 tokens.
  Document d;
  Annotations a;
  for (int i = 0; i < 50; ++i) {
    d.text_tokens.push_back("w" + std::to_string(i));
    a.text.push_back(ann("NN", EntityType::None,
                         i == 7 ? Subjectivity::StrongPositive : i == 30 ? Subjectivity::StrongNegative
                                                                         : Subjectivity::None));
  }
  d.annotations = a;
  const auto s = distribution_by_category(std::vector<Document>{d}, CategoryField::Subjectivity, TokenSide::Text);
  EXPECT_EQ(s[0].percent + s[1].percent, 4.0);
  EXPECT_EQ(s[2].percent, 96.0);
}

TEST(Distribution, MissingAnnotationsNeedFallback) {
  const std::vector<Document> docs{doc_with({"The", "Smith"}, {"smith"})};
  EXPECT_THROW(distribution_by_category(docs, CategoryField::Ne, TokenSide::Text), std::invalid_argument);
  const FallbackAnnotator fallback;
  const auto s = distribution_by_category(docs, CategoryField::Ne, TokenSide::Text, &fallback);
  double total = 0;
  for (const auto& c : s) total += c.percent;
  EXPECT_NEAR(total, 100.0, 1e-9);
}

TEST(Distribution, MatchesBruteForceRecount) {
  Rng rng(2);
  const std::vector<std::string> ne_names{"PERSON", "ORGANIZATION", "LOCATION", "OTHER", "NONE"};
  for (int trial = 0; trial < 200; ++trial) {
    const auto docs = random_docs(rng);
    for (TokenSide side : {TokenSide::Abstract, TokenSide::Text}) {
      for (CategoryField field : {CategoryField::Pos, CategoryField::Ne, CategoryField::Subjectivity}) {
        const auto shares = distribution_by_category(docs, field, side);
        std::size_t total = 0;
        for (const Document& d : docs) total += (side == TokenSide::Text ? d.text_tokens : d.abstract_tokens).size();
        double sum = 0.0;
        for (std::size_t k = 0; k < shares.size(); ++k) {
          std::size_t count = 0;
          for (const Document& d : docs) {
            for (const TokenAnnotation& a : side == TokenSide::Text ? d.annotations->text : d.annotations->abstract) {
              if (field == CategoryField::Pos) count += pos_class(a.pos) == static_cast<PosClass>(k);
              if (field == CategoryField::Ne) count += a.ne == static_cast<EntityType>(k);
              if (field == CategoryField::Subjectivity) count += a.subjectivity == static_cast<Subjectivity>(k);
            }
          }
          EXPECT_EQ(shares[k].count, count);
          EXPECT_EQ(shares[k].percent, pct(count, total));
          sum += shares[k].percent;
        }
        if (field == CategoryField::Ne) EXPECT_EQ(shares[0].category, to_string(EntityType::Person));
        if (total > 0) EXPECT_NEAR(sum, 100.0, 0.1);
      }
    }
  }
}

// --- gold-token breakdown ---------------------------------------------------------

TEST(Breakdown, PerfectOutput) {
  const std::vector<Tokens> gold{{"a", "b", "a"}}, inputs{{"a", "b", "c"}};
  const BreakdownReport r = gold_token_breakdown(gold, gold, inputs, {"a", "b"});
  EXPECT_EQ(r.seen_in_input_generated, 100.0);
  EXPECT_EQ(r.seen_in_input_missed, 0.0);
  EXPECT_EQ(r.seen_not_in_input_total, 0.0);
  EXPECT_EQ(r.unseen, 0.0);
  EXPECT_EQ(r.gold_tokens, 3u);
}

TEST(Breakdown, HandClassification) {
  const std::vector<Tokens> gold{{"a", "b"}}, outputs{{"a"}}, inputs{{"a", "z"}};
  const BreakdownReport r = gold_token_breakdown(gold, outputs, inputs, {"a", "b"});
  EXPECT_EQ(r.seen_in_input_generated, 50.0);
  EXPECT_EQ(r.seen_in_input_missed, 0.0);
  EXPECT_EQ(r.seen_not_in_input_generated, 0.0);
  EXPECT_EQ(r.seen_not_in_input_missed, 50.0);
  EXPECT_EQ(r.unseen, 0.0);
}

TEST(Breakdown, UnseenRegardlessOfOutput) {
  const std::vector<Tokens> gold{{"new", "a"}}, outputs{{"new", "a"}}, inputs{{"new"}};
  const BreakdownReport r = gold_token_breakdown(gold, outputs, inputs, {"a"});
  EXPECT_EQ(r.unseen, 50.0);
  EXPECT_EQ(r.seen_not_in_input_generated, 50.0);
}

TEST(Breakdown, OutputOccurrencesAreClipped) {
  const std::vector<Tokens> gold{{"a", "a", "a"}}, outputs{{"a"}}, inputs{{"a"}};
  const BreakdownReport r = gold_token_breakdown(gold, outputs, inputs, {"a"});
  EXPECT_NEAR(r.seen_in_input_generated, 100.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.seen_in_input_missed, 200.0 / 3.0, 1e-12);
}

TEST(Breakdown, RejectsMisalignment) {
  const std::vector<Tokens> two{{"a"}, {"b"}}, one{{"a"}};
  EXPECT_THROW(gold_token_breakdown(two, one, two, {}), std::invalid_argument);
  EXPECT_THROW(gold_token_breakdown(two, two, one, {}), std::invalid_argument);
}

TEST(Breakdown, MatchesBruteForceRecount) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    std::vector<Tokens> gold(n), outputs(n), inputs(n);
    for (std::size_t d = 0; d < n; ++d) {
      gold[d] = random_tokens(rng, 8);
      outputs[d] = random_tokens(rng, 8);
      inputs[d] = random_tokens(rng, 10);
    }
    Tokens seen_list;
    std::unordered_set<std::string> seen;
    for (char c = 'a'; c < 'g'; ++c) {
      if (rng.chance(0.7)) {
        seen_list.emplace_back(1, c);
        seen.insert(seen_list.back());
      }
    }
    std::size_t in_gen = 0, in_mis = 0, out_gen = 0, out_mis = 0, unseen = 0, total = 0;
    for (std::size_t d = 0; d < n; ++d) {
      Tokens remaining = outputs[d];
      for (const std::string& t : gold[d]) {
        ++total;
        auto it = std::find(remaining.begin(), remaining.end(), t);
        const bool gen = it != remaining.end();
        if (gen) remaining.erase(it);
        if (!has(seen_list, t)) ++unseen;
        else if (has(inputs[d], t)) ++(gen ? in_gen : in_mis);
        else ++(gen ? out_gen : out_mis);
      }
    }
    const BreakdownReport r = gold_token_breakdown(gold, outputs, inputs, seen);
    EXPECT_EQ(r.gold_tokens, total);
    EXPECT_EQ(r.seen_in_input_generated, pct(in_gen, total));
    EXPECT_EQ(r.seen_in_input_missed, pct(in_mis, total));
    EXPECT_EQ(r.seen_in_input_total, pct(in_gen + in_mis, total));
    EXPECT_EQ(r.seen_not_in_input_generated, pct(out_gen, total));
    EXPECT_EQ(r.seen_not_in_input_missed, pct(out_mis, total));
    EXPECT_EQ(r.seen_not_in_input_total, pct(out_gen + out_mis, total));
    EXPECT_EQ(r.unseen, pct(unseen, total));
    if (total > 0) {
      EXPECT_NEAR(r.seen_in_input_generated + r.seen_in_input_missed + r.seen_not_in_input_generated +
                      r.seen_not_in_input_missed + r.unseen,
                  100.0, 0.1);
      EXPECT_NEAR(r.seen_in_input_total + r.seen_not_in_input_total + r.unseen, 100.0, 0.1);
    }
  }
}

TEST(Breakdown, AbstractVocabulary) {
  const std::vector<Document> docs{doc_with({"t"}, {"a", "b"}), doc_with({"u"}, {"b", "c"})};
  EXPECT_EQ(abstract_vocabulary(docs), (std::unordered_set<std::string>{"a", "b", "c"}));
}

// --- attention ------------------------------------------------------------------

TEST(Attention, SinglePersonPeak) {
  const std::vector<AttentionTrace> traces{{{0.1, 0.9}}};
  const std::vector<AnnotatedInput> inputs{{{"the", "smith"}, {ann("DT"), ann("NNP", EntityType::Person)}}};
  const AttentionReport r = attention_categorize(traces, inputs);
  EXPECT_EQ(r.person, 100.0);
  EXPECT_EQ(r.all_entities, 100.0);
  EXPECT_EQ(r.organization, 0.0);
  EXPECT_EQ(r.output_tokens, 1u);
}

TEST(Attention, IndependentAxesTally) {
  const std::vector<AnnotatedInput> inputs{{{"film", "book", "wrote", "jones"},
                                            {ann("NN"), ann("NN"), ann("VBD"), ann("NNP", EntityType::Person)}}};
  const std::vector<AttentionTrace> traces{{
      {0.7, 0.1, 0.1, 0.1},
      {0.1, 0.7, 0.1, 0.1},
      {0.1, 0.1, 0.7, 0.1},
      {0.1, 0.1, 0.1, 0.7},
  }};
  const AttentionReport r = attention_categorize(traces, inputs);
  EXPECT_EQ(r.noun, 75.0);
  EXPECT_EQ(r.verb, 25.0);
  EXPECT_EQ(r.person, 25.0);
  EXPECT_EQ(r.all_entities, 25.0);
}

TEST(Attention, UniformRowPicksPositionZero) {
  EXPECT_EQ(argmax_position(std::vector<double>{0.25, 0.25, 0.25, 0.25}), 0u);
  EXPECT_EQ(argmax_position(std::vector<double>{0.1, 0.45, 0.45}), 1u);
  EXPECT_THROW(argmax_position(std::vector<double>{}), std::invalid_argument);
}

TEST(Attention, RejectsMisalignedTraces) {
  const std::vector<AnnotatedInput> inputs{{{"a", "b"}, {ann("NN"), ann("NN")}}};
  EXPECT_THROW(attention_categorize(std::vector<AttentionTrace>{{{0.3, 0.3, 0.4}}}, inputs), std::invalid_argument);
  EXPECT_THROW(attention_categorize(std::vector<AttentionTrace>{}, inputs), std::invalid_argument);
  const std::vector<Tokens> toks{{"a", "b"}}, gold{{"a"}};
  EXPECT_THROW(summary_worthy_rate(std::vector<AttentionTrace>{{{1.0}}}, toks, gold), std::invalid_argument);
}

TEST(Attention, OutputAttentionDropsStopStep) {
  DecodeResult r;
  r.ids = {5, 6};
  r.trace.resize(3);
  r.trace[0].attention = {1.0, 0.0};
  r.trace[1].attention = {0.0, 1.0};
  r.trace[2].attention = {0.5, 0.5};
  const AttentionTrace t = output_attention(r);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[1], (std::vector<double>{0.0, 1.0}));
}

TEST(SummaryWorthy, HandCounts) {
  const std::vector<Tokens> inputs{{"a", "b", "c", "d"}};
  const std::vector<AttentionTrace> traces{{
      {0.7, 0.1, 0.1, 0.1},
      {0.1, 0.7, 0.1, 0.1},
      {0.1, 0.1, 0.7, 0.1},
      {0.1, 0.1, 0.1, 0.7},
  }};
  EXPECT_EQ(summary_worthy_rate(traces, inputs, std::vector<Tokens>{{"a", "b", "c", "d"}}), 1.0);
  EXPECT_EQ(summary_worthy_rate(traces, inputs, std::vector<Tokens>{{"c", "zz"}}), 0.25);
  EXPECT_EQ(summary_worthy_rate(traces, inputs, std::vector<Tokens>{{"zz"}}), 0.0);
}

TEST(AttentionProperty, MatchesBruteForceRecount) {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    std::vector<AnnotatedInput> inputs(n);
    std::vector<AttentionTrace> traces(n);
    std::vector<Tokens> input_tokens(n), gold(n);
    for (std::size_t d = 0; d < n; ++d) {
      AnnotatedInput& in = inputs[d];
      in.tokens = random_tokens(rng, 10);
      if (in.tokens.empty()) in.tokens.push_back("a");
      for (std::size_t i = 0; i < in.tokens.size(); ++i) in.annotations.push_back(random_annotation(rng));
      traces[d] = random_trace(rng, in.tokens.size(), rng.below(6));
      input_tokens[d] = in.tokens;
      gold[d] = random_tokens(rng, 5);
    }
    std::size_t steps = 0, person = 0, org = 0, loc = 0, ents = 0, noun = 0, verb = 0, pos = 0, neg = 0, worthy = 0;
    for (std::size_t d = 0; d < n; ++d) {
      for (const auto& row : traces[d]) {
        const std::size_t i = brute_argmax(row);
        const TokenAnnotation& a = inputs[d].annotations[i];
        ++steps;
        if (a.ne == EntityType::Person) ++person;
        if (a.ne == EntityType::Organization) ++org;
        if (a.ne == EntityType::Location) ++loc;
        if (a.ne != EntityType::None) ++ents;
        if (brute_is_noun(a.pos)) ++noun;
        if (brute_is_verb(a.pos)) ++verb;
        if (a.subjectivity == Subjectivity::StrongPositive) ++pos;
        if (a.subjectivity == Subjectivity::StrongNegative) ++neg;
        if (has(gold[d], inputs[d].tokens[i])) ++worthy;
      }
    }
    const AttentionReport r = attention_categorize(traces, inputs);
    EXPECT_EQ(r.output_tokens, steps);
    EXPECT_EQ(r.person, pct(person, steps));
    EXPECT_EQ(r.organization, pct(org, steps));
    EXPECT_EQ(r.location, pct(loc, steps));
    EXPECT_EQ(r.all_entities, pct(ents, steps));
    EXPECT_EQ(r.noun, pct(noun, steps));
    EXPECT_EQ(r.verb, pct(verb, steps));
    EXPECT_EQ(r.positive, pct(pos, steps));
    EXPECT_EQ(r.negative, pct(neg, steps));
    for (double v : {r.person, r.organization, r.location, r.all_entities, r.noun, r.verb, r.positive, r.negative}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 100.0);
    }
    const double want = steps == 0 ? 0.0 : static_cast<double>(worthy) / static_cast<double>(steps);
    EXPECT_EQ(summary_worthy_rate(traces, input_tokens, gold), want);
  }
}

TEST(AttentionProperty, InvariantToRowRescaling) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    AnnotatedInput in;
    in.tokens = Tokens(1 + rng.below(8), "w");
    for (std::size_t i = 0; i < in.tokens.size(); ++i) in.annotations.push_back(random_annotation(rng));
    AttentionTrace trace = random_trace(rng, in.tokens.size(), 1 + rng.below(5));
    for (auto& row : trace) {
      for (double& x : row) x += rng.uniform(0.0, 0.01) * static_cast<double>(rng.below(2));
    }
    const std::vector<AnnotatedInput> inputs{in};
    const AttentionReport before = attention_categorize(std::vector<AttentionTrace>{trace}, inputs);
    AttentionTrace scaled = trace;
    const double k = rng.uniform(0.01, 100.0);
    for (double& x : scaled[rng.below(scaled.size())]) x *= k;
    const AttentionReport after = attention_categorize(std::vector<AttentionTrace>{scaled}, inputs);
    EXPECT_EQ(after.noun, before.noun);
    EXPECT_EQ(after.verb, before.verb);
    EXPECT_EQ(after.person, before.person);
    EXPECT_EQ(after.all_entities, before.all_entities);
    EXPECT_EQ(after.positive, before.positive);
    EXPECT_EQ(after.negative, before.negative);
  }
}
