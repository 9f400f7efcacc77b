// Template-based two-domain corpus for desk-scale experiments.
#include <array>
#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pgsum/corpus.hpp"
#include "pgsum/random.hpp"

namespace pgsum {

namespace {

using Bank = std::vector<std::string>;

const Bank kFirstNames = {"john", "mary", "david", "susan", "james", "linda", "robert", "karen",
                          "michael", "lisa", "william", "nancy", "richard", "laura", "thomas", "helen"};
const Bank kLastNames = {"smith", "johnson", "brown", "garcia", "miller", "davis", "wilson", "moore", "taylor",
                         "clark", "lewis", "walker", "hall", "young", "king", "wright", "lopez", "hill"};
const Bank kTeams = {"yankees", "mets", "giants", "jets", "knicks", "rangers", "nets", "devils", "islanders", "celtics"};
const Bank kSportsVenues = {"shea stadium", "yankee stadium", "giants stadium", "the garden", "fenway park"};
const Bank kCompanies = {"boeing", "chrysler", "xerox", "kodak", "pfizer", "verizon", "motorola", "alcoa"};
const Bank kProducts = {"aircraft", "cars", "copiers", "film", "drugs", "phones", "radios", "aluminum"};
const Bank kCities = {"boston", "chicago", "detroit", "houston", "denver", "atlanta", "seattle", "phoenix", "newark", "albany"};
const Bank kDays = {"monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"};
const Bank kBuildings = {"warehouse", "church", "school", "tenement", "factory", "garage"};
const Bank kJobActions = {"cut", "eliminate", "add"};
const Bank kSalesDirections = {"decline", "gain"};
const Bank kNeutralAdjectives = {"difficult", "necessary", "routine", "expected"};
const Bank kAdverbs = {"well", "hard", "carefully", "poorly"};

const Bank kEnsembles = {"new york philharmonic", "boston symphony orchestra", "cleveland orchestra",
                         "emerson quartet", "juilliard quartet", "american symphony orchestra"};
const Bank kComposers = {"mahler", "brahms", "mozart", "beethoven", "bartok", "verdi"};
const Bank kPieces = {"fifth symphony", "violin concerto", "requiem", "piano sonata", "string quartet", "cello suite"};
const Bank kConcertVenues = {"carnegie hall", "lincoln center", "town hall", "avery fisher hall", "alice tully hall"};
const Bank kTheaters = {"public theater", "lyceum theater", "atlantic theater", "signature theater"};
const Bank kTitles = {"the harbor", "silent river", "the last summer", "broken glass", "winter light",
                      "the long road", "paper moon", "blue city"};
const Bank kOccupations = {"lawyer", "teacher", "detective", "nurse", "widow", "soldier", "painter", "banker"};
const Bank kPublishers = {"knopf", "scribner", "viking", "doubleday"};

const Bank kPositive = {"radiant", "brilliant", "stirring", "superb", "glorious"};
const Bank kNegative = {"dull", "clumsy", "tedious", "lifeless", "awkward"};
const Bank kPositiveVerdicts = {"affecting", "masterly", "vivid"};
const Bank kNegativeVerdicts = {"uneven", "labored", "muddled"};

const std::map<std::string, std::string> kCritics = {
    {"music", "tommasini"}, {"books", "maslin"}, {"film", "scott"}, {"theater", "brantley"}};

const std::unordered_map<std::string, std::string> kLiteralPos = {
    {"defeated", "VBD"}, {"scored", "VBD"}, {"added", "VBD"}, {"won", "VBN"}, {"said", "VBD"}, {"played", "VBD"},
    {"makes", "VBZ"}, {"reported", "VBD"}, {"fell", "VBD"}, {"destroyed", "VBD"}, {"injured", "VBN"},
    {"left", "VBN"}, {"cited", "VBN"}, {"performed", "VBD"}, {"included", "VBD"}, {"responded", "VBD"},
    {"repeated", "VBN"}, {"follows", "VBZ"}, {"returns", "VBZ"}, {"runs", "VBZ"}, {"published", "VBN"},
    {"writes", "VBZ"}, {"directed", "VBN"}, {"plays", "VBZ"}, {"caught", "VBN"}, {"opens", "VBZ"},
    {"keeps", "VBZ"}, {"gives", "VBZ"}, {"opened", "VBD"}, {"stars", "VBZ"}, {"reviews", "VBZ"},
    {"defeat", "VBP"}, {"says", "VBZ"}, {"say", "VBP"}, {"destroys", "VBZ"}, {"featuring", "VBG"},
    {"starring", "VBG"}, {"returning", "VBG"}, {"moving", "VBG"}, {"will", "MD"}, {"would", "MD"},
    {"was", "VBD"}, {"is", "VBZ"}, {"were", "VBD"}, {"had", "VBD"}, {"been", "VBN"}, {"be", "VB"}, {"cut", "VB"},
    {"eliminate", "VB"}, {"add", "VB"}, {"sang", "VBD"}, {"closes", "VBZ"}, {"loses", "VBZ"},
    {"the", "DT"}, {"a", "DT"}, {"an", "DT"}, {"its", "PRP$"}, {"it", "PRP"}, {"which", "WDT"}, {"who", "WP"},
    {"on", "IN"}, {"at", "IN"}, {"for", "IN"}, {"of", "IN"}, {"in", "IN"}, {"with", "IN"}, {"by", "IN"},
    {"after", "IN"}, {"about", "IN"}, {"as", "IN"}, {"that", "IN"}, {"under", "IN"}, {"before", "IN"},
    {"to", "TO"}, {"and", "CC"}, {"also", "RB"}, {"long", "JJ"}, {"new", "JJ"}, {"next", "JJ"},
    {"straight", "JJ"}, {"quarterly", "JJ"}, {"chief", "JJ"}, {"homeless", "JJ"}, {"final", "JJ"},
    {".", "."}, {",", ","}, {";", ":"}, {"-", ":"}};

struct Slot {
  std::vector<std::string> tokens;
  EntityType ne = EntityType::None;
  std::string pos = "NN";
};

using Slots = std::map<std::string, Slot>;

std::vector<std::string> words_of(const std::string& phrase) { return tokenize(phrase); }

class Builder {
 public:
  Builder(Rng& rng, const SubjectivityLexicon& lexicon) : rng_(rng), lexicon_(lexicon) {}

  std::string pick(const Bank& bank) { return bank[rng_.below(bank.size())]; }
  std::string number(int lo, int hi) { return std::to_string(lo + static_cast<int>(rng_.below(static_cast<std::size_t>(hi - lo + 1)))); }

  Slot person() { return {{pick(kFirstNames), pick(kLastNames)}, EntityType::Person, "NNP"}; }
  Slot entity(const Bank& bank, EntityType ne) { return {words_of(pick(bank)), ne, "NNP"}; }
  Slot plain(const std::string& phrase, const std::string& pos) { return {words_of(phrase), EntityType::None, pos}; }

  // Expands "{slot}" references and literal words, producing tokens with annotations.
  void expand(const std::string& tmpl, const Slots& slots, std::vector<std::string>& tokens,
              std::vector<TokenAnnotation>& anns) const {
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
      std::size_t end = tmpl.find(' ', pos);
      if (end == std::string::npos) end = tmpl.size();
      const std::string word = tmpl.substr(pos, end - pos);
      pos = end + 1;
      if (word.empty()) continue;
      if (word.front() == '{') {
        const Slot& s = slots.at(word.substr(1, word.size() - 2));
        for (const auto& t : s.tokens) {
          tokens.push_back(t);
          anns.push_back({s.pos, s.ne, lexicon_.lookup(t)});
        }
      } else {
        auto it = kLiteralPos.find(word);
        tokens.push_back(word);
        anns.push_back({it == kLiteralPos.end() ? "NN" : it->second, EntityType::None, lexicon_.lookup(word)});
      }
    }
  }

 private:
  Rng& rng_;
  const SubjectivityLexicon& lexicon_;
};

struct Templates {
  std::string section;
  std::string text;
  std::string abstract;
};

Document make_news(Builder& b, Rng& rng, std::size_t index) {
  Slots s;
  Templates t;
  switch (rng.below(3)) {
    case 0: {
      std::string t1 = b.pick(kTeams), t2;
      do {
        t2 = b.pick(kTeams);
      } while (t2 == t1);
      s["team1"] = {{t1}, EntityType::Organization, "NNPS"};
      s["team2"] = {{t2}, EntityType::Organization, "NNPS"};
      s["venue"] = b.entity(kSportsVenues, EntityType::Location);
      s["player"] = b.person();
      s["player2"] = b.person();
      s["coach"] = b.person();
      s["day"] = b.plain(b.pick(kDays), "NNP");
      s["day2"] = b.plain(b.pick(kDays), "NNP");
      s["s1"] = b.plain(b.number(5, 9), "CD");
      s["s2"] = b.plain(b.number(1, 4), "CD");
      s["n"] = b.plain(b.number(10, 40), "CD");
      s["m"] = b.plain(b.number(2, 9), "CD");
      s["k"] = b.plain(b.number(2, 8), "CD");
      s["adv"] = b.plain(b.pick(kAdverbs), "RB");
      t.section = "sports";
      t.text =
          "the {team1} defeated the {team2} {s1} - {s2} on {day} at {venue} . {player} scored {n} points for the "
          "{team1} , and {player2} added {m} . the {team2} had won {k} straight games before the loss . {coach} , "
          "the {team1} coach , said the team played {adv} . the next game is on {day2} .";
      t.abstract = "{team1} defeat {team2} {s1} - {s2} on {day} at {venue} ; {player} scored {n} points .";
      break;
    }
    case 1: {
      s["company"] = b.entity(kCompanies, EntityType::Organization);
      s["city"] = b.entity(kCities, EntityType::Location);
      s["exec"] = b.person();
      s["day"] = b.plain(b.pick(kDays), "NNP");
      s["action"] = b.plain(b.pick(kJobActions), "VB");
      s["product"] = b.plain(b.pick(kProducts), "NNS");
      s["dir"] = b.plain(b.pick(kSalesDirections), "NN");
      s["adj"] = b.plain(b.pick(kNeutralAdjectives), "JJ");
      s["n"] = b.plain(b.number(100, 900), "CD");
      s["pct"] = b.plain(b.number(2, 30), "CD");
      s["m"] = b.plain(b.number(10, 90), "CD");
      t.section = "business";
      t.text =
          "{company} said on {day} that it would {action} {n} jobs at its {city} plant . the company , which makes "
          "{product} , reported a {dir} of {pct} percent in quarterly sales . {exec} , the chief executive , said "
          "the decision was {adj} . shares of {company} fell {m} cents .";
      t.abstract = "{company} will {action} {n} jobs at its {city} plant ; {exec} reported a {dir} of {pct} percent in sales .";
      break;
    }
    default: {
      s["building"] = b.plain(b.pick(kBuildings), "NN");
      s["city"] = b.entity(kCities, EntityType::Location);
      s["official"] = b.person();
      s["day"] = b.plain(b.pick(kDays), "NNP");
      s["n"] = b.plain(b.number(2, 20), "CD");
      s["m"] = b.plain(b.number(2, 12), "CD");
      s["year"] = b.plain(b.number(1990, 2003), "CD");
      t.section = "metro";
      t.text =
          "a fire destroyed a {building} in {city} on {day} , officials said . {n} people were injured and {m} "
          "families were left homeless . {official} , the fire chief , said the cause was under investigation . "
          "the {building} had been cited for violations in {year} .";
      t.abstract = "fire destroys {building} in {city} on {day} ; {n} people injured and {m} families left homeless , officials say .";
      break;
    }
  }
  Document doc;
  char id[32];
  std::snprintf(id, sizeof id, "news-%04zu", index);
  doc.id = id;
  doc.domain = Domain::News;
  doc.section = t.section;
  Annotations ann;
  b.expand(t.text, s, doc.text_tokens, ann.text);
  b.expand(t.abstract, s, doc.abstract_tokens, ann.abstract);
  doc.annotations = std::move(ann);
  return doc;
}

Document make_opinion(Builder& b, Rng& rng, std::size_t index) {
  Slots s;
  Templates t;
  const bool positive = rng.chance(0.5);
  s["adj"] = b.plain(b.pick(positive ? kPositive : kNegative), "JJ");
  s["verdict"] = b.plain(b.pick(positive ? kPositiveVerdicts : kNegativeVerdicts), "JJ");
  s["day"] = b.plain(b.pick(kDays), "NNP");
  s["day2"] = b.plain(b.pick(kDays), "NNP");
  switch (rng.below(4)) {
    case 0: {
      s["ensemble"] = b.entity(kEnsembles, EntityType::Organization);
      s["venue"] = b.entity(kConcertVenues, EntityType::Location);
      s["performer"] = b.person();
      s["composer"] = {{b.pick(kComposers)}, EntityType::Person, "NNP"};
      s["piece"] = b.plain(b.pick(kPieces), "NN");
      t.section = "music";
      t.text =
          "the {ensemble} performed the {composer} {piece} at {venue} on {day} , with {performer} as soloist . "
          "{performer} played with {adj} energy , and the audience responded with a long ovation . the concert "
          "will be repeated on {day2} .";
      t.abstract = "{critic} reviews {verdict} concert by {ensemble} at {venue} , featuring {performer} in {composer} {piece} .";
      break;
    }
    case 1: {
      s["author"] = b.person();
      s["title"] = b.entity(kTitles, EntityType::Other);
      s["occupation"] = b.plain(b.pick(kOccupations), "NN");
      s["city"] = b.entity(kCities, EntityType::Location);
      s["publisher"] = b.entity(kPublishers, EntityType::Organization);
      s["n"] = b.plain(b.number(5, 30), "CD");
      s["pages"] = b.plain(b.number(200, 480), "CD");
      t.section = "books";
      t.text =
          "the new novel by {author} , {title} , follows a {occupation} who returns to {city} after {n} years . the "
          "book runs {pages} pages and was published by {publisher} . {author} writes with {adj} precision about "
          "family and loss .";
      t.abstract = "{critic} reviews {verdict} book {title} by {author} , about {occupation} returning to {city} after {n} years .";
      break;
    }
    case 2: {
      s["title"] = b.entity(kTitles, EntityType::Other);
      s["director"] = b.person();
      s["actor"] = b.person();
      s["occupation"] = b.plain(b.pick(kOccupations), "NN");
      s["city"] = b.entity(kCities, EntityType::Location);
      t.section = "film";
      t.text =
          "in {title} , directed by {director} , {actor} plays a {occupation} caught in a scheme in {city} . the "
          "film opens on {day} . {director} keeps the story moving , and {actor} gives a {adj} performance .";
      t.abstract = "{critic} reviews {verdict} movie {title} , directed by {director} , starring {actor} as {occupation} in {city} .";
      break;
    }
    default: {
      s["title"] = b.entity(kTitles, EntityType::Other);
      s["playwright"] = b.person();
      s["actor"] = b.person();
      s["theater"] = b.entity(kTheaters, EntityType::Location);
      s["occupation"] = b.plain(b.pick(kOccupations), "NN");
      t.section = "theater";
      t.text =
          "{title} , the new play by {playwright} , opened on {day} at the {theater} . {actor} stars as a "
          "{occupation} who loses everything . the production is {adj} , and it closes on {day2} .";
      t.abstract = "{critic} reviews {verdict} play {title} by {playwright} at {theater} , starring {actor} as {occupation} .";
      break;
    }
  }
  s["critic"] = {{kCritics.at(t.section)}, EntityType::Person, "NNP"};
  Document doc;
  char id[32];
  std::snprintf(id, sizeof id, "opinion-%04zu", index);
  doc.id = id;
  doc.domain = Domain::Opinion;
  doc.section = t.section;
  Annotations ann;
  b.expand(t.text, s, doc.text_tokens, ann.text);
  b.expand(t.abstract, s, doc.abstract_tokens, ann.abstract);
  doc.annotations = std::move(ann);
  return doc;
}

}  // namespace

SubjectivityLexicon synthetic_lexicon() {
  SubjectivityLexicon lex;
  for (const Bank* bank : {&kPositive, &kPositiveVerdicts}) {
    for (const auto& w : *bank) lex.add(w, Subjectivity::StrongPositive);
  }
  for (const Bank* bank : {&kNegative, &kNegativeVerdicts}) {
    for (const auto& w : *bank) lex.add(w, Subjectivity::StrongNegative);
  }
  return lex;
}

std::vector<Document> generate_synthetic_corpus(std::size_t n_per_domain, std::uint64_t seed) {
  if (n_per_domain == 0) throw std::invalid_argument("generate_synthetic_corpus: n_per_domain must be >= 1");
  const SubjectivityLexicon lexicon = synthetic_lexicon();
  Rng rng(seed);
  Builder b(rng, lexicon);
  std::vector<Document> docs;
  docs.reserve(2 * n_per_domain);
  for (std::size_t i = 0; i < n_per_domain; ++i) docs.push_back(make_news(b, rng, i));
  for (std::size_t i = 0; i < n_per_domain; ++i) docs.push_back(make_opinion(b, rng, i));
  return docs;
}

std::vector<LeadDescription> generate_synthetic_extracts(std::size_t n, std::uint64_t seed) {
  const SubjectivityLexicon lexicon = synthetic_lexicon();
  Rng rng(seed);
  Builder b(rng, lexicon);
  std::vector<LeadDescription> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Document doc = rng.chance(0.5) ? make_news(b, rng, i) : make_opinion(b, rng, i);
    // Lead paragraph: the first two sentences.
    std::vector<std::string> lead;
    std::size_t sentences = 0;
    for (const auto& tok : doc.text_tokens) {
      lead.push_back(tok);
      if (is_sentence_terminator(tok) && ++sentences == 2) break;
    }
    const std::vector<std::string> description =
        rng.chance(0.71) ? first_sentence(lead) : doc.abstract_tokens;
    out.push_back({join_tokens(lead), join_tokens(description)});
  }
  return out;
}

}  // namespace pgsum
