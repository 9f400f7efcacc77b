#include "pgsum/vocabulary.hpp"

#include <fstream>
#include <stdexcept>

#include "pgsum/errors.hpp"

namespace pgsum {

bool is_reserved_word(std::string_view word) {
  return word == Vocabulary::kPadWord || word == Vocabulary::kUnkWord || word == Vocabulary::kStartWord ||
         word == Vocabulary::kStopWord;
}

Vocabulary::Vocabulary() {
  for (std::string_view w : {kPadWord, kUnkWord, kStartWord, kStopWord}) {
    index_.emplace(std::string(w), words_.size());
    words_.emplace_back(w);
  }
}

Vocabulary::Vocabulary(std::span<const std::string> words) : Vocabulary() {
  words_.reserve(kReserved + words.size());
  for (const std::string& w : words) {
    if (w.empty()) throw std::invalid_argument("vocabulary: empty word");
    if (!index_.emplace(w, words_.size()).second) {
      throw std::invalid_argument("vocabulary: duplicate or reserved word '" + w + "'");
    }
    words_.push_back(w);
  }
}

bool Vocabulary::contains(std::string_view word) const { return index_.contains(std::string(word)); }

TokenId Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write vocabulary file " + path.string());
  for (const std::string& w : words_) out << w << '\n';
  if (!out) throw DataError("failed writing vocabulary file " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read vocabulary file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (lines.size() < kReserved || lines[kPad] != kPadWord || lines[kUnk] != kUnkWord ||
      lines[kStart] != kStartWord || lines[kStop] != kStopWord) {
    throw DataError("vocabulary file " + path.string() + " does not start with the reserved entries");
  }
  try {
    return Vocabulary(std::span<const std::string>(lines).subspan(kReserved));
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace pgsum
