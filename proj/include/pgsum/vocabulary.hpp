#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pgsum {

using TokenId = std::size_t;

/// Closed word list. Ids 0-3 are reserved for padding, unknown words, and
/// the decoder's start and stop symbols.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kStart = 2;
  static constexpr TokenId kStop = 3;
  static constexpr std::size_t kReserved = 4;

  static constexpr std::string_view kPadWord = "[PAD]";
  static constexpr std::string_view kUnkWord = "[UNK]";
  static constexpr std::string_view kStartWord = "[START]";
  static constexpr std::string_view kStopWord = "[STOP]";

  /// Only the reserved entries.
  Vocabulary();
  /// Reserved entries followed by `words`, which must be distinct and must
  /// not repeat a reserved entry.
  explicit Vocabulary(std::span<const std::string> words);

  std::size_t size() const { return words_.size(); }
  bool contains(std::string_view word) const;
  /// Id of `word`, or kUnk.
  TokenId id(std::string_view word) const;
  const std::string& word(TokenId id) const { return words_.at(id); }
  const std::vector<std::string>& words() const { return words_; }

  /// One word per line, reserved entries included.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

bool is_reserved_word(std::string_view word);

}  // namespace pgsum
