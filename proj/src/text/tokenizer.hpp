#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cellclip::text {

// Lowercases, splits on whitespace and ASCII punctuation (each punctuation
// character is its own token) and splits the word following "smiles:" into
// single characters.
std::vector<std::string> split_tokens(std::string_view s);

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kCls = 2;

  Vocabulary();
  // Specials first, then the distinct corpus tokens in lexicographic order, so
  // the ids depend only on the corpus multiset.
  static Vocabulary build(std::span<const std::string> corpus);
  // Inverse of tokens(): specials followed by the ordinary tokens.
  static Vocabulary from_tokens(std::span<const std::string> tokens);

  std::size_t id(const std::string& token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t, std::less<>> ids_;
};

struct TokenSequence {
  std::vector<std::size_t> ids;  // always max_len long, PAD-filled
  std::vector<bool> mask;        // true on real tokens
  std::size_t length() const;    // number of real tokens
};

inline constexpr std::size_t kDefaultMaxLen = 128;

// [CLS] followed by the split tokens, truncated then padded to max_len.
TokenSequence tokenize(std::string_view s, const Vocabulary& vocab,
                       std::size_t max_len = kDefaultMaxLen);

}  // namespace cellclip::text
