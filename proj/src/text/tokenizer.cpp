#include "text/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "util/error.hpp"

namespace cellclip::text {

namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }
char lower(unsigned char c) { return c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c); }

}  // namespace

std::vector<std::string> split_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string word;
  bool smiles_next = false;
  std::size_t i = 0;
  while (i < s.size()) {
    if (is_space(static_cast<unsigned char>(s[i]))) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < s.size() && !is_space(static_cast<unsigned char>(s[end]))) ++end;
    const auto chunk = s.substr(i, end - i);
    i = end;
    if (smiles_next) {
      for (unsigned char c : chunk) out.emplace_back(1, lower(c));
      smiles_next = false;
      continue;
    }
    word.clear();
    for (unsigned char c : chunk) {
      if (is_punct(c)) {
        if (!word.empty()) out.push_back(word);
        word.clear();
        out.emplace_back(1, static_cast<char>(c));
      } else {
        word.push_back(lower(c));
      }
    }
    if (!word.empty()) out.push_back(word);
    const auto n = out.size();
    if (n >= 2 && out[n - 2] == "smiles" && out[n - 1] == ":") smiles_next = true;
  }
  return out;
}

Vocabulary::Vocabulary() {
  tokens_ = {"[pad]", "[unk]", "[cls]"};
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], i);
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus) {
  std::set<std::string> distinct;
  for (const auto& doc : corpus)
    for (auto& t : split_tokens(doc)) distinct.insert(std::move(t));
  Vocabulary v;
  for (const auto& t : distinct) {
    if (v.ids_.emplace(t, v.tokens_.size()).second) v.tokens_.push_back(t);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens) {
  Vocabulary v;
  if (tokens.size() < 3 || tokens[0] != "[pad]" || tokens[1] != "[unk]" || tokens[2] != "[cls]") {
    fail(Errc::format, "vocabulary must start with [pad], [unk], [cls]");
  }
  for (std::size_t i = 3; i < tokens.size(); ++i) {
    if (!v.ids_.emplace(tokens[i], v.tokens_.size()).second) fail(Errc::format, "duplicate vocabulary token '{}'", tokens[i]);
    v.tokens_.push_back(tokens[i]);
  }
  return v;
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::size_t TokenSequence::length() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

TokenSequence tokenize(std::string_view s, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len == 0) fail(Errc::invalid_argument, "max_len must be positive");
  TokenSequence seq;
  seq.ids.assign(max_len, Vocabulary::kPad);
  seq.mask.assign(max_len, false);
  seq.ids[0] = Vocabulary::kCls;
  seq.mask[0] = true;
  std::size_t pos = 1;
  for (const auto& t : split_tokens(s)) {
    if (pos == max_len) break;
    seq.ids[pos] = vocab.id(t);
    seq.mask[pos] = true;
    ++pos;
  }
  return seq;
}

}  // namespace cellclip::text
