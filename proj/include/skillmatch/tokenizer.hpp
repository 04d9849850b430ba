#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace skillmatch {

using TokenId = std::uint32_t;

struct TokenSequence {
  std::vector<TokenId> tokens;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const TokenSequence&) const = default;
};

// Deterministic hashed word-level tokenizer.
//
// Text is lowercased (ASCII), split on whitespace and ASCII punctuation, and
// each word is hashed into [2, vocab_size). Ids 0 and 1 are reserved for
// [CLS] and [END], which wrap every sequence. Sequences are truncated to
// max_section_tokens including both markers.
class Tokenizer {
 public:
  static constexpr TokenId kCls = 0;
  static constexpr TokenId kEnd = 1;

  explicit Tokenizer(std::size_t vocab_size = 32768, std::size_t max_section_tokens = 128);

  TokenSequence tokenize(std::string_view text) const;
  std::vector<std::string> words(std::string_view text) const;
  TokenId word_id(std::string_view word) const;

  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t max_section_tokens() const { return max_section_tokens_; }

 private:
  std::size_t vocab_size_;
  std::size_t max_section_tokens_;
};

}  // namespace skillmatch
