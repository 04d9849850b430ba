#include "skillmatch/tokenizer.hpp"

#include <stdexcept>

namespace skillmatch {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

}  // namespace

Tokenizer::Tokenizer(std::size_t vocab_size, std::size_t max_section_tokens)
    : vocab_size_(vocab_size), max_section_tokens_(max_section_tokens) {
  if (vocab_size_ < 3) throw std::invalid_argument("tokenizer: vocab_size must be >= 3");
  if (max_section_tokens_ < 2) throw std::invalid_argument("tokenizer: max_section_tokens must be >= 2");
}

std::vector<std::string> Tokenizer::words(std::string_view text) const {
  std::vector<std::string> out;
  std::string current;
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

TokenId Tokenizer::word_id(std::string_view word) const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : word) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return static_cast<TokenId>(2 + h % (vocab_size_ - 2));
}

TokenSequence Tokenizer::tokenize(std::string_view text) const {
  TokenSequence seq;
  seq.tokens.push_back(kCls);
  for (const auto& w : words(text)) {
    if (seq.tokens.size() + 1 >= max_section_tokens_) break;
    seq.tokens.push_back(word_id(w));
  }
  seq.tokens.push_back(kEnd);
  return seq;
}

}  // namespace skillmatch
