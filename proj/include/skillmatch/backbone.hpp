#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "skillmatch/attention.hpp"
#include "skillmatch/corpus.hpp"
#include "skillmatch/tensor.hpp"
#include "skillmatch/tokenizer.hpp"

namespace skillmatch {

class BackboneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BackboneConfig {
  std::size_t d_model = 128;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t ff_dim = 512;
  std::size_t vocab_size = 32768;
  std::size_t max_section_tokens = 128;
  std::uint64_t seed = 17;

  bool operator==(const BackboneConfig&) const = default;
};

// Frozen per-token section encoder: one output row per input token, no pooling.
class Backbone {
 public:
  virtual ~Backbone() = default;

  virtual std::size_t d_model() const = 0;
  // Token embeddings of section `section` (registry position) of `doc`.
  virtual Tensor<float> encode_section(const Document& doc, std::size_t section) const = 0;
  // Hash of every frozen weight; unchanged for the backbone's whole lifetime.
  virtual std::uint64_t checksum() const = 0;

  std::vector<Tensor<float>> encode_sections(const Document& doc) const;
};

// Deterministic random-weight encoder over hashed tokens.
//
// Dialect words listed in the lexicon are mapped to the token id of their
// latent word before the embedding lookup, so documents that only differ by
// dialect encode identically.
class StubBackbone final : public Backbone {
 public:
  explicit StubBackbone(BackboneConfig config = {}, Lexicon lexicon = {});

  std::size_t d_model() const override { return config_.d_model; }
  Tensor<float> encode_section(const Document& doc, std::size_t section) const override;
  std::uint64_t checksum() const override;

  // Embedding lookup + positional encoding (restarting at 0) + frozen blocks.
  Tensor<float> encode_tokens(const TokenSequence& tokens) const;
  TokenSequence tokenize(std::string_view text) const;
  // Applies the dialect -> latent id map.
  TokenSequence to_latent(TokenSequence tokens) const;

  const BackboneConfig& config() const { return config_; }
  const Lexicon& lexicon() const { return lexicon_; }
  const Tokenizer& tokenizer() const { return tokenizer_; }

 private:
  BackboneConfig config_;
  Lexicon lexicon_;
  Tokenizer tokenizer_;
  std::unordered_map<TokenId, TokenId> alias_;
  Tensor<float> embedding_;
  Tensor<float> positional_;
  std::vector<AttentionParams<float>> layers_;
};

// Sinusoidal position table [max_len x d_model].
Tensor<float> sinusoidal_positions(std::size_t max_len, std::size_t d_model);

struct PrecomputedEntry {
  std::string doc_id;
  std::string section;
  Tensor<float> rows;
};

// Serves stored token matrices keyed by (document id, section label).
class PrecomputedBackbone final : public Backbone {
 public:
  // Throws BackboneError when the stored width differs from `expected_d_model`
  // (0 accepts any width).
  static std::shared_ptr<PrecomputedBackbone> load(const std::filesystem::path& path,
                                                   std::size_t expected_d_model = 0);

  PrecomputedBackbone(std::size_t d_model, std::vector<PrecomputedEntry> entries);

  std::size_t d_model() const override { return d_model_; }
  Tensor<float> encode_section(const Document& doc, std::size_t section) const override;
  std::uint64_t checksum() const override { return checksum_; }

  const Tensor<float>& lookup(const std::string& doc_id, const std::string& section) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::size_t d_model_;
  std::map<std::pair<std::string, std::string>, Tensor<float>> entries_;
  std::uint64_t checksum_;
};

// File layout: "SMPB", u32 version, u64 header length, JSON header
// {"d_model", "entries":[{"doc_id","section","offset","rows"}]}, u64 float
// count, then the little-endian float32 matrices; offsets count floats from
// the blob start.
void write_precomputed(const std::filesystem::path& path, std::size_t d_model,
                       const std::vector<PrecomputedEntry>& entries);

}  // namespace skillmatch
