#include "skillmatch/backbone.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "skillmatch/binary_io.hpp"
#include "skillmatch/random.hpp"

namespace skillmatch {

std::vector<Tensor<float>> Backbone::encode_sections(const Document& doc) const {
  std::vector<Tensor<float>> out;
  out.reserve(doc.sections.size());
  for (std::size_t s = 0; s < doc.sections.size(); ++s) out.push_back(encode_section(doc, s));
  return out;
}

Tensor<float> sinusoidal_positions(std::size_t max_len, std::size_t d_model) {
  Tensor<float> pe(max_len, d_model);
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d_model));
      const double angle = static_cast<double>(pos) * freq;
      pe(pos, i) = static_cast<float>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

StubBackbone::StubBackbone(BackboneConfig config, Lexicon lexicon)
    : config_(config),
      lexicon_(std::move(lexicon)),
      tokenizer_(config.vocab_size, config.max_section_tokens) {
  if (config_.d_model == 0 || config_.n_heads == 0 || config_.d_model % config_.n_heads != 0) {
    throw BackboneError("backbone: d_model must be a positive multiple of n_heads");
  }
  for (const auto& [surface, latent] : lexicon_) {
    alias_[tokenizer_.word_id(surface)] = tokenizer_.word_id(latent);
  }
  Rng rng(mix_seed(config_.seed, 0));
  embedding_ = Tensor<float>(config_.vocab_size, config_.d_model);
  for (auto& v : embedding_.values()) v = static_cast<float>(rng.normal());
  positional_ = sinusoidal_positions(config_.max_section_tokens, config_.d_model);
  const AttentionShape shape{config_.d_model, config_.n_heads, config_.ff_dim};
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    layers_.push_back(init_attention<float>(shape, mix_seed(config_.seed, 1 + l)));
  }
}

TokenSequence StubBackbone::tokenize(std::string_view text) const {
  return to_latent(tokenizer_.tokenize(text));
}

TokenSequence StubBackbone::to_latent(TokenSequence tokens) const {
  if (alias_.empty()) return tokens;
  for (auto& t : tokens.tokens) {
    if (auto it = alias_.find(t); it != alias_.end()) t = it->second;
  }
  return tokens;
}

Tensor<float> StubBackbone::encode_tokens(const TokenSequence& tokens) const {
  const std::size_t n = tokens.size();
  const std::size_t d = config_.d_model;
  if (n == 0) throw BackboneError("backbone: empty token sequence");
  if (n > config_.max_section_tokens) {
    throw BackboneError("backbone: sequence of " + std::to_string(n) + " tokens exceeds max_section_tokens " +
                        std::to_string(config_.max_section_tokens));
  }
  Tensor<float> x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const TokenId id = tokens.tokens[i];
    if (id >= config_.vocab_size) {
      throw BackboneError("backbone: token id " + std::to_string(id) + " outside vocabulary of size " +
                          std::to_string(config_.vocab_size));
    }
    const auto emb = embedding_.row(id);
    const auto pos = positional_.row(i);
    auto out = x.row(i);
    for (std::size_t c = 0; c < d; ++c) out[c] = emb[c] + pos[c];
  }
  if (layers_.empty()) return x;
  Tape<float> tape;
  Var<float> h = tape.constant(std::move(x));
  for (const auto& layer : layers_) h = attention_block(h, bind_constants(tape, layer), config_.n_heads);
  return h.value();
}

Tensor<float> StubBackbone::encode_section(const Document& doc, std::size_t section) const {
  if (section >= doc.sections.size()) {
    throw BackboneError("backbone: document " + doc.id + " has no section #" + std::to_string(section));
  }
  return encode_tokens(tokenize(doc.sections[section].text));
}

std::uint64_t StubBackbone::checksum() const {
  std::uint64_t h = skillmatch::checksum(embedding_);
  for (const auto& layer : layers_) {
    for (const auto* p : layer.parameters()) h = skillmatch::checksum(p->value, h);
  }
  return h;
}

namespace {

constexpr char kPrecomputedMagic[5] = "SMPB";
constexpr std::uint32_t kPrecomputedVersion = 1;

}  // namespace

PrecomputedBackbone::PrecomputedBackbone(std::size_t d_model, std::vector<PrecomputedEntry> entries)
    : d_model_(d_model) {
  std::uint64_t h = 1469598103934665603ULL;
  for (auto& e : entries) {
    if (e.rows.cols() != d_model_) {
      throw BackboneError("precomputed backbone: entry (" + e.doc_id + ", " + e.section + ") has width " +
                          std::to_string(e.rows.cols()) + ", expected " + std::to_string(d_model_));
    }
    if (e.rows.rows() == 0) {
      throw BackboneError("precomputed backbone: entry (" + e.doc_id + ", " + e.section + ") is empty");
    }
    entries_[{e.doc_id, e.section}] = std::move(e.rows);
  }
  for (const auto& [key, rows] : entries_) h = skillmatch::checksum(rows, h);
  checksum_ = h;
}

const Tensor<float>& PrecomputedBackbone::lookup(const std::string& doc_id, const std::string& section) const {
  auto it = entries_.find({doc_id, section});
  if (it == entries_.end()) {
    throw BackboneError("precomputed backbone: no embeddings for section '" + section + "' of document '" +
                        doc_id + "'");
  }
  return it->second;
}

Tensor<float> PrecomputedBackbone::encode_section(const Document& doc, std::size_t section) const {
  if (section >= doc.sections.size()) {
    throw BackboneError("backbone: document " + doc.id + " has no section #" + std::to_string(section));
  }
  return lookup(doc.id, doc.sections[section].label);
}

std::shared_ptr<PrecomputedBackbone> PrecomputedBackbone::load(const std::filesystem::path& path,
                                                               std::size_t expected_d_model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BackboneError("cannot open precomputed embeddings " + path.string());
  try {
    binio::expect_magic(in, kPrecomputedMagic, kPrecomputedVersion, "precomputed embedding");
    const auto header = nlohmann::json::parse(binio::get_string(in));
    const auto d_model = header.at("d_model").get<std::size_t>();
    if (expected_d_model != 0 && d_model != expected_d_model) {
      throw BackboneError("precomputed embeddings have width " + std::to_string(d_model) +
                          " but the model expects d_model " + std::to_string(expected_d_model));
    }
    const auto n_floats = binio::get<std::uint64_t>(in);
    std::vector<float> blob(n_floats);
    binio::get_bytes(in, blob.data(), n_floats * sizeof(float));
    std::vector<PrecomputedEntry> entries;
    for (const auto& e : header.at("entries")) {
      const auto offset = e.at("offset").get<std::uint64_t>();
      const auto rows = e.at("rows").get<std::uint64_t>();
      if (offset + rows * d_model > blob.size()) throw BackboneError("precomputed entry points past the blob");
      std::vector<float> data(blob.begin() + static_cast<std::ptrdiff_t>(offset),
                              blob.begin() + static_cast<std::ptrdiff_t>(offset + rows * d_model));
      entries.push_back({e.at("doc_id").get<std::string>(), e.at("section").get<std::string>(),
                         Tensor<float>(rows, d_model, std::move(data))});
    }
    return std::make_shared<PrecomputedBackbone>(d_model, std::move(entries));
  } catch (const nlohmann::json::exception& e) {
    throw BackboneError("malformed precomputed header in " + path.string() + ": " + e.what());
  } catch (const binio::FormatError& e) {
    throw BackboneError(path.string() + ": " + e.what());
  }
}

void write_precomputed(const std::filesystem::path& path, std::size_t d_model,
                       const std::vector<PrecomputedEntry>& entries) {
  nlohmann::json header;
  header["d_model"] = d_model;
  header["entries"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& e : entries) {
    if (e.rows.cols() != d_model) throw BackboneError("write_precomputed: entry width mismatch");
    header["entries"].push_back({{"doc_id", e.doc_id}, {"section", e.section}, {"offset", offset},
                                 {"rows", e.rows.rows()}});
    offset += e.rows.size();
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw BackboneError("cannot write " + path.string());
  binio::put_magic(out, kPrecomputedMagic, kPrecomputedVersion);
  binio::put_string(out, header.dump());
  binio::put<std::uint64_t>(out, offset);
  for (const auto& e : entries) binio::put_bytes(out, e.rows.data(), e.rows.size() * sizeof(float));
  if (!out) throw BackboneError("failed writing " + path.string());
}

}  // namespace skillmatch
