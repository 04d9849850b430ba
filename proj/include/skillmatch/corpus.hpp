#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace skillmatch {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed JSON; carries the 1-based line number.
class ParseError : public CorpusError {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public CorpusError {
 public:
  using CorpusError::CorpusError;
};

class ReferentialError : public CorpusError {
 public:
  using CorpusError::CorpusError;
};

class SplitError : public CorpusError {
 public:
  using CorpusError::CorpusError;
};

enum class DocumentKind { profile, proposal };

std::string_view to_string(DocumentKind kind);
DocumentKind parse_document_kind(std::string_view s);

// Fixed per-kind list of section labels. Order is canonical: it is the
// concatenation order used by the encoder.
struct SectionRegistry {
  std::vector<std::string> profile;
  std::vector<std::string> proposal;

  static SectionRegistry defaults();
  const std::vector<std::string>& for_kind(DocumentKind kind) const;
  bool operator==(const SectionRegistry&) const = default;
};

struct Section {
  std::string label;
  std::string text;
  bool operator==(const Section&) const = default;
};

struct Document {
  std::string id;
  DocumentKind kind = DocumentKind::profile;
  std::vector<Section> sections;  // registry order, one per registered label
  std::string category;
  std::string language;

  // Text of a section, or throws SchemaError for an unknown label.
  const std::string& section(std::string_view label) const;
  bool operator==(const Document&) const = default;
};

// Rebuilds `sections` in registry order: missing labels become empty text,
// unknown labels raise SchemaError.
Document normalize_document(Document doc, const SectionRegistry& registry);

enum class Label { positive, negative };

std::string_view to_string(Label label);

struct Interaction {
  std::string project_id;
  std::string freelancer_id;
  Label label = Label::positive;
  std::int64_t timestamp = 0;
  bool operator==(const Interaction&) const = default;
};

// Dialect surface word -> shared latent word.
using Lexicon = std::map<std::string, std::string>;

// Immutable set of documents and deduplicated interactions.
class Corpus {
 public:
  static constexpr int kSchemaVersion = 1;

  // Validates documents against the registry, checks that every interaction
  // references known documents, and keeps only the latest interaction per
  // (project, freelancer) pair; later records win timestamp ties.
  Corpus(SectionRegistry registry, std::vector<Document> documents,
         std::vector<Interaction> interactions, Lexicon lexicon = {});

  const SectionRegistry& registry() const { return registry_; }
  std::span<const Document> profiles() const { return profiles_; }
  std::span<const Document> proposals() const { return proposals_; }
  std::span<const Interaction> interactions() const { return interactions_; }
  const Lexicon& lexicon() const { return lexicon_; }

  const Document* profile(std::string_view id) const;
  const Document* proposal(std::string_view id) const;
  const Document& profile_at(std::string_view id) const;
  const Document& proposal_at(std::string_view id) const;

 private:
  SectionRegistry registry_;
  std::vector<Document> profiles_;
  std::vector<Document> proposals_;
  std::vector<Interaction> interactions_;
  Lexicon lexicon_;
  std::unordered_map<std::string, std::size_t> profile_index_;
  std::unordered_map<std::string, std::size_t> proposal_index_;
};

Corpus read_corpus(std::istream& in);
Corpus load_corpus(const std::filesystem::path& path);
void write_corpus(const Corpus& corpus, std::ostream& out);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Parses a single document record (as found in corpus files or request bodies).
Document parse_document_json(std::string_view json_text, const SectionRegistry& registry);

struct SplitPart {
  std::vector<Interaction> interactions;
  std::set<std::string> project_ids;
  std::set<std::string> freelancer_ids;
};

struct CorpusSplit {
  SplitPart train;
  SplitPart validation;
  SplitPart test;
};

// Interactions at or after `cutoff` form the test part. The earlier ones are
// shuffled with `seed` and round(n * val_ratio) of them go to validation.
CorpusSplit temporal_split(const Corpus& corpus, std::int64_t cutoff, double val_ratio,
                           std::uint64_t seed);

// Timestamp such that roughly `test_fraction` of interactions fall at or after it.
std::int64_t cutoff_for_test_fraction(const Corpus& corpus, double test_fraction);

// Comma/semicolon separated, trimmed, lowercased entries of every section whose
// label ends in "skills".
std::set<std::string> skill_terms(const Document& doc);

}  // namespace skillmatch
