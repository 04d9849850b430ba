#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "skillmatch/checkpoint.hpp"
#include "skillmatch/index.hpp"

namespace skillmatch {

constexpr int kApiSchemaVersion = 1;

// Malformed request content (maps to HTTP 400).
class RequestError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RetrieveRequest {
  Document document;
  std::size_t k = 10;
  Filter filter;
  SearchMode mode = SearchMode::exact;
};

// {"document": {...}, "k": 10, "filter": {"category": "x", "language": ["fr", "es"]}, "mode": "exact"}
RetrieveRequest parse_retrieve_request(std::string_view json_text, const SectionRegistry& registry);
// {"document": {...}} or a bare document record.
Document parse_encode_request(std::string_view json_text, const SectionRegistry& registry);

std::string hits_to_json(const std::vector<SearchHit>& hits);
std::string embedding_to_json(const DocumentEmbedding& e);

// Encodes documents on the fly and queries the profile index. Immutable after
// construction, so one instance can serve concurrent requests.
class Retriever {
 public:
  Retriever(Checkpoint model, std::shared_ptr<const Backbone> backbone, std::shared_ptr<const VectorIndex> index);

  DocumentEmbedding encode(const Document& doc) const;
  std::vector<SearchHit> retrieve(const RetrieveRequest& request) const;

  const Checkpoint& model() const { return model_; }
  const VectorIndex& index() const { return *index_; }

 private:
  Checkpoint model_;
  std::shared_ptr<const Backbone> backbone_;
  std::shared_ptr<const VectorIndex> index_;
};

}  // namespace skillmatch
