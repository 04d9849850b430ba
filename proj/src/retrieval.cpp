#include "skillmatch/retrieval.hpp"

#include <json.hpp>

namespace skillmatch {

using nlohmann::json;

namespace {

json parse_body(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw RequestError(std::string("request body is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw RequestError("request body must be a JSON object");
  if (auto v = j.find("schema_version"); v != j.end() && *v != kApiSchemaVersion) {
    throw RequestError("unsupported schema_version " + v->dump() + " (server speaks " +
                       std::to_string(kApiSchemaVersion) + ")");
  }
  return j;
}

Document document_from(json doc, const SectionRegistry& registry, const char* default_kind) {
  if (!doc.is_object()) throw RequestError("'document' must be a JSON object");
  if (!doc.contains("id")) doc["id"] = "query";
  if (!doc.contains("kind")) doc["kind"] = default_kind;
  try {
    return parse_document_json(doc.dump(), registry);
  } catch (const CorpusError& e) {
    throw RequestError(std::string("invalid document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw RequestError(std::string("invalid document: ") + e.what());
  }
}

Filter filter_from(const json& j) {
  if (!j.is_object()) throw RequestError("'filter' must be an object of tag -> value or [values]");
  Filter f;
  for (const auto& [key, value] : j.items()) {
    if (value.is_string()) {
      f.where(key, {value.get<std::string>()});
    } else if (value.is_array()) {
      std::vector<std::string> values;
      for (const auto& v : value) {
        if (!v.is_string()) throw RequestError("filter values for '" + key + "' must be strings");
        values.push_back(v.get<std::string>());
      }
      f.where(key, std::move(values));
    } else {
      throw RequestError("filter value for '" + key + "' must be a string or an array of strings");
    }
  }
  return f;
}

}  // namespace

RetrieveRequest parse_retrieve_request(std::string_view json_text, const SectionRegistry& registry) {
  const json j = parse_body(json_text);
  auto doc = j.find("document");
  if (doc == j.end()) throw RequestError("missing field 'document'");
  RetrieveRequest r;
  r.document = document_from(*doc, registry, "proposal");
  if (auto k = j.find("k"); k != j.end()) {
    if (!k->is_number_integer() || k->get<std::int64_t>() < 1) throw RequestError("'k' must be a positive integer");
    r.k = k->get<std::size_t>();
  }
  if (auto f = j.find("filter"); f != j.end() && !f->is_null()) r.filter = filter_from(*f);
  if (auto m = j.find("mode"); m != j.end()) {
    if (!m->is_string()) throw RequestError("'mode' must be \"exact\" or \"approximate\"");
    try {
      r.mode = parse_search_mode(m->get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw RequestError(e.what());
    }
  }
  return r;
}

Document parse_encode_request(std::string_view json_text, const SectionRegistry& registry) {
  const json j = parse_body(json_text);
  if (auto doc = j.find("document"); doc != j.end()) return document_from(*doc, registry, "proposal");
  return document_from(j, registry, "proposal");
}

std::string hits_to_json(const std::vector<SearchHit>& hits) {
  json results = json::array();
  for (const auto& h : hits) results.push_back({{"doc_id", h.doc_id}, {"score", h.score}});
  return json{{"schema_version", kApiSchemaVersion}, {"results", std::move(results)}}.dump();
}

std::string embedding_to_json(const DocumentEmbedding& e) {
  return json{{"schema_version", kApiSchemaVersion},
              {"doc_id", e.doc_id},
              {"dim", e.vector.size()},
              {"vector", e.vector}}
      .dump();
}

Retriever::Retriever(Checkpoint model, std::shared_ptr<const Backbone> backbone,
                     std::shared_ptr<const VectorIndex> index)
    : model_(std::move(model)), backbone_(std::move(backbone)), index_(std::move(index)) {
  if (!backbone_) throw std::invalid_argument("retriever: missing backbone");
  if (backbone_->d_model() != model_.backbone.d_model) {
    throw std::runtime_error("backbone width " + std::to_string(backbone_->d_model()) +
                             " does not match checkpoint d_model " + std::to_string(model_.backbone.d_model));
  }
}

DocumentEmbedding Retriever::encode(const Document& doc) const { return model_.encode(doc, *backbone_); }

std::vector<SearchHit> Retriever::retrieve(const RetrieveRequest& request) const {
  if (!index_) throw std::runtime_error("retriever: no index loaded");
  const auto e = encode(request.document);
  if (e.vector.size() != index_->dim()) {
    throw std::runtime_error("embedding dimension " + std::to_string(e.vector.size()) +
                             " does not match index dimension " + std::to_string(index_->dim()));
  }
  return index_->knn(e.vector, request.k, request.filter, request.mode);
}

}  // namespace skillmatch
