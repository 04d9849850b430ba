#include "skillmatch/embeddings.hpp"

#include <fstream>

#include <json.hpp>

namespace skillmatch {

using nlohmann::json;

void write_embeddings(const EmbeddingFile& file, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << json{{"schema_version", EmbeddingFile::kVersion},
              {"kind", std::string(to_string(file.kind))},
              {"normalization", std::string(to_string(file.normalization))},
              {"dim", file.dim}}
             .dump()
      << '\n';
  for (const auto& e : file.embeddings) {
    if (e.vector.size() != file.dim) throw std::invalid_argument("embedding '" + e.doc_id + "' has wrong dimension");
    out << json{{"doc_id", e.doc_id}, {"category", e.category}, {"language", e.language}, {"vector", e.vector}}.dump()
        << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

EmbeddingFile read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embeddings " + path.string());
  EmbeddingFile file;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      if (!header) {
        if (j.at("schema_version") != EmbeddingFile::kVersion) throw std::runtime_error("unsupported schema_version");
        file.kind = parse_document_kind(j.at("kind").get<std::string>());
        file.normalization = parse_normalization(j.at("normalization").get<std::string>());
        file.dim = j.at("dim");
        header = true;
        continue;
      }
      DocumentEmbedding e{j.at("doc_id"), j.at("vector").get<std::vector<float>>(), j.value("category", ""),
                          j.value("language", "")};
      if (e.vector.size() != file.dim) throw std::runtime_error("vector has wrong dimension");
      file.embeddings.push_back(std::move(e));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header) throw std::runtime_error(path.string() + ": missing embeddings header");
  return file;
}

void write_embeddings_csv(const EmbeddingFile& file, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "id,category,language";
  for (std::size_t i = 0; i < file.dim; ++i) out << ",v" << i;
  out << '\n';
  out.precision(9);
  auto quoted = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  for (const auto& e : file.embeddings) {
    out << quoted(e.doc_id) << ',' << quoted(e.category) << ',' << quoted(e.language);
    for (float v : e.vector) out << ',' << v;
    out << '\n';
  }
}

}  // namespace skillmatch
