#pragma once

#include <filesystem>
#include <vector>

#include "skillmatch/encoder.hpp"

namespace skillmatch {

struct EmbeddingFile {
  static constexpr int kVersion = 1;

  DocumentKind kind = DocumentKind::profile;
  Normalization normalization = Normalization::l2;
  std::size_t dim = 0;
  std::vector<DocumentEmbedding> embeddings;
};

// JSONL: header {"schema_version","kind","normalization","dim"}, then one
// {"doc_id","category","language","vector"} record per line.
void write_embeddings(const EmbeddingFile& file, const std::filesystem::path& path);
EmbeddingFile read_embeddings(const std::filesystem::path& path);

// id,category,language,v0,...,v{d-1}
void write_embeddings_csv(const EmbeddingFile& file, const std::filesystem::path& path);

}  // namespace skillmatch
