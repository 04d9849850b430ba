#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace skillmatch {

class IndexError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class IndexMetric { cosine, euclidean };
enum class SearchMode { exact, approximate };

std::string_view to_string(IndexMetric m);
IndexMetric parse_index_metric(std::string_view s);
std::string_view to_string(SearchMode m);
SearchMode parse_search_mode(std::string_view s);

using Tags = std::map<std::string, std::string>;

struct IndexedVector {
  std::string doc_id;
  std::vector<float> vector;
  Tags tags;
};

// Conjunction of "tag value is one of `values`" clauses; one value is plain equality.
struct Filter {
  struct Clause {
    std::string key;
    std::vector<std::string> values;
  };
  std::vector<Clause> clauses;

  bool empty() const { return clauses.empty(); }
  bool matches(const Tags& tags) const;
  Filter& where(std::string key, std::vector<std::string> values);
};

struct SearchHit {
  std::string doc_id;
  // Cosine similarity, or the negated Euclidean distance; higher is better.
  float score = 0.0f;
  bool operator==(const SearchHit&) const = default;
};

struct HnswParams {
  std::size_t m = 16;
  std::size_t ef_construction = 200;
  std::size_t ef_search = 128;
  std::uint64_t seed = 42;
  // Filtered approximate queries scan exactly when at most this fraction of
  // live vectors passes the filter.
  double exact_fallback_fraction = 0.1;
};

// Exact store plus a layered proximity graph over the same vectors.
// Reads may run concurrently; writes take an exclusive lock.
class VectorIndex {
 public:
  static constexpr std::uint32_t kVersion = 1;

  VectorIndex(std::size_t dim, IndexMetric metric = IndexMetric::cosine, HnswParams params = {});
  // Later entries replace earlier ones with the same doc_id.
  VectorIndex(std::vector<IndexedVector> vectors, IndexMetric metric = IndexMetric::cosine, HnswParams params = {});

  VectorIndex(const VectorIndex&) = delete;
  VectorIndex& operator=(const VectorIndex&) = delete;

  void upsert(IndexedVector v);
  // Returns false (and changes nothing) for an unknown id.
  bool remove(const std::string& doc_id);

  // Top-k hits passing `filter`, best first; ties ordered by doc_id. Returns
  // fewer than k hits only when fewer vectors match. `ef` of 0 uses ef_search.
  std::vector<SearchHit> knn(std::span<const float> query, std::size_t k, const Filter& filter = {},
                             SearchMode mode = SearchMode::exact, std::size_t ef = 0) const;

  std::size_t size() const;
  std::size_t dim() const { return dim_; }
  IndexMetric metric() const { return metric_; }
  const HnswParams& params() const { return params_; }
  bool contains(const std::string& doc_id) const;
  std::vector<std::string> ids() const;

  // Layout: "SMIX", u32 version, u64-prefixed header JSON (ids, tags, levels,
  // tombstones, graph entry point), u64 float count + float32 vectors, then
  // per node and level a u32 neighbor count and u32 neighbor ids.
  void save(const std::filesystem::path& path) const;
  static std::unique_ptr<VectorIndex> load(const std::filesystem::path& path);

 private:
  struct Node {
    std::string doc_id;
    Tags tags;
    bool deleted = false;
    std::vector<std::vector<std::uint32_t>> links;  // per level
  };

  float distance(const float* a, const float* b) const;
  float to_score(float dist) const;
  const float* vec(std::uint32_t n) const { return data_.data() + static_cast<std::size_t>(n) * dim_; }
  std::vector<float> prepare(std::span<const float> v) const;

  void insert_locked(IndexedVector v);
  std::size_t random_level();
  using Candidate = std::pair<float, std::uint32_t>;
  std::vector<Candidate> search_layer(const float* q, std::vector<std::uint32_t> entries, std::size_t ef,
                                      std::size_t level, const Filter* filter) const;
  std::vector<std::uint32_t> select_neighbors(const float* base, std::vector<Candidate> candidates,
                                              std::size_t m) const;
  void prune(std::uint32_t node, std::size_t level);

  std::vector<SearchHit> exact_locked(const float* q, std::size_t k, const Filter& filter) const;
  std::vector<SearchHit> finish(std::vector<Candidate> found, std::size_t k) const;

  std::size_t dim_;
  IndexMetric metric_;
  HnswParams params_;
  std::vector<float> data_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::uint32_t> live_;
  std::int64_t entry_ = -1;
  std::size_t max_level_ = 0;
  std::uint64_t rng_state_;
  mutable std::shared_mutex mutex_;
};

}  // namespace skillmatch
