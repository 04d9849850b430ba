#include "skillmatch/index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <queue>

#include <Eigen/Core>
#include <json.hpp>

#include "skillmatch/binary_io.hpp"
#include "skillmatch/random.hpp"

namespace skillmatch {

std::string_view to_string(IndexMetric m) { return m == IndexMetric::cosine ? "cosine" : "euclidean"; }

IndexMetric parse_index_metric(std::string_view s) {
  if (s == "cosine") return IndexMetric::cosine;
  if (s == "euclidean") return IndexMetric::euclidean;
  throw std::invalid_argument("unknown index metric '" + std::string(s) + "'");
}

std::string_view to_string(SearchMode m) { return m == SearchMode::exact ? "exact" : "approximate"; }

SearchMode parse_search_mode(std::string_view s) {
  if (s == "exact") return SearchMode::exact;
  if (s == "approximate" || s == "ann") return SearchMode::approximate;
  throw std::invalid_argument("unknown search mode '" + std::string(s) + "'");
}

bool Filter::matches(const Tags& tags) const {
  for (const auto& c : clauses) {
    auto it = tags.find(c.key);
    if (it == tags.end()) return false;
    if (std::find(c.values.begin(), c.values.end(), it->second) == c.values.end()) return false;
  }
  return true;
}

Filter& Filter::where(std::string key, std::vector<std::string> values) {
  clauses.push_back({std::move(key), std::move(values)});
  return *this;
}

namespace {

constexpr char kMagic[5] = "SMIX";

float dot(const float* a, const float* b, std::size_t n) {
  using Vec = Eigen::Map<const Eigen::VectorXf>;
  return Vec(a, static_cast<Eigen::Index>(n)).dot(Vec(b, static_cast<Eigen::Index>(n)));
}

float squared_l2(const float* a, const float* b, std::size_t n) {
  using Vec = Eigen::Map<const Eigen::VectorXf>;
  return (Vec(a, static_cast<Eigen::Index>(n)) - Vec(b, static_cast<Eigen::Index>(n))).squaredNorm();
}

std::size_t first_dimension(const std::vector<IndexedVector>& vectors) {
  if (vectors.empty()) throw IndexError("cannot build an index from zero vectors");
  return vectors.front().vector.size();
}

bool hit_order(const SearchHit& a, const SearchHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

}  // namespace

VectorIndex::VectorIndex(std::size_t dim, IndexMetric metric, HnswParams params)
    : dim_(dim), metric_(metric), params_(params), rng_state_(params.seed) {
  if (dim_ == 0) throw IndexError("index dimension must be > 0");
  if (params_.m < 2) throw IndexError("HNSW M must be >= 2");
  if (params_.ef_construction == 0 || params_.ef_search == 0) throw IndexError("HNSW ef must be >= 1");
}

VectorIndex::VectorIndex(std::vector<IndexedVector> vectors, IndexMetric metric, HnswParams params)
    : VectorIndex(first_dimension(vectors), metric, params) {
  for (auto& v : vectors) insert_locked(std::move(v));
}

std::vector<float> VectorIndex::prepare(std::span<const float> v) const {
  if (v.size() != dim_) {
    throw IndexError("vector dimension " + std::to_string(v.size()) + " does not match index dimension " +
                     std::to_string(dim_));
  }
  std::vector<float> out(v.begin(), v.end());
  if (metric_ == IndexMetric::cosine) {
    const float norm = std::sqrt(dot(out.data(), out.data(), dim_));
    if (norm > 0.0f) {
      for (auto& x : out) x /= norm;
    }
  }
  return out;
}

float VectorIndex::distance(const float* a, const float* b) const {
  return metric_ == IndexMetric::cosine ? 1.0f - dot(a, b, dim_) : squared_l2(a, b, dim_);
}

float VectorIndex::to_score(float dist) const {
  return metric_ == IndexMetric::cosine ? 1.0f - dist : -std::sqrt(std::max(dist, 0.0f));
}

std::size_t VectorIndex::random_level() {
  rng_state_ = mix_seed(rng_state_, 0x5bd1e995);
  const double u = (static_cast<double>(rng_state_ >> 11) + 0.5) * 0x1.0p-53;
  const double ml = 1.0 / std::log(static_cast<double>(params_.m));
  return static_cast<std::size_t>(std::floor(-std::log(u) * ml));
}

std::vector<VectorIndex::Candidate> VectorIndex::search_layer(const float* q, std::vector<std::uint32_t> entries,
                                                              std::size_t ef, std::size_t level,
                                                              const Filter* filter) const {
  // `filter` == nullptr: construction/descent mode, every node is admissible.
  auto admissible = [&](std::uint32_t n) {
    if (!filter) return true;
    const auto& node = nodes_[n];
    return !node.deleted && filter->matches(node.tags);
  };
  std::vector<bool> visited(nodes_.size(), false);
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> frontier;
  std::priority_queue<Candidate> best;
  for (auto e : entries) {
    if (visited[e]) continue;
    visited[e] = true;
    const float d = distance(q, vec(e));
    frontier.emplace(d, e);
    if (admissible(e)) best.emplace(d, e);
  }
  while (best.size() > ef) best.pop();
  while (!frontier.empty()) {
    const auto [dc, c] = frontier.top();
    if (best.size() >= ef && dc > best.top().first) break;
    frontier.pop();
    const auto& links = nodes_[c].links;
    if (level >= links.size()) continue;
    for (auto nb : links[level]) {
      if (visited[nb]) continue;
      visited[nb] = true;
      const float d = distance(q, vec(nb));
      if (best.size() < ef || d < best.top().first) {
        frontier.emplace(d, nb);
        if (admissible(nb)) {
          best.emplace(d, nb);
          if (best.size() > ef) best.pop();
        }
      }
    }
  }
  std::vector<Candidate> out;
  out.reserve(best.size());
  while (!best.empty()) {
    out.push_back(best.top());
    best.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::uint32_t> VectorIndex::select_neighbors(const float* /*base*/, std::vector<Candidate> candidates,
                                                         std::size_t m) const {
  std::sort(candidates.begin(), candidates.end());
  std::vector<std::uint32_t> kept;
  std::vector<std::uint32_t> pruned;
  for (const auto& [d, c] : candidates) {
    if (kept.size() >= m) break;
    bool diverse = true;
    for (auto r : kept) {
      if (distance(vec(c), vec(r)) < d) {
        diverse = false;
        break;
      }
    }
    (diverse ? kept : pruned).push_back(c);
  }
  // Top up with the closest pruned candidates to keep the graph well connected.
  for (auto c : pruned) {
    if (kept.size() >= m) break;
    kept.push_back(c);
  }
  return kept;
}

void VectorIndex::prune(std::uint32_t node, std::size_t level) {
  auto& links = nodes_[node].links[level];
  const std::size_t max_links = level == 0 ? 2 * params_.m : params_.m;
  if (links.size() <= max_links) return;
  std::vector<Candidate> cands;
  cands.reserve(links.size());
  for (auto nb : links) cands.emplace_back(distance(vec(node), vec(nb)), nb);
  links = select_neighbors(vec(node), std::move(cands), max_links);
}

void VectorIndex::insert_locked(IndexedVector v) {
  auto prepared = prepare(v.vector);
  if (auto it = live_.find(v.doc_id); it != live_.end()) {
    nodes_[it->second].deleted = true;
    live_.erase(it);
  }
  const auto idx = static_cast<std::uint32_t>(nodes_.size());
  data_.insert(data_.end(), prepared.begin(), prepared.end());
  const std::size_t level = random_level();
  nodes_.push_back(Node{std::move(v.doc_id), std::move(v.tags), false, {}});
  nodes_.back().links.resize(level + 1);
  live_[nodes_.back().doc_id] = idx;
  if (entry_ < 0) {
    entry_ = idx;
    max_level_ = level;
    return;
  }
  const float* q = vec(idx);
  std::vector<std::uint32_t> eps{static_cast<std::uint32_t>(entry_)};
  for (std::size_t lc = max_level_; lc > level; --lc) {
    eps = {search_layer(q, eps, 1, lc, nullptr).front().second};
  }
  for (std::size_t lc = std::min(level, max_level_) + 1; lc-- > 0;) {
    auto found = search_layer(q, eps, params_.ef_construction, lc, nullptr);
    std::erase_if(found, [idx](const Candidate& c) { return c.second == idx; });
    nodes_[idx].links[lc] = select_neighbors(q, found, lc == 0 ? 2 * params_.m : params_.m);
    for (auto nb : nodes_[idx].links[lc]) {
      nodes_[nb].links[lc].push_back(idx);
      prune(nb, lc);
    }
    eps.clear();
    for (const auto& c : found) eps.push_back(c.second);
    if (eps.empty()) eps.push_back(static_cast<std::uint32_t>(entry_));
  }
  if (level > max_level_) {
    max_level_ = level;
    entry_ = idx;
  }
}

void VectorIndex::upsert(IndexedVector v) {
  std::unique_lock lock(mutex_);
  insert_locked(std::move(v));
}

bool VectorIndex::remove(const std::string& doc_id) {
  std::unique_lock lock(mutex_);
  auto it = live_.find(doc_id);
  if (it == live_.end()) {
    std::cerr << "warning: remove of unknown id '" << doc_id << "' ignored\n";
    return false;
  }
  nodes_[it->second].deleted = true;
  live_.erase(it);
  return true;
}

std::size_t VectorIndex::size() const {
  std::shared_lock lock(mutex_);
  return live_.size();
}

bool VectorIndex::contains(const std::string& doc_id) const {
  std::shared_lock lock(mutex_);
  return live_.count(doc_id) > 0;
}

std::vector<std::string> VectorIndex::ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  out.reserve(live_.size());
  for (const auto& [id, n] : live_) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SearchHit> VectorIndex::finish(std::vector<Candidate> found, std::size_t k) const {
  std::vector<SearchHit> hits;
  hits.reserve(found.size());
  for (const auto& [d, n] : found) hits.push_back({nodes_[n].doc_id, to_score(d)});
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), hit_order);
  hits.resize(keep);
  return hits;
}

std::vector<SearchHit> VectorIndex::exact_locked(const float* q, std::size_t k, const Filter& filter) const {
  std::vector<Candidate> found;
  found.reserve(live_.size());
  for (std::uint32_t n = 0; n < nodes_.size(); ++n) {
    const auto& node = nodes_[n];
    if (node.deleted || !filter.matches(node.tags)) continue;
    found.emplace_back(distance(q, vec(n)), n);
  }
  return finish(std::move(found), k);
}

std::vector<SearchHit> VectorIndex::knn(std::span<const float> query, std::size_t k, const Filter& filter,
                                        SearchMode mode, std::size_t ef) const {
  if (k == 0) throw IndexError("k must be >= 1");
  std::shared_lock lock(mutex_);
  if (live_.empty()) return {};
  const auto q = prepare(query);
  if (mode == SearchMode::exact) return exact_locked(q.data(), k, filter);

  if (!filter.empty()) {
    std::size_t matching = 0;
    for (const auto& [id, n] : live_) matching += filter.matches(nodes_[n].tags) ? 1 : 0;
    if (matching == 0) return {};
    if (static_cast<double>(matching) <= params_.exact_fallback_fraction * static_cast<double>(live_.size())) {
      return exact_locked(q.data(), k, filter);
    }
  }
  std::vector<std::uint32_t> eps{static_cast<std::uint32_t>(entry_)};
  for (std::size_t lc = max_level_; lc > 0; --lc) eps = {search_layer(q.data(), eps, 1, lc, nullptr).front().second};
  const std::size_t width = std::max(ef == 0 ? params_.ef_search : ef, k);
  return finish(search_layer(q.data(), eps, width, 0, &filter), k);
}

void VectorIndex::save(const std::filesystem::path& path) const {
  std::shared_lock lock(mutex_);
  nlohmann::json header;
  header["dim"] = dim_;
  header["metric"] = std::string(to_string(metric_));
  header["params"] = {{"m", params_.m},
                      {"ef_construction", params_.ef_construction},
                      {"ef_search", params_.ef_search},
                      {"seed", params_.seed},
                      {"exact_fallback_fraction", params_.exact_fallback_fraction}};
  header["entry"] = entry_;
  header["max_level"] = max_level_;
  header["rng_state"] = rng_state_;
  auto& nodes = header["nodes"] = nlohmann::json::array();
  for (const auto& n : nodes_) {
    nodes.push_back({{"id", n.doc_id}, {"tags", n.tags}, {"deleted", n.deleted}, {"levels", n.links.size()}});
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IndexError("cannot write index " + path.string());
  binio::put_magic(out, kMagic, kVersion);
  binio::put_string(out, header.dump());
  binio::put<std::uint64_t>(out, data_.size());
  binio::put_bytes(out, data_.data(), data_.size() * sizeof(float));
  for (const auto& n : nodes_) {
    for (const auto& level : n.links) {
      binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(level.size()));
      binio::put_bytes(out, level.data(), level.size() * sizeof(std::uint32_t));
    }
  }
  if (!out) throw IndexError("failed writing index " + path.string());
}

std::unique_ptr<VectorIndex> VectorIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IndexError("cannot open index " + path.string());
  try {
    binio::expect_magic(in, kMagic, kVersion, "index");
    const auto header = nlohmann::json::parse(binio::get_string(in));
    HnswParams params;
    const auto& p = header.at("params");
    params.m = p.at("m");
    params.ef_construction = p.at("ef_construction");
    params.ef_search = p.at("ef_search");
    params.seed = p.at("seed");
    params.exact_fallback_fraction = p.at("exact_fallback_fraction");
    auto index = std::make_unique<VectorIndex>(header.at("dim").get<std::size_t>(),
                                               parse_index_metric(header.at("metric").get<std::string>()), params);
    index->entry_ = header.at("entry");
    index->max_level_ = header.at("max_level");
    index->rng_state_ = header.at("rng_state");
    const auto n_floats = binio::get<std::uint64_t>(in);
    const auto& nodes = header.at("nodes");
    if (n_floats != nodes.size() * index->dim_) throw IndexError("index vector blob size mismatch");
    index->data_.resize(n_floats);
    binio::get_bytes(in, index->data_.data(), n_floats * sizeof(float));
    for (const auto& jn : nodes) {
      Node node{jn.at("id").get<std::string>(), jn.at("tags").get<Tags>(), jn.at("deleted").get<bool>(), {}};
      node.links.resize(jn.at("levels").get<std::size_t>());
      index->nodes_.push_back(std::move(node));
    }
    for (std::uint32_t i = 0; i < index->nodes_.size(); ++i) {
      auto& node = index->nodes_[i];
      for (auto& level : node.links) {
        level.resize(binio::get<std::uint32_t>(in));
        binio::get_bytes(in, level.data(), level.size() * sizeof(std::uint32_t));
        for (auto nb : level) {
          if (nb >= index->nodes_.size()) throw IndexError("index graph references a missing node");
        }
      }
      if (!node.deleted) index->live_[node.doc_id] = i;
    }
    return index;
  } catch (const nlohmann::json::exception& e) {
    throw IndexError("malformed index header in " + path.string() + ": " + e.what());
  } catch (const binio::FormatError& e) {
    throw IndexError(path.string() + ": " + e.what());
  }
}

}  // namespace skillmatch
