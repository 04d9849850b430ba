#include <algorithm>
#include <chrono>
#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "skillmatch/index.hpp"
#include "skillmatch/random.hpp"

using namespace skillmatch;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<IndexedVector> random_vectors(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<IndexedVector> out;
  for (std::size_t i = 0; i < n; ++i) {
    IndexedVector v{"d" + std::to_string(i), std::vector<float>(dim), {}};
    for (auto& x : v.vector) x = static_cast<float>(rng.normal());
    v.tags["category"] = "c" + std::to_string(rng.below(8));
    v.tags["language"] = i % 3 == 0 ? "fr" : "en";
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<SearchHit> brute_force(const std::vector<IndexedVector>& data, std::span<const float> q, std::size_t k,
                                   IndexMetric metric, const Filter& filter = {}) {
  std::vector<SearchHit> all;
  double qn = 0;
  for (float x : q) qn += double(x) * x;
  for (const auto& v : data) {
    if (!filter.matches(v.tags)) continue;
    double dot = 0, vn = 0, d2 = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      dot += double(q[i]) * v.vector[i];
      vn += double(v.vector[i]) * v.vector[i];
      d2 += (double(q[i]) - v.vector[i]) * (double(q[i]) - v.vector[i]);
    }
    const double s = metric == IndexMetric::cosine ? dot / std::sqrt(qn * vn) : -std::sqrt(d2);
    all.push_back({v.doc_id, static_cast<float>(s)});
  }
  std::stable_sort(all.begin(), all.end(), [](const SearchHit& a, const SearchHit& b) {
    return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

double recall(const std::vector<SearchHit>& got, const std::vector<SearchHit>& want) {
  std::set<std::string> w;
  for (const auto& h : want) w.insert(h.doc_id);
  std::size_t n = 0;
  for (const auto& h : got) n += w.count(h.doc_id);
  return want.empty() ? 1.0 : double(n) / double(want.size());
}

}  // namespace

TEST_CASE("exact search matches brute force", "[index]") {
  const auto data = random_vectors(500, 16, 1);
  for (auto metric : {IndexMetric::cosine, IndexMetric::euclidean}) {
    const VectorIndex index(data, metric);
    Rng rng(2);
    for (int q = 0; q < 20; ++q) {
      std::vector<float> query(16);
      for (auto& x : query) x = static_cast<float>(rng.normal());
      const auto got = index.knn(query, 10);
      const auto want = brute_force(data, query, 10, metric);
      REQUIRE(got.size() == 10);
      for (std::size_t i = 0; i < 10; ++i) {
        REQUIRE(got[i].doc_id == want[i].doc_id);
        REQUIRE_THAT(got[i].score, WithinAbs(want[i].score, 1e-4));
      }
    }
  }
}

TEST_CASE("filters", "[index][filter]") {
  const auto data = random_vectors(2000, 16, 3);
  const VectorIndex index(data);
  std::vector<float> q(16, 0.5f);

  Filter fr;
  fr.where("language", {"fr"});
  Filter cats;
  cats.where("category", {"c1", "c2"}).where("language", {"en"});
  Filter rare;  // about 1/24 of the data: below the exact-scan threshold
  rare.where("category", {"c5"}).where("language", {"fr"});
  Filter none;
  none.where("category", {"zzz"});

  for (const Filter* f : {&fr, &cats, &rare, &none}) {
    for (auto mode : {SearchMode::exact, SearchMode::approximate}) {
      const auto hits = index.knn(q, 50, *f, mode);
      const auto want = brute_force(data, q, 50, IndexMetric::cosine, *f);
      REQUIRE(hits.size() == want.size());
      for (const auto& h : hits) {
        const auto it = std::find_if(data.begin(), data.end(), [&](const IndexedVector& v) { return v.doc_id == h.doc_id; });
        REQUIRE(f->matches(it->tags));
      }
      REQUIRE(recall(hits, want) >= 0.9);
    }
  }

  SECTION("filter semantics") {
    REQUIRE(fr.matches({{"language", "fr"}, {"category", "x"}}));
    REQUIRE_FALSE(fr.matches({{"language", "en"}}));
    REQUIRE_FALSE(fr.matches({}));
    REQUIRE(Filter{}.matches({}));
  }
}

TEST_CASE("HNSW recall and exact latency", "[index][hnsw]") {
  const auto data = random_vectors(3000, 64, 5);
  const VectorIndex index(data);
  Rng rng(6);
  double total = 0;
  std::vector<double> exact_ms;
  const int n_queries = 50;
  for (int q = 0; q < n_queries; ++q) {
    std::vector<float> query(64);
    for (auto& x : query) x = static_cast<float>(rng.normal());
    const auto want = brute_force(data, query, 100, IndexMetric::cosine);
    total += recall(index.knn(query, 100, {}, SearchMode::approximate), want);
    const auto t0 = std::chrono::steady_clock::now();
    (void)index.knn(query, 100);
    exact_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  REQUIRE(total / n_queries >= 0.95);
  std::sort(exact_ms.begin(), exact_ms.end());
  REQUIRE(exact_ms[static_cast<std::size_t>(0.95 * (exact_ms.size() - 1))] < 10.0);
}

TEST_CASE("updates, deletes and persistence", "[index]") {
  auto data = random_vectors(300, 8, 7);
  VectorIndex index(data, IndexMetric::euclidean);
  REQUIRE(index.size() == 300);
  const auto& target = data[17];

  SECTION("a removed document never comes back") {
    REQUIRE(index.remove(target.doc_id));
    REQUIRE_FALSE(index.remove(target.doc_id));
    REQUIRE_FALSE(index.contains(target.doc_id));
    REQUIRE(index.size() == 299);
    for (auto mode : {SearchMode::exact, SearchMode::approximate}) {
      const auto hits = index.knn(target.vector, 300, {}, mode);
      for (const auto& h : hits) REQUIRE(h.doc_id != target.doc_id);
    }
  }

  SECTION("upsert replaces the vector of an existing id") {
    IndexedVector moved = target;
    for (auto& x : moved.vector) x += 100.0f;
    index.upsert(moved);
    REQUIRE(index.size() == 300);
    for (auto mode : {SearchMode::exact, SearchMode::approximate}) {
      const auto hits = index.knn(moved.vector, 1, {}, mode);
      REQUIRE(hits[0].doc_id == target.doc_id);
      REQUIRE_THAT(hits[0].score, WithinAbs(0.0, 1e-4));
    }
  }

  SECTION("dimension mismatch is rejected") {
    REQUIRE_THROWS_AS(index.upsert({"bad", std::vector<float>(3), {}}), IndexError);
    REQUIRE_THROWS_AS(index.knn(std::vector<float>(3), 1), IndexError);
  }

  SECTION("save and load keep results identical") {
    testing::TempDir dir("smix");
    index.remove(data[3].doc_id);
    index.save(dir / "i.smix");
    const auto back = VectorIndex::load(dir / "i.smix");
    REQUIRE(back->size() == index.size());
    REQUIRE(back->metric() == IndexMetric::euclidean);
    REQUIRE(back->ids() == index.ids());
    for (std::size_t q = 0; q < 10; ++q) {
      REQUIRE(back->knn(data[q].vector, 20) == index.knn(data[q].vector, 20));
      REQUIRE(back->knn(data[q].vector, 20, {}, SearchMode::approximate) ==
              index.knn(data[q].vector, 20, {}, SearchMode::approximate));
    }
    std::ofstream(dir / "bad.smix") << "garbage";
    REQUIRE_THROWS(VectorIndex::load(dir / "bad.smix"));
  }

  SECTION("empty index returns nothing") {
    const VectorIndex empty(8);
    REQUIRE(empty.knn(data[0].vector, 5).empty());
    REQUIRE(empty.knn(data[0].vector, 5, {}, SearchMode::approximate).empty());
  }
}
