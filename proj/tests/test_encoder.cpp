#include <cmath>
#include <numeric>

#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "skillmatch/backbone.hpp"
#include "skillmatch/encoder.hpp"
#include "skillmatch/gradcheck.hpp"
#include "skillmatch/random.hpp"

using namespace skillmatch;
using Catch::Matchers::WithinAbs;

namespace {

HeadConfig small_head() {
  HeadConfig h;
  h.d_model = 16;
  h.n_heads = 2;
  h.ff_dim = 32;
  return h;
}

Tensor<double> random_rows(std::size_t rows, std::size_t d, Rng& rng) {
  Tensor<double> t(rows, d);
  for (auto& v : t.values()) v = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("pooling weights", "[encoder][pooling]") {
  const std::size_t lengths[] = {2, 3, 5};
  const auto w = pooling_weights<double>(lengths);
  REQUIRE(w.rows() == 1);
  REQUIRE(w.cols() == 10);
  for (std::size_t i = 0; i < 2; ++i) REQUIRE_THAT(w[i], WithinAbs(1.0 / 6.0, 1e-15));
  for (std::size_t i = 2; i < 5; ++i) REQUIRE_THAT(w[i], WithinAbs(1.0 / 9.0, 1e-15));
  for (std::size_t i = 5; i < 10; ++i) REQUIRE_THAT(w[i], WithinAbs(1.0 / 15.0, 1e-15));
  REQUIRE_THAT(std::accumulate(w.values().begin(), w.values().end(), 0.0), WithinAbs(1.0, 1e-15));

  SECTION("every section carries the same total weight") {
    std::size_t offset = 0;
    for (std::size_t k : lengths) {
      double s = 0;
      for (std::size_t i = 0; i < k; ++i) s += w[offset + i];
      REQUIRE_THAT(s, WithinAbs(1.0 / 3.0, 1e-15));
      offset += k;
    }
  }

  SECTION("zero-length sections are rejected") {
    const std::size_t bad[] = {2, 0};
    REQUIRE_THROWS(pooling_weights<double>(bad));
  }
}

TEST_CASE("pool matches a direct section-balanced mean", "[encoder][pooling]") {
  Rng rng(4);
  const std::size_t lengths[] = {1, 4, 2};
  const auto head = random_rows(7, 5, rng);
  const auto base = random_rows(7, 5, rng);
  Tape<double> tape;
  const auto out = pool(tape.constant(head), tape.constant(base), lengths).value();
  REQUIRE(out.rows() == 1);
  std::vector<double> want(5, 0.0);
  std::size_t offset = 0;
  for (std::size_t k : lengths) {
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t c = 0; c < 5; ++c) want[c] += (head(offset + i, c) + base(offset + i, c)) / (3.0 * k);
    offset += k;
  }
  for (std::size_t c = 0; c < 5; ++c) REQUIRE_THAT(out[c], WithinAbs(want[c], 1e-12));

  SECTION("a long section does not outweigh a short one") {
    // Section A: one row u. Section B: n copies of row v. Pooled = (u + v) / 2 for every n.
    Tensor<double> u(1, 3, std::vector<double>{1, 0, 0});
    for (std::size_t n : {1u, 5u, 60u}) {
      Tensor<double> seq(1 + n, 3);
      seq(0, 0) = 1;
      for (std::size_t i = 1; i <= n; ++i) seq(i, 1) = 2;
      const std::size_t lens[] = {1, n};
      Tape<double> t;
      const auto p = pool(t.constant(seq), t.constant(Tensor<double>(1 + n, 3)), lens).value();
      REQUIRE_THAT(p[0], WithinAbs(0.5, 1e-12));
      REQUIRE_THAT(p[1], WithinAbs(1.0, 1e-12));
    }
  }
}

TEST_CASE("categorical encoding adds one row per section", "[encoder]") {
  Rng rng(8);
  const auto a = random_rows(2, 4, rng);
  const auto b = random_rows(3, 4, rng);
  const auto cat = random_rows(2, 4, rng);
  Tape<double> tape;
  const auto x = assemble_sequence<double>({tape.constant(a), tape.constant(b)}, tape.constant(cat)).value();
  REQUIRE(x.rows() == 5);
  for (std::size_t c = 0; c < 4; ++c) {
    REQUIRE_THAT(x(1, c), WithinAbs(a(1, c) + cat(0, c), 1e-15));
    REQUIRE_THAT(x(4, c), WithinAbs(b(2, c) + cat(1, c), 1e-15));
  }
}

TEST_CASE("tower forward", "[encoder]") {
  const auto head = small_head();
  auto tower = init_tower<double>(DocumentKind::profile, 3, head, 5);
  Rng rng(6);
  const std::vector<Tensor<double>> sections{random_rows(2, 16, rng), random_rows(6, 16, rng), random_rows(3, 16, rng)};

  auto run = [&](Tape<double>& tape, Normalization norm) {
    std::vector<Var<double>> vars;
    for (const auto& s : sections) vars.push_back(tape.constant_ref(s));
    return tower_forward(bind_tower(tape, tower), vars, norm);
  };

  SECTION("l2 output has unit norm") {
    Tape<double> tape;
    const auto e = run(tape, Normalization::l2).value();
    REQUIRE(e.cols() == 16);
    double s = 0;
    for (double v : e.values()) s += v * v;
    REQUIRE_THAT(s, WithinAbs(1.0, 1e-12));
  }

  SECTION("same seed gives the same tower") {
    const auto again = init_tower<double>(DocumentKind::profile, 3, head, 5);
    const auto p1 = tower.parameters();
    const auto p2 = again.parameters();
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) REQUIRE(p1[i]->value == p2[i]->value);
    REQUIRE(init_tower<double>(DocumentKind::profile, 3, head, 6).categorical.value != tower.categorical.value);
  }

  for (auto norm : {Normalization::l2, Normalization::none}) {
    DYNAMIC_SECTION("gradients are exact with normalization " << to_string(norm)) {
      Rng wr(7);
      const auto w = random_rows(1, 16, wr);
      auto params = tower.parameters();
      auto loss = [&](Tape<double>& tape) -> Var<double> {
        return sum(hadamard(run(tape, norm), tape.constant(w)));
      };
      const auto report = finite_diff_check<double>(loss, params, 1e-5, 3, 200, 1e-4);
      REQUIRE(report.coordinates == 200);
      REQUIRE(report.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("document encoding", "[encoder]") {
  BackboneConfig bc;
  bc.d_model = 16;
  bc.n_heads = 2;
  bc.ff_dim = 32;
  const StubBackbone bb(bc);
  const auto doc = testing::proposal("p1", "data", "python, sql", "ETL pipeline");
  const auto tower = init_tower<float>(DocumentKind::proposal, doc.sections.size(), small_head(), 9);

  const auto e = encode_document(doc, tower, bb, Normalization::l2);
  REQUIRE(e.doc_id == "p1");
  REQUIRE(e.category == "data");
  REQUIRE(e.vector.size() == 16);

  SECTION("matches the tower forward run in double precision") {
    const auto td = tower.cast<double>();
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& s : bb.encode_sections(doc)) vars.push_back(tape.constant(s.cast<double>()));
    const auto ref = tower_forward(bind_tower_constants(tape, td), vars, Normalization::l2).value();
    for (std::size_t c = 0; c < 16; ++c) REQUIRE_THAT(e.vector[c], WithinAbs(ref[c], 1e-5));
  }

  SECTION("deterministic") {
    REQUIRE(encode_document(doc, tower, bb, Normalization::l2).vector == e.vector);
  }

  SECTION("a tower of the wrong kind or size is rejected") {
    const auto profile_tower = init_tower<float>(DocumentKind::profile, 5, small_head(), 9);
    REQUIRE_THROWS_AS(encode_document(doc, profile_tower, bb, Normalization::l2), EncoderError);
  }

  SECTION("width mismatch between backbone and tower is rejected") {
    const StubBackbone wide{};
    REQUIRE_THROWS_AS(encode_document(doc, tower, wide, Normalization::l2), EncoderError);
  }
}
