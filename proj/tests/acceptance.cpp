// Acceptance checks: prints one PASS/FAIL line per criterion and exits non-zero
// when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "skillmatch/adjacency.hpp"
#include "skillmatch/autograd.hpp"
#include "skillmatch/backbone.hpp"
#include "skillmatch/checkpoint.hpp"
#include "skillmatch/encoder.hpp"
#include "skillmatch/evaluation.hpp"
#include "skillmatch/gradcheck.hpp"
#include "skillmatch/index.hpp"
#include "skillmatch/losses.hpp"
#include "skillmatch/synth.hpp"
#include "skillmatch/trainer.hpp"

using namespace skillmatch;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

// 1. Finite differences through backbone sections -> both towers -> dual loss.
Outcome gradients() {
  const auto t0 = Clock::now();
  SynthConfig sc;
  sc.n_freelancers = 300;
  sc.n_projects = 40;
  const auto corpus = generate_synthetic(sc, 3);
  const auto split = temporal_split(corpus, cutoff_for_test_fraction(corpus, 0.2), 0.2, 3);

  BackboneConfig bc;
  bc.d_model = 16;
  bc.n_layers = 1;
  bc.n_heads = 2;
  bc.ff_dim = 32;
  const StubBackbone bb(bc, corpus.lexicon());
  HeadConfig hc;
  hc.d_model = 16;
  hc.n_heads = 2;
  hc.ff_dim = 32;

  double worst = 0;
  std::size_t coords = 0;
  for (auto kind : {LossKind::dual_a_triplets, LossKind::dual_a_info_nce}) {
    Rng rng(11);
    const auto batch = kind == LossKind::dual_a_triplets ? sample_triplet_batch(corpus, split.train, rng)
                                                         : sample_infonce_batch(corpus, split.train, rng);
    const auto norm = kind == LossKind::dual_a_info_nce ? Normalization::l2 : Normalization::none;
    const auto ckpt = init_checkpoint(bc, corpus.lexicon(), corpus.registry(), hc, kind, 5);
    auto ft = ckpt.freelancer.cast<double>();
    auto pt = ckpt.project.cast<double>();

    auto sections = [&](const Document* d) {
      std::vector<Tensor<double>> out;
      for (const auto& s : bb.encode_sections(*d)) out.push_back(s.cast<double>());
      return out;
    };
    std::vector<std::vector<Tensor<double>>> p_sec, f_sec;
    for (const auto* d : batch.projects) p_sec.push_back(sections(d));
    for (const auto* d : batch.freelancers) f_sec.push_back(sections(d));

    auto loss = [&](Tape<double>& tape) -> Var<double> {
      const auto pv = bind_tower(tape, pt);
      const auto fv = bind_tower(tape, ft);
      auto encode = [&](const TowerVars<double>& tv, const std::vector<std::vector<Tensor<double>>>& docs) {
        std::vector<Var<double>> rows;
        for (const auto& doc : docs) {
          std::vector<Var<double>> s;
          for (const auto& x : doc) s.push_back(tape.constant_ref(x));
          rows.push_back(tower_forward(tv, s, norm));
        }
        return concat_rows(rows);
      };
      const auto p = encode(pv, p_sec);
      const auto f = encode(fv, f_sec);
      const auto terms = kind == LossKind::dual_a_triplets ? dual_a_triplets(p, f, batch.a_pf, batch.a_ff, 1.0)
                                                           : dual_a_info_nce(p, f, batch.a_pf, batch.a_ff, 0.05);
      return *terms.total;
    };
    auto params = ft.parameters();
    for (auto* p : pt.parameters()) params.push_back(p);
    const auto report = finite_diff_check<double>(loss, params, 1e-5, 17, 200, 1e-4);
    worst = std::max(worst, report.max_rel_error);
    coords = std::min(coords == 0 ? report.coordinates : coords, report.coordinates);
  }
  const double elapsed = seconds_since(t0);
  return {worst < 1e-4 && coords >= 200 && elapsed < 120,
          "max rel err " + fmt(worst) + " over " + std::to_string(coords) + " coords per loss, " + fmt(elapsed, 3) + " s"};
}

// 2. Vectorized dual losses against naive loops.
Outcome loss_oracles() {
  Rng rng(202);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t np = 1 + rng.below(3), nf = 1 + rng.below(6), d = 2 + rng.below(6);
    const auto P = oracle::random_mat(np, d, rng);
    const auto F = oracle::random_mat(nf, d, rng);
    const auto a_pf = oracle::random_pf(rng, np, nf);
    const auto a_ff = transitive_freelancer_adjacency(a_pf);
    const double margin = 0.5 + rng.uniform(), tau = 0.05 + rng.uniform() * 0.5;

    Tape<double> t;
    const auto pv = t.constant(oracle::to_tensor(P));
    const auto fv = t.constant(oracle::to_tensor(F));
    const auto trip = dual_a_triplets(pv, fv, a_pf, a_ff, margin);
    const double want_trip = oracle::triplets(P, F, a_pf, margin) + oracle::triplets(F, F, a_ff, margin);
    worst = std::max(worst, std::abs(trip.total->value()[0] - want_trip));

    const auto nce = dual_a_info_nce(pv, fv, a_pf, a_ff, tau);
    const auto [sp, np_pos] = oracle::info_nce(P, F, a_pf, tau);
    const auto [sf, nf_pos] = oracle::info_nce(F, F, mirrored(a_ff), tau);
    if (nce.total.has_value() != (np_pos + nf_pos > 0)) return {false, "presence of a term disagrees"};
    if (nce.total) {
      double want = 0;
      if (np_pos > 0) want += sp / np_pos;
      if (nf_pos > 0) want += sf / nf_pos;
      worst = std::max(worst, std::abs(nce.total->value()[0] - want));
    }
  }
  return {worst < 1e-6, "max abs err " + fmt(worst) + " on 100 instances"};
}

// 3. Transitive adjacency and weak negatives.
Outcome adjacency_oracle() {
  Rng rng(303);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto pf = oracle::random_pf(rng, 1 + rng.below(8), 1 + rng.below(8));
    const auto ff = transitive_freelancer_adjacency(pf);
    for (std::size_t f = 0; f < pf.n_cols(); ++f)
      for (std::size_t g = 0; g < pf.n_cols(); ++g) mismatches += ff(f, g) != oracle::transitive(pf, f, g);
  }

  // p0 likes f0, f1 and rejects f2; p1 rejects f2 and f3 (shared rejection stays 0).
  SignedAdjacency pf(oracle::ids("p", 2), oracle::ids("f", 4));
  const int rows[] = {1, 1, -1, 0, 0, 0, -1, -1};
  for (std::size_t i = 0; i < 8; ++i) pf.values[i] = static_cast<std::int8_t>(rows[i]);
  const auto ff = transitive_freelancer_adjacency(pf);
  const auto weak = add_weak_negatives(ff, {{"f0", "a"}, {"f1", "b"}, {"f2", "b"}, {"f3", "b"}});
  const bool constructed = ff(0, 1) == 1 && ff(2, 3) == 0 && weak(0, 1) == 0 &&  // positive across categories cancels
                           weak(0, 2) == -1 &&                                   // -1 - 1 clamps
                           weak(1, 2) == -1 && weak(2, 3) == 0 &&                // same category: unchanged
                           weak(0, 3) == -1 && weak.strictly_upper();            // new weak negative

  std::size_t weak_mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t nf = 1 + rng.below(8);
    const auto base = transitive_freelancer_adjacency(oracle::random_pf(rng, 1 + rng.below(8), nf));
    std::map<std::string, std::string> cats;
    for (const auto& id : base.rows) cats[id] = rng.bernoulli(0.5) ? "x" : "y";
    const auto w = add_weak_negatives(base, cats);
    for (std::size_t f = 0; f < nf; ++f)
      for (std::size_t g = 0; g < nf; ++g)
        weak_mismatches += w(f, g) != oracle::weak_negative(base(f, g), f, g, cats[base.rows[f]], cats[base.rows[g]]);
  }
  return {mismatches == 0 && constructed && weak_mismatches == 0,
          std::to_string(mismatches) + " transitive mismatches on 1000 matrices, constructed cases " +
              (constructed ? "ok" : "wrong") + ", " + std::to_string(weak_mismatches) + " weak-negative mismatches"};
}

// 4. Section-balanced pooling.
Outcome pooling_oracle() {
  Rng rng(404);
  double worst = 0;
  bool weights_exact = true;
  double balance_ulps = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n_sections = 1 + rng.below(7), d = 1 + rng.below(16);
    std::vector<std::size_t> lengths;
    for (std::size_t l = 0; l < n_sections; ++l) lengths.push_back(2 + rng.below(40));
    const std::size_t n = std::accumulate(lengths.begin(), lengths.end(), std::size_t{0});
    const auto head = oracle::to_tensor(oracle::random_mat(n, d, rng));
    const auto base = oracle::to_tensor(oracle::random_mat(n, d, rng));

    Tape<double> tape;
    const auto got = pool(tape.constant(head), tape.constant(base), lengths).value();
    const auto want = oracle::pooled(head, base, lengths);
    for (std::size_t c = 0; c < d; ++c) worst = std::max(worst, std::abs(got[c] - want[c]));

    const auto w = pooling_weights<double>(lengths);
    std::size_t offset = 0;
    const double share = 1.0 / static_cast<double>(n_sections);
    for (std::size_t k : lengths) {
      long double total = 0;
      for (std::size_t i = 0; i < k; ++i) {
        weights_exact &= w[offset + i] == 1.0 / (static_cast<double>(n_sections) * static_cast<double>(k));
        total += w[offset + i];
      }
      const double ulp = std::nextafter(share, 2.0) - share;
      balance_ulps = std::max(balance_ulps, static_cast<double>(std::abs(total - share)) / ulp);
      offset += k;
    }
  }
  // Every token weight is the correctly rounded 1/(L k); section totals can
  // then differ from 1/L only by that rounding, bounded here by a few ulps.
  return {worst < 1e-6 && weights_exact && balance_ulps <= 4,
          "max abs err " + fmt(worst) + ", token weights " + (weights_exact ? "exact" : "inexact") +
              ", section totals within " + fmt(balance_ulps, 2) + " ulp of 1/L"};
}

// 5. Masked softmax.
Outcome masked_softmax_checks() {
  Rng rng(505);
  double sum_err = 0, rescale_err = 0;
  bool masked_zero = true;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t rows = 1 + rng.below(6), cols = 1 + rng.below(12);
    const double tau = 0.02 + rng.uniform() * 2;
    Tensor<double> logits(rows, cols);
    for (auto& v : logits.values()) v = rng.normal() * 3;
    std::vector<std::uint8_t> mask(rows * cols);
    for (auto& m : mask) m = rng.bernoulli(0.6) ? 1 : 0;
    for (std::size_t r = 0; r < rows; ++r) mask[r * cols + rng.below(cols)] = 1;

    Tape<double> tape;
    const auto p = masked_softmax(tape.constant(logits), mask, tau).value();
    Tensor<double> scaled = logits;
    for (auto& v : scaled.values()) v /= tau;
    const auto q = masked_softmax(tape.constant(scaled), mask, 1.0).value();
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t i = r * cols + c;
        if (!mask[i]) masked_zero &= p[i] == 0.0;
        s += p[i];
        rescale_err = std::max(rescale_err, std::abs(p[i] - q[i]));
      }
      sum_err = std::max(sum_err, std::abs(s - 1.0));
    }
  }
  return {sum_err <= 1e-6 && masked_zero && rescale_err <= 1e-6,
          "row-sum err " + fmt(sum_err) + ", masked entries " + (masked_zero ? "exactly 0" : "nonzero") +
              ", temperature identity err " + fmt(rescale_err)};
}

// 6. End-to-end training on the default synthetic corpus.
struct RunMetrics {
  double overlap10 = 0, recall_all = 0, pos100 = 0, neg100 = 0;
};

RunMetrics metrics_of(const EvalReport& r) {
  return {r.overall.at("category_overlap@10").mean, r.overall.at("recall_all").mean,
          r.overall.at("retrieved_pos@100").mean, r.overall.at("retrieved_neg@100").mean};
}

Outcome end_to_end(const std::vector<std::uint64_t>& seeds) {
  const auto t0 = Clock::now();
  RunMetrics base_mean, trained_mean;
  for (auto seed : seeds) {
    const auto corpus = generate_synthetic(SynthConfig{}, seed);
    const auto split = temporal_split(corpus, cutoff_for_test_fraction(corpus, 0.2), 0.2, seed);
    auto config = TrainConfig::info_nce_preset();
    config.seed = seed;
    const auto initial =
        init_checkpoint(BackboneConfig{}, corpus.lexicon(), corpus.registry(), HeadConfig{}, config.loss, seed);
    const auto bb = initial.make_backbone();
    const auto base = metrics_of(evaluate(corpus, split.test, initial, *bb));
    const auto result = train(corpus, split, config, initial, *bb);
    const auto trained = metrics_of(evaluate(corpus, split.test, result.model, *bb));
    std::printf("  seed %llu: baseline overlap@10 %.4f recall_all %.4f | trained overlap@10 %.4f recall_all %.4f "
                "pos@100 %.4f neg@100 %.4f (%.0f s)\n",
                static_cast<unsigned long long>(seed), base.overlap10, base.recall_all, trained.overlap10,
                trained.recall_all, trained.pos100, trained.neg100, seconds_since(t0));
    std::fflush(stdout);
    const double n = static_cast<double>(seeds.size());
    base_mean.overlap10 += base.overlap10 / n;
    base_mean.recall_all += base.recall_all / n;
    trained_mean.overlap10 += trained.overlap10 / n;
    trained_mean.recall_all += trained.recall_all / n;
    trained_mean.pos100 += trained.pos100 / n;
    trained_mean.neg100 += trained.neg100 / n;
  }
  const double elapsed = seconds_since(t0);
  const bool pass = trained_mean.overlap10 >= 0.80 && trained_mean.pos100 > trained_mean.neg100 &&
                    trained_mean.overlap10 >= 1.2 * base_mean.overlap10 &&
                    trained_mean.recall_all >= 1.2 * base_mean.recall_all && elapsed < 1800;
  return {pass, "mean overlap@10 " + fmt(trained_mean.overlap10) + " (baseline " + fmt(base_mean.overlap10) +
                    "), recall_all " + fmt(trained_mean.recall_all) + " (baseline " + fmt(base_mean.recall_all) +
                    "), pos@100 " + fmt(trained_mean.pos100) + " vs neg@100 " + fmt(trained_mean.neg100) + ", " +
                    fmt(elapsed, 4) + " s"};
}

// 7. Hand-computed metrics on the three-project fixture.
Outcome metric_fixture() {
  const oracle::MetricFixture fx;
  EvalConfig cfg;
  cfg.k_list = {2, 4};
  const auto report = evaluate_embeddings(fx.corpus, fx.test, fx.projects, fx.freelancers, Normalization::l2, cfg);
  std::size_t checked = 0, wrong = 0;
  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (const auto& row : report.projects) {
    const auto& want = fx.expected.at(row.project_id);
    if (row.values.size() != want.size()) ++wrong;
    for (const auto& [name, value] : want) {
      ++checked;
      const auto it = row.values.find(name);
      if (it == row.values.end() || it->second != value) ++wrong;
      sums[name].first += value;
      ++sums[name].second;
    }
  }
  for (const auto& [name, s] : sums) {
    const auto& got = report.overall.at(name);
    if (got.support != s.second || std::abs(got.mean - s.first / static_cast<double>(s.second)) > 1e-12) ++wrong;
  }
  return {wrong == 0 && report.projects.size() == 3,
          std::to_string(checked) + " per-project values and " + std::to_string(sums.size()) + " means, " +
              std::to_string(wrong) + " mismatches"};
}

// 8. HNSW recall, filters and latency.
struct IndexProbe {
  double recall = 0;
  double p95_ms = 0;
  bool filters_ok = true;
};

IndexProbe probe_index(const std::vector<IndexedVector>& data, const std::vector<std::vector<float>>& queries,
                       const std::vector<Filter>& filters) {
  const std::size_t k = 100, dim = data.front().vector.size();
  auto unit = [&](const std::vector<float>& v) {
    double s = 0;
    for (float x : v) s += double(x) * x;
    std::vector<double> u(dim);
    for (std::size_t c = 0; c < dim; ++c) u[c] = v[c] / std::sqrt(s);
    return u;
  };
  std::vector<std::vector<double>> units;
  for (const auto& v : data) units.push_back(unit(v.vector));
  const VectorIndex index(data);

  IndexProbe out;
  std::vector<double> exact_ms;
  for (const auto& query : queries) {
    const auto q = unit(query);
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < units.size(); ++i)
      scored.emplace_back(-std::inner_product(q.begin(), q.end(), units[i].begin(), 0.0), i);
    std::partial_sort(scored.begin(), scored.begin() + k, scored.end());
    std::set<std::string> truth;
    for (std::size_t i = 0; i < k; ++i) truth.insert(data[scored[i].second].doc_id);

    std::size_t hits = 0;
    for (const auto& h : index.knn(query, k, {}, SearchMode::approximate)) hits += truth.count(h.doc_id);
    out.recall += static_cast<double>(hits) / k / static_cast<double>(queries.size());

    const auto t0 = Clock::now();
    const auto exact = index.knn(query, k);
    exact_ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    out.filters_ok &= exact.size() == k;

    for (const auto& f : filters)
      for (auto mode : {SearchMode::exact, SearchMode::approximate}) {
        const auto found = index.knn(query, 20, f, mode);
        out.filters_ok &= found.size() == 20;
        for (const auto& h : found) out.filters_ok &= f.matches(data[std::stoul(h.doc_id.substr(1))].tags);
      }
  }
  std::sort(exact_ms.begin(), exact_ms.end());
  out.p95_ms = exact_ms[static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(exact_ms.size()))) - 1];
  return out;
}

Outcome hnsw() {
  // Embeddings of 10k synthetic profiles from the default (untrained) 128-d model,
  // queried with project embeddings.
  SynthConfig sc;
  sc.n_freelancers = 10000;
  sc.n_projects = 100;
  const auto corpus = generate_synthetic(sc, 8);
  const auto model = init_checkpoint(BackboneConfig{}, corpus.lexicon(), corpus.registry(), HeadConfig{},
                                     LossKind::dual_a_info_nce, 8);
  const auto bb = model.make_backbone();
  std::vector<IndexedVector> data;
  for (std::size_t i = 0; i < corpus.profiles().size(); ++i) {
    const auto& doc = corpus.profiles()[i];
    data.push_back({"d" + std::to_string(i), model.encode(doc, *bb).vector,
                    {{"category", doc.category}, {"language", doc.language}}});
  }
  std::vector<std::vector<float>> queries;
  for (const auto& doc : corpus.proposals()) queries.push_back(model.encode(doc, *bb).vector);

  std::vector<Filter> filters(2);
  filters[0].where("language", {data.front().tags.at("language")});
  filters[1].where("category", {data.front().tags.at("category")}).where("language", {"fr"});  // below 10%
  const auto emb = probe_index(data, queries, filters);

  // Isotropic Gaussian vectors, reported for reference only.
  Rng rng(808);
  auto gaussian = [&] {
    std::vector<float> v(128);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
  };
  std::vector<IndexedVector> iso;
  for (std::size_t i = 0; i < 10000; ++i) iso.push_back({"d" + std::to_string(i), gaussian(), {}});
  std::vector<std::vector<float>> iso_queries;
  for (int q = 0; q < 50; ++q) iso_queries.push_back(gaussian());
  const auto ref = probe_index(iso, iso_queries, {});

  return {emb.recall >= 0.95 && emb.filters_ok && emb.p95_ms < 10.0,
          "embeddings: recall@100 " + fmt(emb.recall) + ", filters " + (emb.filters_ok ? "ok" : "leaked") +
              ", exact p95 " + fmt(emb.p95_ms, 3) + " ms; isotropic Gaussian reference recall@100 " + fmt(ref.recall) +
              ", exact p95 " + fmt(ref.p95_ms, 3) + " ms"};
}

// 9. Seeds reproduce corpora, batches and loss trajectories; the backbone is untouched.
Outcome determinism() {
  SynthConfig sc;
  sc.n_freelancers = 400;
  sc.n_projects = 40;
  const auto a = generate_synthetic(sc, 9);
  const auto b = generate_synthetic(sc, 9);
  auto same = [](auto x, auto y) { return std::equal(x.begin(), x.end(), y.begin(), y.end()); };
  const bool corpora = same(a.profiles(), b.profiles()) && same(a.proposals(), b.proposals()) &&
                       same(a.interactions(), b.interactions()) && a.lexicon() == b.lexicon();
  const auto split = temporal_split(a, cutoff_for_test_fraction(a, 0.2), 0.2, 9);

  bool batches = true, losses = true, frozen = true;
  BackboneConfig bc;
  bc.d_model = 32;
  bc.n_heads = 4;
  bc.ff_dim = 64;
  HeadConfig hc;
  hc.d_model = 32;
  hc.ff_dim = 64;
  for (auto kind : {LossKind::dual_a_info_nce, LossKind::dual_a_triplets}) {
    auto cfg = TrainConfig::preset(kind);
    const BatchSampler sampler(a, split.train, cfg);
    Rng r1(4), r2(4);
    const auto e1 = sampler.epoch(r1), e2 = sampler.epoch(r2);
    batches &= e1.size() == e2.size() && !e1.empty();
    for (std::size_t i = 0; batches && i < e1.size(); ++i)
      batches &= e1[i].ids() == e2[i].ids() && e1[i].a_pf.values == e2[i].a_pf.values &&
                 e1[i].a_ff.values == e2[i].a_ff.values;

    cfg.max_steps = 10;
    const auto init = init_checkpoint(bc, a.lexicon(), a.registry(), hc, kind, 9);
    const auto bb = init.make_backbone();
    const auto before = bb->checksum();
    const auto t1 = train(a, split, cfg, init, *bb);
    const auto t2 = train(a, split, cfg, init, *bb);
    losses &= t1.history.size() == 10 && t2.history.size() == 10;
    for (std::size_t i = 0; losses && i < 10; ++i) {
      const auto l1 = static_cast<float>(t1.history[i].loss), l2 = static_cast<float>(t2.history[i].loss);
      losses &= std::memcmp(&l1, &l2, sizeof(float)) == 0;
    }
    frozen &= t1.backbone_checksum_before == before && t1.backbone_checksum_after == before &&
              bb->checksum() == before && init.make_backbone()->checksum() == before;
  }
  return {corpora && batches && losses && frozen, std::string("corpora ") + (corpora ? "equal" : "differ") +
                                                      ", batches " + (batches ? "equal" : "differ") +
                                                      ", 10-step losses " + (losses ? "bit-equal" : "differ") +
                                                      ", backbone checksum " + (frozen ? "unchanged" : "changed")};
}

// 10. Dialect-rendered documents encode exactly like their latent originals.
Outcome dialect_alignment() {
  SynthConfig cfg;
  cfg.n_freelancers = 600;
  cfg.n_projects = 60;
  const auto dialect = generate_synthetic(cfg, 10);
  cfg.render_dialects = false;
  const auto latent = generate_synthetic(cfg, 10);

  BackboneConfig bc;
  bc.d_model = 32;
  bc.n_heads = 4;
  bc.ff_dim = 64;
  HeadConfig hc;
  hc.d_model = 32;
  hc.ff_dim = 64;
  const auto model = init_checkpoint(bc, dialect.lexicon(), dialect.registry(), hc, LossKind::dual_a_info_nce, 10);
  const auto bb = model.make_backbone();
  std::size_t rendered = 0, compared = 0, different = 0;
  auto compare = [&](std::span<const Document> xs, std::span<const Document> ys) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (xs[i].sections == ys[i].sections) continue;
      ++rendered;
      ++compared;
      if (model.encode(xs[i], *bb).vector != model.encode(ys[i], *bb).vector) ++different;
    }
  };
  compare(dialect.profiles(), latent.profiles());
  compare(dialect.proposals(), latent.proposals());
  return {rendered > 0 && different == 0,
          std::to_string(compared) + " dialect-rendered documents, " + std::to_string(different) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  app.add_option("--only", only, "Run only these criteria (1-10)");
  app.add_option("--seeds", seeds, "Corpus/training seeds for the end-to-end run");
  std::vector<int> allow_fail;
  app.add_option("--allow-fail", allow_fail, "Criteria whose FAIL is reported but does not set the exit code");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradients},
      {"loss oracle equivalence", loss_oracles},
      {"adjacency oracle", adjacency_oracle},
      {"pooling oracle", pooling_oracle},
      {"masked softmax", masked_softmax_checks},
      {"end-to-end synthetic separation", [&] { return end_to_end(seeds); }},
      {"metric fixtures", metric_fixture},
      {"HNSW recall, filters and latency", hnsw},
      {"determinism", determinism},
      {"dialect alignment", dialect_alignment},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const bool tolerated = std::find(allow_fail.begin(), allow_fail.end(), id) != allow_fail.end();
    failures += out.pass || tolerated ? 0 : 1;
    std::printf("%s %2d %s: %s%s\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), out.detail.c_str(),
                !out.pass && tolerated ? " (known failure, exit code unaffected)" : "");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
