#include <cmath>
#include <functional>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "skillmatch/autograd.hpp"
#include "skillmatch/gradcheck.hpp"
#include "skillmatch/random.hpp"
#include "skillmatch/tensor.hpp"

using namespace skillmatch;
using Catch::Matchers::WithinAbs;

namespace {

template <typename T>
Tensor<T> random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor<T> t(r, c);
  for (auto& v : t.values()) v = static_cast<T>(rng.normal() * scale);
  return t;
}

Tensor<double> naive_matmul(const Tensor<double>& a, const Tensor<double>& b) {
  Tensor<double> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

std::vector<std::uint8_t> random_mask(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<std::uint8_t> mask(rows * cols);
  for (auto& m : mask) m = rng.bernoulli(0.6) ? 1 : 0;
  for (std::size_t r = 0; r < rows; ++r) mask[r * cols + rng.below(cols)] = 1;
  return mask;
}

// Checks a single-input scalar function through the tape.
double check_unary(const std::function<Var<double>(const Var<double>&)>& f, Tensor<double> x, std::uint64_t seed) {
  Parameter<double> p(std::move(x));
  Parameter<double>* ps[] = {&p};
  Rng rng(seed + 1);
  auto w = random_tensor<double>(p.value.rows(), p.value.cols(), rng);
  auto loss = [&](Tape<double>& t) -> Var<double> {
    return sum(hadamard(f(t.parameter(p)), t.constant(w)));
  };
  // f's output shape may differ from x's; rebuild weights to match.
  {
    Tape<double> probe;
    auto y = f(probe.parameter(p));
    w = random_tensor<double>(y.rows(), y.cols(), rng);
  }
  return finite_diff_check<double>(loss, ps, 1e-6, seed).max_rel_error;
}

}  // namespace

TEST_CASE("matrix products agree with a naive loop", "[numerics]") {
  Rng rng(3);
  const auto a = random_tensor<double>(7, 5, rng);
  const auto b = random_tensor<double>(5, 4, rng);
  const auto ref = naive_matmul(a, b);
  const auto got = matmul(a, b);
  for (std::size_t i = 0; i < ref.size(); ++i) REQUIRE_THAT(got[i], WithinAbs(ref[i], 1e-12));

  SECTION("transposed operands") {
    Tensor<double> out(7, 4, 1.0);
    gemm(transposed(a), true, transposed(b), true, out, 2.0, 1.0);
    for (std::size_t i = 0; i < ref.size(); ++i) REQUIRE_THAT(out[i], WithinAbs(2 * ref[i] + 1, 1e-12));
  }

  SECTION("shape mismatch throws") {
    REQUIRE_THROWS_AS(matmul(a, a), ShapeError);
  }
}

TEST_CASE("checksum tracks content and shape", "[numerics]") {
  Tensor<float> a(2, 3, 1.0f);
  Tensor<float> b(3, 2, 1.0f);
  REQUIRE(checksum(a) == checksum(Tensor<float>(2, 3, 1.0f)));
  REQUIRE(checksum(a) != checksum(b));
  a(1, 2) = 1.5f;
  REQUIRE(checksum(a) != checksum(Tensor<float>(2, 3, 1.0f)));
}

TEST_CASE("masked softmax", "[numerics][softmax]") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 1 + rng.below(6), cols = 1 + rng.below(9);
    const auto logits = random_tensor<double>(rows, cols, rng, 3.0);
    const auto mask = random_mask(rows, cols, rng);
    const double tau = 0.05 + rng.uniform() * 2;

    Tape<double> tape;
    const auto p = masked_softmax(tape.constant(logits), mask, tau).value();

    // Rows sum to one and masked entries are exactly zero.
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < cols; ++c) {
        if (!mask[r * cols + c]) REQUIRE(p(r, c) == 0.0);
        s += p(r, c);
      }
      REQUIRE_THAT(s, WithinAbs(1.0, 1e-12));
    }

    // softmax(x / tau) at temperature 1 equals softmax at temperature tau.
    Tensor<double> scaled = logits;
    for (auto& v : scaled.values()) v /= tau;
    const auto q = masked_softmax(tape.constant(scaled), mask, 1.0).value();
    for (std::size_t i = 0; i < p.size(); ++i) REQUIRE_THAT(p[i], WithinAbs(q[i], 1e-12));

    const auto lp = masked_log_softmax(tape.constant(logits), mask, tau).value();
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (mask[i]) REQUIRE_THAT(lp[i], WithinAbs(std::log(p[i]), 1e-9));
      else REQUIRE(lp[i] == 0.0);
    }
  }
}

TEST_CASE("masked softmax edge cases", "[numerics][softmax]") {
  Tape<double> tape;

  SECTION("huge logits do not overflow") {
    Tensor<double> big(1, 3, std::vector<double>{1000.0, 999.0, -1000.0});
    std::vector<std::uint8_t> all{1, 1, 1};
    const auto p = masked_softmax(tape.constant(big), all, 0.05).value();
    for (double v : p.values()) REQUIRE(std::isfinite(v));
    REQUIRE_THAT(p[0] + p[1] + p[2], WithinAbs(1.0, 1e-9));
  }

  SECTION("a fully masked row is rejected") {
    Tensor<double> x(1, 2);
    std::vector<std::uint8_t> none{0, 0};
    REQUIRE_THROWS(masked_softmax(tape.constant(x), none, 1.0));
  }
}

TEST_CASE("layer norm matches a direct computation", "[numerics]") {
  Rng rng(5);
  const auto x = random_tensor<double>(3, 6, rng);
  const auto g = random_tensor<double>(1, 6, rng);
  const auto b = random_tensor<double>(1, 6, rng);
  Tape<double> tape;
  const auto y = layer_norm(tape.constant(x), tape.constant(g), tape.constant(b), 1e-5).value();
  for (std::size_t r = 0; r < 3; ++r) {
    double mean = 0, var = 0;
    for (std::size_t c = 0; c < 6; ++c) mean += x(r, c) / 6;
    for (std::size_t c = 0; c < 6; ++c) var += (x(r, c) - mean) * (x(r, c) - mean) / 6;
    for (std::size_t c = 0; c < 6; ++c) {
      const double want = (x(r, c) - mean) / std::sqrt(var + 1e-5) * g[c] + b[c];
      REQUIRE_THAT(y(r, c), WithinAbs(want, 1e-12));
    }
  }
}

TEST_CASE("distances and margins", "[numerics]") {
  Rng rng(9);
  const auto a = random_tensor<double>(2, 4, rng);
  const auto b = random_tensor<double>(3, 4, rng);
  Tape<double> tape;
  const auto d = pairwise_distance(tape.constant(a), tape.constant(b));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += (a(i, k) - b(j, k)) * (a(i, k) - b(j, k));
      REQUIRE_THAT(d.value()(i, j), WithinAbs(std::sqrt(s), 1e-12));
    }
  const auto m = triplet_margins(d, 0.5).value();
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 9);
  REQUIRE_THAT(m(1, 0 * 3 + 2), WithinAbs(d.value()(1, 0) - d.value()(1, 2) + 0.5, 1e-12));

  SECTION("rows are unit length after l2 normalization") {
    const auto n = l2_normalize_rows(tape.constant(b)).value();
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0;
      for (double v : n.row(r)) s += v * v;
      REQUIRE_THAT(s, WithinAbs(1.0, 1e-12));
    }
  }
}

TEST_CASE("every differentiable op passes a finite-difference check", "[numerics][grad]") {
  Rng rng(21);
  const auto other = random_tensor<double>(4, 5, rng);
  const auto other_t = random_tensor<double>(5, 3, rng);
  const auto row = random_tensor<double>(1, 5, rng);
  std::vector<std::uint8_t> mask{1, 0, 1, 1, 1, 1, 1, 0, 0, 1, 0, 1, 1, 1, 1, 0, 1, 1, 1, 1};
  const std::size_t picks[] = {3, 0, 3};

  using F = std::function<Var<double>(const Var<double>&)>;
  const std::vector<std::pair<const char*, F>> ops = {
      {"matmul", [&](const Var<double>& x) { return matmul(x, x.tape().constant(other_t)); }},
      {"matmul_nt", [&](const Var<double>& x) { return matmul_nt(x, x.tape().constant(other)); }},
      {"transpose", [&](const Var<double>& x) { return transpose(x); }},
      {"add/sub", [&](const Var<double>& x) { return sub(add(x, x.tape().constant(other)), scale(x, 0.3)); }},
      {"hadamard", [&](const Var<double>& x) { return hadamard(x, x); }},
      {"add_row", [&](const Var<double>& x) { return add_row(x, x.tape().constant(row)); }},
      {"gelu", [&](const Var<double>& x) { return gelu(x); }},
      {"log", [&](const Var<double>& x) { return log(add(hadamard(x, x), x.tape().constant(Tensor<double>(4, 5, 1.0)))); }},
      {"softmax_rows", [&](const Var<double>& x) { return softmax_rows(x); }},
      {"masked_softmax", [&](const Var<double>& x) { return masked_softmax(x, mask, 0.7); }},
      {"masked_log_softmax", [&](const Var<double>& x) { return masked_log_softmax(x, mask, 0.05); }},
      {"layer_norm", [&](const Var<double>& x) {
         auto& t = x.tape();
         return layer_norm(x, t.constant(row), t.constant(Tensor<double>(1, 5, 0.1)));
       }},
      {"concat", [&](const Var<double>& x) {
         return concat_cols<double>({concat_rows<double>({x, slice_rows(x, 1, 2)}), concat_rows<double>({x, slice_rows(x, 0, 2)})});
       }},
      {"slice_cols", [&](const Var<double>& x) { return slice_cols(x, 1, 3); }},
      {"select_rows", [&](const Var<double>& x) { return select_rows<double>(x, picks); }},
      {"l2_normalize", [&](const Var<double>& x) { return l2_normalize_rows(x); }},
      {"pairwise_distance", [&](const Var<double>& x) { return pairwise_distance(x, x.tape().constant(other)); }},
      {"triplet_margins", [&](const Var<double>& x) {
         return triplet_margins(pairwise_distance(x, x.tape().constant(other)), 1.0);
       }},
  };
  for (const auto& [name, f] : ops) {
    DYNAMIC_SECTION(name) {
      REQUIRE(check_unary(f, random_tensor<double>(4, 5, rng), 77) < 1e-6);
    }
  }

  SECTION("relu away from the kink") {
    auto x = random_tensor<double>(4, 5, rng);
    for (auto& v : x.values()) v += v > 0 ? 0.1 : -0.1;
    REQUIRE(check_unary([](const Var<double>& v) { return relu(v); }, x, 5) < 1e-6);
  }
}

TEST_CASE("tape bookkeeping", "[numerics]") {
  Parameter<double> p(Tensor<double>(1, 2, std::vector<double>{1.0, 2.0}));
  Tape<double> tape;
  const auto x = tape.parameter(p);
  const auto loss = sum(hadamard(x, x));

  SECTION("gradient accumulates into the parameter") {
    p.zero_grad();
    tape.backward(loss);
    REQUIRE(p.grad[0] == 2.0);
    REQUIRE(p.grad[1] == 4.0);
  }

  SECTION("backward twice without reset is an error") {
    tape.backward(loss);
    REQUIRE_THROWS_AS(tape.backward(loss), GradientError);
  }

  SECTION("non-scalar loss is an error") {
    REQUIRE_THROWS_AS(tape.backward(x), GradientError);
  }

  SECTION("float and double agree") {
    Parameter<float> pf(p.value.cast<float>());
    Tape<float> tf;
    const auto lf = sum(hadamard(tf.parameter(pf), tf.parameter(pf)));
    REQUIRE_THAT(static_cast<double>(lf.value()[0]), WithinAbs(loss.value()[0], 1e-6));
  }
}
