#include "skillmatch/attention.hpp"

#include <cmath>

#include "skillmatch/random.hpp"

namespace skillmatch {

template <typename T>
std::vector<Parameter<T>*> AttentionParams<T>::parameters() {
  return {&wq, &bq, &wk, &bk, &wv, &bv, &wo, &bo, &ln1_gain, &ln1_bias,
          &w1, &b1, &w2, &b2, &ln2_gain, &ln2_bias};
}

template <typename T>
std::vector<const Parameter<T>*> AttentionParams<T>::parameters() const {
  return {&wq, &bq, &wk, &bk, &wv, &bv, &wo, &bo, &ln1_gain, &ln1_bias,
          &w1, &b1, &w2, &b2, &ln2_gain, &ln2_bias};
}

template <typename T>
AttentionParams<T> init_attention(const AttentionShape& shape, std::uint64_t seed,
                                  double init_scale) {
  if (shape.n_heads == 0 || shape.d_model % shape.n_heads != 0) {
    throw ShapeError("attention: d_model " + std::to_string(shape.d_model) +
                     " not divisible by n_heads " + std::to_string(shape.n_heads));
  }
  Rng rng(seed);
  auto dense = [&](std::size_t in, std::size_t out) {
    Tensor<T> w(in, out);
    const double sd = init_scale / std::sqrt(static_cast<double>(in));
    for (auto& v : w.values()) v = static_cast<T>(rng.normal() * sd);
    return Parameter<T>(std::move(w));
  };
  auto zeros = [](std::size_t n) { return Parameter<T>(Tensor<T>(1, n)); };
  auto ones = [](std::size_t n) { return Parameter<T>(Tensor<T>(1, n, T{1})); };
  const std::size_t d = shape.d_model, f = shape.ff_dim;
  AttentionParams<T> p;
  p.wq = dense(d, d);
  p.bq = zeros(d);
  p.wk = dense(d, d);
  p.bk = zeros(d);
  p.wv = dense(d, d);
  p.bv = zeros(d);
  p.wo = dense(d, d);
  p.bo = zeros(d);
  p.ln1_gain = ones(d);
  p.ln1_bias = zeros(d);
  p.w1 = dense(d, f);
  p.b1 = zeros(f);
  p.w2 = dense(f, d);
  p.b2 = zeros(d);
  p.ln2_gain = ones(d);
  p.ln2_bias = zeros(d);
  return p;
}

namespace {

template <typename T, typename Bind>
AttentionVars<T> bind_with(Bind&& bind, auto& p) {
  return AttentionVars<T>{bind(p.wq), bind(p.bq), bind(p.wk), bind(p.bk),
                          bind(p.wv), bind(p.bv), bind(p.wo), bind(p.bo),
                          bind(p.ln1_gain), bind(p.ln1_bias),
                          bind(p.w1), bind(p.b1), bind(p.w2), bind(p.b2),
                          bind(p.ln2_gain), bind(p.ln2_bias)};
}

}  // namespace

template <typename T>
AttentionVars<T> bind_parameters(Tape<T>& tape, AttentionParams<T>& params) {
  return bind_with<T>([&tape](Parameter<T>& p) { return tape.parameter(p); }, params);
}

template <typename T>
AttentionVars<T> bind_constants(Tape<T>& tape, const AttentionParams<T>& params) {
  return bind_with<T>([&tape](const Parameter<T>& p) { return tape.constant_ref(p.value); },
                      params);
}

template <typename T>
Var<T> attention_block(const Var<T>& x, const AttentionVars<T>& v, std::size_t n_heads) {
  const std::size_t d = x.cols();
  if (n_heads == 0 || d % n_heads != 0) {
    throw ShapeError("attention_block: d_model " + std::to_string(d) +
                     " not divisible by n_heads " + std::to_string(n_heads));
  }
  if (v.wq.rows() != d) {
    throw ShapeError("attention_block: input width " + std::to_string(d) +
                     " does not match weights " + shape_string(v.wq.shape()));
  }
  const std::size_t dh = d / n_heads;
  const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(dh));

  const Var<T> q = add_row(matmul(x, v.wq), v.bq);
  const Var<T> k = add_row(matmul(x, v.wk), v.bk);
  const Var<T> val = add_row(matmul(x, v.wv), v.bv);

  std::vector<Var<T>> heads;
  heads.reserve(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Var<T> qh = slice_cols(q, h * dh, dh);
    const Var<T> kh = slice_cols(k, h * dh, dh);
    const Var<T> vh = slice_cols(val, h * dh, dh);
    const Var<T> weights = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt));
    heads.push_back(matmul(weights, vh));
  }
  const Var<T> mixed = n_heads == 1 ? heads.front() : concat_cols(heads);
  const Var<T> attended = add_row(matmul(mixed, v.wo), v.bo);
  const Var<T> x1 = layer_norm(add(x, attended), v.ln1_gain, v.ln1_bias);

  const Var<T> hidden = gelu(add_row(matmul(x1, v.w1), v.b1));
  const Var<T> ff = add_row(matmul(hidden, v.w2), v.b2);
  return layer_norm(add(x1, ff), v.ln2_gain, v.ln2_bias);
}

#define SKILLMATCH_INSTANTIATE(T)                                                          \
  template struct AttentionParams<T>;                                                      \
  template AttentionParams<T> init_attention<T>(const AttentionShape&, std::uint64_t, double); \
  template AttentionVars<T> bind_parameters<T>(Tape<T>&, AttentionParams<T>&);             \
  template AttentionVars<T> bind_constants<T>(Tape<T>&, const AttentionParams<T>&);        \
  template Var<T> attention_block<T>(const Var<T>&, const AttentionVars<T>&, std::size_t);

SKILLMATCH_INSTANTIATE(float)
SKILLMATCH_INSTANTIATE(double)
#undef SKILLMATCH_INSTANTIATE

}  // namespace skillmatch
