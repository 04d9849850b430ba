#pragma once

#include <cstdint>
#include <vector>

#include "skillmatch/autograd.hpp"

namespace skillmatch {

struct AttentionShape {
  std::size_t d_model = 128;
  std::size_t n_heads = 4;
  std::size_t ff_dim = 512;
};

// Weights of one post-norm transformer encoder block:
// X1 = LN(X + MHA(X)), Y = LN(X1 + FFN(X1)).
template <typename T>
struct AttentionParams {
  Parameter<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Parameter<T> ln1_gain, ln1_bias;
  Parameter<T> w1, b1, w2, b2;
  Parameter<T> ln2_gain, ln2_bias;

  // Fixed order used by optimizers and serialization.
  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;

  template <typename U>
  AttentionParams<U> cast() const;
};

// Projections drawn from N(0, init_scale^2 / fan_in), biases zero, norm gains one.
template <typename T>
AttentionParams<T> init_attention(const AttentionShape& shape, std::uint64_t seed,
                                  double init_scale = 1.0);

template <typename T>
struct AttentionVars {
  Var<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Var<T> ln1_gain, ln1_bias;
  Var<T> w1, b1, w2, b2;
  Var<T> ln2_gain, ln2_bias;
};

// Binds trainable weights as parameters (gradients flow back into them).
template <typename T>
AttentionVars<T> bind_parameters(Tape<T>& tape, AttentionParams<T>& params);
// Binds weights as constants (no gradient, no copy).
template <typename T>
AttentionVars<T> bind_constants(Tape<T>& tape, const AttentionParams<T>& params);

// Multi-head self-attention + feed-forward block. No positional information is
// injected here, so the block is permutation-equivariant over rows.
template <typename T>
Var<T> attention_block(const Var<T>& x, const AttentionVars<T>& vars, std::size_t n_heads);

template <typename T>
template <typename U>
AttentionParams<U> AttentionParams<T>::cast() const {
  AttentionParams<U> out;
  auto dst = out.parameters();
  auto src = parameters();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value.template cast<U>();
  return out;
}

}  // namespace skillmatch
