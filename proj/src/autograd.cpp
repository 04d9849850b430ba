#include "skillmatch/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace skillmatch {

// ---- Tape ------------------------------------------------------------------

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  return record(std::move(value), false, nullptr);
}

template <typename T>
Var<T> Tape<T>::constant_ref(const Tensor<T>& value) {
  Node node;
  node.external = &value;
  nodes_.push_back(std::move(node));
  return Var<T>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

template <typename T>
Var<T> Tape<T>::variable(Tensor<T> value) {
  return record(std::move(value), true, nullptr);
}

template <typename T>
Var<T> Tape<T>::parameter(Parameter<T>& param) {
  Node node;
  node.external = &param.value;
  node.requires_grad = true;
  node.param = &param;
  nodes_.push_back(std::move(node));
  return Var<T>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, bool requires_grad, BackwardFn backward) {
  Node node;
  node.owned = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var<T>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

template <typename T>
const Tensor<T>& Tape<T>::value(std::uint32_t id) const {
  const Node& n = nodes_.at(id);
  return n.external != nullptr ? *n.external : n.owned;
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) {
    const Tensor<T>& v = value(id);
    n.grad = Tensor<T>(v.rows(), v.cols());
  }
  return n.grad;
}

template <typename T>
Tensor<T> Tape<T>::grad(const Var<T>& v) const {
  const Node& n = nodes_.at(v.id());
  if (n.grad.empty()) {
    const Tensor<T>& val = value(v.id());
    return Tensor<T>(val.rows(), val.cols());
  }
  return n.grad;
}

template <typename T>
void Tape<T>::backward(const Var<T>& loss) {
  if (loss.valid() && &loss.tape() != this) throw GradientError("loss belongs to another tape");
  if (consumed_) throw GradientError("backward already ran on this tape; call reset() first");
  const Tensor<T>& lv = value(loss.id());
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw GradientError("backward needs a scalar loss, got " + shape_string(lv.shape()));
  }
  consumed_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss.id())(0, 0) = T{1};
  for (std::uint32_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) {
      Tensor<T>& g = n.param->grad;
      if (g.shape() != n.grad.shape()) g = Tensor<T>(n.grad.rows(), n.grad.cols());
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    }
  }
}

template <typename T>
void Tape<T>::reset() {
  nodes_.clear();
  consumed_ = false;
}

// ---- helpers ---------------------------------------------------------------

namespace {

template <typename T>
Tape<T>& same_tape(const Var<T>& a, const Var<T>& b) {
  if (!a.valid() || !b.valid()) throw GradientError("operation on an unbound variable");
  if (&a.tape() != &b.tape()) throw GradientError("operands recorded on different tapes");
  return a.tape();
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes differ " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
}

void check_mask(std::span<const std::uint8_t> mask, const Shape& shape, const char* op) {
  if (mask.size() != shape[0] * shape[1]) {
    throw ShapeError(std::string(op) + ": mask length " + std::to_string(mask.size()) +
                     " does not match " + shape_string(shape));
  }
  for (std::size_t r = 0; r < shape[0]; ++r) {
    bool any = false;
    for (std::size_t c = 0; c < shape[1]; ++c) any = any || mask[r * shape[1] + c] != 0;
    if (!any) {
      throw std::invalid_argument(std::string(op) + ": row " + std::to_string(r) +
                                  " has no allowed entry");
    }
  }
}

}  // namespace

// ---- linear algebra --------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = same_tape(a, b);
  Tensor<T> out = matmul(a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return tape.record(std::move(out), a.requires_grad() || b.requires_grad(),
                     [ia, ib](Tape<T>& t, std::uint32_t self) {
                       const Tensor<T>& g = t.upstream(self);
                       if (t.requires_grad(ia)) gemm(g, false, t.value(ib), true, t.grad_buffer(ia), T{1}, T{1});
                       if (t.requires_grad(ib)) gemm(t.value(ia), true, g, false, t.grad_buffer(ib), T{1}, T{1});
                     });
}

template <typename T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = same_tape(a, b);
  Tensor<T> out(a.rows(), b.rows());
  gemm(a.value(), false, b.value(), true, out);
  const auto ia = a.id(), ib = b.id();
  return tape.record(std::move(out), a.requires_grad() || b.requires_grad(),
                     [ia, ib](Tape<T>& t, std::uint32_t self) {
                       const Tensor<T>& g = t.upstream(self);
                       if (t.requires_grad(ia)) gemm(g, false, t.value(ib), false, t.grad_buffer(ia), T{1}, T{1});
                       if (t.requires_grad(ib)) gemm(g, true, t.value(ia), false, t.grad_buffer(ib), T{1}, T{1});
                     });
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
  const auto ia = a.id();
  return a.tape().record(transposed(a.value()), a.requires_grad(),
                         [ia](Tape<T>& t, std::uint32_t self) {
                           add_into(t.grad_buffer(ia), transposed(t.upstream(self)));
                         });
}

// ---- elementwise -----------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = same_tape(a, b);
  require_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  add_into(out, b.value());
  const auto ia = a.id(), ib = b.id();
  return tape.record(std::move(out), a.requires_grad() || b.requires_grad(),
                     [ia, ib](Tape<T>& t, std::uint32_t self) {
                       const Tensor<T>& g = t.upstream(self);
                       if (t.requires_grad(ia)) add_into(t.grad_buffer(ia), g);
                       if (t.requires_grad(ib)) add_into(t.grad_buffer(ib), g);
                     });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = same_tape(a, b);
  require_same_shape(a, b, "sub");
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] -= bv[k];
  const auto ia = a.id(), ib = b.id();
  return tape.record(std::move(out), a.requires_grad() || b.requires_grad(),
                     [ia, ib](Tape<T>& t, std::uint32_t self) {
                       const Tensor<T>& g = t.upstream(self);
                       if (t.requires_grad(ia)) add_into(t.grad_buffer(ia), g);
                       if (t.requires_grad(ib)) {
                         Tensor<T>& gb = t.grad_buffer(ib);
                         for (std::size_t k = 0; k < gb.size(); ++k) gb[k] -= g[k];
                       }
                     });
}

template <typename T>
Var<T> hadamard(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = same_tape(a, b);
  require_same_shape(a, b, "hadamard");
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= bv[k];
  const auto ia = a.id(), ib = b.id();
  return tape.record(std::move(out), a.requires_grad() || b.requires_grad(),
                     [ia, ib](Tape<T>& t, std::uint32_t self) {
                       const Tensor<T>& g = t.upstream(self);
                       if (t.requires_grad(ia)) {
                         Tensor<T>& ga = t.grad_buffer(ia);
                         const Tensor<T>& bv = t.value(ib);
                         for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[k] * bv[k];
                       }
                       if (t.requires_grad(ib)) {
                         Tensor<T>& gb = t.grad_buffer(ib);
                         const Tensor<T>& av = t.value(ia);
                         for (std::size_t k = 0; k < gb.size(); ++k) gb[k] += g[k] * av[k];
                       }
                     });
}

template <typename T>
Var<T> scale(const Var<T>& a, std::type_identity_t<T> factor) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v *= factor;
  const auto ia = a.id();
  return a.tape().record(std::move(out), a.requires_grad(),
                         [ia, factor](Tape<T>& t, std::uint32_t self) {
                           const Tensor<T>& g = t.upstream(self);
                           Tensor<T>& ga = t.grad_buffer(ia);
                           for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += factor * g[k];
                         });
}

template <typename T>
Var<T> add_row(const Var<T>& a, const Var<T>& row) {
  Tape<T>& tape = same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: row " + shape_string(row.shape()) + " cannot broadcast over " +
                     shape_string(a.shape()));
  }
  Tensor<T> out = a.value();
  const Tensor<T>& rv = row.value();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto dst = out.row(r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += rv[c];
  }
  const auto ia = a.id(), ir = row.id();
  return tape.record(std::move(out), a.requires_grad() || row.requires_grad(),
                     [ia, ir](Tape<T>& t, std::uint32_t self) {
                       const Tensor<T>& g = t.upstream(self);
                       if (t.requires_grad(ia)) add_into(t.grad_buffer(ia), g);
                       if (t.requires_grad(ir)) {
                         Tensor<T>& gr = t.grad_buffer(ir);
                         for (std::size_t r = 0; r < g.rows(); ++r) {
                           auto src = g.row(r);
                           for (std::size_t c = 0; c < src.size(); ++c) gr[c] += src[c];
                         }
                       }
                     });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = std::max(v, T{0});
  const auto ia = a.id();
  return a.tape().record(std::move(out), a.requires_grad(),
                         [ia](Tape<T>& t, std::uint32_t self) {
                           const Tensor<T>& g = t.upstream(self);
                           const Tensor<T>& x = t.value(ia);
                           Tensor<T>& ga = t.grad_buffer(ia);
                           for (std::size_t k = 0; k < ga.size(); ++k) {
                             if (x[k] > T{0}) ga[k] += g[k];
                           }
                         });
}

template <typename T>
Var<T> gelu(const Var<T>& a) {
  constexpr T kC = T(0.7978845608028654);  // sqrt(2 / pi)
  constexpr T kA = T(0.044715);
  const Tensor<T>& x = a.value();
  Tensor<T> out(x.rows(), x.cols());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const T v = x[k];
    out[k] = T(0.5) * v * (T{1} + std::tanh(kC * (v + kA * v * v * v)));
  }
  const auto ia = a.id();
  return a.tape().record(std::move(out), a.requires_grad(),
                         [ia](Tape<T>& t, std::uint32_t self) {
                           const Tensor<T>& g = t.upstream(self);
                           const Tensor<T>& x = t.value(ia);
                           Tensor<T>& ga = t.grad_buffer(ia);
                           for (std::size_t k = 0; k < ga.size(); ++k) {
                             const T v = x[k];
                             const T th = std::tanh(kC * (v + kA * v * v * v));
                             const T d = T(0.5) * (T{1} + th) +
                                         T(0.5) * v * (T{1} - th * th) * kC * (T{1} + T{3} * kA * v * v);
                             ga[k] += g[k] * d;
                           }
                         });
}

template <typename T>
Var<T> log(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.values()) v = std::log(v);
  const auto ia = a.id();
  return a.tape().record(std::move(out), a.requires_grad(),
                         [ia](Tape<T>& t, std::uint32_t self) {
                           const Tensor<T>& g = t.upstream(self);
                           const Tensor<T>& x = t.value(ia);
                           Tensor<T>& ga = t.grad_buffer(ia);
                           for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[k] / x[k];
                         });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T total{0};
  for (T v : a.value().values()) total += v;
  const auto ia = a.id();
  return a.tape().record(Tensor<T>(1, 1, total), a.requires_grad(),
                         [ia](Tape<T>& t, std::uint32_t self) {
                           const T g = t.upstream(self)(0, 0);
                           for (auto& v : t.grad_buffer(ia).values()) v += g;
                         });
}

// ---- softmax family --------------------------------------------------------

namespace {

// Fills `out` with the masked log-softmax of logits / temperature; masked entries
// get -inf so the caller can choose its own convention.
template <typename T>
void masked_log_softmax_kernel(const Tensor<T>& x, std::span<const std::uint8_t> mask,
                               T temperature, Tensor<T>& out) {
  const T inv_tau = T{1} / temperature;
  const bool all = mask.empty();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    auto orow = out.row(r);
    const std::uint8_t* m = all ? nullptr : mask.data() + r * x.cols();
    T peak = -std::numeric_limits<T>::infinity();
    for (std::size_t c = 0; c < xr.size(); ++c) {
      if (all || m[c]) peak = std::max(peak, xr[c] * inv_tau);
    }
    T denom{0};
    for (std::size_t c = 0; c < xr.size(); ++c) {
      if (all || m[c]) denom += std::exp(xr[c] * inv_tau - peak);
    }
    const T lse = peak + std::log(denom);
    for (std::size_t c = 0; c < xr.size(); ++c) {
      orow[c] = (all || m[c]) ? xr[c] * inv_tau - lse : -std::numeric_limits<T>::infinity();
    }
  }
}

}  // namespace

template <typename T>
Var<T> masked_softmax(const Var<T>& logits, std::span<const std::uint8_t> mask,
                      std::type_identity_t<T> temperature) {
  if (!(temperature > T{0})) throw std::invalid_argument("masked_softmax: temperature must be > 0");
  check_mask(mask, logits.shape(), "masked_softmax");
  Tensor<T> out(logits.rows(), logits.cols());
  masked_log_softmax_kernel(logits.value(), mask, temperature, out);
  for (auto& v : out.values()) v = std::exp(v);  // exp(-inf) == 0 on masked entries
  const auto ia = logits.id();
  return logits.tape().record(std::move(out), logits.requires_grad(),
                              [ia, temperature](Tape<T>& t, std::uint32_t self) {
                                const Tensor<T>& g = t.upstream(self);
                                const Tensor<T>& y = t.value(self);
                                Tensor<T>& ga = t.grad_buffer(ia);
                                for (std::size_t r = 0; r < y.rows(); ++r) {
                                  auto yr = y.row(r);
                                  auto gr = g.row(r);
                                  T dot{0};
                                  for (std::size_t c = 0; c < yr.size(); ++c) dot += gr[c] * yr[c];
                                  auto dst = ga.row(r);
                                  for (std::size_t c = 0; c < yr.size(); ++c) {
                                    dst[c] += yr[c] * (gr[c] - dot) / temperature;
                                  }
                                }
                              });
}

template <typename T>
Var<T> masked_log_softmax(const Var<T>& logits, std::span<const std::uint8_t> mask,
                          std::type_identity_t<T> temperature) {
  if (!(temperature > T{0})) {
    throw std::invalid_argument("masked_log_softmax: temperature must be > 0");
  }
  check_mask(mask, logits.shape(), "masked_log_softmax");
  Tensor<T> out(logits.rows(), logits.cols());
  masked_log_softmax_kernel(logits.value(), mask, temperature, out);
  std::vector<std::uint8_t> keep(mask.begin(), mask.end());
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!keep[k]) out[k] = T{0};
  }
  const auto ia = logits.id();
  return logits.tape().record(
      std::move(out), logits.requires_grad(),
      [ia, temperature, keep = std::move(keep)](Tape<T>& t, std::uint32_t self) {
        const Tensor<T>& g = t.upstream(self);
        const Tensor<T>& y = t.value(self);
        Tensor<T>& ga = t.grad_buffer(ia);
        const std::size_t cols = y.cols();
        for (std::size_t r = 0; r < y.rows(); ++r) {
          const std::uint8_t* m = keep.data() + r * cols;
          T gsum{0};
          for (std::size_t c = 0; c < cols; ++c) {
            if (m[c]) gsum += g(r, c);
          }
          for (std::size_t c = 0; c < cols; ++c) {
            if (m[c]) ga(r, c) += (g(r, c) - std::exp(y(r, c)) * gsum) / temperature;
          }
        }
      });
}

template <typename T>
Var<T> softmax_rows(const Var<T>& logits) {
  Tensor<T> out(logits.rows(), logits.cols());
  masked_log_softmax_kernel(logits.value(), {}, T{1}, out);
  for (auto& v : out.values()) v = std::exp(v);
  const auto ia = logits.id();
  return logits.tape().record(std::move(out), logits.requires_grad(),
                              [ia](Tape<T>& t, std::uint32_t self) {
                                const Tensor<T>& g = t.upstream(self);
                                const Tensor<T>& y = t.value(self);
                                Tensor<T>& ga = t.grad_buffer(ia);
                                for (std::size_t r = 0; r < y.rows(); ++r) {
                                  auto yr = y.row(r);
                                  auto gr = g.row(r);
                                  T dot{0};
                                  for (std::size_t c = 0; c < yr.size(); ++c) dot += gr[c] * yr[c];
                                  auto dst = ga.row(r);
                                  for (std::size_t c = 0; c < yr.size(); ++c) dst[c] += yr[c] * (gr[c] - dot);
                                }
                              });
}

// ---- normalization ---------------------------------------------------------

template <typename T>
Var<T> layer_norm(const Var<T>& a, const Var<T>& gain, const Var<T>& bias,
                  std::type_identity_t<T> eps) {
  Tape<T>& tape = same_tape(a, gain);
  same_tape(a, bias);
  const std::size_t n = a.rows(), d = a.cols();
  if (gain.shape() != Shape{1, d} || bias.shape() != Shape{1, d}) {
    throw ShapeError("layer_norm: gain/bias must be " + shape_string({1, d}));
  }
  const Tensor<T>& x = a.value();
  const Tensor<T>& gv = gain.value();
  const Tensor<T>& bv = bias.value();
  Tensor<T> xhat(n, d);
  std::vector<T> inv_std(n);
  Tensor<T> out(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    auto xr = x.row(r);
    T mean{0};
    for (T v : xr) mean += v;
    mean /= static_cast<T>(d);
    T var{0};
    for (T v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<T>(d);
    inv_std[r] = T{1} / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      xhat(r, c) = (xr[c] - mean) * inv_std[r];
      out(r, c) = xhat(r, c) * gv[c] + bv[c];
    }
  }
  const auto ia = a.id(), ig = gain.id(), ib = bias.id();
  const bool needs = a.requires_grad() || gain.requires_grad() || bias.requires_grad();
  return tape.record(
      std::move(out), needs,
      [ia, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& t,
                                                                         std::uint32_t self) {
        const Tensor<T>& g = t.upstream(self);
        const std::size_t n = g.rows(), d = g.cols();
        if (t.requires_grad(ig) || t.requires_grad(ib)) {
          Tensor<T>* gg = t.requires_grad(ig) ? &t.grad_buffer(ig) : nullptr;
          Tensor<T>* gb = t.requires_grad(ib) ? &t.grad_buffer(ib) : nullptr;
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
              if (gg) (*gg)[c] += g(r, c) * xhat(r, c);
              if (gb) (*gb)[c] += g(r, c);
            }
          }
        }
        if (t.requires_grad(ia)) {
          const Tensor<T>& gv = t.value(ig);
          Tensor<T>& ga = t.grad_buffer(ia);
          std::vector<T> dxhat(d);
          for (std::size_t r = 0; r < n; ++r) {
            T sum_d{0}, sum_dx{0};
            for (std::size_t c = 0; c < d; ++c) {
              dxhat[c] = g(r, c) * gv[c];
              sum_d += dxhat[c];
              sum_dx += dxhat[c] * xhat(r, c);
            }
            const T k = inv_std[r] / static_cast<T>(d);
            for (std::size_t c = 0; c < d; ++c) {
              ga(r, c) += k * (static_cast<T>(d) * dxhat[c] - sum_d - xhat(r, c) * sum_dx);
            }
          }
        }
      });
}

template <typename T>
Var<T> l2_normalize_rows(const Var<T>& a) {
  constexpr T kTiny = T(1e-12);
  const Tensor<T>& x = a.value();
  Tensor<T> out(x.rows(), x.cols());
  std::vector<T> norms(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    T ss{0};
    for (T v : x.row(r)) ss += v * v;
    norms[r] = std::max(std::sqrt(ss), kTiny);
    auto dst = out.row(r);
    auto src = x.row(r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = src[c] / norms[r];
  }
  const auto ia = a.id();
  return a.tape().record(std::move(out), a.requires_grad(),
                         [ia, norms = std::move(norms)](Tape<T>& t, std::uint32_t self) {
                           const Tensor<T>& g = t.upstream(self);
                           const Tensor<T>& y = t.value(self);
                           Tensor<T>& ga = t.grad_buffer(ia);
                           for (std::size_t r = 0; r < y.rows(); ++r) {
                             auto yr = y.row(r);
                             auto gr = g.row(r);
                             T dot{0};
                             for (std::size_t c = 0; c < yr.size(); ++c) dot += yr[c] * gr[c];
                             auto dst = ga.row(r);
                             for (std::size_t c = 0; c < yr.size(); ++c) {
                               dst[c] += (gr[c] - yr[c] * dot) / norms[r];
                             }
                           }
                         });
}

// ---- structural ------------------------------------------------------------

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  Tape<T>& tape = parts.front().tape();
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  bool needs = false;
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    same_tape(parts.front(), p);
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    offsets.push_back(rows);
    ids.push_back(p.id());
    rows += p.rows();
    needs = needs || p.requires_grad();
  }
  Tensor<T> out(rows, cols);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor<T>& v = parts[i].value();
    std::copy(v.data(), v.data() + v.size(), out.data() + offsets[i] * cols);
  }
  return tape.record(std::move(out), needs,
                     [ids = std::move(ids), offsets = std::move(offsets)](Tape<T>& t,
                                                                          std::uint32_t self) {
                       const Tensor<T>& g = t.upstream(self);
                       for (std::size_t i = 0; i < ids.size(); ++i) {
                         if (!t.requires_grad(ids[i])) continue;
                         Tensor<T>& gp = t.grad_buffer(ids[i]);
                         const T* src = g.data() + offsets[i] * g.cols();
                         for (std::size_t k = 0; k < gp.size(); ++k) gp[k] += src[k];
                       }
                     });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  Tape<T>& tape = parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  bool needs = false;
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    same_tape(parts.front(), p);
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    offsets.push_back(cols);
    ids.push_back(p.id());
    cols += p.cols();
    needs = needs || p.requires_grad();
  }
  Tensor<T> out(rows, cols);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor<T>& v = parts[i].value();
    for (std::size_t r = 0; r < rows; ++r) {
      auto src = v.row(r);
      std::copy(src.begin(), src.end(), out.row(r).begin() + offsets[i]);
    }
  }
  return tape.record(std::move(out), needs,
                     [ids = std::move(ids), offsets = std::move(offsets)](Tape<T>& t,
                                                                          std::uint32_t self) {
                       const Tensor<T>& g = t.upstream(self);
                       for (std::size_t i = 0; i < ids.size(); ++i) {
                         if (!t.requires_grad(ids[i])) continue;
                         Tensor<T>& gp = t.grad_buffer(ids[i]);
                         for (std::size_t r = 0; r < gp.rows(); ++r) {
                           auto src = g.row(r).subspan(offsets[i], gp.cols());
                           auto dst = gp.row(r);
                           for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
                         }
                       }
                     });
}

template <typename T>
Var<T> slice_rows(const Var<T>& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.rows()) throw ShapeError("slice_rows: range exceeds " + shape_string(a.shape()));
  const Tensor<T>& v = a.value();
  Tensor<T> out(count, v.cols());
  std::copy(v.data() + begin * v.cols(), v.data() + (begin + count) * v.cols(), out.data());
  const auto ia = a.id();
  return a.tape().record(std::move(out), a.requires_grad(),
                         [ia, begin](Tape<T>& t, std::uint32_t self) {
                           const Tensor<T>& g = t.upstream(self);
                           Tensor<T>& ga = t.grad_buffer(ia);
                           T* dst = ga.data() + begin * ga.cols();
                           for (std::size_t k = 0; k < g.size(); ++k) dst[k] += g[k];
                         });
}

template <typename T>
Var<T> slice_cols(const Var<T>& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols()) throw ShapeError("slice_cols: range exceeds " + shape_string(a.shape()));
  const Tensor<T>& v = a.value();
  Tensor<T> out(v.rows(), count);
  for (std::size_t r = 0; r < v.rows(); ++r) {
    auto src = v.row(r).subspan(begin, count);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  const auto ia = a.id();
  return a.tape().record(std::move(out), a.requires_grad(),
                         [ia, begin](Tape<T>& t, std::uint32_t self) {
                           const Tensor<T>& g = t.upstream(self);
                           Tensor<T>& ga = t.grad_buffer(ia);
                           for (std::size_t r = 0; r < g.rows(); ++r) {
                             auto src = g.row(r);
                             auto dst = ga.row(r).subspan(begin, g.cols());
                             for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
                           }
                         });
}

template <typename T>
Var<T> select_rows(const Var<T>& a, std::span<const std::size_t> rows) {
  const Tensor<T>& v = a.value();
  Tensor<T> out(rows.size(), v.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= v.rows()) throw ShapeError("select_rows: index out of range");
    auto src = v.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  const auto ia = a.id();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return a.tape().record(std::move(out), a.requires_grad(),
                         [ia, idx = std::move(idx)](Tape<T>& t, std::uint32_t self) {
                           const Tensor<T>& g = t.upstream(self);
                           Tensor<T>& ga = t.grad_buffer(ia);
                           for (std::size_t i = 0; i < idx.size(); ++i) {
                             auto src = g.row(i);
                             auto dst = ga.row(idx[i]);
                             for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
                           }
                         });
}

// ---- metric ops ------------------------------------------------------------

template <typename T>
Var<T> pairwise_distance(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = same_tape(a, b);
  if (a.cols() != b.cols()) {
    throw ShapeError("pairwise_distance: dims differ " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Tensor<T> out(av.rows(), bv.rows());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    auto ai = av.row(i);
    for (std::size_t j = 0; j < bv.rows(); ++j) {
      auto bj = bv.row(j);
      T ss{0};
      for (std::size_t c = 0; c < ai.size(); ++c) {
        const T diff = ai[c] - bj[c];
        ss += diff * diff;
      }
      out(i, j) = std::sqrt(ss);
    }
  }
  const auto ia = a.id(), ib = b.id();
  return tape.record(std::move(out), a.requires_grad() || b.requires_grad(),
                     [ia, ib](Tape<T>& t, std::uint32_t self) {
                       const Tensor<T>& g = t.upstream(self);
                       const Tensor<T>& dist = t.value(self);
                       const Tensor<T>& av = t.value(ia);
                       const Tensor<T>& bv = t.value(ib);
                       Tensor<T>* ga = t.requires_grad(ia) ? &t.grad_buffer(ia) : nullptr;
                       Tensor<T>* gb = t.requires_grad(ib) ? &t.grad_buffer(ib) : nullptr;
                       for (std::size_t i = 0; i < av.rows(); ++i) {
                         for (std::size_t j = 0; j < bv.rows(); ++j) {
                           const T d = dist(i, j);
                           if (d == T{0} || g(i, j) == T{0}) continue;
                           const T k = g(i, j) / d;
                           for (std::size_t c = 0; c < av.cols(); ++c) {
                             const T diff = av(i, c) - bv(j, c);
                             if (ga) (*ga)(i, c) += k * diff;
                             if (gb) (*gb)(j, c) -= k * diff;
                           }
                         }
                       }
                     });
}

template <typename T>
Var<T> triplet_margins(const Var<T>& dist, std::type_identity_t<T> margin) {
  const Tensor<T>& dv = dist.value();
  const std::size_t n = dv.rows(), m = dv.cols();
  Tensor<T> out(n, m * m);
  for (std::size_t d = 0; d < n; ++d) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) out(d, i * m + j) = dv(d, i) - dv(d, j) + margin;
    }
  }
  const auto ia = dist.id();
  return dist.tape().record(std::move(out), dist.requires_grad(),
                            [ia, n, m](Tape<T>& t, std::uint32_t self) {
                              const Tensor<T>& g = t.upstream(self);
                              Tensor<T>& gd = t.grad_buffer(ia);
                              for (std::size_t d = 0; d < n; ++d) {
                                for (std::size_t i = 0; i < m; ++i) {
                                  for (std::size_t j = 0; j < m; ++j) {
                                    const T v = g(d, i * m + j);
                                    gd(d, i) += v;
                                    gd(d, j) -= v;
                                  }
                                }
                              }
                            });
}

// ---- instantiation ---------------------------------------------------------

#define SKILLMATCH_INSTANTIATE(T)                                                              \
  template class Tape<T>;                                                                      \
  template Var<T> matmul<T>(const Var<T>&, const Var<T>&);                                     \
  template Var<T> matmul_nt<T>(const Var<T>&, const Var<T>&);                                  \
  template Var<T> transpose<T>(const Var<T>&);                                                 \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                        \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                        \
  template Var<T> hadamard<T>(const Var<T>&, const Var<T>&);                                   \
  template Var<T> scale<T>(const Var<T>&, T);                                                  \
  template Var<T> add_row<T>(const Var<T>&, const Var<T>&);                                    \
  template Var<T> relu<T>(const Var<T>&);                                                      \
  template Var<T> gelu<T>(const Var<T>&);                                                      \
  template Var<T> log<T>(const Var<T>&);                                                       \
  template Var<T> sum<T>(const Var<T>&);                                                       \
  template Var<T> masked_softmax<T>(const Var<T>&, std::span<const std::uint8_t>, T);          \
  template Var<T> masked_log_softmax<T>(const Var<T>&, std::span<const std::uint8_t>, T);      \
  template Var<T> softmax_rows<T>(const Var<T>&);                                              \
  template Var<T> layer_norm<T>(const Var<T>&, const Var<T>&, const Var<T>&, T);               \
  template Var<T> concat_rows<T>(const std::vector<Var<T>>&);                                  \
  template Var<T> concat_cols<T>(const std::vector<Var<T>>&);                                  \
  template Var<T> slice_rows<T>(const Var<T>&, std::size_t, std::size_t);                      \
  template Var<T> slice_cols<T>(const Var<T>&, std::size_t, std::size_t);                      \
  template Var<T> select_rows<T>(const Var<T>&, std::span<const std::size_t>);                 \
  template Var<T> l2_normalize_rows<T>(const Var<T>&);                                         \
  template Var<T> pairwise_distance<T>(const Var<T>&, const Var<T>&);                          \
  template Var<T> triplet_margins<T>(const Var<T>&, T);

SKILLMATCH_INSTANTIATE(float)
SKILLMATCH_INSTANTIATE(double)
#undef SKILLMATCH_INSTANTIATE

}  // namespace skillmatch
