#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "skillmatch/tensor.hpp"

namespace skillmatch {

class GradientError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A trainable weight and its accumulated gradient. The gradient buffer is
// allocated on first accumulation and keeps the value's shape.
template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  explicit Parameter(Tensor<T> v) : value(std::move(v)) {}

  void zero_grad() {
    if (grad.shape() != value.shape()) grad = Tensor<T>(value.rows(), value.cols());
    grad.fill(T{0});
  }
};

template <typename T>
class Tape;

// Handle to a node recorded on a tape. Cheap to copy; valid while the tape lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor<T>& value() const;
  Shape shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;

 private:
  Tape<T>* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Records forward operations so that gradients can be replayed in reverse.
// A tape is single-threaded; independent tapes may live on different threads.
template <typename T>
class Tape {
 public:
  // Receives the tape and the id of the node whose upstream gradient is ready.
  using BackwardFn = std::function<void(Tape&, std::uint32_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value);
  // Non-owning constant; `value` must outlive the tape.
  Var<T> constant_ref(const Tensor<T>& value);
  Var<T> variable(Tensor<T> value);
  // Leaf bound to `param`; backward() adds the leaf gradient into param.grad.
  Var<T> parameter(Parameter<T>& param);

  Var<T> record(Tensor<T> value, bool requires_grad, BackwardFn backward);

  // Populates gradients of every requires-grad node reachable from `loss`.
  // Throws if `loss` is not 1x1 or if backward already ran since the last reset().
  void backward(const Var<T>& loss);
  void reset();

  const Tensor<T>& value(std::uint32_t id) const;
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  // Gradient of a node after backward(); zeros when nothing flowed into it.
  Tensor<T> grad(const Var<T>& v) const;

  // Gradient accumulator for node `id`, zero-initialized on first access.
  Tensor<T>& grad_buffer(std::uint32_t id);
  const Tensor<T>& upstream(std::uint32_t id) const { return nodes_[id].grad; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
  };

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return tape_->requires_grad(id_);
}

// ---- differentiable operations --------------------------------------------

template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
// a * b^T
template <typename T> Var<T> matmul_nt(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> transpose(const Var<T>& a);
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> hadamard(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, std::type_identity_t<T> factor);
// Adds a 1 x cols row to every row of `a`.
template <typename T> Var<T> add_row(const Var<T>& a, const Var<T>& row);
template <typename T> Var<T> relu(const Var<T>& a);
// tanh approximation
template <typename T> Var<T> gelu(const Var<T>& a);
template <typename T> Var<T> log(const Var<T>& a);
template <typename T> Var<T> sum(const Var<T>& a);

// Row-wise softmax of logits / temperature over entries whose mask is 1.
// Masked entries are exactly 0. Every row needs at least one allowed entry.
template <typename T>
Var<T> masked_softmax(const Var<T>& logits, std::span<const std::uint8_t> mask,
                      std::type_identity_t<T> temperature);
// Row-wise log of masked_softmax on allowed entries; masked entries are 0.
template <typename T>
Var<T> masked_log_softmax(const Var<T>& logits, std::span<const std::uint8_t> mask,
                          std::type_identity_t<T> temperature);
template <typename T> Var<T> softmax_rows(const Var<T>& logits);

// Per-row normalization followed by an elementwise gain and bias (1 x cols each).
template <typename T>
Var<T> layer_norm(const Var<T>& a, const Var<T>& gain, const Var<T>& bias,
                  std::type_identity_t<T> eps = T(1e-5));

template <typename T> Var<T> concat_rows(const std::vector<Var<T>>& parts);
template <typename T> Var<T> concat_cols(const std::vector<Var<T>>& parts);
template <typename T> Var<T> slice_rows(const Var<T>& a, std::size_t begin, std::size_t count);
template <typename T> Var<T> slice_cols(const Var<T>& a, std::size_t begin, std::size_t count);
template <typename T> Var<T> select_rows(const Var<T>& a, std::span<const std::size_t> rows);

template <typename T> Var<T> l2_normalize_rows(const Var<T>& a);
// out(i, j) = ||a_i - b_j||_2; the gradient at zero distance is taken as zero.
template <typename T> Var<T> pairwise_distance(const Var<T>& a, const Var<T>& b);
// For a distance matrix [n x m], out(d, i * m + j) = dist(d, i) - dist(d, j) + margin.
template <typename T> Var<T> triplet_margins(const Var<T>& dist, std::type_identity_t<T> margin);

}  // namespace skillmatch
