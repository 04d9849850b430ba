#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace skillmatch {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::array<std::size_t, 2>;

std::string shape_string(const Shape& shape);

// Dense row-major rank-2 tensor. Vectors are 1 x n, scalars 1 x 1.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape()));
    }
  }

  static Tensor identity(std::size_t n) {
    Tensor out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = T{1};
    return out;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  Shape shape() const { return {rows_, cols_}; }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(rows_, cols_, std::move(out));
  }

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

// out = alpha * op(a) * op(b) + beta * out, where op transposes when requested.
// `out` must already have the product shape.
template <typename T>
void gemm(const Tensor<T>& a, bool transpose_a, const Tensor<T>& b, bool transpose_b,
          Tensor<T>& out, T alpha = T{1}, T beta = T{0});

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> transposed(const Tensor<T>& a);

// Stable content hash over shape and raw bytes (FNV-1a 64).
template <typename T>
std::uint64_t checksum(const Tensor<T>& t, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace skillmatch
