#include "skillmatch/tensor.hpp"

#include <Eigen/Core>
#include <cstring>

namespace skillmatch {

std::string shape_string(const Shape& shape) {
  return "[" + std::to_string(shape[0]) + "x" + std::to_string(shape[1]) + "]";
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<const RowMat<T>> view(const Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

template <typename T>
Eigen::Map<RowMat<T>> view(Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

}  // namespace

template <typename T>
void gemm(const Tensor<T>& a, bool transpose_a, const Tensor<T>& b, bool transpose_b,
          Tensor<T>& out, T alpha, T beta) {
  const std::size_t m = transpose_a ? a.cols() : a.rows();
  const std::size_t ka = transpose_a ? a.rows() : a.cols();
  const std::size_t kb = transpose_b ? b.cols() : b.rows();
  const std::size_t n = transpose_b ? b.rows() : b.cols();
  if (ka != kb) {
    throw ShapeError("matmul inner dimensions differ: " + shape_string(a.shape()) +
                     (transpose_a ? "^T" : "") + " * " + shape_string(b.shape()) +
                     (transpose_b ? "^T" : ""));
  }
  if (out.rows() != m || out.cols() != n) {
    throw ShapeError("matmul output shape " + shape_string(out.shape()) + " expected " +
                     shape_string({m, n}));
  }
  if (m == 0 || n == 0) return;
  auto o = view(out);
  if (beta == T{0}) {
    o.setZero();
  } else if (beta != T{1}) {
    o *= beta;
  }
  if (ka == 0) return;
  const auto av = view(a);
  const auto bv = view(b);
  if (!transpose_a && !transpose_b) {
    o.noalias() += alpha * (av * bv);
  } else if (!transpose_a && transpose_b) {
    o.noalias() += alpha * (av * bv.transpose());
  } else if (transpose_a && !transpose_b) {
    o.noalias() += alpha * (av.transpose() * bv);
  } else {
    o.noalias() += alpha * (av.transpose() * bv.transpose());
  }
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul inner dimensions differ: " + shape_string(a.shape()) + " * " +
                     shape_string(b.shape()));
  }
  Tensor<T> out(a.rows(), b.cols());
  gemm(a, false, b, false, out);
  return out;
}

template <typename T>
Tensor<T> transposed(const Tensor<T>& a) {
  Tensor<T> out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  }
  return out;
}

template <typename T>
std::uint64_t checksum(const Tensor<T>& t, std::uint64_t seed) {
  std::uint64_t h = seed;
  auto mix = [&h](const unsigned char* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  const std::uint64_t dims[2] = {t.rows(), t.cols()};
  mix(reinterpret_cast<const unsigned char*>(dims), sizeof(dims));
  mix(reinterpret_cast<const unsigned char*>(t.data()), t.size() * sizeof(T));
  return h;
}

#define SKILLMATCH_INSTANTIATE(T)                                                         \
  template void gemm<T>(const Tensor<T>&, bool, const Tensor<T>&, bool, Tensor<T>&, T, T); \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> transposed<T>(const Tensor<T>&);                                     \
  template std::uint64_t checksum<T>(const Tensor<T>&, std::uint64_t);

SKILLMATCH_INSTANTIATE(float)
SKILLMATCH_INSTANTIATE(double)
#undef SKILLMATCH_INSTANTIATE

}  // namespace skillmatch
