#include "ric/blas.hpp"

#include <Eigen/Core>

namespace ric::blas {
namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstView = Eigen::Map<const Mat<T>, Eigen::Unaligned, Eigen::OuterStride<>>;
template <typename T>
using View = Eigen::Map<Mat<T>, Eigen::Unaligned, Eigen::OuterStride<>>;

template <typename T>
void gemm_impl(Op op_a, Op op_b, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
               std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc) {
  using Index = Eigen::Index;
  View<T> cm(c, Index(m), Index(n), Eigen::OuterStride<>(Index(ldc)));
  if (k == 0 || beta != T{1}) {
    if (beta == T{0}) {
      cm.setZero();
    } else {
      cm *= beta;
    }
  }
  if (m == 0 || n == 0 || k == 0) return;
  const bool overwrite = beta == T{0};
  // Stored shapes: a is m x k (or k x m when transposed), likewise b.
  const Index ar = op_a == Op::kNone ? Index(m) : Index(k);
  const Index ac = op_a == Op::kNone ? Index(k) : Index(m);
  const Index br = op_b == Op::kNone ? Index(k) : Index(n);
  const Index bc = op_b == Op::kNone ? Index(n) : Index(k);
  ConstView<T> am(a, ar, ac, Eigen::OuterStride<>(Index(lda)));
  ConstView<T> bm(b, br, bc, Eigen::OuterStride<>(Index(ldb)));
  auto apply = [&](const auto& product) {
    if (overwrite) {
      cm.noalias() = alpha * product;
    } else {
      cm.noalias() += alpha * product;
    }
  };
  if (op_a == Op::kNone && op_b == Op::kNone) {
    apply(am * bm);
  } else if (op_a == Op::kNone) {
    apply(am * bm.transpose());
  } else if (op_b == Op::kNone) {
    apply(am.transpose() * bm);
  } else {
    apply(am.transpose() * bm.transpose());
  }
}

}  // namespace

void gemm(Op op_a, Op op_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc) {
  gemm_impl(op_a, op_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm(Op op_a, Op op_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
          std::size_t ldc) {
  gemm_impl(op_a, op_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

}  // namespace ric::blas
