#pragma once

// Thin overload set over Eigen's gemm so kernels can be written once for
// float and double. Matrices are row-major.

#include <cstddef>

namespace ric::blas {

enum class Op { kNone, kTranspose };

void gemm(Op op_a, Op op_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc);

void gemm(Op op_a, Op op_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
          std::size_t ldc);

}  // namespace ric::blas
