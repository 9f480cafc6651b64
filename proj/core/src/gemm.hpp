#pragma once

#include <cstddef>

namespace spnet::detail {

// C[M,N] (+)= A[M,K] * B[K,N], all row-major with the given leading
// dimensions. Single-threaded; every C element is reduced in ascending k order,
// so results are bit-reproducible for a given build.
template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
          std::size_t ldb, T* c, std::size_t ldc, bool accumulate);

// dst[cols, rows] = src[rows, cols]^T
template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst);

}  // namespace spnet::detail
