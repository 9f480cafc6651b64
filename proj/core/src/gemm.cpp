#include "gemm.hpp"

#include <algorithm>
#include <cstring>

namespace spnet::detail {

namespace {

constexpr std::size_t kRowTile = 6;
constexpr std::size_t kDepthBlock = 256;
constexpr std::size_t kColBlock = 512;

// 64-byte vectors; on targets without 512-bit registers the compiler splits
// them.
template <typename T>
struct Vec {
  static constexpr std::size_t kLanes = 64 / sizeof(T);
  typedef T type __attribute__((vector_size(64)));
};

template <typename T>
inline typename Vec<T>::type load(const T* p) {
  typename Vec<T>::type v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

template <typename T>
inline void store(T* p, typename Vec<T>::type v) {
  std::memcpy(p, &v, sizeof(v));
}

// Register tile: kRowTile rows of C by 32 columns, accumulated over kb steps.
template <typename T>
inline void vector_kernel(std::size_t kb, const T* a, std::size_t lda, const T* b,
                          std::size_t ldb, T* c, std::size_t ldc) {
  using V = typename Vec<T>::type;
  constexpr std::size_t kVecs = 32 / Vec<T>::kLanes;
  V acc[kRowTile][kVecs] = {};
  for (std::size_t p = 0; p < kb; ++p) {
    const T* brow = b + p * ldb;
    V bv[kVecs];
    for (std::size_t v = 0; v < kVecs; ++v) bv[v] = load(brow + v * Vec<T>::kLanes);
    for (std::size_t r = 0; r < kRowTile; ++r) {
      const T av = a[r * lda + p];
      for (std::size_t v = 0; v < kVecs; ++v) acc[r][v] += av * bv[v];
    }
  }
  for (std::size_t r = 0; r < kRowTile; ++r) {
    for (std::size_t v = 0; v < kVecs; ++v) {
      T* dst = c + r * ldc + v * Vec<T>::kLanes;
      store(dst, load(dst) + acc[r][v]);
    }
  }
}

// Narrow edge tiles.
template <typename T, std::size_t NR>
inline void micro_kernel(std::size_t kb, const T* a, std::size_t lda, const T* b, std::size_t ldb,
                         T* c, std::size_t ldc) {
  T acc[kRowTile][NR] = {};
  for (std::size_t p = 0; p < kb; ++p) {
    const T* brow = b + p * ldb;
    for (std::size_t r = 0; r < kRowTile; ++r) {
      const T av = a[r * lda + p];
      for (std::size_t j = 0; j < NR; ++j) acc[r][j] += av * brow[j];
    }
  }
  for (std::size_t r = 0; r < kRowTile; ++r) {
    for (std::size_t j = 0; j < NR; ++j) c[r * ldc + j] += acc[r][j];
  }
}

template <typename T>
inline void row_kernel(std::size_t nb, std::size_t kb, const T* a, const T* b, std::size_t ldb,
                       T* c) {
  for (std::size_t p = 0; p < kb; ++p) {
    const T av = a[p];
    const T* brow = b + p * ldb;
    for (std::size_t j = 0; j < nb; ++j) c[j] += av * brow[j];
  }
}

}  // namespace

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
          std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, T(0));
  }
  for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
    const std::size_t nb = std::min(kColBlock, n - j0);
    for (std::size_t p0 = 0; p0 < k; p0 += kDepthBlock) {
      const std::size_t kb = std::min(kDepthBlock, k - p0);
      std::size_t i = 0;
      for (; i + kRowTile <= m; i += kRowTile) {
        const T* ablk = a + i * lda + p0;
        const T* bblk = b + p0 * ldb + j0;
        T* cblk = c + i * ldc + j0;
        std::size_t j = 0;
        for (; j + 32 <= nb; j += 32) vector_kernel<T>(kb, ablk, lda, bblk + j, ldb, cblk + j, ldc);
        for (; j + 8 <= nb; j += 8) micro_kernel<T, 8>(kb, ablk, lda, bblk + j, ldb, cblk + j, ldc);
        for (; j < nb; ++j) micro_kernel<T, 1>(kb, ablk, lda, bblk + j, ldb, cblk + j, ldc);
      }
      for (; i < m; ++i) {
        row_kernel(nb, kb, a + i * lda + p0, b + p0 * ldb + j0, ldb, c + i * ldc + j0);
      }
    }
  }
}

template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst) {
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
    for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
      const std::size_t r1 = std::min(rows, r0 + kTile);
      const std::size_t c1 = std::min(cols, c0 + kTile);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t cc = c0; cc < c1; ++cc) dst[cc * rows + r] = src[r * cols + cc];
      }
    }
  }
}

template void gemm<float>(std::size_t, std::size_t, std::size_t, const float*, std::size_t,
                          const float*, std::size_t, float*, std::size_t, bool);
template void gemm<double>(std::size_t, std::size_t, std::size_t, const double*, std::size_t,
                           const double*, std::size_t, double*, std::size_t, bool);
template void transpose<float>(std::size_t, std::size_t, const float*, float*);
template void transpose<double>(std::size_t, std::size_t, const double*, double*);

}  // namespace spnet::detail
