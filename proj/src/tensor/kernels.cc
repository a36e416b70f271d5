#include "adcgs/tensor/kernels.h"

#include <omp.h>

#include <algorithm>
#include <vector>

namespace adcgs::kernels {
namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1 << 15;

}  // namespace

int max_threads() { return omp_get_max_threads(); }

template <typename T>
void matmul(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t n,
            std::size_t k, std::size_t m, bool accumulate) {
  const bool par = n * k * m >= kParallelWork && n > 1;
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    T* ci = c.data() + i * m;
    if (!accumulate) std::fill(ci, ci + m, T(0));
    const T* ai = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = ai[p];
      const T* bp = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
}

template <typename T>
void matmul_serial(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t n,
                   std::size_t k, std::size_t m, bool accumulate) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      T s = accumulate ? c[i * m + j] : T(0);
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * m + j];
      c[i * m + j] = s;
    }
  }
}

template <typename T>
void matmul_at_b(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t n,
                 std::size_t k, std::size_t m) {
  const bool par = n * k * m >= kParallelWork && k > 1;
  const std::size_t block = 16;
  const auto blocks = static_cast<std::ptrdiff_t>((k + block - 1) / block);
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t bi = 0; bi < blocks; ++bi) {
    const std::size_t p0 = static_cast<std::size_t>(bi) * block, p1 = std::min(k, p0 + block);
    for (std::size_t i = 0; i < n; ++i) {
      const T* ai = a.data() + i * k;
      const T* brow = b.data() + i * m;
      for (std::size_t p = p0; p < p1; ++p) {
        const T aip = ai[p];
        if (aip == T(0)) continue;
        T* cp = c.data() + p * m;
        for (std::size_t j = 0; j < m; ++j) cp[j] += aip * brow[j];
      }
    }
  }
}

template <typename T>
void matmul_at_b_serial(std::span<const T> a, std::span<const T> b, std::span<T> c,
                        std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < m; ++j) {
      T s = c[p * m + j];
      for (std::size_t i = 0; i < n; ++i) {
        const T aip = a[i * k + p];
        if (aip == T(0)) continue;
        s += aip * b[i * m + j];
      }
      c[p * m + j] = s;
    }
  }
}

template <typename T>
void matmul_a_bt(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t n,
                 std::size_t k, std::size_t m) {
  std::vector<T> bt(m * k);
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < m; ++j) bt[j * k + p] = b[p * m + j];
  }
  const bool par = n * k * m >= kParallelWork && n > 1;
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const T* ai = a.data() + i * m;
    T* ci = c.data() + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const T aij = ai[j];
      if (aij == T(0)) continue;
      const T* bj = bt.data() + j * k;
      for (std::size_t p = 0; p < k; ++p) ci[p] += aij * bj[p];
    }
  }
}

template <typename T>
void matmul_a_bt_serial(std::span<const T> a, std::span<const T> b, std::span<T> c,
                        std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      T s = T(0);
      for (std::size_t j = 0; j < m; ++j) s += a[i * m + j] * b[p * m + j];
      c[i * k + p] += s;
    }
  }
}

#define ADCGS_INSTANTIATE_KERNELS(T)                                                          \
  template void matmul<T>(std::span<const T>, std::span<const T>, std::span<T>, std::size_t,  \
                          std::size_t, std::size_t, bool);                                    \
  template void matmul_serial<T>(std::span<const T>, std::span<const T>, std::span<T>,        \
                                 std::size_t, std::size_t, std::size_t, bool);                \
  template void matmul_at_b<T>(std::span<const T>, std::span<const T>, std::span<T>,          \
                               std::size_t, std::size_t, std::size_t);                        \
  template void matmul_at_b_serial<T>(std::span<const T>, std::span<const T>, std::span<T>,   \
                                      std::size_t, std::size_t, std::size_t);                 \
  template void matmul_a_bt<T>(std::span<const T>, std::span<const T>, std::span<T>,          \
                               std::size_t, std::size_t, std::size_t);                        \
  template void matmul_a_bt_serial<T>(std::span<const T>, std::span<const T>, std::span<T>,   \
                                      std::size_t, std::size_t, std::size_t);

ADCGS_INSTANTIATE_KERNELS(float)
ADCGS_INSTANTIATE_KERNELS(double)

}  // namespace adcgs::kernels
