#ifndef ADCGS_TENSOR_KERNELS_H_
#define ADCGS_TENSOR_KERNELS_H_

#include <cstddef>
#include <span>

// Dense matrix kernels. Each parallel kernel has a serial reference
// implementation that the tests compare against. All matrices are row-major.
// Every output element is reduced in ascending index order by exactly one
// thread, so parallel results do not depend on the thread count.
namespace adcgs::kernels {

// c[n×m] (+)= a[n×k] · b[k×m]
template <typename T>
void matmul(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t n,
            std::size_t k, std::size_t m, bool accumulate = false);
template <typename T>
void matmul_serial(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t n,
                   std::size_t k, std::size_t m, bool accumulate = false);

// c[k×m] += aᵀ · b with a[n×k], b[n×m]
template <typename T>
void matmul_at_b(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t n,
                 std::size_t k, std::size_t m);
template <typename T>
void matmul_at_b_serial(std::span<const T> a, std::span<const T> b, std::span<T> c,
                        std::size_t n, std::size_t k, std::size_t m);

// c[n×k] += a · bᵀ with a[n×m], b[k×m]
template <typename T>
void matmul_a_bt(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t n,
                 std::size_t k, std::size_t m);
template <typename T>
void matmul_a_bt_serial(std::span<const T> a, std::span<const T> b, std::span<T> c,
                        std::size_t n, std::size_t k, std::size_t m);

// Number of OpenMP threads kernels will use (1 when built without OpenMP).
int max_threads();

}  // namespace adcgs::kernels

#endif  // ADCGS_TENSOR_KERNELS_H_
