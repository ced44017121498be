#include <immintrin.h>

#include "situ/numerics/kernels.hpp"

namespace situ::num::kernels {
namespace {

// Separate mul and add intrinsics (never fmadd) to match the scalar rounding.

void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    const std::size_t n4 = n - n % 4;
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            const __m256d avec = _mm256_set1_pd(av);
            const double* brow = b + p * n;
            std::size_t j = 0;
            for (; j < n4; j += 4) {
                const __m256d prod = _mm256_mul_pd(avec, _mm256_loadu_pd(brow + j));
                _mm256_storeu_pd(crow + j, _mm256_add_pd(_mm256_loadu_pd(crow + j), prod));
            }
            for (; j < n; ++j) crow[j] = crow[j] + av * brow[j];
        }
    }
}

void axpy_avx2(std::size_t n, double alpha, const double* x, double* y) {
    const __m256d av = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void add_avx2(std::size_t n, const double* a, const double* b, double* out) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_avx2(std::size_t n, const double* a, const double* b, double* out) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

double dot_avx2(std::size_t n, const double* a, const double* b) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    double s = (lane[0] + lane[1]) + (lane[2] + lane[3]);
    for (; i < n; ++i) s = s + a[i] * b[i];
    return s;
}

}  // namespace

const KernelTable* avx2_table() {
    static const KernelTable table{Isa::avx2, gemm_avx2, axpy_avx2, add_avx2, mul_avx2, dot_avx2};
    return &table;
}

}  // namespace situ::num::kernels
