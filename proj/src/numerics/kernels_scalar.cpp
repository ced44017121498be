#include "situ/numerics/kernels.hpp"

namespace situ::num::kernels {
namespace {

void gemm_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] = crow[j] + av * brow[j];
        }
    }
}

void axpy_scalar(std::size_t n, double alpha, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void add_scalar(std::size_t n, const double* a, const double* b, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_scalar(std::size_t n, const double* a, const double* b, double* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

double dot_scalar(std::size_t n, const double* a, const double* b) {
    double lane[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        for (int l = 0; l < 4; ++l) lane[l] = lane[l] + a[i + l] * b[i + l];
    }
    double s = (lane[0] + lane[1]) + (lane[2] + lane[3]);
    for (; i < n; ++i) s = s + a[i] * b[i];
    return s;
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{Isa::scalar, gemm_scalar, axpy_scalar, add_scalar, mul_scalar, dot_scalar};
    return table;
}

}  // namespace situ::num::kernels
