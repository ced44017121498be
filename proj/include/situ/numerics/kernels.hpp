#pragma once

#include <cstddef>
#include <string_view>

// Dense f64 inner loops. Every kernel has a scalar reference and, on x86-64, an
// AVX2 variant. The variants perform the same IEEE operations on every output
// element in the same order (vectorization runs across independent outputs, and
// reductions use the same 4-lane striping in both), so results are bit-identical
// and the choice of ISA never changes a training run.
namespace situ::num::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
    Isa isa;
    // c[m x n] = a[m x k] * b[k x n], all row-major, c overwritten.
    void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
    // y += alpha * x
    void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
    // out = a + b
    void (*add)(std::size_t n, const double* a, const double* b, double* out);
    // out = a * b
    void (*mul)(std::size_t n, const double* a, const double* b, double* out);
    // 4-lane striped dot product: lane l sums indices l, l+4, ...; lanes are then
    // combined as (l0 + l1) + (l2 + l3), and the tail is added last.
    double (*dot)(std::size_t n, const double* a, const double* b);
};

const KernelTable& scalar_table();

// nullptr when the binary was built without AVX2 kernels.
const KernelTable* avx2_table();

bool cpu_has_avx2();

// Table used by tensor ops. Chosen once at startup: AVX2 if compiled in and the
// CPU supports it, unless SITU_KERNELS=scalar is set in the environment.
const KernelTable& active();

// Overrides the startup choice. Throws if the ISA is unavailable.
void select(Isa isa);

std::string_view isa_name(Isa isa);

}  // namespace situ::num::kernels
