#include "situ/numerics/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "situ/common/error.hpp"

namespace situ::num::kernels {

#ifndef SITU_HAVE_AVX2_KERNELS
const KernelTable* avx2_table() { return nullptr; }
#endif

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

namespace {

const KernelTable* startup_choice() {
    const char* env = std::getenv("SITU_KERNELS");
    if (env != nullptr && std::string(env) == "scalar") return &scalar_table();
    if (avx2_table() != nullptr && cpu_has_avx2()) return avx2_table();
    return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> table{startup_choice()};
    return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void select(Isa isa) {
    if (isa == Isa::scalar) {
        current().store(&scalar_table());
        return;
    }
    if (avx2_table() == nullptr || !cpu_has_avx2()) throw ConfigError("AVX2 kernels unavailable on this build or CPU");
    current().store(avx2_table());
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

}  // namespace situ::num::kernels
