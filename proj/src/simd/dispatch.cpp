#include <cstdlib>
#include <stdexcept>
#include <string>

#include "fump/simd/kernels.hpp"

namespace fump::simd {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable& select() {
    if (const char* forced = std::getenv("FUMP_SIMD")) {
        const std::string name(forced);
        if (name == "scalar") return kernels_for(Isa::Scalar);
        if (name == "avx2") return kernels_for(Isa::Avx2);
        if (name == "neon") return kernels_for(Isa::Neon);
        if (name != "auto") throw std::runtime_error("FUMP_SIMD: unknown kernel variant '" + name + "'");
    }
    if (isa_available(Isa::Avx2)) return *detail::avx2_table();
    if (isa_available(Isa::Neon)) return *detail::neon_table();
    return detail::scalar_table();
}

}  // namespace

bool isa_available(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return true;
        case Isa::Avx2: return detail::avx2_table() != nullptr && cpu_has_avx2();
        case Isa::Neon: return detail::neon_table() != nullptr;
    }
    return false;
}

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
        case Isa::Neon: return "neon";
    }
    return "unknown";
}

const KernelTable& kernels_for(Isa isa) {
    if (!isa_available(isa)) {
        throw std::runtime_error("kernel variant '" + std::string(isa_name(isa)) +
                                 "' is not available on this machine");
    }
    switch (isa) {
        case Isa::Avx2: return *detail::avx2_table();
        case Isa::Neon: return *detail::neon_table();
        case Isa::Scalar: break;
    }
    return detail::scalar_table();
}

const KernelTable& kernels() {
    static const KernelTable& table = select();
    return table;
}

}  // namespace fump::simd
