#pragma once

// Dense double-precision kernels behind the autodiff tape.
//
// Every kernel has a scalar reference implementation. Vectorized variants
// (AVX2+FMA on x86-64, NEON on aarch64) are selected once per process from
// the CPU feature set; set FUMP_SIMD=scalar|avx2|neon to force a variant.
// All matrices are row-major and densely packed.

#include <cstddef>
#include <string_view>

namespace fump::simd {

enum class Isa { Scalar, Avx2, Neon };

struct KernelTable {
    Isa isa;

    // c (+)= a[m x k] * b[k x n]
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c, bool accumulate);
    // c[k x n] += a[m x k]^T * b[m x n]
    void (*gemm_tn_acc)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                        const double* b, double* c);
    // c[m x k] (+)= a[m x n] * b[k x n]^T
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                    double* c, bool accumulate);

    double (*dot)(std::size_t n, const double* x, const double* y);
    // y += alpha * x
    void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
    // out = x * y (elementwise)
    void (*mul)(std::size_t n, const double* x, const double* y, double* out);
    // y += x * z (elementwise)
    void (*mul_acc)(std::size_t n, const double* x, const double* z, double* y);
};

/// Kernel table in use for this process.
const KernelTable& kernels();

/// Kernel table for a specific variant. Throws std::runtime_error when the
/// variant was not compiled in or the CPU lacks the instructions.
const KernelTable& kernels_for(Isa isa);

bool isa_available(Isa isa);
std::string_view isa_name(Isa isa);

namespace detail {
const KernelTable& scalar_table();
const KernelTable* avx2_table();  // nullptr when not compiled in
const KernelTable* neon_table();
}  // namespace detail

}  // namespace fump::simd
