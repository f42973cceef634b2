#include "fump/simd/kernels.hpp"

#if defined(__aarch64__) || defined(_M_ARM64)
#include <arm_neon.h>

namespace fump::simd::detail {
namespace {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            float64x2_t acc0 = accumulate ? vld1q_f64(crow + j) : vdupq_n_f64(0.0);
            float64x2_t acc1 = accumulate ? vld1q_f64(crow + j + 2) : vdupq_n_f64(0.0);
            for (std::size_t p = 0; p < k; ++p) {
                const float64x2_t s = vdupq_n_f64(arow[p]);
                const double* brow = b + p * n + j;
                acc0 = vfmaq_f64(acc0, s, vld1q_f64(brow));
                acc1 = vfmaq_f64(acc1, s, vld1q_f64(brow + 2));
            }
            vst1q_f64(crow + j, acc0);
            vst1q_f64(crow + j + 2, acc1);
        }
        for (; j < n; ++j) {
            double acc = accumulate ? crow[j] : 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * b[p * n + j];
            crow[j] = acc;
        }
    }
}

void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                 double* c) {
    for (std::size_t p = 0; p < k; ++p) {
        double* crow = c + p * n;
        std::size_t j = 0;
        for (; j + 2 <= n; j += 2) {
            float64x2_t acc = vld1q_f64(crow + j);
            for (std::size_t i = 0; i < m; ++i) {
                acc = vfmaq_f64(acc, vdupq_n_f64(a[i * k + p]), vld1q_f64(b + i * n + j));
            }
            vst1q_f64(crow + j, acc);
        }
        for (; j < n; ++j) {
            double acc = crow[j];
            for (std::size_t i = 0; i < m; ++i) acc += a[i * k + p] * b[i * n + j];
            crow[j] = acc;
        }
    }
}

double dot(std::size_t n, const double* x, const double* y) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(x + i), vld1q_f64(y + i));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double v = dot(n, a + i * n, b + p * n);
            c[i * k + p] = accumulate ? c[i * k + p] + v : v;
        }
    }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
    const float64x2_t s = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), s, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void mul(std::size_t n, const double* x, const double* y, double* out) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    for (; i < n; ++i) out[i] = x[i] * y[i];
}

void mul_acc(std::size_t n, const double* x, const double* z, double* y) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), vld1q_f64(x + i), vld1q_f64(z + i)));
    }
    for (; i < n; ++i) y[i] += x[i] * z[i];
}

}  // namespace

const KernelTable* neon_table() {
    static const KernelTable table{Isa::Neon, gemm_nn, gemm_tn_acc, gemm_nt, dot, axpy, mul, mul_acc};
    return &table;
}

}  // namespace fump::simd::detail

#else

namespace fump::simd::detail {
const KernelTable* neon_table() { return nullptr; }
}  // namespace fump::simd::detail

#endif
