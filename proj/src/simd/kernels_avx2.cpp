// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "fump/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

namespace fump::simd::detail {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        std::size_t j = 0;
        for (; j + 8 <= n; j += 8) {
            __m256d acc0 = accumulate ? _mm256_loadu_pd(crow + j) : _mm256_setzero_pd();
            __m256d acc1 = accumulate ? _mm256_loadu_pd(crow + j + 4) : _mm256_setzero_pd();
            for (std::size_t p = 0; p < k; ++p) {
                const __m256d s = _mm256_broadcast_sd(arow + p);
                const double* brow = b + p * n + j;
                acc0 = _mm256_fmadd_pd(s, _mm256_loadu_pd(brow), acc0);
                acc1 = _mm256_fmadd_pd(s, _mm256_loadu_pd(brow + 4), acc1);
            }
            _mm256_storeu_pd(crow + j, acc0);
            _mm256_storeu_pd(crow + j + 4, acc1);
        }
        for (; j + 4 <= n; j += 4) {
            __m256d acc = accumulate ? _mm256_loadu_pd(crow + j) : _mm256_setzero_pd();
            for (std::size_t p = 0; p < k; ++p) {
                acc = _mm256_fmadd_pd(_mm256_broadcast_sd(arow + p), _mm256_loadu_pd(b + p * n + j),
                                      acc);
            }
            _mm256_storeu_pd(crow + j, acc);
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
        for (; j + 8 <= n; j += 8) {
            __m256d acc0 = _mm256_loadu_pd(crow + j);
            __m256d acc1 = _mm256_loadu_pd(crow + j + 4);
            for (std::size_t i = 0; i < m; ++i) {
                const __m256d s = _mm256_broadcast_sd(a + i * k + p);
                const double* brow = b + i * n + j;
                acc0 = _mm256_fmadd_pd(s, _mm256_loadu_pd(brow), acc0);
                acc1 = _mm256_fmadd_pd(s, _mm256_loadu_pd(brow + 4), acc1);
            }
            _mm256_storeu_pd(crow + j, acc0);
            _mm256_storeu_pd(crow + j + 4, acc1);
        }
        for (; j + 4 <= n; j += 4) {
            __m256d acc = _mm256_loadu_pd(crow + j);
            for (std::size_t i = 0; i < m; ++i) {
                acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + i * k + p),
                                      _mm256_loadu_pd(b + i * n + j), acc);
            }
            _mm256_storeu_pd(crow + j, acc);
        }
        for (; j < n; ++j) {
            double acc = crow[j];
            for (std::size_t i = 0; i < m; ++i) acc += a[i * k + p] * b[i * n + j];
            crow[j] = acc;
        }
    }
}

double dot(std::size_t n, const double* x, const double* y) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
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
    const __m256d s = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(s, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void mul(std::size_t n, const double* x, const double* y, double* out) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) out[i] = x[i] * y[i];
}

void mul_acc(std::size_t n, const double* x, const double* z, double* y) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(z + i),
                                                _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += x[i] * z[i];
}

}  // namespace

const KernelTable* avx2_table() {
    static const KernelTable table{Isa::Avx2, gemm_nn, gemm_tn_acc, gemm_nt, dot, axpy, mul, mul_acc};
    return &table;
}

}  // namespace fump::simd::detail

#else

namespace fump::simd::detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace fump::simd::detail

#endif
