#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fump/simd/kernels.hpp"

using namespace fump::simd;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= tol);
}

std::vector<Isa> vector_isas() {
    std::vector<Isa> out;
    for (Isa isa : {Isa::Avx2, Isa::Neon}) {
        if (isa_available(isa)) out.push_back(isa);
    }
    return out;
}

}  // namespace

TEST_CASE("scalar table is always available and dispatch picks something") {
    CHECK(isa_available(Isa::Scalar));
    CHECK(kernels_for(Isa::Scalar).isa == Isa::Scalar);
    MESSAGE("active kernels: " << isa_name(kernels().isa));
}

TEST_CASE("vector kernels match the scalar reference") {
    const auto& ref = kernels_for(Isa::Scalar);
    std::mt19937_64 rng(42);
    for (Isa isa : vector_isas()) {
        const auto& vk = kernels_for(isa);
        INFO(isa_name(isa));
        // Odd sizes exercise every remainder path.
        for (std::size_t m : {1u, 3u, 8u, 13u}) {
            for (std::size_t n : {1u, 4u, 7u, 17u, 64u}) {
                for (std::size_t k : {1u, 5u, 9u, 33u}) {
                    const auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
                    auto c0 = random_vec(m * n, rng);
                    auto c1 = c0;
                    ref.gemm_nn(m, n, k, a.data(), b.data(), c0.data(), true);
                    vk.gemm_nn(m, n, k, a.data(), b.data(), c1.data(), true);
                    check_close(c0, c1, 1e-12);
                    ref.gemm_nn(m, n, k, a.data(), b.data(), c0.data(), false);
                    vk.gemm_nn(m, n, k, a.data(), b.data(), c1.data(), false);
                    check_close(c0, c1, 1e-12);

                    const auto g = random_vec(m * n, rng);
                    std::vector<double> t0(k * n, 0.25), t1(k * n, 0.25);
                    ref.gemm_tn_acc(m, n, k, a.data(), g.data(), t0.data());
                    vk.gemm_tn_acc(m, n, k, a.data(), g.data(), t1.data());
                    check_close(t0, t1, 1e-12);

                    const auto bt = random_vec(k * n, rng);
                    std::vector<double> n0(m * k, 0.0), n1(m * k, 0.0);
                    ref.gemm_nt(m, n, k, g.data(), bt.data(), n0.data(), false);
                    vk.gemm_nt(m, n, k, g.data(), bt.data(), n1.data(), false);
                    check_close(n0, n1, 1e-12);
                }
            }
        }
        for (std::size_t n : {0u, 1u, 3u, 4u, 9u, 31u, 100u}) {
            const auto x = random_vec(n, rng), y = random_vec(n, rng);
            CHECK(std::abs(ref.dot(n, x.data(), y.data()) - vk.dot(n, x.data(), y.data())) <= 1e-12);
            auto y0 = y, y1 = y;
            ref.axpy(n, 0.7, x.data(), y0.data());
            vk.axpy(n, 0.7, x.data(), y1.data());
            check_close(y0, y1, 1e-15);
            std::vector<double> m0(n), m1(n);
            ref.mul(n, x.data(), y.data(), m0.data());
            vk.mul(n, x.data(), y.data(), m1.data());
            check_close(m0, m1, 0.0);
            ref.mul_acc(n, x.data(), y.data(), y0.data());
            vk.mul_acc(n, x.data(), y.data(), y1.data());
            check_close(y0, y1, 1e-15);
        }
    }
}

TEST_CASE("unavailable variant throws") {
    for (Isa isa : {Isa::Avx2, Isa::Neon}) {
        if (!isa_available(isa)) CHECK_THROWS(kernels_for(isa));
    }
}
