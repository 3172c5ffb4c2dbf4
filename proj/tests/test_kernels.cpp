#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "mlgcn/errors.hpp"
#include "mlgcn/kernels.hpp"
#include "mlgcn/rng.hpp"

using namespace mlgcn;
namespace k = mlgcn::kernels;

namespace {

// Sizes chosen to cover sub-vector, exact-vector and remainder lanes.
const std::vector<std::size_t> kSizes = {1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 32, 33, 64, 67};

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -3.0, double hi = 3.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Runs `fn` once per backend and returns the two outputs for comparison.
template <typename Fn>
std::pair<std::vector<double>, std::vector<double>> on_both_backends(Fn&& fn) {
    const k::Backend before = k::active_backend();
    k::set_backend(k::Backend::scalar);
    std::vector<double> scalar_out = fn();
    k::set_backend(k::Backend::avx2);
    std::vector<double> simd_out = fn();
    k::set_backend(before);
    return {std::move(scalar_out), std::move(simd_out)};
}

}  // namespace

TEST_CASE("kernels: scalar and AVX2 backends are bitwise identical") {
    if (!k::backend_available(k::Backend::avx2)) {
        MESSAGE("AVX2 not available on this host; dispatch equivalence not testable");
        return;
    }
    Rng rng(20240811);

    SUBCASE("elementwise add / mul / axpy / leaky_relu") {
        for (std::size_t n : kSizes) {
            const auto a = random_vec(rng, n);
            const auto b = random_vec(rng, n);
            auto [s1, v1] = on_both_backends([&] {
                std::vector<double> out(n);
                k::add(a.data(), b.data(), out.data(), n);
                return out;
            });
            CHECK(bits_equal(s1, v1));

            auto [s2, v2] = on_both_backends([&] {
                std::vector<double> out(n);
                k::mul(a.data(), b.data(), out.data(), n);
                return out;
            });
            CHECK(bits_equal(s2, v2));

            auto [s3, v3] = on_both_backends([&] {
                std::vector<double> out = b;
                k::axpy(0.37, a.data(), out.data(), n);
                return out;
            });
            CHECK(bits_equal(s3, v3));

            auto [s4, v4] = on_both_backends([&] {
                std::vector<double> out(n);
                k::leaky_relu(a.data(), out.data(), n, 0.2);
                return out;
            });
            CHECK(bits_equal(s4, v4));
        }
    }

    SUBCASE("gradient kernels accumulate identically") {
        for (std::size_t n : kSizes) {
            const auto x = random_vec(rng, n);
            const auto gout = random_vec(rng, n);
            const auto seed = random_vec(rng, n);

            auto [s1, v1] = on_both_backends([&] {
                std::vector<double> gin = seed;
                k::leaky_relu_grad(x.data(), gout.data(), gin.data(), n, 0.2);
                return gin;
            });
            CHECK(bits_equal(s1, v1));

            std::vector<double> y(n);
            k::sigmoid(x.data(), y.data(), n);
            auto [s2, v2] = on_both_backends([&] {
                std::vector<double> gin = seed;
                k::sigmoid_grad(y.data(), gout.data(), gin.data(), n);
                return gin;
            });
            CHECK(bits_equal(s2, v2));
        }
    }

    SUBCASE("sgd_step updates parameters and velocity identically") {
        for (std::size_t n : kSizes) {
            const auto param = random_vec(rng, n);
            const auto grad = random_vec(rng, n);
            const auto vel = random_vec(rng, n, -0.5, 0.5);
            auto [s, v] = on_both_backends([&] {
                std::vector<double> p = param, vl = vel;
                k::sgd_step(p.data(), grad.data(), vl.data(), n, 0.01, 0.9, 1e-4);
                p.insert(p.end(), vl.begin(), vl.end());
                return p;
            });
            CHECK(bits_equal(s, v));
        }
    }

    SUBCASE("matmul over mixed shapes, including lane remainders") {
        for (std::size_t m : {1u, 2u, 5u}) {
            for (std::size_t kk : {1u, 3u, 8u, 17u}) {
                for (std::size_t n : {1u, 4u, 6u, 19u, 33u}) {
                    const auto a = random_vec(rng, m * kk);
                    const auto b = random_vec(rng, kk * n);
                    auto [s, v] = on_both_backends([&] {
                        std::vector<double> c(m * n);
                        k::matmul(a.data(), b.data(), c.data(), m, kk, n);
                        return c;
                    });
                    CHECK(bits_equal(s, v));
                }
            }
        }
    }
}

TEST_CASE("kernels: backend plumbing") {
    CHECK(k::backend_available(k::Backend::scalar));
    CHECK(k::backend_name(k::Backend::scalar) == "scalar");
    CHECK(k::backend_name(k::Backend::avx2) == "avx2");
    const k::Backend before = k::active_backend();
    k::set_backend(k::Backend::scalar);
    CHECK(k::active_backend() == k::Backend::scalar);
    k::set_backend(before);
}

TEST_CASE("kernels: scalar reference semantics") {
    SUBCASE("matmul accumulates over k in ascending order") {
        // 1x3 by 3x1: ((a0*b0) + a1*b1) + a2*b2 exactly, no reassociation.
        const double a[3] = {1e16, 1.0, -1e16};
        const double b[3] = {1.0, 1.0, 1.0};
        double c = 0.0;
        k::set_backend(k::Backend::scalar);
        k::matmul(a, b, &c, 1, 3, 1);
        CHECK(c == ((1e16 + 1.0) + -1e16));  // = 0, the rounded left-to-right sum
    }

    SUBCASE("sigmoid is stable, bounded, and symmetric") {
        const double xs[] = {-1000.0, -37.0, -1.0, 0.0, 1.0, 37.0, 1000.0};
        for (double x : xs) {
            double y = 0.0, ny = 0.0;
            k::sigmoid(&x, &y, 1);
            const double neg = -x;
            k::sigmoid(&neg, &ny, 1);
            CHECK(y > 0.0);
            CHECK(y < 1.0);
            CHECK(std::fabs((y + ny) - 1.0) <= 1e-15);
        }
        double y = 0.0;
        const double hard = -1000.0;
        k::sigmoid(&hard, &y, 1);
        CHECK(y <= 1e-300);
        CHECK(std::isfinite(y));
    }

    SUBCASE("reduce_sum is the sequential left-to-right sum") {
        const double xs[4] = {1e16, 1.0, 1.0, -1e16};
        CHECK(k::reduce_sum(xs, 4) == (((1e16 + 1.0) + 1.0) + -1e16));
    }

    SUBCASE("max_pool_channels takes the first occurrence on ties") {
        // 1 channel, 2x2 spatial, max 5 appears twice.
        const double maps[4] = {1.0, 5.0, 5.0, 2.0};
        double out = 0.0;
        std::size_t arg = 99;
        k::max_pool_channels(maps, 1, 2, 2, &out, &arg);
        CHECK(out == 5.0);
        CHECK(arg == 1);
    }

    SUBCASE("bce_with_logits_sum matches the naive formula where it is safe") {
        const double s[2] = {0.3, -1.2};
        const double y[2] = {1.0, 0.0};
        const double naive = -(std::log(1.0 / (1.0 + std::exp(-0.3)))) -
                             std::log(1.0 - 1.0 / (1.0 + std::exp(1.2)));
        CHECK(k::bce_with_logits_sum(s, y, 2) == doctest::Approx(naive).epsilon(1e-12));
        // Saturated logits stay finite where the naive form overflows.
        const double hard_s[2] = {-800.0, 800.0};
        const double hard_y[2] = {1.0, 0.0};
        const double loss = k::bce_with_logits_sum(hard_s, hard_y, 2);
        CHECK(std::isfinite(loss));
        CHECK(loss == doctest::Approx(1600.0).epsilon(1e-12));
    }
}

TEST_CASE("kernels: MLGCN_BACKEND env override validation") {
    CHECK_THROWS_AS(k::set_backend(static_cast<k::Backend>(42)), ConfigError);
}
