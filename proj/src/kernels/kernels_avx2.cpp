// AVX2 variants of the dispatched kernels. Each one mirrors the scalar
// reference element for element: same operation order per output value,
// separate multiply and add (no FMA), so results are bit-identical and the
// equivalence tests can compare with memcmp.

#if defined(MLGCN_HAVE_AVX2)

#include <immintrin.h>

#include <cstring>

#include "kernel_table.hpp"

namespace mlgcn::kernels::detail {

namespace {

void matmul_avx2(const double* a, const double* b, double* c,
                 std::size_t m, std::size_t k, std::size_t n) {
    std::memset(c, 0, m * n * sizeof(double));
    const std::size_t n4 = n - n % 4;
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = a[i * k + kk];
            const double* brow = b + kk * n;
            const __m256d va = _mm256_set1_pd(aik);
            std::size_t j = 0;
            for (; j < n4; j += 4) {
                __m256d vc = _mm256_loadu_pd(crow + j);
                const __m256d vb = _mm256_loadu_pd(brow + j);
                vc = _mm256_add_pd(vc, _mm256_mul_pd(va, vb));
                _mm256_storeu_pd(crow + j, vc);
            }
            for (; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

void add_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vy = _mm256_loadu_pd(y + i);
        const __m256d vx = _mm256_loadu_pd(x + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void leaky_relu_avx2(const double* x, double* out, std::size_t n, double slope) {
    const __m256d vslope = _mm256_set1_pd(slope);
    const __m256d vzero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vx = _mm256_loadu_pd(x + i);
        const __m256d pos = _mm256_cmp_pd(vx, vzero, _CMP_GT_OQ);
        const __m256d scaled = _mm256_mul_pd(vslope, vx);
        _mm256_storeu_pd(out + i, _mm256_blendv_pd(scaled, vx, pos));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : slope * x[i];
}

void leaky_relu_grad_avx2(const double* x, const double* gout, double* gin,
                          std::size_t n, double slope) {
    const __m256d vslope = _mm256_set1_pd(slope);
    const __m256d vone = _mm256_set1_pd(1.0);
    const __m256d vzero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vx = _mm256_loadu_pd(x + i);
        const __m256d pos = _mm256_cmp_pd(vx, vzero, _CMP_GT_OQ);
        const __m256d factor = _mm256_blendv_pd(vslope, vone, pos);
        const __m256d vg = _mm256_loadu_pd(gin + i);
        const __m256d vgo = _mm256_loadu_pd(gout + i);
        _mm256_storeu_pd(gin + i, _mm256_add_pd(vg, _mm256_mul_pd(vgo, factor)));
    }
    for (; i < n; ++i) gin[i] += gout[i] * (x[i] > 0.0 ? 1.0 : slope);
}

void sigmoid_grad_avx2(const double* y, const double* gout, double* gin,
                       std::size_t n) {
    const __m256d vone = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vy = _mm256_loadu_pd(y + i);
        const __m256d deriv = _mm256_mul_pd(vy, _mm256_sub_pd(vone, vy));
        const __m256d vg = _mm256_loadu_pd(gin + i);
        const __m256d vgo = _mm256_loadu_pd(gout + i);
        _mm256_storeu_pd(gin + i, _mm256_add_pd(vg, _mm256_mul_pd(vgo, deriv)));
    }
    for (; i < n; ++i) gin[i] += gout[i] * (y[i] * (1.0 - y[i]));
}

void sgd_step_avx2(double* param, const double* grad, double* vel,
                   std::size_t n, double lr, double momentum,
                   double weight_decay) {
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d vmom = _mm256_set1_pd(momentum);
    const __m256d vwd = _mm256_set1_pd(weight_decay);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vp = _mm256_loadu_pd(param + i);
        const __m256d vg0 = _mm256_loadu_pd(grad + i);
        const __m256d vv0 = _mm256_loadu_pd(vel + i);
        const __m256d vg = _mm256_add_pd(vg0, _mm256_mul_pd(vwd, vp));
        const __m256d vv = _mm256_add_pd(_mm256_mul_pd(vmom, vv0), vg);
        _mm256_storeu_pd(vel + i, vv);
        _mm256_storeu_pd(param + i, _mm256_sub_pd(vp, _mm256_mul_pd(vlr, vv)));
    }
    for (; i < n; ++i) {
        const double g = grad[i] + weight_decay * param[i];
        const double v = momentum * vel[i] + g;
        vel[i] = v;
        param[i] -= lr * v;
    }
}

} // namespace

const KernelTable avx2_table = {
    matmul_avx2,
    add_avx2,
    mul_avx2,
    axpy_avx2,
    leaky_relu_avx2,
    leaky_relu_grad_avx2,
    sigmoid_grad_avx2,
    sgd_step_avx2,
};

} // namespace mlgcn::kernels::detail

#endif // MLGCN_HAVE_AVX2
