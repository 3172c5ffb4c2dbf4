#include "mlgcn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <string>

#include "mlgcn/errors.hpp"
#include "kernel_table.hpp"

namespace mlgcn::kernels {

namespace detail {

namespace {

void matmul_scalar(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n) {
    std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = a[i * k + kk];
            const double* brow = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
}

void add_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void leaky_relu_scalar(const double* x, double* out, std::size_t n, double slope) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : slope * x[i];
}

void leaky_relu_grad_scalar(const double* x, const double* gout, double* gin,
                            std::size_t n, double slope) {
    for (std::size_t i = 0; i < n; ++i) {
        gin[i] += gout[i] * (x[i] > 0.0 ? 1.0 : slope);
    }
}

void sigmoid_grad_scalar(const double* y, const double* gout, double* gin,
                         std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        gin[i] += gout[i] * (y[i] * (1.0 - y[i]));
    }
}

void sgd_step_scalar(double* param, const double* grad, double* vel,
                     std::size_t n, double lr, double momentum,
                     double weight_decay) {
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad[i] + weight_decay * param[i];
        const double v = momentum * vel[i] + g;
        vel[i] = v;
        param[i] -= lr * v;
    }
}

} // namespace

const KernelTable scalar_table = {
    matmul_scalar,
    add_scalar,
    mul_scalar,
    axpy_scalar,
    leaky_relu_scalar,
    leaky_relu_grad_scalar,
    sigmoid_grad_scalar,
    sgd_step_scalar,
};

namespace {

Backend detect_backend() {
    Backend picked = Backend::scalar;
#if defined(MLGCN_HAVE_AVX2)
    if (__builtin_cpu_supports("avx2")) picked = Backend::avx2;
#endif
    if (const char* env = std::getenv("MLGCN_BACKEND")) {
        const std::string_view want{env};
        if (want == "scalar") {
            picked = Backend::scalar;
        } else if (want == "avx2") {
            if (!backend_available(Backend::avx2)) {
                throw ConfigError("MLGCN_BACKEND=avx2 requested but AVX2 is unavailable");
            }
            picked = Backend::avx2;
        } else if (!want.empty()) {
            throw ConfigError("unknown MLGCN_BACKEND value: " + std::string(want));
        }
    }
    return picked;
}

const KernelTable* table_for(Backend b) {
#if defined(MLGCN_HAVE_AVX2)
    if (b == Backend::avx2) return &avx2_table;
#endif
    return &scalar_table;
}

struct Dispatch {
    Backend backend;
    const KernelTable* table;
    Dispatch() : backend(detect_backend()), table(table_for(backend)) {}
};

// Lazy so a bad MLGCN_BACKEND value surfaces as a catchable error on first
// use instead of aborting in static initialization.
Dispatch& dispatch() {
    static Dispatch d;
    return d;
}

} // namespace
} // namespace detail

Backend active_backend() { return detail::dispatch().backend; }

bool backend_available(Backend b) {
    switch (b) {
        case Backend::scalar:
            return true;
        case Backend::avx2:
#if defined(MLGCN_HAVE_AVX2)
            return __builtin_cpu_supports("avx2") != 0;
#else
            return false;
#endif
    }
    return false;
}

void set_backend(Backend b) {
    if (!backend_available(b)) {
        throw ConfigError(std::string("kernel backend unavailable: ") +
                          std::string(backend_name(b)));
    }
    detail::dispatch().backend = b;
    detail::dispatch().table = detail::table_for(b);
}

std::string_view backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
    }
    return "unknown";
}

void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n) {
    detail::dispatch().table->matmul(a, b, c, m, k, n);
}

void add(const double* a, const double* b, double* out, std::size_t n) {
    detail::dispatch().table->add(a, b, out, n);
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
    detail::dispatch().table->mul(a, b, out, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    detail::dispatch().table->axpy(alpha, x, y, n);
}

void leaky_relu(const double* x, double* out, std::size_t n, double slope) {
    detail::dispatch().table->leaky_relu(x, out, n, slope);
}

void leaky_relu_grad(const double* x, const double* gout, double* gin,
                     std::size_t n, double slope) {
    detail::dispatch().table->leaky_relu_grad(x, gout, gin, n, slope);
}

void sigmoid_grad(const double* y, const double* gout, double* gin,
                  std::size_t n) {
    detail::dispatch().table->sigmoid_grad(y, gout, gin, n);
}

void sgd_step(double* param, const double* grad, double* vel, std::size_t n,
              double lr, double momentum, double weight_decay) {
    detail::dispatch().table->sgd_step(param, grad, vel, n, lr, momentum, weight_decay);
}

void sigmoid(const double* x, double* out, std::size_t n) {
    // Clamp keeps saturated outputs strictly inside (0,1): exp(-|x|)
    // underflows to 0 near |x| ~ 745 and the quotient would otherwise hit
    // exactly 0 or 1.
    constexpr double lo = std::numeric_limits<double>::denorm_min();
    const double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = std::exp(-std::fabs(x[i]));
        double s = x[i] >= 0.0 ? 1.0 / (1.0 + t) : t / (1.0 + t);
        if (s < lo) s = lo;
        if (s > hi) s = hi;
        out[i] = s;
    }
}

double reduce_sum(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

void transpose(const double* in, double* out, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            out[c * rows + r] = in[r * cols + c];
        }
    }
}

void max_pool_channels(const double* maps, std::size_t d, std::size_t h,
                       std::size_t w, double* out, std::size_t* argmax) {
    const std::size_t spatial = h * w;
    for (std::size_t c = 0; c < d; ++c) {
        const double* cell = maps + c * spatial;
        double best = cell[0];
        std::size_t best_at = 0;
        for (std::size_t s = 1; s < spatial; ++s) {
            if (cell[s] > best) { // strict: first occurrence wins ties
                best = cell[s];
                best_at = s;
            }
        }
        out[c] = best;
        if (argmax) argmax[c] = best_at;
    }
}

double bce_with_logits_sum(const double* scores, const double* targets,
                           std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = scores[i];
        const double y = targets[i];
        acc += std::max(s, 0.0) - s * y + std::log1p(std::exp(-std::fabs(s)));
    }
    return acc;
}

void bce_with_logits_grad(const double* scores, const double* targets,
                          double scale, double* gin, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double t = std::exp(-std::fabs(scores[i]));
        const double s = scores[i] >= 0.0 ? 1.0 / (1.0 + t) : t / (1.0 + t);
        gin[i] += scale * (s - targets[i]);
    }
}

} // namespace mlgcn::kernels
