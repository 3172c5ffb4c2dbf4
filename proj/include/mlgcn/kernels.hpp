#pragma once

#include <cstddef>
#include <string_view>

// Arithmetic inner loops behind the tensor ops. Every kernel has a scalar
// reference implementation; the hot, data-parallel ones additionally have an
// AVX2 variant selected at runtime. SIMD variants are required to be
// bit-identical to the scalar reference (same per-element operation order,
// no FMA), which the kernel test suite checks with memcmp.

namespace mlgcn::kernels {

enum class Backend {
    scalar,
    avx2,
};

// Backend resolved at startup: AVX2 when the CPU supports it, overridable
// with the MLGCN_BACKEND environment variable (values: scalar, avx2).
Backend active_backend();
bool backend_available(Backend b);
void set_backend(Backend b); // throws ConfigError if unavailable
std::string_view backend_name(Backend b);

// --- dispatched kernels (scalar + AVX2) ---------------------------------

// c[m x n] = a[m x k] * b[k x n], all row-major. Each output element
// accumulates over k in ascending order.
void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n);

// out[i] = a[i] + b[i]
void add(const double* a, const double* b, double* out, std::size_t n);

// out[i] = a[i] * b[i]
void mul(const double* a, const double* b, double* out, std::size_t n);

// y[i] += alpha * x[i]
void axpy(double alpha, const double* x, double* y, std::size_t n);

// out[i] = x[i] > 0 ? x[i] : slope * x[i]
void leaky_relu(const double* x, double* out, std::size_t n, double slope);

// gin[i] += gout[i] * (x[i] > 0 ? 1 : slope)
void leaky_relu_grad(const double* x, const double* gout, double* gin,
                     std::size_t n, double slope);

// gin[i] += gout[i] * (y[i] * (1 - y[i])), y = sigmoid forward output
void sigmoid_grad(const double* y, const double* gout, double* gin,
                  std::size_t n);

// Classic momentum step, weight decay folded into the gradient:
//   g = grad[i] + weight_decay * param[i]
//   v = momentum * vel[i] + g
//   vel[i] = v; param[i] -= lr * v
void sgd_step(double* param, const double* grad, double* vel, std::size_t n,
              double lr, double momentum, double weight_decay);

// --- scalar-only kernels -------------------------------------------------
// These are either libm-bound or order-sensitive reductions where a SIMD
// variant could not stay bit-identical.

// out[i] = 1 / (1 + exp(-x[i])), overflow-safe, clamped into the open (0,1)
// interval so saturated inputs never round to exactly 0 or 1.
void sigmoid(const double* x, double* out, std::size_t n);

// Sequential left-to-right sum.
double reduce_sum(const double* x, std::size_t n);

// out[c][r] = in[r][c] for an r x c row-major matrix.
void transpose(const double* in, double* out, std::size_t rows, std::size_t cols);

// Per-channel max over the h*w spatial grid of a d x h x w map.
// argmax records the flat spatial index of the winning cell, first
// occurrence in row-major order on ties.
void max_pool_channels(const double* maps, std::size_t d, std::size_t h,
                       std::size_t w, double* out, std::size_t* argmax);

// Sum over n elements of the numerically stable binary cross-entropy with
// logits: max(s,0) - s*y + log1p(exp(-|s|)).
double bce_with_logits_sum(const double* scores, const double* targets,
                           std::size_t n);

// gin[i] += scale * (sigmoid(scores[i]) - targets[i])
void bce_with_logits_grad(const double* scores, const double* targets,
                          double scale, double* gin, std::size_t n);

} // namespace mlgcn::kernels
