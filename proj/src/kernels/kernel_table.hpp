#pragma once

#include <cstddef>

// Internal dispatch table shared between the scalar and AVX2 translation
// units. Only the kernels with a SIMD variant go through the table.

namespace mlgcn::kernels::detail {

struct KernelTable {
    void (*matmul)(const double*, const double*, double*,
                   std::size_t, std::size_t, std::size_t);
    void (*add)(const double*, const double*, double*, std::size_t);
    void (*mul)(const double*, const double*, double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*leaky_relu)(const double*, double*, std::size_t, double);
    void (*leaky_relu_grad)(const double*, const double*, double*,
                            std::size_t, double);
    void (*sigmoid_grad)(const double*, const double*, double*, std::size_t);
    void (*sgd_step)(double*, const double*, double*, std::size_t,
                     double, double, double);
};

extern const KernelTable scalar_table;

#if defined(MLGCN_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif

} // namespace mlgcn::kernels::detail
