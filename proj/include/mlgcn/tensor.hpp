#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mlgcn {

// Dense row-major shape, outermost dimension first.
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s); // "3x4"

// Immutable dense tensor of 64-bit reals. Values are validated finite at
// construction, so every operation boundary sees finite data; ops that can
// overflow re-check their outputs and name themselves in the diagnostic.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value);
    static Tensor identity(std::size_t n);
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows,
                            bool requires_grad = false);
    static Tensor from_values(std::initializer_list<double> values,
                              bool requires_grad = false); // rank-1

    bool defined() const { return data_ != nullptr; }
    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const;
    std::size_t dim(std::size_t axis) const;

    std::span<const double> data() const;
    double operator[](std::size_t flat) const;
    double operator()(std::size_t i) const;
    double operator()(std::size_t i, std::size_t j) const;
    double operator()(std::size_t i, std::size_t j, std::size_t k) const;

    bool requires_grad() const { return requires_grad_; }
    void set_requires_grad(bool on) { requires_grad_ = on; }

    // Bitwise comparison of shape and payload.
    bool bit_equal(const Tensor& other) const;

    // Row i of a rank-2 tensor as a rank-1 tensor (copy).
    Tensor row(std::size_t i) const;

    Tensor reshaped(Shape new_shape) const; // same numel, shared payload

private:
    struct Unchecked {};
    Tensor(Shape shape, std::vector<double>&& values, bool requires_grad, Unchecked);

    Shape shape_;
    std::shared_ptr<const std::vector<double>> data_;
    bool requires_grad_ = false;

    friend Tensor make_unchecked(Shape, std::vector<double>&&, bool);
};

namespace detail {
// Throws DataError naming `context` if any value is NaN or infinite.
void check_finite(std::span<const double> values, const char* context);
} // namespace detail

// Construction path for ops that have already validated their output.
Tensor make_unchecked(Shape shape, std::vector<double>&& values,
                      bool requires_grad = false);

// Plain forward math on tensors (no gradient tracking). The autodiff tape
// wraps these for its forward pass.
namespace linalg {

// a[m x k] * b[k x n] -> [m x n]; a rank-2, b rank-2 or rank-1 (k) -> rank-1 (m).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);       // same shape
Tensor mul(const Tensor& a, const Tensor& b);       // elementwise
Tensor scale(const Tensor& a, double factor);
Tensor leaky_relu(const Tensor& x, double slope);   // slope in [0,1)
Tensor sigmoid(const Tensor& x);

// Rank-3 [d x h x w] -> rank-1 [d]; per-channel spatial max. When argmax is
// non-null it receives the flat spatial index of the max per channel, first
// occurrence in row-major order on ties.
Tensor global_max_pool(const Tensor& maps, std::vector<std::size_t>* argmax = nullptr);

// Stable mean-over-rows, sum-over-columns binary cross-entropy on logits.
// targets must contain exactly 0.0 and 1.0 entries.
double bce_with_logits(const Tensor& scores, const Tensor& targets);

} // namespace linalg

} // namespace mlgcn
