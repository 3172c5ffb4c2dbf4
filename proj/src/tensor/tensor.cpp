#include "mlgcn/tensor.hpp"

#include <cmath>
#include <cstring>
#include <utility>

#include "mlgcn/errors.hpp"
#include "mlgcn/kernels.hpp"

namespace mlgcn {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    if (s.empty()) return "scalar";
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += 'x';
        out += std::to_string(s[i]);
    }
    return out;
}

namespace detail {

void check_finite(std::span<const double> values, const char* context) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw DataError(std::string(context) + ": non-finite value at flat index " +
                            std::to_string(i));
        }
    }
}

} // namespace detail

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
    }
    if (values.size() != shape_numel(shape)) {
        throw ShapeError("tensor data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    }
    detail::check_finite(values, "tensor");
    shape_ = std::move(shape);
    data_ = std::make_shared<const std::vector<double>>(std::move(values));
    requires_grad_ = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double>&& values, bool requires_grad, Unchecked)
    : shape_(std::move(shape)),
      data_(std::make_shared<const std::vector<double>>(std::move(values))),
      requires_grad_(requires_grad) {}

Tensor make_unchecked(Shape shape, std::vector<double>&& values, bool requires_grad) {
    return Tensor(std::move(shape), std::move(values), requires_grad, Tensor::Unchecked{});
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> v(shape_numel(shape), 0.0);
    return make_unchecked(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> v(shape_numel(shape), value);
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double value) {
    return Tensor(Shape{1}, std::vector<double>{value});
}

Tensor Tensor::identity(std::size_t n) {
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
    return make_unchecked(Shape{n, n}, std::move(v));
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows,
                         bool requires_grad) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> v;
    v.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("ragged initializer rows");
        v.insert(v.end(), row.begin(), row.end());
    }
    return Tensor(Shape{r, c}, std::move(v), requires_grad);
}

Tensor Tensor::from_values(std::initializer_list<double> values, bool requires_grad) {
    return Tensor(Shape{values.size()}, std::vector<double>(values), requires_grad);
}

std::size_t Tensor::numel() const { return data_ ? data_->size() : 0; }

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                         shape_str(shape_));
    }
    return shape_[axis];
}

std::span<const double> Tensor::data() const {
    if (!data_) return {};
    return {data_->data(), data_->size()};
}

double Tensor::operator[](std::size_t flat) const { return (*data_)[flat]; }

double Tensor::operator()(std::size_t i) const { return (*data_)[i]; }

double Tensor::operator()(std::size_t i, std::size_t j) const {
    return (*data_)[i * shape_[1] + j];
}

double Tensor::operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return (*data_)[(i * shape_[1] + j) * shape_[2] + k];
}

bool Tensor::bit_equal(const Tensor& other) const {
    if (shape_ != other.shape_) return false;
    if (!data_ || !other.data_) return data_ == other.data_;
    return std::memcmp(data_->data(), other.data_->data(),
                       data_->size() * sizeof(double)) == 0;
}

Tensor Tensor::row(std::size_t i) const {
    if (rank() != 2) throw ShapeError("row() needs a rank-2 tensor, got " + shape_str(shape_));
    if (i >= shape_[0]) throw ShapeError("row " + std::to_string(i) + " out of range");
    const std::size_t c = shape_[1];
    std::vector<double> v(data_->begin() + i * c, data_->begin() + (i + 1) * c);
    return make_unchecked(Shape{c}, std::move(v));
}

Tensor Tensor::reshaped(Shape new_shape) const {
    if (shape_numel(new_shape) != numel()) {
        throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(new_shape));
    }
    Tensor t;
    t.shape_ = std::move(new_shape);
    t.data_ = data_;
    t.requires_grad_ = requires_grad_;
    return t;
}

namespace linalg {

namespace {

// Effective (m,k,n) for matmul with an optional rank-1 right operand.
struct MatDims {
    std::size_t m, k, n;
    bool vector_rhs;
};

MatDims matmul_dims(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2) {
        throw ShapeError("matmul: left operand must be rank-2, got " + shape_str(a.shape()));
    }
    if (b.rank() == 2) {
        if (a.dim(1) != b.dim(0)) {
            throw ShapeError("matmul: inner dimensions mismatch: " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
        }
        return {a.dim(0), a.dim(1), b.dim(1), false};
    }
    if (b.rank() == 1) {
        if (a.dim(1) != b.dim(0)) {
            throw ShapeError("matmul: inner dimensions mismatch: " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
        }
        return {a.dim(0), a.dim(1), 1, true};
    }
    throw ShapeError("matmul: right operand must be rank-1 or rank-2, got " +
                     shape_str(b.shape()));
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    const MatDims d = matmul_dims(a, b);
    std::vector<double> out(d.m * d.n);
    kernels::matmul(a.data().data(), b.data().data(), out.data(), d.m, d.k, d.n);
    detail::check_finite(out, "matmul");
    Shape shape = d.vector_rhs ? Shape{d.m} : Shape{d.m, d.n};
    return make_unchecked(std::move(shape), std::move(out));
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose needs rank-2, got " + shape_str(a.shape()));
    std::vector<double> out(a.numel());
    kernels::transpose(a.data().data(), out.data(), a.dim(0), a.dim(1));
    return make_unchecked(Shape{a.dim(1), a.dim(0)}, std::move(out));
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("add: shape mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    std::vector<double> out(a.numel());
    kernels::add(a.data().data(), b.data().data(), out.data(), a.numel());
    detail::check_finite(out, "add");
    return make_unchecked(a.shape(), std::move(out));
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("mul: shape mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    std::vector<double> out(a.numel());
    kernels::mul(a.data().data(), b.data().data(), out.data(), a.numel());
    detail::check_finite(out, "mul");
    return make_unchecked(a.shape(), std::move(out));
}

Tensor scale(const Tensor& a, double factor) {
    std::vector<double> out(a.numel(), 0.0);
    kernels::axpy(factor, a.data().data(), out.data(), a.numel());
    detail::check_finite(out, "scale");
    return make_unchecked(a.shape(), std::move(out));
}

Tensor leaky_relu(const Tensor& x, double slope) {
    if (slope < 0.0 || slope >= 1.0) {
        throw ConfigError("leaky_relu slope must be in [0,1), got " + std::to_string(slope));
    }
    std::vector<double> out(x.numel());
    kernels::leaky_relu(x.data().data(), out.data(), x.numel(), slope);
    return make_unchecked(x.shape(), std::move(out));
}

Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.numel());
    kernels::sigmoid(x.data().data(), out.data(), x.numel());
    return make_unchecked(x.shape(), std::move(out));
}

Tensor global_max_pool(const Tensor& maps, std::vector<std::size_t>* argmax) {
    if (maps.rank() != 3) {
        throw ShapeError("global_max_pool needs a rank-3 [d x h x w] tensor, got " +
                         shape_str(maps.shape()));
    }
    const std::size_t d = maps.dim(0);
    std::vector<double> out(d);
    std::vector<std::size_t> arg(d);
    kernels::max_pool_channels(maps.data().data(), d, maps.dim(1), maps.dim(2),
                               out.data(), arg.data());
    if (argmax) *argmax = std::move(arg);
    return make_unchecked(Shape{d}, std::move(out));
}

double bce_with_logits(const Tensor& scores, const Tensor& targets) {
    if (scores.rank() != 2 || targets.shape() != scores.shape()) {
        throw ShapeError("bce_with_logits: scores " + shape_str(scores.shape()) +
                         " vs targets " + shape_str(targets.shape()));
    }
    const auto t = targets.data();
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] != 0.0 && t[i] != 1.0) {
            throw DataError("bce_with_logits: target outside {0,1} at flat index " +
                            std::to_string(i));
        }
    }
    const double total = kernels::bce_with_logits_sum(scores.data().data(), t.data(),
                                                      scores.numel());
    return total / static_cast<double>(scores.dim(0));
}

} // namespace linalg

} // namespace mlgcn
