#include "dtd/tensor.hpp"

#include <cmath>
#include <numeric>

#include "dtd/kernels.hpp"

namespace dtd {

namespace {

std::size_t shape_product(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " +
                         shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
}

}  // namespace

std::string shape_to_string(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {
    for (std::size_t e : shape_)
        if (e == 0) throw ShapeError("Tensor: zero extent in shape " + shape_to_string(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size())
        throw ShapeError("Tensor: shape " + shape_to_string(shape_) + " does not match data length " +
                         std::to_string(data_.size()));
}

Tensor Tensor::vec(std::initializer_list<double> values) {
    return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::reshaped(Shape new_shape) const {
    if (shape_product(new_shape) != data_.size())
        throw ShapeError("reshape: " + shape_to_string(shape_) + " -> " + shape_to_string(new_shape) +
                         " changes element count");
    return Tensor(std::move(new_shape), data_);
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul: expects rank-2 operands, got " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()));
    const std::size_t m = a.extent(0), k = a.extent(1);
    if (b.extent(0) != k)
        throw ShapeError("matmul: inner extents differ, " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
    const std::size_t n = b.extent(1);
    const auto& ops = kernels::active_ops();

    Tensor c({m, n}, 0.0);
    // C[i,:] += A[i,k] * B[k,:] keeps the inner loop contiguous for axpy.
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c.raw() + i * n;
        const double* arow = a.raw() + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av != 0.0) ops.axpy(av, b.raw() + kk * n, crow, n);
        }
    }
    return c;
}

Tensor elementwise(const Tensor& a, const Tensor& b, ElementwiseOp op) {
    require_same_shape(a, b, "elementwise");
    const auto& ops = kernels::active_ops();
    Tensor out(a.shape(), 0.0);
    switch (op) {
        case ElementwiseOp::Add: ops.add(a.raw(), b.raw(), out.raw(), a.size()); break;
        case ElementwiseOp::Sub: ops.sub(a.raw(), b.raw(), out.raw(), a.size()); break;
        case ElementwiseOp::Mul: ops.mul(a.raw(), b.raw(), out.raw(), a.size()); break;
        case ElementwiseOp::GuardedDiv:
            ops.guarded_div(a.raw(), b.raw(), out.raw(), a.size(), kernels::div_guard_tolerance);
            break;
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::Mul); }
Tensor guarded_div(const Tensor& a, const Tensor& b) {
    return elementwise(a, b, ElementwiseOp::GuardedDiv);
}

Tensor clamp_parts(const Tensor& a, ClampPart part) {
    const auto& ops = kernels::active_ops();
    Tensor out(a.shape(), 0.0);
    if (part == ClampPart::Positive)
        ops.clamp_positive(a.raw(), out.raw(), a.size());
    else
        ops.clamp_negative(a.raw(), out.raw(), a.size());
    return out;
}

Tensor reduce(const Tensor& a, ReduceOp op, std::size_t axis, double p) {
    if (axis >= a.rank())
        throw ShapeError("reduce: axis " + std::to_string(axis) + " invalid for shape " +
                         shape_to_string(a.shape()));
    if (op == ReduceOp::LpNorm && !(p >= 1.0))
        throw std::invalid_argument("reduce: lp_norm requires p >= 1");

    const std::size_t extent = a.extent(axis);
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= a.extent(i);
    for (std::size_t i = axis + 1; i < a.rank(); ++i) inner *= a.extent(i);

    Shape out_shape;
    for (std::size_t i = 0; i < a.rank(); ++i)
        if (i != axis) out_shape.push_back(a.extent(i));
    if (out_shape.empty()) out_shape.push_back(1);
    Tensor out(out_shape, 0.0);

    const auto& ops = kernels::active_ops();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const double* base = a.raw() + (o * extent) * inner + in;
            double acc = 0.0;
            if (inner == 1) {
                // contiguous slice, use the flat kernels
                switch (op) {
                    case ReduceOp::Sum: acc = ops.sum(base, extent); break;
                    case ReduceOp::SumOfSquares: acc = ops.sum_sq(base, extent); break;
                    case ReduceOp::LpNorm:
                        if (p == lp_infinity) {
                            for (std::size_t j = 0; j < extent; ++j)
                                acc = std::max(acc, std::fabs(base[j]));
                        } else {
                            for (std::size_t j = 0; j < extent; ++j)
                                acc += std::pow(std::fabs(base[j]), p);
                            acc = std::pow(acc, 1.0 / p);
                        }
                        break;
                }
            } else {
                for (std::size_t j = 0; j < extent; ++j) {
                    const double v = base[j * inner];
                    switch (op) {
                        case ReduceOp::Sum: acc += v; break;
                        case ReduceOp::SumOfSquares: acc += v * v; break;
                        case ReduceOp::LpNorm:
                            if (p == lp_infinity)
                                acc = std::max(acc, std::fabs(v));
                            else
                                acc += std::pow(std::fabs(v), p);
                            break;
                    }
                }
                if (op == ReduceOp::LpNorm && p != lp_infinity) acc = std::pow(acc, 1.0 / p);
            }
            out[o * inner + in] = acc;
        }
    }
    return out;
}

double total_sum(const Tensor& a) { return kernels::active_ops().sum(a.raw(), a.size()); }
double total_sum_sq(const Tensor& a) { return kernels::active_ops().sum_sq(a.raw(), a.size()); }

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    return kernels::active_ops().dot(a.raw(), b.raw(), a.size());
}

Tensor scale(const Tensor& a, double factor) {
    Tensor out(a.shape(), 0.0);
    kernels::active_ops().axpy(factor, a.raw(), out.raw(), a.size());
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2)
        throw ShapeError("transpose: expects rank-2, got " + shape_to_string(a.shape()));
    const std::size_t m = a.extent(0), n = a.extent(1);
    Tensor out({n, m}, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
    return out;
}

}  // namespace dtd
