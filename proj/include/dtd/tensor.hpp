#pragma once

#include <cstddef>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

// Minimal dense numeric array. Row-major, 64-bit floats, exact shapes (no
// broadcasting). Tensors are immutable values once constructed by an
// operation; every operation returns a fresh tensor.

namespace dtd {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

std::string shape_to_string(const Shape& s);

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);
    // 1-D convenience factory; a plain initializer-list constructor would be
    // ambiguous with the Shape constructor.
    static Tensor vec(std::initializer_list<double> values);
    static Tensor scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& mutable_data() { return data_; }
    const double* raw() const { return data_.data(); }
    double* raw() { return data_.data(); }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }
    // 2-D accessors (rows x cols)
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }

    Tensor reshaped(Shape new_shape) const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

private:
    Shape shape_;
    std::vector<double> data_;
};

enum class ElementwiseOp { Add, Sub, Mul, GuardedDiv };
enum class ClampPart { Positive, Negative };
enum class ReduceOp { Sum, SumOfSquares, LpNorm };

inline constexpr double lp_infinity = std::numeric_limits<double>::infinity();

// a[m x k] * b[k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor elementwise(const Tensor& a, const Tensor& b, ElementwiseOp op);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor guarded_div(const Tensor& a, const Tensor& b);

Tensor clamp_parts(const Tensor& a, ClampPart part);

// Reduction along one axis. LpNorm requires p >= 1; p == lp_infinity gives
// the max of absolute values.
Tensor reduce(const Tensor& a, ReduceOp op, std::size_t axis, double p = 2.0);

// Whole-tensor helpers used throughout the propagation code.
double total_sum(const Tensor& a);
double total_sum_sq(const Tensor& a);
double dot(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor transpose(const Tensor& a);  // 2-D only

}  // namespace dtd
