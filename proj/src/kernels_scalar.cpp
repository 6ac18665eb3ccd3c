#include "dtd/kernels.hpp"

#include <cmath>

namespace dtd::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void guarded_div_scalar(const double* a, const double* b, double* out,
                        std::size_t n, double tol) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = std::fabs(b[i]) < tol ? 0.0 : a[i] / b[i];
}

void clamp_positive_scalar(const double* a, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void clamp_negative_scalar(const double* a, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] < 0.0 ? a[i] : 0.0;
}

double sum_scalar(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

double sum_sq_scalar(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
    return acc;
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops{
        "scalar",          dot_scalar,
        axpy_scalar,       add_scalar,
        sub_scalar,        mul_scalar,
        guarded_div_scalar, clamp_positive_scalar,
        clamp_negative_scalar, sum_scalar,
        sum_sq_scalar,
    };
    return ops;
}

}  // namespace dtd::kernels
