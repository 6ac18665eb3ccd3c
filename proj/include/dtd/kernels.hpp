#pragma once

#include <cstddef>
#include <string>

// Low-level array kernels behind the tensor operations. Every kernel has a
// scalar reference implementation and, on x86-64 with AVX2, a vectorized
// variant. The active set is picked once at startup from cpuid; the
// DTD_KERNELS environment variable ("scalar" or "avx2") overrides the choice.

namespace dtd::kernels {

// Division guard: quotients whose denominator magnitude falls below this
// threshold are defined as zero (the 0/0 convention used by the propagation
// rules, where a vanishing denominator implies a vanishing numerator).
inline constexpr double div_guard_tolerance = 1e-12;

struct Ops {
    const char* name;

    double (*dot)(const double* a, const double* b, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    // out[i] = |b[i]| < tol ? 0 : a[i] / b[i]
    void (*guarded_div)(const double* a, const double* b, double* out,
                        std::size_t n, double tol);
    void (*clamp_positive)(const double* a, double* out, std::size_t n);
    void (*clamp_negative)(const double* a, double* out, std::size_t n);
    double (*sum)(const double* a, std::size_t n);
    double (*sum_sq)(const double* a, std::size_t n);
};

const Ops& scalar_ops();

bool avx2_available();
// Valid to call only when avx2_available() is true.
const Ops& avx2_ops();

// Runtime-selected implementation used by the tensor module.
const Ops& active_ops();

// Name of the active implementation ("scalar" or "avx2"), for logs/metadata.
std::string active_name();

}  // namespace dtd::kernels
