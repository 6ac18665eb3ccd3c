#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "dtd/tensor.hpp"

using namespace dtd;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -3.0, double hi = 3.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(std::move(shape), 0.0);
    for (auto& v : t.mutable_data()) v = dist(rng);
    return t;
}

// independent oracle: textbook triple loop
Tensor matmul_reference(const Tensor& a, const Tensor& b) {
    Tensor c({a.extent(0), b.extent(1)}, 0.0);
    for (std::size_t i = 0; i < a.extent(0); ++i)
        for (std::size_t j = 0; j < b.extent(1); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.extent(1); ++k) acc += a.at(i, k) * b.at(k, j);
            c.at(i, j) = acc;
        }
    return c;
}

}  // namespace

TEST_CASE("matmul matches a triple-loop reference") {
    for (auto [m, k, n] : {std::tuple{1, 1, 1}, std::tuple{2, 3, 4}, std::tuple{5, 17, 9},
                           std::tuple{20, 64, 33}}) {
        const Tensor a = random_tensor({std::size_t(m), std::size_t(k)}, 100 + m);
        const Tensor b = random_tensor({std::size_t(k), std::size_t(n)}, 200 + n);
        const Tensor got = matmul(a, b);
        const Tensor want = matmul_reference(a, b);
        REQUIRE(got.same_shape(want));
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("matmul rejects mismatched shapes with a descriptive error") {
    const Tensor a({2, 3}, 1.0);
    const Tensor b({4, 2}, 1.0);
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
    try {
        matmul(a, b);
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x2]") != std::string::npos);
    }
}

TEST_CASE("elementwise operations and the division guard") {
    const Tensor a = Tensor::vec({1.0, -2.0, 3.0, 0.0});
    const Tensor b = Tensor::vec({2.0, 4.0, 0.0, 1e-13});

    const Tensor s = add(a, b);
    CHECK(s[0] == 3.0);
    CHECK(s[1] == 2.0);

    const Tensor d = sub(a, b);
    CHECK(d[0] == -1.0);

    const Tensor p = mul(a, b);
    CHECK(p[1] == -8.0);

    const Tensor q = guarded_div(a, b);
    CHECK(q[0] == 0.5);
    CHECK(q[1] == -0.5);
    CHECK(q[2] == 0.0);  // zero denominator -> 0 by convention
    CHECK(q[3] == 0.0);  // sub-tolerance denominator -> 0

    CHECK_THROWS_AS(add(a, Tensor({3}, 0.0)), ShapeError);
}

TEST_CASE("guarded division is a right inverse of multiplication away from the guard") {
    const Tensor a = random_tensor({100}, 7);
    Tensor b = random_tensor({100}, 8);
    for (auto& v : b.mutable_data())
        if (std::abs(v) < 1e-6) v = 1.0;  // keep well clear of the guard
    const Tensor q = guarded_div(mul(a, b), b);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(q[i] == doctest::Approx(a[i]).epsilon(1e-12));
}

TEST_CASE("clamp_parts splits a tensor into positive and negative parts") {
    const Tensor a = random_tensor({64}, 9);
    const Tensor pos = clamp_parts(a, ClampPart::Positive);
    const Tensor neg = clamp_parts(a, ClampPart::Negative);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(pos[i] >= 0.0);
        CHECK(neg[i] <= 0.0);
        CHECK(pos[i] + neg[i] == a[i]);
        CHECK(pos[i] * neg[i] == 0.0);
    }
}

TEST_CASE("axis reductions match per-element accumulation") {
    const Tensor a = random_tensor({3, 5}, 11);

    const Tensor col_sums = reduce(a, ReduceOp::Sum, 0);
    REQUIRE(col_sums.size() == 5);
    for (std::size_t j = 0; j < 5; ++j) {
        double want = 0.0;
        for (std::size_t i = 0; i < 3; ++i) want += a.at(i, j);
        CHECK(col_sums[j] == doctest::Approx(want).epsilon(1e-14));
    }

    const Tensor row_sq = reduce(a, ReduceOp::SumOfSquares, 1);
    REQUIRE(row_sq.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        double want = 0.0;
        for (std::size_t j = 0; j < 5; ++j) want += a.at(i, j) * a.at(i, j);
        CHECK(row_sq[i] == doctest::Approx(want).epsilon(1e-14));
    }

    const Tensor inf_norm = reduce(a, ReduceOp::LpNorm, 1, lp_infinity);
    for (std::size_t i = 0; i < 3; ++i) {
        double want = 0.0;
        for (std::size_t j = 0; j < 5; ++j) want = std::max(want, std::abs(a.at(i, j)));
        CHECK(inf_norm[i] == want);
    }

    const Tensor l2 = reduce(a, ReduceOp::LpNorm, 0, 2.0);
    for (std::size_t j = 0; j < 5; ++j) {
        double want = 0.0;
        for (std::size_t i = 0; i < 3; ++i) want += a.at(i, j) * a.at(i, j);
        CHECK(l2[j] == doctest::Approx(std::sqrt(want)).epsilon(1e-12));
    }
}

TEST_CASE("whole-tensor helpers") {
    const Tensor a = Tensor::vec({1.0, 2.0, 3.0});
    const Tensor b = Tensor::vec({4.0, 5.0, 6.0});
    CHECK(total_sum(a) == 6.0);
    CHECK(total_sum_sq(a) == 14.0);
    CHECK(dot(a, b) == 32.0);
    const Tensor scaled = scale(a, -2.0);
    CHECK(scaled[2] == -6.0);
}

TEST_CASE("transpose is an involution and swaps extents") {
    const Tensor a = random_tensor({4, 7}, 13);
    const Tensor t = transpose(a);
    REQUIRE(t.extent(0) == 7);
    REQUIRE(t.extent(1) == 4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 7; ++j) CHECK(t.at(j, i) == a.at(i, j));
    const Tensor tt = transpose(t);
    CHECK(tt.data() == a.data());
    CHECK_THROWS_AS(transpose(Tensor({2, 2, 2}, 0.0)), ShapeError);
}

TEST_CASE("reshape preserves data and rejects size changes") {
    const Tensor a = random_tensor({6}, 14);
    const Tensor m = a.reshaped({2, 3});
    CHECK(m.at(1, 2) == a[5]);
    CHECK_THROWS_AS(a.reshaped({4, 2}), ShapeError);
}

TEST_CASE("all_finite flags NaN and infinity") {
    Tensor a({3}, 1.0);
    CHECK(a.all_finite());
    a[1] = std::nan("");
    CHECK_FALSE(a.all_finite());
    a[1] = 1.0;
    a[2] = std::numeric_limits<double>::infinity();
    CHECK_FALSE(a.all_finite());
}
