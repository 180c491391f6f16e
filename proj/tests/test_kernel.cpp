#include "oracles.hpp"

#include "vardyn/errors.hpp"
#include "vardyn/kernel.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace vardyn;

namespace {

std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
    return out;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("g and h agree with quadrature on a log grid") {
    for (double x : log_grid(1e-8, 1e3, 67)) {
        CAPTURE(x);
        CHECK(rel(g(x), oracle::g(x)) < 1e-10);
        CHECK(rel(h(x), oracle::h(x)) < 1e-10);
    }
}

TEST_CASE("l agrees with quadrature on a log grid") {
    for (double x : log_grid(1e-8, 1e3, 23))
        for (double y : {1e-6, 0.3, 1.05, 10.25, 200.0}) {
            CAPTURE(x);
            CAPTURE(y);
            CHECK(rel(l(x, y, 1.0), oracle::l(x, y, 1.0)) < 1e-10);
            CHECK(rel(l(x, y, 0.25), oracle::l(x, y, 0.25)) < 1e-10);
        }
}

TEST_CASE("l at unit arguments matches the nested double integral") {
    CHECK(rel(l(1.0, 1.0, 1.0), oracle::l_nested(1.0, 1.0, 1.0)) < 1e-10);
    CHECK(rel(l(10.25, 1.05, 30.0 / 365.0), oracle::l_nested(10.25, 1.05, 30.0 / 365.0)) < 1e-10);
}

TEST_CASE("kernel function limits and reference values") {
    CHECK(g(0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(h(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(std::abs(l(1e-9, 1e-9, 1e-3) - 1.0 / 3.0) < 1e-6);
    CHECK(g(1.0) == doctest::Approx(0.6321205588285577).epsilon(1e-14));
    CHECK(h(1.0) == doctest::Approx(0.36787944117144233).epsilon(1e-14));
    CHECK(g(20.0) == doctest::Approx(0.05).epsilon(1e-8));
    CHECK(h(50.0) * 50.0 == doctest::Approx(0.98).epsilon(1e-12));
    // large-window asymptote 1/(x y z^2)
    const double x = 3.0, y = 5.0, z = 200.0;
    CHECK(l(x, y, z) * x * y * z * z == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("kernel functions are monotone and symmetric") {
    double prev_g = 2.0, prev_h = 2.0;
    for (double x : log_grid(1e-6, 1e3, 200)) {
        CHECK(g(x) < prev_g);
        CHECK(h(x) < prev_h);
        prev_g = g(x);
        prev_h = h(x);
    }
    for (double x : {0.01, 0.7, 9.0})
        for (double y : {0.02, 3.0})
            CHECK(l(x, y, 0.5) == doctest::Approx(l(y, x, 0.5)).epsilon(1e-14));
}

TEST_CASE("kernel functions reject arguments outside their domain") {
    CHECK_THROWS_AS(g(-1e-3), DomainError);
    CHECK_THROWS_AS(h(-1.0), DomainError);
    CHECK_THROWS_AS(l(0.0, 1.0, 1.0), DomainError);
    CHECK_THROWS_AS(l(1.0, 1.0, -1.0), DomainError);
    CHECK(KernelFn{2.0}(0.0) == 1.0);
    CHECK(KernelFn{2.0}(0.5) == doctest::Approx(std::exp(-1.0)));
}
