#pragma once

#include <cmath>

namespace vardyn {

/// (1 - e^{-x}) / x, the average of e^{-u} over [0, x].
[[nodiscard]] double g(double x);

/// (x - 1 + e^{-x}) / x^2; h(0) = 1/2.
[[nodiscard]] double h(double x);

/// Annualised variance weight of two exponential kernels over a window of length z:
/// (1/(x y z^2)) * (1 - g(xz) - g(yz) + g((x+y)z)). Dimensionless, symmetric in (x, y).
[[nodiscard]] double l(double x, double y, double z);

/// Exponential decay kernel exp(-decay * tau) for tau = u - t >= 0.
struct KernelFn {
    double decay = 0.0;

    [[nodiscard]] double operator()(double tau) const { return std::exp(-decay * tau); }
};

}  // namespace vardyn
