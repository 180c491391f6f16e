#pragma once

// Independent reference computations used to freeze expected values in tests.
// Nothing here shares code with the library paths it checks.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

inline double integrate(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 6, 1e-13);
}

/// Integral split at `breaks` (e.g. spline knots) so each piece is smooth; bounded depth.
inline double integrate_pieces(const std::function<double(double)>& f, double a, double b,
                               const std::vector<double>& breaks, double tol = 1e-13) {
    double total = 0.0;
    double lo = a;
    for (double k : breaks) {
        if (k <= lo || k >= b) continue;
        total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, k, 8, tol);
        lo = k;
    }
    return total + boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, b, 8, tol);
}

/// int_0^1 exp(-x s) ds
inline double g(double x) {
    return integrate([x](double s) { return std::exp(-x * s); }, 0.0, 1.0);
}

/// int_0^1 (1 - w) exp(-x w) dw
inline double h(double x) {
    return integrate([x](double w) { return (1.0 - w) * std::exp(-x * w); }, 0.0, 1.0);
}

/// (1/(ab)) int_0^1 (1 - e^{-a t})(1 - e^{-b t}) dt with a = xz, b = yz.
inline double l(double x, double y, double z) {
    const double a = x * z;
    const double b = y * z;
    return integrate([a, b](double t) { return std::expm1(-a * t) * std::expm1(-b * t); }, 0.0, 1.0) /
           (a * b);
}

/// Same quantity written as a nested double integral of the two kernels:
/// (1/(ab)) int_0^1 [int_0^t a e^{-a s} ds][int_0^t b e^{-b r} dr] dt.
inline double l_nested(double x, double y, double z) {
    const double a = x * z;
    const double b = y * z;
    return integrate(
               [a, b](double t) {
                   if (t == 0.0) return 0.0;
                   const double ia = integrate([a](double s) { return a * std::exp(-a * s); }, 0.0, t);
                   const double ib = integrate([b](double r) { return b * std::exp(-b * r); }, 0.0, t);
                   return ia * ib;
               },
               0.0, 1.0) /
           (a * b);
}

/// Midpoint Riemann sum with n cells.
inline double riemann(const std::function<double(double)>& f, double a, double b, int n) {
    const double dx = (b - a) / n;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += f(a + (i + 0.5) * dx);
    return s * dx;
}

}  // namespace oracle
