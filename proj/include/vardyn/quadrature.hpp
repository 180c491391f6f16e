#pragma once

#include "vardyn/errors.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <functional>

namespace vardyn {

/// 16-point Gauss-Legendre rule on [a, b]; exact for polynomials up to degree 31.
template <class F>
[[nodiscard]] double gauss_legendre16(F&& f, double a, double b) {
    return boost::math::quadrature::gauss<double, 16>::integrate(std::forward<F>(f), a, b);
}

/// Adaptive Simpson quadrature to relative tolerance `rel_tol`.
/// Throws NumericalError when the recursion depth is exhausted.
[[nodiscard]] double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                                      double rel_tol, int max_depth = 48);

}  // namespace vardyn
