#include "vardyn/kernel.hpp"

#include "vardyn/errors.hpp"

#include <boost/math/special_functions/binomial.hpp>
#include <boost/math/special_functions/factorials.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <string>

namespace vardyn {

namespace {

void require_non_negative(double x, const char* name) {
    if (!(x >= 0.0)) {
        throw DomainError(std::string(name) + ": argument must be >= 0, got " + std::to_string(x));
    }
}

// F(a,b)/(ab) with F(a,b) = int_0^1 (1-e^{-at})(1-e^{-bt}) dt, a + b < 1.
// Expansion in powers of (a, b) with only positive binomial terms inside each order.
double l_double_series(double a, double b) {
    double sum = 0.0;
    for (int n = 2; n <= 24; ++n) {
        double inner = 0.0;
        for (int j = 1; j <= n - 1; ++j) {
            inner += boost::math::binomial_coefficient<double>(n, j) * std::pow(a, j - 1) *
                     std::pow(b, n - j - 1);
        }
        const double sign = (n % 2 == 0) ? 1.0 : -1.0;
        sum += sign * inner / boost::math::factorial<double>(n + 1);
    }
    return sum;
}

// F(a,b)/(ab) for small a and b >= ~1: expand the a-factor only.
// int_0^1 t^j (1 - e^{-bt}) dt = 1/(j+1) - gamma_lower(j+1, b) / b^{j+1}.
double l_single_series(double a, double b) {
    double sum = 0.0;
    double a_pow = 1.0;  // a^{j-1}
    for (int j = 1; j <= 14; ++j) {
        const double moment =
            1.0 / (j + 1) - boost::math::tgamma_lower(j + 1.0, b) / std::pow(b, j + 1);
        const double sign = (j % 2 == 1) ? 1.0 : -1.0;
        sum += sign * a_pow / boost::math::factorial<double>(j) * moment / b;
        a_pow *= a;
    }
    return sum;
}

}  // namespace

double g(double x) {
    require_non_negative(x, "g");
    if (x < 1e-6) {
        return 1.0 - x / 2.0 + x * x / 6.0;
    }
    return -std::expm1(-x) / x;
}

double h(double x) {
    require_non_negative(x, "h");
    if (x < 1.0) {
        // sum_n (-x)^n / (n+2)!
        double term = 0.5;
        double sum = term;
        for (int n = 1; n <= 22; ++n) {
            term *= -x / (n + 2);
            sum += term;
        }
        return sum;
    }
    return (x + std::expm1(-x)) / (x * x);
}

double l(double x, double y, double z) {
    if (!(x > 0.0) || !(y > 0.0) || !(z > 0.0)) {
        throw DomainError("l: arguments must be > 0");
    }
    const double a = x * z;
    const double b = y * z;
    if (a + b < 1.0) {
        return l_double_series(a, b);
    }
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    if (lo < 1e-2) {
        return l_single_series(lo, hi);
    }
    return (1.0 - g(a) - g(b) + g(a + b)) / (a * b);
}

}  // namespace vardyn
