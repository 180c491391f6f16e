#include "vardyn/quadrature.hpp"

#include <cmath>

namespace vardyn {

namespace {

struct SimpsonState {
    const std::function<double(double)>& f;
    double abs_floor;
};

double simpson_step(SimpsonState& s, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = s.f(lm);
    const double frm = s.f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * std::max(tol, s.abs_floor)) {
        return left + right + delta / 15.0;
    }
    if (depth <= 0) {
        throw NumericalError("adaptive_simpson: recursion limit reached");
    }
    return simpson_step(s, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           simpson_step(s, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double rel_tol,
                        int max_depth) {
    if (a == b) {
        return 0.0;
    }
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double coarse = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // Tolerance is relative to a Gauss-Legendre estimate so that cancellation-free integrands
    // get a meaningful scale even when the coarse Simpson value is poor.
    const double scale = std::abs(gauss_legendre16(f, a, b));
    SimpsonState state{f, 1e-300};
    return simpson_step(state, a, b, fa, fm, fb, coarse, rel_tol * std::max(scale, 1e-300),
                        max_depth);
}

}  // namespace vardyn
