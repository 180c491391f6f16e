#include "vardyn/analytics.hpp"

#include "vardyn/errors.hpp"
#include "vardyn/kernel.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

namespace vardyn {

namespace {

std::size_t steps_to(double maturity, double dt) {
    if (!(maturity > 0.0) || !(dt > 0.0)) throw DomainError("maturity and step must be positive");
    const auto n = static_cast<std::size_t>(std::llround(maturity / dt));
    if (n < 1) throw DomainError("maturity shorter than one step");
    return n;
}

void check_sizes(const NonlinearFit& fit, const ModelParams& params) {
    if (fit.n() != params.n()) throw ValidationError("non-linear fit and model have different factor counts");
}

std::vector<double> grid_values(const ForwardCurve& curve, std::size_t n, double dt) {
    std::vector<double> xi(n);
    for (std::size_t i = 0; i < n; ++i) {
        xi[i] = curve(static_cast<double>(i) * dt);
        if (!(xi[i] > 0.0)) throw DomainError("forward variance must be positive on the pricing grid");
    }
    return xi;
}

// sum_u w_u sum_{v<u} e^{-k(u-v)} x_v on a uniform grid, by the running-sum recursion.
double lagged_sum(const std::vector<double>& w, const std::vector<double>& x, double decay) {
    double inner = 0.0, total = 0.0;
    for (std::size_t u = 0; u < w.size(); ++u) {
        total += w[u] * inner;
        inner = decay * (inner + x[u]);
    }
    return total;
}

}  // namespace

double return_skewness(const ForwardCurve& curve, const ModelParams& params, const NonlinearFit& fit, double maturity,
                       double spot_skew, double dt) {
    check_sizes(fit, params);
    const std::size_t n = steps_to(maturity, dt);
    const auto xi = grid_values(curve, n, dt);
    double var = 0.0, intrinsic = 0.0;
    std::vector<double> root(n);
    for (std::size_t i = 0; i < n; ++i) {
        var += xi[i] * dt;
        intrinsic += std::pow(xi[i] * dt, 1.5);
        root[i] = std::sqrt(xi[i]);
    }
    const double norm = std::pow(var, 1.5);
    double s = spot_skew * intrinsic / norm;
    for (std::size_t f = 0; f < params.n(); ++f) {
        const double corr = fit.a[f] * spot_skew - fit.b[f];
        s += 3.0 * params.theta[f] * corr * lagged_sum(xi, root, std::exp(-params.k[f] * dt)) * dt * dt / norm;
    }
    return s;
}

double return_skewness_flat(const ModelParams& params, const NonlinearFit& fit, double maturity, double spot_skew,
                            double dt) {
    check_sizes(fit, params);
    const auto n = static_cast<double>(steps_to(maturity, dt));
    double s = spot_skew / std::sqrt(n);
    for (std::size_t f = 0; f < params.n(); ++f)
        s += 3.0 * std::sqrt(maturity) * params.theta[f] * (fit.a[f] * spot_skew - fit.b[f]) * h(params.k[f] * maturity);
    return s;
}

nlohmann::json SmileImpact::to_json() const {
    return {{"maturity", maturity},         {"lambda_scale", lambda_scale},
            {"sigma_vs", sigma_vs},         {"atm_spread", atm_spread},
            {"skew", skew},                 {"spread_linear", spread_linear},
            {"spread_nonlinear", spread_nonlinear}, {"skew_linear", skew_linear},
            {"skew_nonlinear", skew_nonlinear}};
}

std::pair<double, double> smile_shift(const ForwardCurve& curve, const ModelParams& params, const NonlinearFit& fit,
                                      double maturity, double log_moneyness, double lambda_scale, double dt) {
    check_sizes(fit, params);
    const std::size_t n = steps_to(maturity, dt);
    const auto xi = grid_values(curve, n, dt);
    double var = 0.0;
    for (double v : xi) var += v * dt;

    // E[f(A + B W)] = a (A^2 + B^2 - 1) - b A, A and B per step
    std::vector<double> lin_x(n), quad_x(n), w(n);
    for (std::size_t v = 0; v < n; ++v) {
        const double share = xi[v] * dt / var;
        const double a_v = std::sqrt(xi[v] * dt) / var * (0.5 * var + log_moneyness);
        lin_x[v] = a_v / std::sqrt(dt);
        quad_x[v] = (a_v * a_v - share) / std::sqrt(dt);
        w[v] = xi[v] * dt;
    }
    const double denom = std::sqrt(maturity * var);
    double lin = 0.0, quad = 0.0;
    for (std::size_t f = 0; f < params.n(); ++f) {
        const double decay = std::exp(-params.k[f] * dt);
        const double c = 0.5 * params.theta[f] * dt / denom;
        lin -= c * fit.b[f] * lagged_sum(w, lin_x, decay);
        quad += c * fit.a[f] * lagged_sum(w, quad_x, decay);
    }
    return {lambda_scale * lin, lambda_scale * quad};
}

SmileImpact smile_impact(const ForwardCurve& curve, const ModelParams& params, const NonlinearFit& fit, double maturity,
                         double strike_offset, double lambda_scale, double dt) {
    if (!(strike_offset > 0.0)) throw DomainError("strike offset must be positive");
    if (strike_offset > 0.05) spdlog::warn("strike offset {} is large for a first-order skew", strike_offset);
    SmileImpact s;
    s.maturity = maturity;
    s.lambda_scale = lambda_scale;
    s.sigma_vs = std::sqrt(curve.integral(0.0, static_cast<double>(steps_to(maturity, dt)) * dt) /
                           (static_cast<double>(steps_to(maturity, dt)) * dt));
    const auto atm = smile_shift(curve, params, fit, maturity, 0.0, lambda_scale, dt);
    const auto off = smile_shift(curve, params, fit, maturity, std::log1p(strike_offset), lambda_scale, dt);
    s.spread_linear = atm.first;
    s.spread_nonlinear = atm.second;
    s.skew_linear = (off.first - atm.first) / strike_offset;
    s.skew_nonlinear = (off.second - atm.second) / strike_offset;
    s.atm_spread = s.spread_linear + s.spread_nonlinear;
    s.skew = s.skew_linear + s.skew_nonlinear;
    return s;
}

SmileImpact smile_impact_flat(const ModelParams& params, const NonlinearFit& fit, double maturity, double sigma_vs,
                              double lambda_scale, double dt) {
    check_sizes(fit, params);
    SmileImpact s;
    s.maturity = maturity;
    s.lambda_scale = lambda_scale;
    s.sigma_vs = sigma_vs;
    const double v = maturity * sigma_vs * sigma_vs;
    for (std::size_t f = 0; f < params.n(); ++f) {
        const double hk = h(params.k[f] * maturity);
        s.spread_linear -= lambda_scale * params.theta[f] * fit.b[f] * hk * v / 4.0;
        s.skew_linear -= lambda_scale * params.theta[f] * fit.b[f] * hk / 2.0;
        s.skew_nonlinear += lambda_scale * params.theta[f] * fit.a[f] * hk / 2.0 * sigma_vs * std::sqrt(dt);
    }
    s.spread_nonlinear = s.skew_nonlinear * (v / 4.0 - 1.0);
    s.atm_spread = s.spread_linear + s.spread_nonlinear;
    s.skew = s.skew_linear + s.skew_nonlinear;
    return s;
}

double skew_stickiness_ratio(const ModelParams& params, const NonlinearFit& fit, double maturity) {
    check_sizes(fit, params);
    if (!(maturity > 0.0)) throw DomainError("skew-stickiness ratio needs a positive maturity");
    double num = 0.0, den = 0.0;
    for (std::size_t f = 0; f < params.n(); ++f) {
        num += params.theta[f] * fit.b[f] * g(params.k[f] * maturity);
        den += params.theta[f] * fit.b[f] * h(params.k[f] * maturity);
    }
    if (std::abs(den) < 1e-14) throw DomainError("skew-stickiness ratio undefined without spot-vol correlation");
    return num / den;
}

double skew_stickiness_nonlinear_delta(const ModelParams& params, const NonlinearFit& fit, double maturity,
                                       double sigma_vs, double spot_skew, double dt) {
    const double linear = skew_stickiness_ratio(params, fit, maturity);
    double num = 0.0, den = 0.0;
    for (std::size_t f = 0; f < params.n(); ++f) {
        const double hk = h(params.k[f] * maturity);
        num += params.theta[f] * (fit.b[f] - fit.a[f] * spot_skew) * g(params.k[f] * maturity);
        den += params.theta[f] * (fit.b[f] * hk - fit.a[f] * hk * sigma_vs * std::sqrt(dt));
    }
    if (std::abs(den) < 1e-14) throw DomainError("non-linear skew-stickiness ratio undefined");
    return num / den - linear;
}

double VarSwapDecomposition::shock_share() const {
    return total > 0.0 ? shocks / total : 0.0;
}

double VarSwapDecomposition::shock_vol_share() const {
    if (!(total > 0.0)) return 0.0;
    return 1.0 - std::sqrt(std::max(0.0, 1.0 - shocks / total));
}

nlohmann::json VarSwapDecomposition::to_json() const {
    return {{"maturity", maturity}, {"returns", returns}, {"sampling", sampling},
            {"implied", implied},   {"shocks", shocks},   {"total", total},
            {"rho_shocks", rho_shocks}, {"shock_share", shock_share()}, {"shock_vol_share", shock_vol_share()}};
}

VarSwapDecomposition varswap_total_variance(const ModelParams& params, const NonlinearFit& fit, double excess_kurtosis,
                                            double skew, double maturity, double dt) {
    check_sizes(fit, params);
    if (!(excess_kurtosis > -2.0)) throw DomainError("variance swap: excess kurtosis must exceed -2");
    VarSwapDecomposition d;
    d.maturity = maturity;
    d.returns = steps_to(maturity, dt);
    d.sampling = (excess_kurtosis + 2.0) / (static_cast<double>(d.returns) * maturity);
    const Eigen::MatrixXd om = params.omega();
    for (std::size_t a = 0; a < params.n(); ++a)
        for (std::size_t b = 0; b < params.n(); ++b)
            d.implied += om(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * l(params.k[a], params.k[b], maturity);
    const double root = std::sqrt(excess_kurtosis + 2.0);
    double s = 0.0;
    for (std::size_t f = 0; f < params.n(); ++f) {
        const double rho = fit.a[f] * root - fit.b[f] * skew / root;
        d.rho_shocks.push_back(rho);
        s += rho * params.theta[f] * h(params.k[f] * maturity);
    }
    d.shocks = 2.0 * std::sqrt(d.sampling) * s;
    d.total = d.sampling + d.implied + d.shocks;
    return d;
}

AnalyticsRow analytics_row(const ForwardCurve& curve, const ModelParams& params, const NonlinearFit& fit,
                           double maturity, double lambda_scale) {
    AnalyticsRow r;
    r.maturity = maturity;
    const ModelParams scaled = params.scaled(lambda_scale);
    r.smile = smile_impact(curve, params, fit, maturity, 1e-4, lambda_scale);
    r.skewness = return_skewness(curve, scaled, fit, maturity, fit.skew);
    r.ssr = skew_stickiness_ratio(params, fit, maturity);
    r.varswap = varswap_total_variance(scaled, fit, fit.excess_kurtosis, fit.skew, maturity);
    return r;
}

}  // namespace vardyn
