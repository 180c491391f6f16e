#pragma once

#include "vardyn/model.hpp"
#include "vardyn/spotvol.hpp"
#include "vardyn/variance_curve.hpp"

#include <json.hpp>

#include <vector>

namespace vardyn {

/// Skewness of log(S_T/S_t) at first order in vol-of-vol, as discrete sums on the daily grid:
///   zeta sum (xi du)^{3/2} / V^{3/2} + 3 sum_a theta_a (a_a zeta - b_a) sum_u xi^u sum_{v<u} sqrt(xi^v) e^{-k(u-v)} du dv / V^{3/2}
/// with V = sum xi du. `spot_skew` is the skew of one daily dZbar.
[[nodiscard]] double return_skewness(const ForwardCurve& curve, const ModelParams& params, const NonlinearFit& fit,
                                     double maturity, double spot_skew, double dt = kDeltaT);
/// Flat-curve form zeta / sqrt(N) + 3 sqrt(T) sum theta (a zeta - b) h(k T), N = T / dt.
[[nodiscard]] double return_skewness_flat(const ModelParams& params, const NonlinearFit& fit, double maturity,
                                          double spot_skew, double dt = kDeltaT);

/// First-order (in theta -> lambda theta) implied-vol shift over the var-swap vol, split into the
/// spot-linear (b) and quadratic (a) parts. Pricing convention: Gaussian dZbar, no drift.
struct SmileImpact {
    double maturity = 0.0;
    double lambda_scale = 1.0;
    double sigma_vs = 0.0;          ///< sqrt of the average forward variance to maturity
    double atm_spread = 0.0;        ///< sigma_ATM - sigma_VS
    double skew = 0.0;              ///< d sigma / d(K/S) at the money
    double spread_linear = 0.0;
    double spread_nonlinear = 0.0;
    double skew_linear = 0.0;
    double skew_nonlinear = 0.0;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// F'_K(0) / Vega_K on the daily grid, times lambda_scale, at log-moneyness log(K/S).
/// Returns {linear part, quadratic part}.
[[nodiscard]] std::pair<double, double> smile_shift(const ForwardCurve& curve, const ModelParams& params,
                                                    const NonlinearFit& fit, double maturity, double log_moneyness,
                                                    double lambda_scale = 1.0, double dt = kDeltaT);

/// ATM spread from K = S; skew from the difference quotient at K = S (1 + strike_offset).
[[nodiscard]] SmileImpact smile_impact(const ForwardCurve& curve, const ModelParams& params, const NonlinearFit& fit,
                                       double maturity, double strike_offset = 1e-4, double lambda_scale = 1.0,
                                       double dt = kDeltaT);

/// Flat-curve closed forms: spread_linear = -sum theta b h T sigma^2 / 4, skew_linear = -sum theta b h / 2,
/// skew_nonlinear = sum theta a h sigma sqrt(dt) / 2, spread_nonlinear = skew_nonlinear (T sigma^2 / 4 - 1).
[[nodiscard]] SmileImpact smile_impact_flat(const ModelParams& params, const NonlinearFit& fit, double maturity,
                                            double sigma_vs, double lambda_scale = 1.0, double dt = kDeltaT);

/// sum theta b g(kT) / sum theta b h(kT); throws DomainError when sum theta b h vanishes.
[[nodiscard]] double skew_stickiness_ratio(const ModelParams& params, const NonlinearFit& fit, double maturity);
/// Ratio with the spot correlation a zeta - b and the quadratic skew term restored, minus the linear ratio.
[[nodiscard]] double skew_stickiness_nonlinear_delta(const ModelParams& params, const NonlinearFit& fit,
                                                     double maturity, double sigma_vs, double spot_skew = 0.0,
                                                     double dt = kDeltaT);

/// Variance of the annualised variance of a swap on [0, T], as three first-order terms.
struct VarSwapDecomposition {
    double maturity = 0.0;
    std::size_t returns = 0;
    double sampling = 0.0;        ///< (kappa + 2) / (N T)
    double implied = 0.0;         ///< sum Omega l(k_a, k_b, T)
    double shocks = 0.0;          ///< 2 sqrt((kappa+2)/(N T)) sum rho_shocks theta h(k T)
    double total = 0.0;
    std::vector<double> rho_shocks;

    /// shocks / total; zero when total is not positive.
    [[nodiscard]] double shock_share() const;
    /// Share of the vol of annualised variance due to the shock term: 1 - sqrt(1 - shocks / total).
    [[nodiscard]] double shock_vol_share() const;
    [[nodiscard]] nlohmann::json to_json() const;
};

/// N = round(T / dt). `excess_kurtosis` and `skew` describe daily dZbar.
[[nodiscard]] VarSwapDecomposition varswap_total_variance(const ModelParams& params, const NonlinearFit& fit,
                                                          double excess_kurtosis, double skew, double maturity,
                                                          double dt = kDeltaT);

/// One row of the term-structure report.
struct AnalyticsRow {
    double maturity = 0.0;
    SmileImpact smile;
    double skewness = 0.0;
    double ssr = 0.0;
    VarSwapDecomposition varswap;
};
[[nodiscard]] AnalyticsRow analytics_row(const ForwardCurve& curve, const ModelParams& params, const NonlinearFit& fit,
                                         double maturity, double lambda_scale = 1.0);

}  // namespace vardyn
