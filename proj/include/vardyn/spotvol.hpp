#pragma once

#include "vardyn/calibration.hpp"
#include "vardyn/model.hpp"
#include "vardyn/montecarlo.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <vector>

namespace vardyn {

/// Moments of the spot factor dZ = r / sqrt(xi_t^t): annualised mean and vol, skew, excess kurtosis.
struct SpotMoments {
    double mu_z = 0.0;
    double sigma_z = 1.0;
    double skew = 0.0;
    double excess_kurtosis = 0.0;

    /// mu 33%, sigma 79.6%, skew -0.57, excess kurtosis 1.59.
    [[nodiscard]] static SpotMoments reference();
    [[nodiscard]] InnovationLaw law() const { return {skew, excess_kurtosis}; }
};

/// dWbar^a = a_a (dZbar^2 - 1) - b_a dZbar + gamma_a U^a, per factor.
struct NonlinearFit {
    std::vector<double> a;
    std::vector<double> b;
    std::vector<double> gamma;
    Eigen::MatrixXd u_corr;       ///< E[U^a U^b]
    double skew = 0.0;            ///< of dZbar, population moments
    double excess_kurtosis = 0.0;
    std::vector<double> a_ls;     ///< same coefficients from a least-squares solve
    std::vector<double> b_ls;
    Eigen::MatrixXd residuals;    ///< samples x factors, U
    std::size_t samples = 0;

    [[nodiscard]] std::size_t n() const { return a.size(); }
    [[nodiscard]] InnovationLaw law() const { return {skew, excess_kurtosis}; }
    /// E[dZbar dWbar^a] = a zeta - b.
    [[nodiscard]] double spot_correlation(std::size_t f) const { return a[f] * skew - b[f]; }
    /// E[dZbar^2 dWbar^a] = a (2 + kappa) - b zeta.
    [[nodiscard]] double square_correlation(std::size_t f) const;
    /// Correlation of dWbar^a with (dZbar^2 - 1)/sqrt(2 + kappa): a sqrt(2+kappa) - b zeta / sqrt(2+kappa).
    [[nodiscard]] double shock_correlation(std::size_t f) const;
    /// Factor correlation rebuilt from the fit: gamma gamma E[UU] + (2+kappa) a a + b b - zeta (a b + a b).
    [[nodiscard]] Eigen::MatrixXd implied_factor_correlation() const;
    /// Monte Carlo coupling with the same a, b, gamma and residual correlation.
    [[nodiscard]] SpotVolCoupling coupling() const;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static NonlinearFit from_json(const nlohmann::json& j);

    /// Fast/slow coefficients consistent with the reference model and spot moments; see the README.
    [[nodiscard]] static NonlinearFit replica();
};

/// Moment formulas on standardised dZbar (population moments) and centred dWbar; gamma^2 uses the
/// sample second moment of dWbar, which is 1 for standardised input. Cross-checked against a
/// least-squares solve. Throws RegimeError when gamma^2 < 0 or 2 + kappa - zeta^2 <= 0.
[[nodiscard]] NonlinearFit fit_nonlinear(const Eigen::VectorXd& dz_bar, const Eigen::MatrixXd& dw_bar);
[[nodiscard]] NonlinearFit fit_nonlinear(const FactorSeries& factors);

/// Annualised vol of the spot-independent part of dxi/xi at tenor tau.
[[nodiscard]] double sigma_v(const NonlinearFit& fit, const ModelParams& params, double tau);

/// sum_a theta_a e^{-k_a delta} (a_a zeta - b_a) sqrt(dt).
[[nodiscard]] double leverage_correlation(const NonlinearFit& fit, const ModelParams& params, double delta,
                                          double dt = kDeltaT);
/// sum_a theta_a e^{-k_a delta} (a_a (2 + kappa) - b_a zeta) sqrt(dt).
[[nodiscard]] double volatility_clustering(const NonlinearFit& fit, const ModelParams& params, double delta,
                                           double dt = kDeltaT);
/// Share of the clustering coming from the quadratic term: sum theta a (2+kappa) / sum theta (a(2+kappa) - b zeta).
[[nodiscard]] double clustering_nonlinear_share(const NonlinearFit& fit, const ModelParams& params);

/// Coefficients of xi_{t+dt} = phi0 + phi1 r^2/dt - phi2 sqrt(xi) r/sqrt(dt) + (1 + phi3) xi + xi phi4 V sqrt(dt).
struct GarchCoefficients {
    double phi0 = 0.0;  ///< variance per step
    double phi1 = 0.0;
    double phi2 = 0.0;
    double phi3 = 0.0;
    double phi4 = 0.0;  ///< annualised vol

    [[nodiscard]] nlohmann::json to_json() const;
};

/// First-order expansion of the one-step spot-variance update. `factor_drift` is the annualised
/// mean of each dW; `curve_slope` is d xi / d u at the short end.
[[nodiscard]] GarchCoefficients garch_map(const NonlinearFit& fit, const ModelParams& params, double curve_slope,
                                          const SpotMoments& spot, const std::vector<double>& factor_drift,
                                          double dt = kDeltaT);

struct GarchRegression {
    GarchCoefficients coefficients;  ///< phi2 here multiplies +r/sqrt(dt), as in the plain regression
    std::vector<double> std_errors;  ///< phi0, phi1, phi2, phi3
    double residual_vol = 0.0;       ///< std of residues / mean variance / sqrt(dt), stored in phi4
    std::size_t samples = 0;
};

/// OLS of var_{t+1} on (1, r_t^2/dt, r_t/sqrt(dt), var_t). returns[t] is the return from t to t+1;
/// variance has one more entry than returns. Throws NumericalError on collinear regressors.
[[nodiscard]] GarchRegression fit_garch_direct(const std::vector<double>& returns, const std::vector<double>& variance,
                                               double dt = kDeltaT);

}  // namespace vardyn
