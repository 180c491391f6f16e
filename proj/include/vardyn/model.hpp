#pragma once

#include "vardyn/market_data.hpp"
#include "vardyn/variance_curve.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <vector>

namespace vardyn {

/// n-factor lognormal forward-variance model
///   d xi_t^u = xi_t^u sum_a theta_a exp(-k_a (u - t)) dW_t^a,   <dW^a, dW^b> = rho_ab dt.
///
/// `mu` is the real-measure mean of the decorrelated daily shock U = TrI^{-1} dW / sqrt(dt),
/// i.e. E[dW] = sqrt(dt) TrI mu per day. factor_drift() reports it per factor and per year.
struct ModelParams {
    std::vector<double> k;      ///< decay speeds, 1/years, fastest first
    std::vector<double> theta;  ///< factor vols, annualised
    Eigen::MatrixXd rho;        ///< factor correlations
    std::vector<double> mu;     ///< E[U], dimensionless per day

    [[nodiscard]] std::size_t n() const { return k.size(); }

    /// Two factors with k = (10.25, 1.05), theta = (1.80, 0.92), rho = 0.51, mu = (-7.5%, -0.4%).
    [[nodiscard]] static ModelParams reference_two_factor();
    [[nodiscard]] static ModelParams one_factor(double k, double theta, double mu = 0.0);
    [[nodiscard]] static ModelParams two_factor(double k_fast, double k_slow, double theta_fast,
                                                double theta_slow, double rho, double mu_fast = 0.0,
                                                double mu_slow = 0.0);

    /// Throws ValidationError unless sizes agree, k > 0 strictly decreasing, theta >= 0,
    /// rho symmetric with unit diagonal and no eigenvalue below -1e-8.
    void validate() const;

    /// Omega_ab = theta_a theta_b rho_ab.
    [[nodiscard]] Eigen::MatrixXd omega() const;
    /// Lower-triangular TrI with TrI TrI^T = rho, after flooring eigenvalues at 1e-10.
    [[nodiscard]] Eigen::MatrixXd cholesky() const;
    /// Theta * TrI, the square root of Omega used by the likelihood.
    [[nodiscard]] Eigen::MatrixXd omega_root() const;
    /// Annualised drift of each dW^a: TrI mu / sqrt(dt).
    [[nodiscard]] Eigen::VectorXd factor_drift() const;

    /// Same model with theta -> scale * theta.
    [[nodiscard]] ModelParams scaled(double scale) const;
    [[nodiscard]] ModelParams with_mu(std::vector<double> m) const;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static ModelParams from_json(const nlohmann::json& j);
};

/// Correlation matrix with eigenvalues floored at `floor` and unit diagonal restored.
[[nodiscard]] Eigen::MatrixXd floor_correlation(const Eigen::MatrixXd& rho, double floor = 1e-10);

struct VixFuturePrice {
    double strike = 0.0;                ///< K^{T1}, annualised vol
    double convexity_correction = 0.0;  ///< dimensionless, in [0, 1)
    double price = 0.0;                 ///< strike * (1 - convexity_correction)
};

/// How the kernel-weighted strikes inside the convexity term are anchored. Both give the same
/// number; they differ in which exponential carries the exposure time.
enum class ConvexityForm {
    anchored_at_expiry,  ///< (1 - e^{-s(T1-t)})/s with kernels measured from T1
    anchored_at_today,   ///< (e^{s(T1-t)} - 1)/s with kernels measured from t
};

/// Second-order convexity correction of a VIX future on window [t1, t2] (tenors from the
/// curve anchor). Throws RegimeError when the correction reaches 1.
[[nodiscard]] double convexity_correction(const ForwardCurve& curve, const ModelParams& params,
                                          double t1, double t2,
                                          ConvexityForm form = ConvexityForm::anchored_at_expiry);

[[nodiscard]] VixFuturePrice price_vix_future(const ForwardCurve& curve, const ModelParams& params,
                                              double t1, double t2);

/// Flat-curve closed form (1/8) sum Omega g_a g_b (1 - e^{-(k_a+k_b) tau1})/(k_a+k_b).
[[nodiscard]] double approx_convexity(const ModelParams& params, double tau1, double window);

/// Per-factor loadings (theta_a/2) (K^{T1,a}/V^{T1})^2 of dV/V on dW^a.
/// When `observed_price` is positive it replaces the model price in the denominator.
[[nodiscard]] std::vector<double> future_dynamics_loadings(const ForwardCurve& curve,
                                                           const ModelParams& params, double t1,
                                                           double t2, double observed_price = 0.0);

/// Vol of the instantaneous variance at tenor tau: sqrt(sum Omega_ab e^{-(k_a+k_b) tau}).
[[nodiscard]] double instantaneous_var_vol(const ModelParams& params, double tau);

/// Flat-curve vol of a VIX future: (1/2) sqrt(sum Omega_ab g_a g_b e^{-(k_a+k_b) tau1}).
[[nodiscard]] double vix_future_vol_approx(const ModelParams& params, double tau1, double window);

/// Aggregate vol implied by a loading vector: sqrt(l^T rho l).
[[nodiscard]] double loading_vol(const ModelParams& params, const std::vector<double>& loadings);

}  // namespace vardyn
