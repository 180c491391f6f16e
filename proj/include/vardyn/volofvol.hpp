#pragma once

#include "vardyn/model.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace vardyn {

/// Flat-curve expected average of (dV/V)^2 over the life of a VIX future expiring in `tau`:
/// (1/4) sum Omega_ab g(k_a w) g(k_b w) g((k_a + k_b) tau), w the index window.
[[nodiscard]] double vix_future_total_variance(const ModelParams& params, double tau, double window = kVixWindow);

/// Model VVIX from the two expiries bracketing the index window, annualised vol:
/// sqrt(sum Omega/4 g_a g_b (2 g_{a+b}(tau2) - e^{-(k_a+k_b) tau1} g_{a+b}(tau2 - tau1))),
/// g_a = g(k_a (tau2 - tau1)). Throws RegimeError when the bracket is negative.
[[nodiscard]] double model_vvix(const ModelParams& params, double tau1, double tau2);

/// log lambda is Ornstein-Uhlenbeck: d log lambda = -k (log lambda - log lambda_inf) dt + sigma dW.
struct VolOfVolState {
    double lambda_inf = 1.26;
    double k = 16.0;         ///< 1/years
    double sigma = 1.52;     ///< annualised
    double lambda_t = 1.26;  ///< current level
    double residual_skew = 0.0;
    double residual_excess_kurtosis = 0.0;
    std::size_t samples = 0;
    bool degenerate = false;  ///< constant input; k is meaningless
    std::map<std::string, double> correlations;  ///< residual vs supplied factor increments

    [[nodiscard]] double half_life() const { return std::log(2.0) / k; }
    [[nodiscard]] nlohmann::json to_json() const;
};

/// Exact AR(1) in logs by least squares (the conditional maximum likelihood). `factors` maps a
/// name to increments aligned with the log-lambda increments (size n - 1).
/// Throws ValidationError on non-positive entries or fewer than 250 points, NumericalError when
/// the fitted persistence is outside (0, 1).
[[nodiscard]] VolOfVolState fit_lambda_process(const std::vector<double>& lambda, double dt = kDeltaT,
                                               const std::map<std::string, Eigen::VectorXd>& factors = {});

/// lambda_t = VVIX_t^2 / model_vvix^2.
[[nodiscard]] std::vector<double> lambda_ratio(const std::vector<double>& vvix_levels, double model_vvix_value);

/// E_t[lambda_u] ~ lambda_inf (lambda_t / lambda_inf)^{e^{-k h}} e^{sigma^2 h / 2}, h = u - t.
[[nodiscard]] double lambda_expectation(const VolOfVolState& state, double horizon);
/// E_t[log lambda_u] = log lambda_inf + (log lambda_t - log lambda_inf) e^{-k h}.
[[nodiscard]] double log_lambda_expectation(const VolOfVolState& state, double horizon);

/// Total variance of a VIX future under stochastic vol-of-vol, time measured from today:
/// sum Omega^g e^{-(k_a+k_b) tau} / (4 tau) int_0^tau (lambda^u / lambda_inf) e^{(k_a+k_b+sigma^2/2) u} du,
/// integrated by adaptive Simpson to relative 1e-8.
[[nodiscard]] double adjusted_future_variance(const ModelParams& params, const VolOfVolState& state, double tau,
                                              double window = kVixWindow);

}  // namespace vardyn
