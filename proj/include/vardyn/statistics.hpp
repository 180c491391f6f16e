#pragma once

#include "vardyn/calibration.hpp"
#include "vardyn/market_data.hpp"
#include "vardyn/model.hpp"
#include "vardyn/variance_curve.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <vector>

namespace vardyn {

struct MomentReport {
    std::size_t samples = 0;
    double mean = 0.0;             ///< per year
    double vol = 0.0;              ///< per sqrt(year)
    double skew = 0.0;             ///< bias-corrected; NaN when degenerate
    double excess_kurtosis = 0.0;  ///< bias-corrected; NaN when degenerate
    double tail_upper = 0.0;       ///< Hill exponent of the top 2%
    double tail_lower = 0.0;       ///< Hill exponent of the bottom 2%
    bool degenerate = false;       ///< zero variance

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Sample moments of per-step increments; `dt` annualises mean (1/dt) and vol (1/sqrt(dt)).
/// Throws ValidationError below 30 samples.
[[nodiscard]] MomentReport moments(const Eigen::VectorXd& x, double dt = kDeltaT, double tail_fraction = 0.02);

/// Hill estimator of the tail exponent from the largest `tail_fraction` of x around its mean.
/// NaN when the threshold is not positive.
[[nodiscard]] double hill_exponent(const Eigen::VectorXd& x, double tail_fraction = 0.02);

struct RiskPremiumReport {
    double sigma_z = 0.0;              ///< realised over implied vol
    double excess_kurtosis_z = 0.0;
    double premium = 0.0;              ///< 1 - sigma_z^2
    double premium_vol = 0.0;          ///< sqrt(2 + kappa) sigma_z^2
    std::vector<double> factor_drifts; ///< mean of each dW per year

    [[nodiscard]] nlohmann::json to_json() const;
};

[[nodiscard]] RiskPremiumReport risk_premium(double sigma_z, double excess_kurtosis_z);
/// Requires dz; reads sigma_z and kappa from its sample moments.
[[nodiscard]] RiskPremiumReport risk_premium_stats(const FactorSeries& factors);

struct ModeDecomposition {
    std::vector<double> tenors;
    Eigen::VectorXd shares;   ///< descending, sums to one
    Eigen::MatrixXd modes;    ///< tenors x modes, orthonormal columns, positive sum
    Eigen::VectorXd variances;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Business-weekly tenors 1w..25w.
[[nodiscard]] std::vector<double> default_mode_tenors();

/// Day-over-day log changes of xi at fixed maturity: row t is log xi_{t+1}(tau - gap_t) - log xi_t(tau).
/// `gaps` are year fractions between consecutive curves.
[[nodiscard]] Eigen::MatrixXd curve_log_variations(const std::vector<VarianceCurve>& curves,
                                                   const std::vector<double>& gaps,
                                                   const std::vector<double>& tenors);

/// Eigen-decomposition of the covariance of the rows of `variations`.
[[nodiscard]] ModeDecomposition kl_modes(const Eigen::MatrixXd& variations, const std::vector<double>& tenors);
/// Curves anchored on consecutive dates of `calendar`; needs at least 100.
[[nodiscard]] ModeDecomposition kl_modes(const std::vector<VarianceCurve>& curves, const BusinessCalendar& calendar,
                                         const std::vector<double>& tenors = default_mode_tenors());

/// Modes of sum_ab Omega_ab e^{-k_a tau} e^{-k_b tau'} on the tenor grid.
[[nodiscard]] ModeDecomposition model_modes(const ModelParams& params,
                                            const std::vector<double>& tenors = default_mode_tenors());

/// |<a_i, b_i>| for the first `count` modes (grids must agree).
[[nodiscard]] std::vector<double> mode_overlaps(const ModeDecomposition& a, const ModeDecomposition& b,
                                                std::size_t count);

/// Szekely distance correlation in [0, 1]; O(n^2) time, O(n) memory. Constant input gives 0.
[[nodiscard]] double distance_correlation(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct AcfPoint {
    int lag = 0;
    double value = 0.0;
    double band = 0.0;  ///< 1.96 / sqrt(n), white-noise null
};
/// Sample autocorrelation; needs at least 100 samples.
[[nodiscard]] std::vector<AcfPoint> autocorrelation(const Eigen::VectorXd& x, const std::vector<int>& lags);

}  // namespace vardyn
