#pragma once

#include "vardyn/market_data.hpp"
#include "vardyn/model.hpp"
#include "vardyn/variance_curve.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace vardyn {

/// One day's variation problem: y = sqrt(dt) M Theta dW/sqrt(dt) + noise, noise ~ N(0, diag(noise_var)).
struct DayWorkspace {
    Date date;
    double dt = kDeltaT;
    std::vector<Date> expiries;
    Eigen::VectorXd y;          ///< observed dV/V from this day to the next, per future
    Eigen::VectorXd noise_var;  ///< (sigma^L)^2 dt
    Eigen::MatrixXd loadings;   ///< M(i, a) = 0.5 (K^{T_i, a} / V^{T_i})^2, futures x factors
};

/// Gaussian marginal log-density of y after integrating the factor shocks against their prior
/// U ~ N(mu, I), dW = sqrt(dt) TrI U.
[[nodiscard]] double day_loglik(const DayWorkspace& ws, const ModelParams& params);

struct FactorPosterior {
    Eigen::VectorXd dw;   ///< posterior mean of dW (not annualised)
    Eigen::VectorXd u;    ///< posterior mean of U
    Eigen::MatrixXd u_cov;
};
[[nodiscard]] FactorPosterior day_posterior(const DayWorkspace& ws, const ModelParams& params);

/// Loadings of `curve` for the futures of `day` at decay speeds `k` (one column per speed).
[[nodiscard]] Eigen::MatrixXd loading_matrix(const VarianceCurve& curve, const FuturesObservation& day,
                                             const std::vector<Date>& expiries, const std::vector<double>& k,
                                             const BusinessCalendar& cal);

/// Workspaces for consecutive observation pairs; futures must be live on both days.
[[nodiscard]] std::vector<DayWorkspace> build_workspaces(const ObservationSet& obs,
                                                         const std::vector<VarianceCurve>& curves,
                                                         const std::vector<double>& k);

struct CalibrationConfig {
    std::size_t factors = 2;
    std::vector<std::vector<double>> k_grids = {{5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16},
                                                {0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6}};
    double tolerance = 1e-6;     ///< relative log-likelihood improvement
    int max_outer_iterations = 10;
    int restarts = 5;
    int curve_refits = 3;        ///< fixed-point passes for strike = price / (1 - c.c.)
    double vix_cash_weight = 100.0;
    std::uint64_t seed = 7;
    CurveFitOptions curve;
    int min_days = 100;

    void validate() const;
};

/// Optimum of the likelihood at one point of the decay-speed grid.
struct GridPoint {
    std::vector<double> k;
    ModelParams params;
    double loglik = 0.0;
};

struct CalibrationResult {
    ModelParams params;
    double loglik = 0.0;
    std::vector<VarianceCurve> curves;  ///< one per observation day, anchored at its date
    std::vector<GridPoint> profile;     ///< last outer iteration
    int outer_iterations = 0;
    bool degenerate = false;            ///< quotes carry no variation
};

/// Curves for every day given model params: strikes K = V / (1 - c.c.) fitted by fixed point.
[[nodiscard]] std::vector<VarianceCurve> fit_daily_curves(const ObservationSet& obs, const ModelParams& params,
                                                          const CalibrationConfig& cfg,
                                                          const std::vector<VarianceCurve>* previous = nullptr);

/// Best (theta, rho, mu) at fixed k; mu is maximised in closed form.
[[nodiscard]] GridPoint fit_at_speeds(const std::vector<DayWorkspace>& ws, const std::vector<double>& k,
                                      const CalibrationConfig& cfg, const std::optional<ModelParams>& warm);

/// Alternates curve fitting, workspace construction and the grid search. Throws
/// ConvergenceError (best params flattened as k, theta, lower rho, mu) after max iterations.
[[nodiscard]] CalibrationResult calibrate(const ObservationSet& obs, const CalibrationConfig& cfg,
                                          const std::optional<ModelParams>& initial = std::nullopt);

/// True when the grid argmax is not on the boundary of any k grid.
[[nodiscard]] bool has_interior_maximum(const std::vector<GridPoint>& profile, const CalibrationConfig& cfg);

void write_profile_csv(const std::vector<GridPoint>& profile, const std::filesystem::path& out);

struct FactorSeries {
    std::vector<Date> dates;
    Eigen::MatrixXd dw;            ///< days x factors, raw increments (variance ~ dt)
    Eigen::VectorXd dz;            ///< r / sqrt(xi_t^t), units sqrt(years); empty without spot
    Eigen::VectorXd spot_variance; ///< xi_t^t
    Eigen::MatrixXd dw_bar;        ///< centred and scaled to unit variance
    Eigen::VectorXd dz_bar;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static FactorSeries from_json(const nlohmann::json& j);
};

/// Posterior-mean factor increments for each consecutive day pair; dZ from spot returns on the
/// same dates when `spot` is given.
[[nodiscard]] FactorSeries extract_factors(const ObservationSet& obs, const std::vector<VarianceCurve>& curves,
                                           const ModelParams& params, const SpotSeries* spot = nullptr);

/// Curves as JSON lines, one per day.
void write_curves_jsonl(const std::vector<VarianceCurve>& curves, const std::filesystem::path& out);
[[nodiscard]] std::vector<VarianceCurve> read_curves_jsonl(const std::filesystem::path& in);

}  // namespace vardyn
