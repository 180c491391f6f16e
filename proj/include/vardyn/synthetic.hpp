#pragma once

#include "vardyn/market_data.hpp"
#include "vardyn/model.hpp"
#include "vardyn/montecarlo.hpp"
#include "vardyn/variance_curve.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <vector>

namespace vardyn {

struct SyntheticSpec {
    ModelParams truth = ModelParams::reference_two_factor();
    std::vector<double> initial_knot_values = {0.045, 0.047, 0.049, 0.052, 0.054, 0.056, 0.057, 0.058, 0.059};
    int days = 1500;
    Date start = parse_date("2010-01-04");
    int live_futures = 7;
    /// Daily volume by expiry rank, front first; sigma^L = liquidity.scale / sqrt(volume).
    std::vector<double> volumes = {60000, 40000, 20000, 10000, 5000, 2500, 1200};
    double noise_multiplier = 1.0;  ///< 0 gives exact model prices
    LiquidityConfig liquidity;
    std::uint64_t seed = 1234;
    bool real_measure_drift = true;
    InnovationLaw innovation;
    std::optional<SpotVolCoupling> coupling;
    double spot0 = 1000.0;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static SyntheticSpec from_json(const nlohmann::json& j);
};

struct SyntheticDataset {
    std::vector<FuturesRow> futures;      ///< raw settles in vol points, as an exchange would print
    std::map<Date, double> vix_levels;    ///< raw index levels in vol points
    std::vector<Date> dates;
    std::vector<double> closes;
    Eigen::MatrixXd true_dw;              ///< day pairs x factors, the injected increments
    Eigen::VectorXd true_dz;              ///< r / sqrt(xi_t^t)
    std::vector<double> true_spot_variance;
    nlohmann::json truth;

    [[nodiscard]] ObservationSet observations(const LiquidityConfig& liquidity = {}) const;
    [[nodiscard]] SpotSeries spot() const;
};

/// Third Wednesday of each month with expiry in [from, to].
[[nodiscard]] std::vector<Date> monthly_expiries(Date from, Date to);

/// One simulated path of curve and spot; each day every live future is priced with the
/// model pricing formula on the simulated curve, then multiplied by exp(sigma^L sqrt(dt/2) eta).
/// The sqrt(dt/2) level noise gives day-over-day variation noise of std sigma^L sqrt(dt).
[[nodiscard]] SyntheticDataset generate(const SyntheticSpec& spec);

/// Writes futures.csv, vix.csv, spot.csv and truth.json into `dir` (created if needed).
void write_dataset(const SyntheticDataset& data, const std::filesystem::path& dir);

}  // namespace vardyn
