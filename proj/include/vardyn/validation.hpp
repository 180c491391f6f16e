#pragma once

#include "vardyn/calibration.hpp"
#include "vardyn/model.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace vardyn {

/// Reference computations that share no code with the paths they check.
namespace oracles {

/// log p(y) for one day, integrating the raw shocks x = dW on a tensor Gauss-Legendre grid
/// (24 panels x 10 points per axis, +-12 posterior sd around the mode). n <= 2 in practice.
[[nodiscard]] double quadrature_loglik(const DayWorkspace& ws, const ModelParams& params);

/// Random one- or two-factor parameters inside the model's admissible region.
[[nodiscard]] ModelParams random_params(std::mt19937_64& rng, std::size_t factors);
/// Random day with 1 to 7 quotes, loadings in [0.1, 0.6] and noise vols in [0.1, 1].
[[nodiscard]] DayWorkspace random_workspace(std::mt19937_64& rng, std::size_t factors);

/// Adaptive Gauss-Kronrod integrals of the kernel definitions.
[[nodiscard]] double kernel_g(double x);
[[nodiscard]] double kernel_h(double x);
[[nodiscard]] double kernel_l(double x, double y, double z);

/// dWbar = a (dZbar^2 - 1) - b dZbar + gamma U for one factor, dZbar from the moment-matched
/// innovation mixture and U standard Gaussian.
struct CoupledSample {
    Eigen::VectorXd z;
    Eigen::MatrixXd w;
};
[[nodiscard]] CoupledSample coupled_sample(std::size_t n, double skew, double excess_kurtosis, double a, double b,
                                           double gamma, std::uint64_t seed);

}  // namespace oracles

/// Seed for one named consumer of the master seed; the same (master, tag) always gives the same value.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

enum class CriterionStatus { pass, fail, expected_failure, skipped };

[[nodiscard]] std::string to_string(CriterionStatus s);

struct CriterionResult {
    int id = 0;
    std::string title;
    CriterionStatus status = CriterionStatus::skipped;
    std::string detail;
    double seconds = 0.0;
    nlohmann::json metrics = nlohmann::json::object();
};

struct ValidationOptions {
    std::uint64_t seed = 20240611;
    /// Directory of a synth/calibrate/extract/nonlinear/analytics run. Criteria 5 and 14 read
    /// their inputs from it and are skipped without it.
    std::optional<std::filesystem::path> run_dir;
    std::vector<int> only;  ///< empty runs every criterion
};

/// Criteria whose failure is reproduced faithfully and explained in the README: they are reported
/// as expected failures and do not fail the suite.
[[nodiscard]] const std::vector<int>& documented_failures();

[[nodiscard]] std::vector<CriterionResult> run_validation(const ValidationOptions& options);

/// True when nothing failed outside the documented set.
[[nodiscard]] bool suite_passed(const std::vector<CriterionResult>& results);

/// One line per criterion: "[PASS] 3 MC pricing oracle ... detail".
[[nodiscard]] std::string pass_table(const std::vector<CriterionResult>& results);
[[nodiscard]] nlohmann::json results_json(const std::vector<CriterionResult>& results);

}  // namespace vardyn
