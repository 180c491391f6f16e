#pragma once

#include "vardyn/kernel.hpp"
#include "vardyn/market_data.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <vector>

namespace vardyn {

/// Tenor interval [start, end] in years from the curve anchor.
struct Window {
    double start = 0.0;
    double end = 0.0;

    [[nodiscard]] double length() const { return end - start; }
};

/// Anything that can report xi(tau) and its exponentially weighted integrals.
/// Pricing only needs this much, so simulated curves can be priced without a spline fit.
class ForwardCurve {
public:
    virtual ~ForwardCurve() = default;
    [[nodiscard]] virtual double operator()(double tenor) const = 0;
    /// int_a^b xi(tau) exp(-decay (tau - origin)) dtau.
    [[nodiscard]] virtual double kernel_integral(double a, double b, double decay,
                                                 double origin = 0.0) const = 0;
    [[nodiscard]] double integral(double a, double b) const { return kernel_integral(a, b, 0.0, 0.0); }
};

/// Instantaneous forward variance xi(tau), tau = u - t in years.
///
/// xi is a clamped cubic B-spline on fixed tenor knots whose control values are exp(log_coeff),
/// so xi > 0 everywhere. Beyond the last knot the curve is flat; beyond max_tenor it is undefined.
class VarianceCurve final : public ForwardCurve {
public:
    /// {0, 2w, 1m, 2m, 3m, 4m, 5m, 6m, 8m} on the 252-day clock.
    [[nodiscard]] static std::vector<double> default_knots();

    VarianceCurve(std::vector<double> knots, std::vector<double> log_coeffs,
                  std::optional<Date> anchor = std::nullopt, double max_tenor = 5.0);

    [[nodiscard]] static VarianceCurve flat(double variance,
                                            std::vector<double> knots = default_knots(),
                                            double max_tenor = 1e3);
    /// Curve through the given knot values with zero second derivative at both ends.
    /// Throws ValidationError when the interpolant needs a non-positive control value.
    [[nodiscard]] static VarianceCurve interpolate(std::span<const double> knot_values,
                                                   std::vector<double> knots = default_knots());
    /// Curve with the given (positive) B-spline control values.
    [[nodiscard]] static VarianceCurve from_control_values(std::span<const double> values,
                                                           std::vector<double> knots = default_knots(),
                                                           double max_tenor = 5.0);
    /// xi(tau) = level + slope * tau on [0, last knot]; B-splines reproduce lines exactly
    /// with control values at the Greville abscissae.
    [[nodiscard]] static VarianceCurve linear(double level, double slope,
                                              std::vector<double> knots = default_knots(),
                                              double max_tenor = 5.0);

    [[nodiscard]] double operator()(double tenor) const override;
    [[nodiscard]] double slope(double tenor) const;
    [[nodiscard]] double curvature(double tenor) const;

    using ForwardCurve::integral;
    [[nodiscard]] double kernel_integral(double a, double b, double decay,
                                         double origin = 0.0) const override;
    /// int_a^b B_j(tau) exp(-decay (tau - origin)) dtau for every basis function, with the flat
    /// extension folded into the last one.
    [[nodiscard]] std::vector<double> basis_integrals(double a, double b, double decay = 0.0,
                                                      double origin = 0.0) const;
    /// Gram matrix of second derivatives int_0^{last knot} B_i'' B_j'' dtau, row-major.
    [[nodiscard]] std::vector<double> curvature_gram() const;
    /// Values of all basis functions at tenor (flat extension applied).
    [[nodiscard]] std::vector<double> basis_values(double tenor) const;
    /// Greville abscissae of the basis (where each control value "sits").
    [[nodiscard]] std::vector<double> greville() const;

    [[nodiscard]] const std::vector<double>& knots() const { return knots_; }
    [[nodiscard]] const std::vector<double>& log_coeffs() const { return log_coeffs_; }
    [[nodiscard]] std::size_t basis_size() const { return log_coeffs_.size(); }
    [[nodiscard]] std::optional<Date> anchor() const { return anchor_; }
    [[nodiscard]] double last_knot() const { return knots_.back(); }
    [[nodiscard]] double max_tenor() const { return max_tenor_; }

    [[nodiscard]] VarianceCurve with_log_coeffs(std::vector<double> log_coeffs) const;
    [[nodiscard]] VarianceCurve with_anchor(std::optional<Date> anchor) const;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static VarianceCurve from_json(const nlohmann::json& j);

private:
    void check_domain(double tenor) const;
    /// Returns the first non-zero basis index and fills the four non-zero values
    /// (or derivatives of `order`) at a tenor inside [0, last knot].
    std::size_t local_basis(double tenor, int order, double out[4]) const;

    std::vector<double> knots_;
    std::vector<double> full_knots_;  // clamped knot vector
    std::vector<double> log_coeffs_;
    std::vector<double> coeffs_;      // exp(log_coeffs_)
    std::optional<Date> anchor_;
    double max_tenor_;
};

/// xi at tenor; same as curve(tenor).
[[nodiscard]] double eval_curve(const ForwardCurve& curve, double tenor);

/// sqrt((1/(T2-T1)) int_{T1}^{T2} xi): the forward-starting variance strike, annualised vol.
[[nodiscard]] double forward_var_strike(const ForwardCurve& curve, double t1, double t2);

/// sqrt((1/(T2-T1)) int_{T1}^{T2} xi(u) exp(-k u) du), the kernel measured from the anchor.
[[nodiscard]] double kernel_weighted_strike(const ForwardCurve& curve, double t1, double t2,
                                            KernelFn kernel);

struct StrikeTarget {
    Window window;
    double strike = 0.0;  ///< annualised vol
    double weight = 1.0;  ///< inverse squared strike error
};

struct CurveFitOptions {
    double smoothness_weight = 1e-4;
    int max_iterations = 400;
    double tolerance = 1e-12;
    std::vector<double> knots = VarianceCurve::default_knots();
    double max_tenor = 5.0;
};

/// Minimises sum_i w_i (K_i(curve) - K_i)^2 + smoothness_weight * int (xi'')^2 over log control
/// values. The optional VIX target enters like any other window. Throws ConvergenceError
/// (carrying the best log-coefficients) when the optimiser gives up.
[[nodiscard]] VarianceCurve fit_curve(std::span<const StrikeTarget> targets,
                                      const CurveFitOptions& options,
                                      const std::optional<StrikeTarget>& vix_cash = std::nullopt,
                                      const VarianceCurve* initial = nullptr);

}  // namespace vardyn
