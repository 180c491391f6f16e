#include "vardyn/volofvol.hpp"

#include "vardyn/errors.hpp"
#include "vardyn/kernel.hpp"
#include "vardyn/quadrature.hpp"

#include <cmath>

namespace vardyn {

double vix_future_total_variance(const ModelParams& params, double tau, double window) {
    params.validate();
    if (!(tau >= 0.0) || !(window > 0.0)) throw DomainError("future total variance: bad maturity or window");
    const Eigen::MatrixXd om = params.omega();
    double s = 0.0;
    for (std::size_t a = 0; a < params.n(); ++a)
        for (std::size_t b = 0; b < params.n(); ++b)
            s += om(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * g(params.k[a] * window) *
                 g(params.k[b] * window) * g((params.k[a] + params.k[b]) * tau);
    return 0.25 * s;
}

double model_vvix(const ModelParams& params, double tau1, double tau2) {
    params.validate();
    if (!(tau1 >= 0.0) || !(tau2 > tau1)) throw DomainError("model VVIX needs 0 <= tau1 < tau2");
    const double dT = tau2 - tau1;
    const Eigen::MatrixXd om = params.omega();
    double s = 0.0;
    for (std::size_t a = 0; a < params.n(); ++a)
        for (std::size_t b = 0; b < params.n(); ++b) {
            const double kk = params.k[a] + params.k[b];
            s += 0.25 * om(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * g(params.k[a] * dT) *
                 g(params.k[b] * dT) * (2.0 * g(kk * tau2) - std::exp(-kk * tau1) * g(kk * dT));
        }
    if (s < 0.0) throw RegimeError("model VVIX: negative variance");
    return std::sqrt(s);
}

nlohmann::json VolOfVolState::to_json() const {
    return {{"lambda_inf", lambda_inf},
            {"k", k},
            {"sigma", sigma},
            {"lambda_t", lambda_t},
            {"half_life_days", degenerate ? 0.0 : half_life() * kTradingDaysPerYear},
            {"residual_skew", residual_skew},
            {"residual_excess_kurtosis", residual_excess_kurtosis},
            {"samples", samples},
            {"degenerate", degenerate},
            {"correlations", correlations}};
}

VolOfVolState fit_lambda_process(const std::vector<double>& lambda, double dt,
                                 const std::map<std::string, Eigen::VectorXd>& factors) {
    if (lambda.size() < 250) throw ValidationError("lambda fit needs at least 250 points");
    for (double v : lambda)
        if (!(v > 0.0)) throw ValidationError("lambda series must be positive");
    const auto n = static_cast<Eigen::Index>(lambda.size()) - 1;
    Eigen::VectorXd x(n), y(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        x[t] = std::log(lambda[static_cast<std::size_t>(t)]);
        y[t] = std::log(lambda[static_cast<std::size_t>(t) + 1]);
    }
    VolOfVolState s;
    s.samples = lambda.size();
    s.lambda_t = lambda.back();
    const Eigen::ArrayXd xc = x.array() - x.mean();
    const double sxx = xc.square().sum();
    // constant up to rounding of the logs
    if (x.maxCoeff() - x.minCoeff() <= 1e-12 * std::max(1.0, x.cwiseAbs().maxCoeff())) {
        s.degenerate = true;
        s.lambda_inf = lambda.front();
        s.sigma = 0.0;
        s.k = 0.0;
        return s;
    }
    const double phi = (xc * (y.array() - y.mean())).sum() / sxx;
    const double c = y.mean() - phi * x.mean();
    if (!(phi > 0.0 && phi < 1.0)) throw NumericalError("lambda fit: persistence outside (0, 1), no mean reversion");
    const Eigen::ArrayXd e = y.array() - c - phi * x.array();
    const double ve = e.square().sum() / static_cast<double>(n - 2);
    s.k = -std::log(phi) / dt;
    s.lambda_inf = std::exp(c / (1.0 - phi));
    s.sigma = std::sqrt(ve * 2.0 * s.k / (1.0 - phi * phi));
    const Eigen::ArrayXd ec = e - e.mean();
    const double m2 = ec.square().mean();
    if (m2 > 0.0) {
        s.residual_skew = ec.cube().mean() / std::pow(m2, 1.5);
        s.residual_excess_kurtosis = ec.square().square().mean() / (m2 * m2) - 3.0;
    }
    for (const auto& [name, f] : factors) {
        if (f.size() != n) throw ValidationError("factor '" + name + "' is not aligned with the lambda increments");
        const Eigen::ArrayXd fc = f.array() - f.mean();
        const double den = std::sqrt(fc.square().sum() * ec.square().sum());
        s.correlations[name] = den > 0.0 ? (fc * ec).sum() / den : 0.0;
    }
    return s;
}

std::vector<double> lambda_ratio(const std::vector<double>& vvix_levels, double model_vvix_value) {
    if (!(model_vvix_value > 0.0)) throw DomainError("lambda ratio needs a positive model VVIX");
    std::vector<double> out;
    out.reserve(vvix_levels.size());
    for (double v : vvix_levels) out.push_back(v * v / (model_vvix_value * model_vvix_value));
    return out;
}

double lambda_expectation(const VolOfVolState& s, double horizon) {
    if (!(horizon >= 0.0)) throw DomainError("lambda expectation: negative horizon");
    return s.lambda_inf * std::pow(s.lambda_t / s.lambda_inf, std::exp(-s.k * horizon)) *
           std::exp(0.5 * s.sigma * s.sigma * horizon);
}

double log_lambda_expectation(const VolOfVolState& s, double horizon) {
    if (!(horizon >= 0.0)) throw DomainError("lambda expectation: negative horizon");
    return std::log(s.lambda_inf) + (std::log(s.lambda_t) - std::log(s.lambda_inf)) * std::exp(-s.k * horizon);
}

double adjusted_future_variance(const ModelParams& params, const VolOfVolState& state, double tau, double window) {
    params.validate();
    if (!(tau > 0.0) || !(window > 0.0)) throw DomainError("adjusted future variance: bad maturity or window");
    const Eigen::MatrixXd om = params.omega();
    const double half_s2 = 0.5 * state.sigma * state.sigma;
    double total = 0.0;
    for (std::size_t a = 0; a < params.n(); ++a)
        for (std::size_t b = 0; b < params.n(); ++b) {
            const double kk = params.k[a] + params.k[b];
            // e^{-kk tau} folded into the integrand keeps it O(1) for large kk tau
            const auto f = [&](double u) {
                return lambda_expectation(state, u) / state.lambda_inf * std::exp((kk + half_s2) * u - kk * tau);
            };
            const double integral = adaptive_simpson(f, 0.0, tau, 1e-8);
            total += om(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * g(params.k[a] * window) *
                     g(params.k[b] * window) * integral / (4.0 * tau);
        }
    return total;
}

}  // namespace vardyn
