#include "vardyn/spotvol.hpp"

#include "vardyn/errors.hpp"

#include <cmath>

namespace vardyn {

namespace {

Eigen::VectorXd population_standardise(const Eigen::VectorXd& x) {
    const Eigen::VectorXd c = x.array() - x.mean();
    const double sd = std::sqrt(c.squaredNorm() / static_cast<double>(x.size()));
    if (!(sd > 0.0)) throw ValidationError("non-linear fit: constant spot factor");
    return c / sd;
}

std::vector<std::vector<double>> rows_of(const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index k = 0; k < m.cols(); ++k) out[static_cast<std::size_t>(i)].push_back(m(i, k));
    return out;
}

void check_sizes(const NonlinearFit& fit, const ModelParams& params) {
    if (fit.n() != params.n()) throw ValidationError("non-linear fit and model have different factor counts");
}

}  // namespace

SpotMoments SpotMoments::reference() { return {0.33, 0.796, -0.57, 1.59}; }

double NonlinearFit::square_correlation(std::size_t f) const {
    return a[f] * (2.0 + excess_kurtosis) - b[f] * skew;
}

double NonlinearFit::shock_correlation(std::size_t f) const {
    const double s = std::sqrt(2.0 + excess_kurtosis);
    return a[f] * s - b[f] * skew / s;
}

Eigen::MatrixXd NonlinearFit::implied_factor_correlation() const {
    const auto m = static_cast<Eigen::Index>(n());
    Eigen::MatrixXd r(m, m);
    for (std::size_t i = 0; i < n(); ++i)
        for (std::size_t j = 0; j < n(); ++j)
            r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                gamma[i] * gamma[j] * u_corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +
                (2.0 + excess_kurtosis) * a[i] * a[j] + b[i] * b[j] - skew * (a[i] * b[j] + a[j] * b[i]);
    return r;
}

SpotVolCoupling NonlinearFit::coupling() const {
    SpotVolCoupling c;
    c.a = a;
    c.b = b;
    c.gamma = gamma;
    c.u_corr = u_corr;
    return c;
}

nlohmann::json NonlinearFit::to_json() const {
    nlohmann::json j;
    j["a"] = a;
    j["b"] = b;
    j["gamma"] = gamma;
    j["u_corr"] = rows_of(u_corr);
    j["skew"] = skew;
    j["excess_kurtosis"] = excess_kurtosis;
    j["a_least_squares"] = a_ls;
    j["b_least_squares"] = b_ls;
    j["samples"] = samples;
    std::vector<double> shocks, spot, square;
    for (std::size_t f = 0; f < n(); ++f) {
        shocks.push_back(shock_correlation(f));
        spot.push_back(spot_correlation(f));
        square.push_back(square_correlation(f));
    }
    j["shock_correlation"] = shocks;
    j["spot_correlation"] = spot;
    j["square_correlation"] = square;
    j["implied_factor_correlation"] = rows_of(implied_factor_correlation());
    return j;
}

NonlinearFit NonlinearFit::from_json(const nlohmann::json& j) {
    NonlinearFit f;
    f.a = j.at("a").get<std::vector<double>>();
    f.b = j.at("b").get<std::vector<double>>();
    f.gamma = j.at("gamma").get<std::vector<double>>();
    f.skew = j.at("skew").get<double>();
    f.excess_kurtosis = j.at("excess_kurtosis").get<double>();
    const auto u = j.at("u_corr").get<std::vector<std::vector<double>>>();
    const auto m = static_cast<Eigen::Index>(u.size());
    if (f.b.size() != f.a.size() || f.gamma.size() != f.a.size() || u.size() != f.a.size())
        throw ValidationError("non-linear fit sizes disagree");
    f.u_corr.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index k = 0; k < m; ++k) f.u_corr(i, k) = u[static_cast<std::size_t>(i)].at(static_cast<std::size_t>(k));
    if (j.contains("a_least_squares")) f.a_ls = j["a_least_squares"].get<std::vector<double>>();
    if (j.contains("b_least_squares")) f.b_ls = j["b_least_squares"].get<std::vector<double>>();
    if (j.contains("samples")) f.samples = j["samples"].get<std::size_t>();
    return f;
}

NonlinearFit NonlinearFit::replica() {
    // fast: the quadratic term carries a third of the clustering and rho_shocks = 25%;
    // slow: linear only with rho_shocks = 25%; residual correlation set by rho = 0.51.
    const auto spot = SpotMoments::reference();
    const auto model = ModelParams::reference_two_factor();
    const auto c = SpotVolCoupling::consistent({0.045, 0.0}, {0.55, 0.83}, spot.law(), model.rho);
    NonlinearFit f;
    f.a = c.a;
    f.b = c.b;
    f.gamma = c.gamma;
    f.u_corr = c.u_corr;
    f.skew = spot.skew;
    f.excess_kurtosis = spot.excess_kurtosis;
    return f;
}

NonlinearFit fit_nonlinear(const Eigen::VectorXd& dz_bar, const Eigen::MatrixXd& dw_bar) {
    if (dz_bar.size() != dw_bar.rows()) throw ValidationError("non-linear fit: series lengths differ");
    if (dz_bar.size() < 30) throw ValidationError("non-linear fit needs at least 30 samples");
    const Eigen::VectorXd z = population_standardise(dz_bar);
    const auto len = static_cast<double>(z.size());
    const Eigen::ArrayXd z2 = z.array().square();

    NonlinearFit fit;
    fit.samples = static_cast<std::size_t>(z.size());
    fit.skew = (z2 * z.array()).mean();
    fit.excess_kurtosis = z2.square().mean() - 3.0;
    const double zeta = fit.skew, kappa = fit.excess_kurtosis;
    const double det = 2.0 + kappa - zeta * zeta;
    if (!(det > 1e-12)) throw RegimeError("non-linear fit: 2 + kappa - zeta^2 is not positive");

    Eigen::MatrixXd x(z.size(), 2);
    x.col(0) = (z2 - 1.0).matrix();
    x.col(1) = z;
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);

    const auto n = static_cast<std::size_t>(dw_bar.cols());
    fit.residuals.resize(z.size(), dw_bar.cols());
    for (std::size_t f = 0; f < n; ++f) {
        const Eigen::VectorXd w = dw_bar.col(static_cast<Eigen::Index>(f)).array() - dw_bar.col(static_cast<Eigen::Index>(f)).mean();
        const double e1 = w.dot(z) / len;
        const double e2 = (w.array() * z2).sum() / len;
        const double a = (e2 - zeta * e1) / det;
        const double b = (zeta * e2 - (2.0 + kappa) * e1) / det;
        const double g2 = w.squaredNorm() / len - a * a * (2.0 + kappa) - b * b + 2.0 * a * b * zeta;
        if (g2 < -1e-12) throw RegimeError("non-linear fit: exogenous variance gamma^2 is negative");
        const double gamma = std::sqrt(std::max(g2, 0.0));

        const Eigen::VectorXd coef = qr.solve(w);
        if (std::abs(coef[0] - a) > 1e-8 * std::max(1.0, std::abs(a)) ||
            std::abs(-coef[1] - b) > 1e-8 * std::max(1.0, std::abs(b)))
            throw NumericalError("non-linear fit: moment formulas and least squares disagree");
        fit.a.push_back(a);
        fit.b.push_back(b);
        fit.gamma.push_back(gamma);
        fit.a_ls.push_back(coef[0]);
        fit.b_ls.push_back(-coef[1]);
        const Eigen::VectorXd resid = w - a * x.col(0) + b * z;
        fit.residuals.col(static_cast<Eigen::Index>(f)) = gamma > 0.0 ? Eigen::VectorXd(resid / gamma) : Eigen::VectorXd::Zero(z.size());
    }
    fit.u_corr = fit.residuals.transpose() * fit.residuals / len;
    for (std::size_t f = 0; f < n; ++f)
        if (fit.gamma[f] == 0.0) fit.u_corr(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(f)) = 1.0;
    return fit;
}

NonlinearFit fit_nonlinear(const FactorSeries& factors) {
    if (factors.dz_bar.size() == 0) throw ValidationError("non-linear fit needs the spot factor series");
    return fit_nonlinear(factors.dz_bar, factors.dw_bar);
}

double sigma_v(const NonlinearFit& fit, const ModelParams& params, double tau) {
    check_sizes(fit, params);
    if (!(tau >= 0.0)) throw DomainError("sigma_v: negative tenor");
    double s = 0.0;
    for (std::size_t i = 0; i < fit.n(); ++i)
        for (std::size_t j = 0; j < fit.n(); ++j)
            s += params.theta[i] * params.theta[j] * std::exp(-(params.k[i] + params.k[j]) * tau) * fit.gamma[i] *
                 fit.gamma[j] * fit.u_corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return std::sqrt(std::max(s, 0.0));
}

double leverage_correlation(const NonlinearFit& fit, const ModelParams& params, double delta, double dt) {
    check_sizes(fit, params);
    if (!(delta > 0.0)) throw DomainError("leverage correlation needs a positive lag");
    double s = 0.0;
    for (std::size_t f = 0; f < fit.n(); ++f) s += params.theta[f] * std::exp(-params.k[f] * delta) * fit.spot_correlation(f);
    return s * std::sqrt(dt);
}

double volatility_clustering(const NonlinearFit& fit, const ModelParams& params, double delta, double dt) {
    check_sizes(fit, params);
    if (!(delta > 0.0)) throw DomainError("volatility clustering needs a positive lag");
    double s = 0.0;
    for (std::size_t f = 0; f < fit.n(); ++f) s += params.theta[f] * std::exp(-params.k[f] * delta) * fit.square_correlation(f);
    return s * std::sqrt(dt);
}

double clustering_nonlinear_share(const NonlinearFit& fit, const ModelParams& params) {
    check_sizes(fit, params);
    double quad = 0.0, total = 0.0;
    for (std::size_t f = 0; f < fit.n(); ++f) {
        quad += params.theta[f] * fit.a[f] * (2.0 + fit.excess_kurtosis);
        total += params.theta[f] * fit.square_correlation(f);
    }
    if (total == 0.0) throw DomainError("clustering share undefined without clustering");
    return quad / total;
}

nlohmann::json GarchCoefficients::to_json() const {
    return {{"phi0", phi0}, {"phi1", phi1}, {"phi2", phi2}, {"phi3", phi3}, {"phi4", phi4}};
}

GarchCoefficients garch_map(const NonlinearFit& fit, const ModelParams& params, double curve_slope,
                            const SpotMoments& spot, const std::vector<double>& factor_drift, double dt) {
    check_sizes(fit, params);
    if (factor_drift.size() != fit.n()) throw ValidationError("garch map: one drift per factor required");
    if (!(spot.sigma_z > 0.0)) throw DomainError("garch map: sigma_z must be positive");
    const double sq = std::sqrt(dt);
    const double s2 = spot.sigma_z * spot.sigma_z;
    const double mu = spot.mu_z;
    GarchCoefficients g;
    g.phi0 = curve_slope * dt;
    for (std::size_t f = 0; f < fit.n(); ++f) {
        const double tb = params.theta[f] * std::exp(-params.k[f] * dt);
        const double a = fit.a[f], b = fit.b[f];
        g.phi1 += tb * a / s2 * sq;
        g.phi2 += tb * (2.0 * a * mu / s2 * sq + b / spot.sigma_z) * sq;
        g.phi3 += tb * factor_drift[f] * dt - tb * a * sq + tb * (a * mu * mu / s2 * sq + b * mu / spot.sigma_z) * dt;
    }
    g.phi4 = sigma_v(fit, params, dt);
    return g;
}

GarchRegression fit_garch_direct(const std::vector<double>& returns, const std::vector<double>& variance, double dt) {
    if (variance.size() != returns.size() + 1) throw ValidationError("garch regression: need one more variance than returns");
    if (returns.size() < 250) throw ValidationError("garch regression needs at least 250 returns");
    const auto n = static_cast<Eigen::Index>(returns.size());
    Eigen::MatrixXd x(n, 4);
    Eigen::VectorXd y(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        const double r = returns[static_cast<std::size_t>(t)];
        x.row(t) << 1.0, r * r / dt, r / std::sqrt(dt), variance[static_cast<std::size_t>(t)];
        y[t] = variance[static_cast<std::size_t>(t) + 1];
    }
    // scale columns so the rank test is not fooled by units
    const Eigen::VectorXd scale = x.colwise().norm().transpose();
    for (Eigen::Index c = 0; c < 4; ++c)
        if (!(scale[c] > 0.0)) throw NumericalError("garch regression: empty regressor");
    const Eigen::MatrixXd xs = x * scale.cwiseInverse().asDiagonal();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
    qr.setThreshold(1e-10);
    if (qr.rank() < 4) throw NumericalError("garch regression: collinear regressors");
    const Eigen::VectorXd beta = qr.solve(y).cwiseQuotient(scale);
    const Eigen::VectorXd resid = y - x * beta;

    GarchRegression out;
    out.samples = static_cast<std::size_t>(n);
    out.coefficients.phi0 = beta[0];
    out.coefficients.phi1 = beta[1];
    out.coefficients.phi2 = beta[2];
    out.coefficients.phi3 = beta[3] - 1.0;
    const double s2 = resid.squaredNorm() / static_cast<double>(n - 4);
    const Eigen::MatrixXd cov = s2 * (x.transpose() * x).inverse();
    for (Eigen::Index c = 0; c < 4; ++c) out.std_errors.push_back(std::sqrt(std::max(cov(c, c), 0.0)));
    const double mean_var = y.mean();
    out.residual_vol = std::sqrt(s2) / mean_var / std::sqrt(dt);
    out.coefficients.phi4 = out.residual_vol;
    return out;
}

}  // namespace vardyn
