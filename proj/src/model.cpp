#include "vardyn/model.hpp"

#include "vardyn/errors.hpp"
#include "vardyn/kernel.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

namespace vardyn {

ModelParams ModelParams::reference_two_factor() {
    return two_factor(10.25, 1.05, 1.80, 0.92, 0.51, -0.075, -0.004);
}

ModelParams ModelParams::one_factor(double k, double theta, double mu) {
    ModelParams p;
    p.k = {k};
    p.theta = {theta};
    p.rho = Eigen::MatrixXd::Identity(1, 1);
    p.mu = {mu};
    p.validate();
    return p;
}

ModelParams ModelParams::two_factor(double k_fast, double k_slow, double theta_fast, double theta_slow,
                                    double rho, double mu_fast, double mu_slow) {
    ModelParams p;
    p.k = {k_fast, k_slow};
    p.theta = {theta_fast, theta_slow};
    p.rho = Eigen::MatrixXd::Identity(2, 2);
    p.rho(0, 1) = p.rho(1, 0) = rho;
    p.mu = {mu_fast, mu_slow};
    p.validate();
    return p;
}

void ModelParams::validate() const {
    const std::size_t m = n();
    if (m == 0) throw ValidationError("model needs at least one factor");
    if (theta.size() != m || mu.size() != m || rho.rows() != static_cast<Eigen::Index>(m) ||
        rho.cols() != static_cast<Eigen::Index>(m))
        throw ValidationError("model parameter sizes disagree");
    for (std::size_t a = 0; a < m; ++a) {
        if (!(k[a] > 0.0)) throw ValidationError("decay speeds must be positive");
        if (a > 0 && !(k[a] < k[a - 1])) throw ValidationError("decay speeds must be strictly decreasing");
        if (!(theta[a] >= 0.0)) throw ValidationError("factor vols must be non-negative");
        if (!std::isfinite(mu[a])) throw ValidationError("non-finite drift");
    }
    for (Eigen::Index a = 0; a < rho.rows(); ++a) {
        if (std::abs(rho(a, a) - 1.0) > 1e-12) throw ValidationError("correlation diagonal must be 1");
        for (Eigen::Index b = 0; b < a; ++b) {
            if (std::abs(rho(a, b) - rho(b, a)) > 1e-12) throw ValidationError("correlation not symmetric");
            if (std::abs(rho(a, b)) > 1.0) throw ValidationError("correlation outside [-1, 1]");
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rho);
    if (es.eigenvalues().minCoeff() < -1e-8) throw ValidationError("correlation matrix not positive semi-definite");
}

Eigen::MatrixXd floor_correlation(const Eigen::MatrixXd& rho, double floor) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rho);
    if (es.eigenvalues().minCoeff() >= floor) return rho;
    spdlog::warn("correlation matrix near-singular (min eigenvalue {:.3g}); flooring at {:.1g}",
                 es.eigenvalues().minCoeff(), floor);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor);
    Eigen::MatrixXd fixed = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    const Eigen::VectorXd d = fixed.diagonal().cwiseSqrt().cwiseInverse();
    fixed = d.asDiagonal() * fixed * d.asDiagonal();
    return 0.5 * (fixed + fixed.transpose());
}

Eigen::MatrixXd ModelParams::omega() const {
    const auto m = static_cast<Eigen::Index>(n());
    Eigen::MatrixXd o(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b) o(a, b) = theta[a] * theta[b] * rho(a, b);
    return o;
}

Eigen::MatrixXd ModelParams::cholesky() const {
    Eigen::LLT<Eigen::MatrixXd> llt(floor_correlation(rho));
    if (llt.info() != Eigen::Success) throw NumericalError("Cholesky of the correlation matrix failed");
    return llt.matrixL();
}

Eigen::MatrixXd ModelParams::omega_root() const {
    const Eigen::Map<const Eigen::VectorXd> th(theta.data(), static_cast<Eigen::Index>(n()));
    return th.asDiagonal() * cholesky();
}

Eigen::VectorXd ModelParams::factor_drift() const {
    const Eigen::Map<const Eigen::VectorXd> m(mu.data(), static_cast<Eigen::Index>(n()));
    return cholesky() * m / std::sqrt(kDeltaT);
}

ModelParams ModelParams::scaled(double scale) const {
    ModelParams p = *this;
    for (double& t : p.theta) t *= scale;
    return p;
}

ModelParams ModelParams::with_mu(std::vector<double> m) const {
    ModelParams p = *this;
    p.mu = std::move(m);
    p.validate();
    return p;
}

nlohmann::json ModelParams::to_json() const {
    nlohmann::json j;
    j["k"] = k;
    j["theta"] = theta;
    std::vector<std::vector<double>> r(n(), std::vector<double>(n()));
    for (std::size_t a = 0; a < n(); ++a)
        for (std::size_t b = 0; b < n(); ++b)
            r[a][b] = rho(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    j["rho"] = r;
    j["mu"] = mu;
    return j;
}

ModelParams ModelParams::from_json(const nlohmann::json& j) {
    for (const auto& [key, _] : j.items())
        if (key != "k" && key != "theta" && key != "rho" && key != "mu")
            throw ValidationError("unknown model parameter '" + key + "'");
    ModelParams p;
    p.k = j.at("k").get<std::vector<double>>();
    p.theta = j.at("theta").get<std::vector<double>>();
    const auto r = j.at("rho").get<std::vector<std::vector<double>>>();
    p.rho.resize(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.size()));
    for (std::size_t a = 0; a < r.size(); ++a) {
        if (r[a].size() != r.size()) throw ValidationError("rho must be square");
        for (std::size_t b = 0; b < r.size(); ++b)
            p.rho(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = r[a][b];
    }
    p.mu = j.contains("mu") ? j.at("mu").get<std::vector<double>>() : std::vector<double>(p.k.size(), 0.0);
    p.validate();
    return p;
}

double convexity_correction(const ForwardCurve& curve, const ModelParams& params, double t1, double t2,
                            ConvexityForm form) {
    if (!(t2 > t1) || !(t1 >= 0.0)) throw DomainError("convexity: need 0 <= t1 < t2");
    const double window = t2 - t1;
    const double k2 = curve.integral(t1, t2) / window;
    const std::size_t n = params.n();
    const double origin = form == ConvexityForm::anchored_at_expiry ? t1 : 0.0;
    std::vector<double> kw(n);
    for (std::size_t a = 0; a < n; ++a) kw[a] = curve.kernel_integral(t1, t2, params.k[a], origin) / window;
    const Eigen::MatrixXd om = params.omega();
    double cc = 0.0;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            const double s = params.k[a] + params.k[b];
            const double exposure = form == ConvexityForm::anchored_at_expiry
                                        ? t1 * g(s * t1)               // (1 - e^{-s t1})/s
                                        : std::expm1(s * t1) / s;      // (e^{s t1} - 1)/s
            cc += om(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) / 8.0 * exposure * kw[a] * kw[b];
        }
    cc /= k2 * k2;
    if (!(cc < 1.0)) throw RegimeError("convexity correction >= 1: vol-of-vol too large for the expansion");
    return cc;
}

VixFuturePrice price_vix_future(const ForwardCurve& curve, const ModelParams& params, double t1, double t2) {
    VixFuturePrice p;
    p.strike = forward_var_strike(curve, t1, t2);
    p.convexity_correction = convexity_correction(curve, params, t1, t2);
    p.price = p.strike * (1.0 - p.convexity_correction);
    return p;
}

double approx_convexity(const ModelParams& params, double tau1, double window) {
    const Eigen::MatrixXd om = params.omega();
    double cc = 0.0;
    for (std::size_t a = 0; a < params.n(); ++a)
        for (std::size_t b = 0; b < params.n(); ++b) {
            const double s = params.k[a] + params.k[b];
            cc += om(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * g(params.k[a] * window) *
                  g(params.k[b] * window) * tau1 * g(s * tau1);
        }
    return cc / 8.0;
}

std::vector<double> future_dynamics_loadings(const ForwardCurve& curve, const ModelParams& params, double t1,
                                             double t2, double observed_price) {
    const double window = t2 - t1;
    const double v = observed_price > 0.0 ? observed_price : price_vix_future(curve, params, t1, t2).price;
    std::vector<double> out(params.n());
    for (std::size_t a = 0; a < params.n(); ++a) {
        const double ka2 = curve.kernel_integral(t1, t2, params.k[a], 0.0) / window;
        out[a] = 0.5 * params.theta[a] * ka2 / (v * v);
    }
    return out;
}

double instantaneous_var_vol(const ModelParams& params, double tau) {
    const Eigen::MatrixXd om = params.omega();
    double s = 0.0;
    for (std::size_t a = 0; a < params.n(); ++a)
        for (std::size_t b = 0; b < params.n(); ++b)
            s += om(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) *
                 std::exp(-(params.k[a] + params.k[b]) * tau);
    return std::sqrt(std::max(s, 0.0));
}

double vix_future_vol_approx(const ModelParams& params, double tau1, double window) {
    const Eigen::MatrixXd om = params.omega();
    double s = 0.0;
    for (std::size_t a = 0; a < params.n(); ++a)
        for (std::size_t b = 0; b < params.n(); ++b)
            s += om(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * g(params.k[a] * window) *
                 g(params.k[b] * window) * std::exp(-(params.k[a] + params.k[b]) * tau1);
    return 0.5 * std::sqrt(std::max(s, 0.0));
}

double loading_vol(const ModelParams& params, const std::vector<double>& loadings) {
    double s = 0.0;
    for (std::size_t a = 0; a < params.n(); ++a)
        for (std::size_t b = 0; b < params.n(); ++b)
            s += loadings[a] * loadings[b] * params.rho(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    return std::sqrt(std::max(s, 0.0));
}

}  // namespace vardyn
