#include "vardyn/statistics.hpp"

#include "vardyn/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace vardyn {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

// Descending eigen-decomposition of a symmetric matrix; columns signed to a positive sum.
ModeDecomposition decompose(const Eigen::MatrixXd& cov, const std::vector<double>& tenors) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw NumericalError("mode decomposition failed");
    const Eigen::Index m = cov.rows();
    ModeDecomposition out;
    out.tenors = tenors;
    out.variances.resize(m);
    out.modes.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        out.variances[i] = std::max(es.eigenvalues()[m - 1 - i], 0.0);
        Eigen::VectorXd v = es.eigenvectors().col(m - 1 - i);
        if (v.sum() < 0.0) v = -v;
        out.modes.col(i) = v;
    }
    const double total = out.variances.sum();
    if (!(total > 0.0)) throw NumericalError("mode decomposition of a zero covariance");
    // expected for model modes (rank = factors) and spline curves (rank <= basis size)
    if (out.variances[m - 1] < 1e-12 * out.variances[0])
        spdlog::debug("curve-variation covariance is rank deficient; shares still reported");
    out.shares = out.variances / total;
    return out;
}

}  // namespace

nlohmann::json MomentReport::to_json() const {
    return {{"samples", samples},          {"mean", mean},
            {"vol", vol},                  {"skew", number(skew)},
            {"excess_kurtosis", number(excess_kurtosis)}, {"tail_upper", number(tail_upper)},
            {"tail_lower", number(tail_lower)},           {"degenerate", degenerate}};
}

double hill_exponent(const Eigen::VectorXd& x, double tail_fraction) {
    const auto n = static_cast<std::size_t>(x.size());
    const auto k = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(tail_fraction * static_cast<double>(n))));
    if (k + 1 > n) return kNaN;
    std::vector<double> v(x.data(), x.data() + n);
    const double m = x.mean();
    for (auto& e : v) e -= m;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), std::greater<>());
    const double threshold = v[k];
    if (!(threshold > 0.0)) return kNaN;
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += std::log(v[i] / threshold);
    return s > 0.0 ? static_cast<double>(k) / s : kNaN;
}

MomentReport moments(const Eigen::VectorXd& x, double dt, double tail_fraction) {
    if (x.size() < 30) throw ValidationError("moments need at least 30 samples");
    if (!(dt > 0.0)) throw DomainError("moments: dt must be positive");
    MomentReport r;
    r.samples = static_cast<std::size_t>(x.size());
    const double n = static_cast<double>(x.size());
    const double m = x.mean();
    const Eigen::ArrayXd c = x.array() - m;
    const double m2 = c.square().mean();
    r.mean = m / dt;
    r.vol = std::sqrt(c.square().sum() / (n - 1.0) / dt);
    // constant up to rounding of the mean
    if (!(m2 > 0.0) || x.maxCoeff() - x.minCoeff() <= 1e-12 * x.cwiseAbs().maxCoeff()) {
        r.degenerate = true;
        r.skew = r.excess_kurtosis = r.tail_upper = r.tail_lower = kNaN;
        spdlog::warn("moments: constant series, higher moments undefined");
        return r;
    }
    const double g1 = c.cube().mean() / std::pow(m2, 1.5);
    const double g2 = c.square().square().mean() / (m2 * m2) - 3.0;
    r.skew = std::sqrt(n * (n - 1.0)) / (n - 2.0) * g1;
    r.excess_kurtosis = (n - 1.0) / ((n - 2.0) * (n - 3.0)) * ((n + 1.0) * g2 + 6.0);
    r.tail_upper = hill_exponent(x, tail_fraction);
    r.tail_lower = hill_exponent(-x, tail_fraction);
    return r;
}

nlohmann::json RiskPremiumReport::to_json() const {
    return {{"sigma_z", sigma_z},
            {"excess_kurtosis_z", excess_kurtosis_z},
            {"premium", premium},
            {"premium_vol", premium_vol},
            {"factor_drifts", factor_drifts}};
}

RiskPremiumReport risk_premium(double sigma_z, double excess_kurtosis_z) {
    if (!(sigma_z >= 0.0) || !(excess_kurtosis_z >= -2.0)) throw DomainError("risk premium: bad spot moments");
    RiskPremiumReport r;
    r.sigma_z = sigma_z;
    r.excess_kurtosis_z = excess_kurtosis_z;
    r.premium = 1.0 - sigma_z * sigma_z;
    r.premium_vol = std::sqrt(2.0 + excess_kurtosis_z) * sigma_z * sigma_z;
    return r;
}

RiskPremiumReport risk_premium_stats(const FactorSeries& factors) {
    if (factors.dz.size() == 0) throw ValidationError("risk premium needs the spot factor series");
    const auto z = moments(factors.dz);
    auto r = risk_premium(z.vol, z.excess_kurtosis);
    for (Eigen::Index a = 0; a < factors.dw.cols(); ++a) r.factor_drifts.push_back(factors.dw.col(a).mean() / kDeltaT);
    return r;
}

nlohmann::json ModeDecomposition::to_json() const {
    nlohmann::json j;
    j["tenors"] = tenors;
    j["shares"] = std::vector<double>(shares.data(), shares.data() + shares.size());
    std::vector<std::vector<double>> m;
    for (Eigen::Index c = 0; c < std::min<Eigen::Index>(modes.cols(), 3); ++c)
        m.emplace_back(modes.col(c).data(), modes.col(c).data() + modes.rows());
    j["modes"] = m;
    return j;
}

std::vector<double> default_mode_tenors() {
    std::vector<double> t;
    for (int w = 1; w <= 25; ++w) t.push_back(5.0 * w / kTradingDaysPerYear);
    return t;
}

Eigen::MatrixXd curve_log_variations(const std::vector<VarianceCurve>& curves, const std::vector<double>& gaps,
                                     const std::vector<double>& tenors) {
    if (curves.size() < 2 || gaps.size() + 1 != curves.size()) throw ValidationError("one gap per curve pair required");
    Eigen::MatrixXd v(static_cast<Eigen::Index>(gaps.size()), static_cast<Eigen::Index>(tenors.size()));
    for (std::size_t t = 0; t < gaps.size(); ++t)
        for (std::size_t i = 0; i < tenors.size(); ++i) {
            if (tenors[i] < gaps[t]) throw DomainError("tenor grid starts before the gap between curves");
            v(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) =
                std::log(curves[t + 1](tenors[i] - gaps[t])) - std::log(curves[t](tenors[i]));
        }
    return v;
}

ModeDecomposition kl_modes(const Eigen::MatrixXd& variations, const std::vector<double>& tenors) {
    if (variations.cols() != static_cast<Eigen::Index>(tenors.size())) throw ValidationError("variation grid mismatch");
    if (variations.rows() < 2) throw ValidationError("mode decomposition needs at least two variations");
    const Eigen::MatrixXd c = variations.rowwise() - variations.colwise().mean();
    return decompose(c.transpose() * c / static_cast<double>(variations.rows() - 1), tenors);
}

ModeDecomposition kl_modes(const std::vector<VarianceCurve>& curves, const BusinessCalendar& calendar,
                           const std::vector<double>& tenors) {
    if (curves.size() < 100) throw ValidationError("mode decomposition needs at least 100 days");
    std::vector<double> gaps;
    for (std::size_t t = 0; t + 1 < curves.size(); ++t) {
        const auto a = curves[t].anchor(), b = curves[t + 1].anchor();
        gaps.push_back(a && b ? calendar.year_fraction(*a, *b) : kDeltaT);
    }
    return kl_modes(curve_log_variations(curves, gaps, tenors), tenors);
}

ModeDecomposition model_modes(const ModelParams& params, const std::vector<double>& tenors) {
    params.validate();
    const auto m = static_cast<Eigen::Index>(tenors.size());
    Eigen::MatrixXd e(m, static_cast<Eigen::Index>(params.n()));
    for (Eigen::Index i = 0; i < m; ++i)
        for (std::size_t a = 0; a < params.n(); ++a)
            e(i, static_cast<Eigen::Index>(a)) = std::exp(-params.k[a] * tenors[static_cast<std::size_t>(i)]);
    return decompose(e * params.omega() * e.transpose(), tenors);
}

std::vector<double> mode_overlaps(const ModeDecomposition& a, const ModeDecomposition& b, std::size_t count) {
    if (a.modes.rows() != b.modes.rows()) throw ValidationError("mode grids differ");
    std::vector<double> out;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(count); ++i) out.push_back(std::abs(a.modes.col(i).dot(b.modes.col(i))));
    return out;
}

double distance_correlation(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) throw ValidationError("distance correlation needs equal lengths");
    if (x.size() < 30) throw ValidationError("distance correlation needs at least 30 samples");
    const Eigen::Index n = x.size();
    Eigen::VectorXd ra = Eigen::VectorXd::Zero(n), rb = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            ra[i] += std::abs(x[i] - x[j]);
            rb[i] += std::abs(y[i] - y[j]);
        }
    ra /= static_cast<double>(n);
    rb /= static_cast<double>(n);
    const double ga = ra.mean(), gb = rb.mean();
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const double a = std::abs(x[i] - x[j]) - ra[i] - ra[j] + ga;
            const double b = std::abs(y[i] - y[j]) - rb[i] - rb[j] + gb;
            sab += a * b;
            saa += a * a;
            sbb += b * b;
        }
    if (!(saa > 0.0) || !(sbb > 0.0)) {
        spdlog::warn("distance correlation of a constant series is defined as 0");
        return 0.0;
    }
    return std::sqrt(std::clamp(sab / std::sqrt(saa * sbb), 0.0, 1.0));
}

std::vector<AcfPoint> autocorrelation(const Eigen::VectorXd& x, const std::vector<int>& lags) {
    if (x.size() < 100) throw ValidationError("autocorrelation needs at least 100 samples");
    const Eigen::Index n = x.size();
    const Eigen::VectorXd c = x.array() - x.mean();
    const double denom = c.squaredNorm();
    std::vector<AcfPoint> out;
    for (int lag : lags) {
        if (lag < 1 || lag >= n) throw DomainError("autocorrelation lag out of range");
        const double num = c.head(n - lag).dot(c.tail(n - lag));
        out.push_back({lag, denom > 0.0 ? num / denom : 0.0, 1.96 / std::sqrt(static_cast<double>(n))});
    }
    return out;
}

}  // namespace vardyn
