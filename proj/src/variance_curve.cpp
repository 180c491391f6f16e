#include "vardyn/variance_curve.hpp"

#include "vardyn/errors.hpp"
#include "vardyn/quadrature.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/Splines>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vardyn {

namespace {

constexpr int kDegree = 3;
using SplineT = Eigen::Spline<double, 1, kDegree>;

std::vector<double> clamp_knots(const std::vector<double>& knots) {
    std::vector<double> full;
    full.reserve(knots.size() + 2 * kDegree);
    for (int i = 0; i < kDegree; ++i) full.push_back(knots.front());
    full.insert(full.end(), knots.begin(), knots.end());
    for (int i = 0; i < kDegree; ++i) full.push_back(knots.back());
    return full;
}

void check_knots(const std::vector<double>& knots) {
    if (knots.size() < 2) throw ValidationError("variance curve needs at least two knots");
    if (knots.front() != 0.0) throw ValidationError("first curve knot must be tenor 0");
    for (std::size_t i = 1; i < knots.size(); ++i)
        if (!(knots[i] > knots[i - 1])) throw ValidationError("curve knots must be strictly increasing");
}

}  // namespace

std::vector<double> VarianceCurve::default_knots() {
    return {0.0, 10.0 / 252.0, 1.0 / 12.0, 2.0 / 12.0, 3.0 / 12.0,
            4.0 / 12.0, 5.0 / 12.0, 6.0 / 12.0, 8.0 / 12.0};
}

VarianceCurve::VarianceCurve(std::vector<double> knots, std::vector<double> log_coeffs,
                             std::optional<Date> anchor, double max_tenor)
    : knots_(std::move(knots)), log_coeffs_(std::move(log_coeffs)), anchor_(anchor),
      max_tenor_(max_tenor) {
    check_knots(knots_);
    if (log_coeffs_.size() != knots_.size() + kDegree - 1)
        throw ValidationError("variance curve needs " + std::to_string(knots_.size() + kDegree - 1) +
                              " coefficients, got " + std::to_string(log_coeffs_.size()));
    if (!(max_tenor_ >= knots_.back())) throw ValidationError("max tenor below the last knot");
    full_knots_ = clamp_knots(knots_);
    coeffs_.resize(log_coeffs_.size());
    for (std::size_t j = 0; j < coeffs_.size(); ++j) {
        if (!std::isfinite(log_coeffs_[j])) throw ValidationError("non-finite curve coefficient");
        coeffs_[j] = std::exp(log_coeffs_[j]);
    }
}

VarianceCurve VarianceCurve::flat(double variance, std::vector<double> knots, double max_tenor) {
    if (!(variance > 0.0)) throw ValidationError("flat curve variance must be positive");
    const std::size_t nb = knots.size() + kDegree - 1;
    return VarianceCurve(std::move(knots), std::vector<double>(nb, std::log(variance)), std::nullopt,
                         max_tenor);
}

VarianceCurve VarianceCurve::from_control_values(std::span<const double> values,
                                                 std::vector<double> knots, double max_tenor) {
    std::vector<double> logs(values.size());
    for (std::size_t j = 0; j < values.size(); ++j) {
        if (!(values[j] > 0.0)) throw ValidationError("control values must be positive");
        logs[j] = std::log(values[j]);
    }
    return VarianceCurve(std::move(knots), std::move(logs), std::nullopt, max_tenor);
}

VarianceCurve VarianceCurve::linear(double level, double slope, std::vector<double> knots,
                                    double max_tenor) {
    const VarianceCurve probe = flat(1.0, knots, max_tenor);
    std::vector<double> values;
    for (double g : probe.greville()) values.push_back(level + slope * g);
    return from_control_values(values, std::move(knots), max_tenor);
}

VarianceCurve VarianceCurve::interpolate(std::span<const double> knot_values, std::vector<double> knots) {
    check_knots(knots);
    if (knot_values.size() != knots.size())
        throw ValidationError("interpolation needs one value per knot");
    const VarianceCurve probe = flat(1.0, knots);
    const auto nb = static_cast<Eigen::Index>(probe.basis_size());
    // Rows: one per knot value, plus zero curvature at both ends.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nb, nb);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nb);
    Eigen::Index row = 0;
    for (std::size_t i = 0; i < knots.size(); ++i, ++row) {
        double b[4];
        const std::size_t first = probe.local_basis(knots[i], 0, b);
        for (int m = 0; m < 4; ++m) a(row, static_cast<Eigen::Index>(first) + m) = b[m];
        rhs(row) = knot_values[i];
    }
    for (double tau : {knots.front(), knots.back()}) {
        double b[4];
        const std::size_t first = probe.local_basis(tau, 2, b);
        for (int m = 0; m < 4; ++m) a(row, static_cast<Eigen::Index>(first) + m) = b[m];
        ++row;
    }
    const Eigen::VectorXd c = a.fullPivLu().solve(rhs);
    std::vector<double> values(c.data(), c.data() + c.size());
    if (std::any_of(values.begin(), values.end(), [](double v) { return !(v > 0.0); }))
        throw ValidationError("interpolating spline has a non-positive control value");
    return from_control_values(values, std::move(knots));
}

void VarianceCurve::check_domain(double tenor) const {
    if (!(tenor >= -1e-12) || !(tenor <= max_tenor_ * (1.0 + 1e-12)))
        throw DomainError("tenor " + std::to_string(tenor) + " outside curve domain [0, " +
                          std::to_string(max_tenor_) + "]");
}

std::size_t VarianceCurve::local_basis(double tenor, int order, double out[4]) const {
    const Eigen::Map<const SplineT::KnotVectorType> kv(full_knots_.data(),
                                                      static_cast<Eigen::Index>(full_knots_.size()));
    const double u = std::clamp(tenor, knots_.front(), knots_.back());
    const auto span = SplineT::Span(u, kDegree, kv);
    const auto der = SplineT::BasisFunctionDerivatives(u, order, kDegree, kv);
    for (int m = 0; m < 4; ++m) out[m] = der(order, m);
    return static_cast<std::size_t>(span - kDegree);
}

double VarianceCurve::operator()(double tenor) const {
    check_domain(tenor);
    double b[4];
    const std::size_t first = local_basis(tenor, 0, b);
    double v = 0.0;
    for (int m = 0; m < 4; ++m) v += coeffs_[first + m] * b[m];
    return v;
}

double VarianceCurve::slope(double tenor) const {
    check_domain(tenor);
    if (tenor > knots_.back()) return 0.0;
    double b[4];
    const std::size_t first = local_basis(tenor, 1, b);
    double v = 0.0;
    for (int m = 0; m < 4; ++m) v += coeffs_[first + m] * b[m];
    return v;
}

double VarianceCurve::curvature(double tenor) const {
    check_domain(tenor);
    if (tenor > knots_.back()) return 0.0;
    double b[4];
    const std::size_t first = local_basis(tenor, 2, b);
    double v = 0.0;
    for (int m = 0; m < 4; ++m) v += coeffs_[first + m] * b[m];
    return v;
}

std::vector<double> VarianceCurve::basis_values(double tenor) const {
    check_domain(tenor);
    std::vector<double> out(basis_size(), 0.0);
    double b[4];
    const std::size_t first = local_basis(tenor, 0, b);
    for (int m = 0; m < 4; ++m) out[first + m] = b[m];
    return out;
}

std::vector<double> VarianceCurve::greville() const {
    std::vector<double> g(basis_size());
    for (std::size_t j = 0; j < g.size(); ++j)
        g[j] = (full_knots_[j + 1] + full_knots_[j + 2] + full_knots_[j + 3]) / 3.0;
    return g;
}

std::vector<double> VarianceCurve::basis_integrals(double a, double b, double decay, double origin) const {
    check_domain(a);
    check_domain(b);
    if (!(b >= a)) throw DomainError("integration window reversed");
    std::vector<double> out(basis_size(), 0.0);
    // Spline part, segment by segment; GL16 is exact for the polynomial pieces and
    // converges spectrally for the exponential weight over sub-year segments.
    using Rule = boost::math::quadrature::gauss<double, 16>;
    const auto& nodes = Rule::abscissa();
    const auto& weights = Rule::weights();
    const double spline_end = std::min(b, knots_.back());
    for (std::size_t s = 0; s + 1 < knots_.size(); ++s) {
        const double lo = std::max(a, knots_[s]);
        const double hi = std::min(spline_end, knots_[s + 1]);
        if (!(hi > lo)) continue;
        const double half = 0.5 * (hi - lo);
        const double mid = 0.5 * (hi + lo);
        auto add_node = [&](double tau, double w) {
            double bv[4];
            const std::size_t first = local_basis(tau, 0, bv);
            const double wk = w * half * std::exp(-decay * (tau - origin));
            for (int m = 0; m < 4; ++m) out[first + m] += wk * bv[m];
        };
        // boost stores non-negative nodes only; node 0 is the centre when present.
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i] == 0.0) {
                add_node(mid, weights[i]);
            } else {
                add_node(mid + half * nodes[i], weights[i]);
                add_node(mid - half * nodes[i], weights[i]);
            }
        }
    }
    // Flat extension carried by the last control value.
    const double lo = std::max(a, knots_.back());
    if (b > lo) {
        const double len = b - lo;
        out.back() += std::exp(-decay * (lo - origin)) * len * g(decay * len);
    }
    return out;
}

double VarianceCurve::kernel_integral(double a, double b, double decay, double origin) const {
    const auto w = basis_integrals(a, b, decay, origin);
    return std::inner_product(w.begin(), w.end(), coeffs_.begin(), 0.0);
}

std::vector<double> VarianceCurve::curvature_gram() const {
    const std::size_t nb = basis_size();
    std::vector<double> q(nb * nb, 0.0);
    for (std::size_t s = 0; s + 1 < knots_.size(); ++s) {
        const double lo = knots_[s];
        const double hi = knots_[s + 1];
        double probe[4];
        const std::size_t first = local_basis(0.5 * (lo + hi), 2, probe);
        for (int m = 0; m < 4; ++m)
            for (int n = 0; n < 4; ++n)
                q[(first + m) * nb + first + n] += gauss_legendre16(
                    [&](double tau) {
                        double bv[4];
                        local_basis(tau, 2, bv);
                        return bv[m] * bv[n];
                    },
                    lo, hi);
    }
    return q;
}

VarianceCurve VarianceCurve::with_log_coeffs(std::vector<double> log_coeffs) const {
    return VarianceCurve(knots_, std::move(log_coeffs), anchor_, max_tenor_);
}

VarianceCurve VarianceCurve::with_anchor(std::optional<Date> anchor) const {
    return VarianceCurve(knots_, log_coeffs_, anchor, max_tenor_);
}

nlohmann::json VarianceCurve::to_json() const {
    nlohmann::json j;
    j["anchor"] = anchor_ ? nlohmann::json(format_date(*anchor_)) : nlohmann::json(nullptr);
    j["knots"] = knots_;
    j["log_coeffs"] = log_coeffs_;
    j["max_tenor"] = max_tenor_;
    return j;
}

VarianceCurve VarianceCurve::from_json(const nlohmann::json& j) {
    std::optional<Date> anchor;
    if (j.contains("anchor") && !j.at("anchor").is_null())
        anchor = parse_date(j.at("anchor").get<std::string>());
    return VarianceCurve(j.at("knots").get<std::vector<double>>(),
                         j.at("log_coeffs").get<std::vector<double>>(), anchor,
                         j.value("max_tenor", 5.0));
}

double eval_curve(const ForwardCurve& curve, double tenor) { return curve(tenor); }

double forward_var_strike(const ForwardCurve& curve, double t1, double t2) {
    if (!(t2 > t1)) throw DomainError("degenerate variance window");
    return std::sqrt(curve.integral(t1, t2) / (t2 - t1));
}

double kernel_weighted_strike(const ForwardCurve& curve, double t1, double t2, KernelFn kernel) {
    if (!(t2 > t1)) throw DomainError("degenerate variance window");
    return std::sqrt(curve.kernel_integral(t1, t2, kernel.decay, 0.0) / (t2 - t1));
}

namespace {

/// Residuals sqrt(w_i)(K_i(c) - K_i) followed by sqrt(lambda) R exp(c).
struct CurveFitFunctor {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    Eigen::MatrixXd beta;    // targets x basis: int of basis over window / length
    Eigen::VectorXd strike;  // targets
    Eigen::VectorXd sqrt_w;  // targets
    Eigen::MatrixXd penalty; // sqrt(lambda) R, basis x basis

    [[nodiscard]] int inputs() const { return static_cast<int>(beta.cols()); }
    [[nodiscard]] int values() const { return static_cast<int>(beta.rows() + penalty.rows()); }

    int operator()(const Eigen::VectorXd& c, Eigen::VectorXd& fvec) const {
        const Eigen::VectorXd v = c.array().exp().matrix();
        const Eigen::VectorXd k2 = beta * v;
        const auto nt = beta.rows();
        for (Eigen::Index i = 0; i < nt; ++i) fvec(i) = sqrt_w(i) * (std::sqrt(k2(i)) - strike(i));
        fvec.tail(penalty.rows()) = penalty * v;
        return 0;
    }

    int df(const Eigen::VectorXd& c, Eigen::MatrixXd& fjac) const {
        const Eigen::VectorXd v = c.array().exp().matrix();
        const Eigen::VectorXd k2 = beta * v;
        const auto nt = beta.rows();
        for (Eigen::Index i = 0; i < nt; ++i) {
            const double scale = sqrt_w(i) / (2.0 * std::sqrt(k2(i)));
            fjac.row(i) = scale * beta.row(i).cwiseProduct(v.transpose());
        }
        fjac.bottomRows(penalty.rows()) = penalty * v.asDiagonal();
        return 0;
    }
};

}  // namespace

VarianceCurve fit_curve(std::span<const StrikeTarget> targets, const CurveFitOptions& options,
                        const std::optional<StrikeTarget>& vix_cash, const VarianceCurve* initial) {
    if (targets.size() < 2) throw ValidationError("curve fit needs at least two targets");
    std::vector<StrikeTarget> all(targets.begin(), targets.end());
    if (vix_cash) all.push_back(*vix_cash);

    const VarianceCurve probe = VarianceCurve::flat(1.0, options.knots, options.max_tenor);
    const auto nb = static_cast<Eigen::Index>(probe.basis_size());
    const auto nt = static_cast<Eigen::Index>(all.size());

    CurveFitFunctor fn;
    fn.beta.resize(nt, nb);
    fn.strike.resize(nt);
    fn.sqrt_w.resize(nt);
    double mean_k2 = 0.0;
    for (Eigen::Index i = 0; i < nt; ++i) {
        const auto& t = all[static_cast<std::size_t>(i)];
        if (!(t.window.end > t.window.start)) throw ValidationError("degenerate target window");
        if (!(t.strike > 0.0) || !(t.weight >= 0.0)) throw ValidationError("invalid strike target");
        const auto w = probe.basis_integrals(t.window.start, t.window.end);
        for (Eigen::Index j = 0; j < nb; ++j) fn.beta(i, j) = w[static_cast<std::size_t>(j)] / t.window.length();
        fn.strike(i) = t.strike;
        fn.sqrt_w(i) = std::sqrt(t.weight);
        mean_k2 += t.strike * t.strike / static_cast<double>(nt);
    }

    // Penalty square root from the eigen-decomposition of the curvature Gram matrix.
    const auto qv = probe.curvature_gram();
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> q(
        qv.data(), nb, nb);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    fn.penalty = std::sqrt(options.smoothness_weight) *
                 (ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose());

    Eigen::VectorXd c(nb);
    if (initial != nullptr && initial->basis_size() == static_cast<std::size_t>(nb)) {
        for (Eigen::Index j = 0; j < nb; ++j) c(j) = initial->log_coeffs()[static_cast<std::size_t>(j)];
    } else {
        c.setConstant(std::log(mean_k2));
    }

    Eigen::LevenbergMarquardt<CurveFitFunctor> lm(fn);
    lm.parameters.maxfev = options.max_iterations * static_cast<int>(nb + 1);
    lm.parameters.xtol = options.tolerance;
    lm.parameters.ftol = options.tolerance;
    const auto status = lm.minimize(c);
    std::vector<double> best(c.data(), c.data() + c.size());
    if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters ||
        status == Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation ||
        !c.allFinite())
        throw ConvergenceError("curve fit did not converge (status " + std::to_string(status) + ")",
                               std::move(best));
    return VarianceCurve(options.knots, std::move(best), std::nullopt, options.max_tenor);
}

}  // namespace vardyn
