#include "vardyn/montecarlo.hpp"

#include "vardyn/errors.hpp"
#include "vardyn/quadrature.hpp"

#include <boost/math/tools/roots.hpp>
#include <unsupported/Eigen/NonLinearOptimization>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

namespace vardyn {

namespace {

constexpr double kMaxLagYears = 40.0;
constexpr double kSegmentYears = 1.0 / 12.0;

std::size_t steps_for(double horizon, double dt) {
    const double n = horizon / dt;
    const double r = std::round(n);
    if (!(horizon >= 0.0) || std::abs(n - r) > 1e-6) {
        throw DomainError("horizon " + std::to_string(horizon) + " is not a multiple of the step");
    }
    return static_cast<std::size_t>(r);
}

// Residuals of the mixture moment equations for fixed weight w; x = (m1, log s1, log s2).
struct MixtureFunctor {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    double w, skew, kurt;

    int inputs() const { return 3; }
    int values() const { return 3; }

    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
        const double m1 = x[0];
        const double v1 = std::exp(2.0 * x[1]);
        const double v2 = std::exp(2.0 * x[2]);
        const double m2 = -w * m1 / (1.0 - w);
        auto mom = [](double m, double v, int order) {
            switch (order) {
                case 2: return m * m + v;
                case 3: return m * m * m + 3.0 * m * v;
                default: return m * m * m * m + 6.0 * m * m * v + 3.0 * v * v;
            }
        };
        f[0] = w * mom(m1, v1, 2) + (1.0 - w) * mom(m2, v2, 2) - 1.0;
        f[1] = w * mom(m1, v1, 3) + (1.0 - w) * mom(m2, v2, 3) - skew;
        f[2] = w * mom(m1, v1, 4) + (1.0 - w) * mom(m2, v2, 4) - (3.0 + kurt);
        return 0;
    }
};

// Delta-method standard error of f(mean of columns).
template <class F>
McEstimate delta_method(const Eigen::MatrixXd& samples, F f) {
    const auto n = samples.rows();
    McEstimate out;
    out.samples = static_cast<std::size_t>(n);
    const Eigen::VectorXd m = samples.colwise().mean();
    out.mean = f(m);
    if (n < 2) return out;
    const Eigen::MatrixXd centered = samples.rowwise() - m.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
    Eigen::VectorXd grad(m.size());
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        const double step = 1e-6 * std::max(std::abs(m[i]), std::sqrt(cov(i, i) / n) + 1e-300);
        Eigen::VectorXd up = m, dn = m;
        up[i] += step;
        dn[i] -= step;
        grad[i] = (f(up) - f(dn)) / (2.0 * step);
    }
    out.se = std::sqrt(std::max(grad.dot(cov * grad) / static_cast<double>(n), 0.0));
    return out;
}

// Collects one row of doubles per path.
class RowCollector : public PathObserver {
public:
    explicit RowCollector(std::size_t width) : width_(width) {}
    std::vector<double> rows;
    std::size_t width() const { return width_; }

protected:
    std::size_t width_;
};

template <class Obs>
Eigen::MatrixXd stack_rows(const std::vector<std::unique_ptr<Obs>>& parts, std::size_t width) {
    std::size_t total = 0;
    for (const auto& p : parts) total += p->rows.size() / width;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(width));
    Eigen::Index r = 0;
    for (const auto& p : parts)
        for (std::size_t i = 0; i < p->rows.size() / width; ++i, ++r)
            for (std::size_t c = 0; c < width; ++c) out(r, static_cast<Eigen::Index>(c)) = p->rows[i * width + c];
    return out;
}

}  // namespace

// ---------------------------------------------------------------- innovations

std::vector<MixtureComponent> fit_innovation_mixture(const InnovationLaw& law) {
    if (law.gaussian()) return {MixtureComponent{1.0, 0.0, 1.0}};
    const double skew = law.skew;
    const double kurt = law.excess_kurtosis;
    if (!(kurt > skew * skew - 2.0 + 1e-9)) {
        throw ValidationError("innovation law: excess kurtosis too low for the skew");
    }
    const double sgn = skew < 0.0 ? -1.0 : 1.0;
    for (double w : {0.1, 0.2, 0.05, 0.3, 0.02, 0.4, 0.5, 0.01}) {
        for (const auto& guess : {std::array<double, 3>{0.8, 0.2, -0.1}, std::array<double, 3>{1.5, 0.3, -0.2},
                                  std::array<double, 3>{0.3, 0.5, -0.3}, std::array<double, 3>{2.5, 0.0, -0.1}}) {
            MixtureFunctor fn{w, skew, kurt};
            Eigen::VectorXd x(3);
            x << sgn * guess[0], guess[1], guess[2];
            if (skew == 0.0) x[0] = 0.0;
            Eigen::NumericalDiff<MixtureFunctor> diff(fn);
            Eigen::HybridNonLinearSolver<Eigen::NumericalDiff<MixtureFunctor>> solver(diff);
            solver.parameters.xtol = 1e-14;
            solver.solveNumericalDiff(x);
            Eigen::VectorXd f(3);
            fn(x, f);
            if (!x.allFinite() || f.norm() > 1e-10) continue;
            const double m1 = x[0];
            return {MixtureComponent{w, m1, std::exp(x[1])},
                    MixtureComponent{1.0 - w, -w * m1 / (1.0 - w), std::exp(x[2])}};
        }
    }
    throw ConvergenceError("innovation law: no two-component mixture matches (skew, kurtosis)", {});
}

double mixture_quadratic_log_mgf(const std::vector<MixtureComponent>& mix, double a, double b) {
    // Z = m + s X: E exp(A Z^2 - B Z) = (1 - 2 A s^2)^{-1/2} exp(A m^2 - B m + (2 A m s - B s)^2 / (2 (1 - 2 A s^2)))
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> logs;
    logs.reserve(mix.size());
    for (const auto& c : mix) {
        const double s2 = c.sd * c.sd;
        const double den = 1.0 - 2.0 * a * s2;
        if (!(den > 0.0)) throw RegimeError("quadratic spot/vol coupling: moment generating function diverges");
        const double lin = 2.0 * a * c.mean * c.sd - b * c.sd;
        const double v = std::log(c.weight) - 0.5 * std::log(den) + a * c.mean * c.mean - b * c.mean +
                         lin * lin / (2.0 * den);
        logs.push_back(v);
        best = std::max(best, v);
    }
    double sum = 0.0;
    for (double v : logs) sum += std::exp(v - best);
    return best + std::log(sum) - a;
}

SpotVolCoupling SpotVolCoupling::consistent(std::vector<double> a, std::vector<double> b, const InnovationLaw& law,
                                            const Eigen::MatrixXd& rho) {
    const std::size_t n = a.size();
    if (b.size() != n || rho.rows() != static_cast<Eigen::Index>(n)) {
        throw ValidationError("coupling sizes disagree");
    }
    const double kurt = law.excess_kurtosis;
    const double skew = law.skew;
    auto f_cov = [&](std::size_t i, std::size_t j) {
        return (2.0 + kurt) * a[i] * a[j] + b[i] * b[j] - skew * (a[i] * b[j] + a[j] * b[i]);
    };
    SpotVolCoupling c;
    c.gamma.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double g2 = 1.0 - f_cov(i, i);
        if (g2 < -1e-12) throw RegimeError("coupling: spot-driven part has variance above one");
        c.gamma[i] = std::sqrt(std::max(g2, 0.0));
    }
    c.u_corr = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            if (c.gamma[i] < 1e-12 || c.gamma[j] < 1e-12) continue;
            const double v = (rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - f_cov(i, j)) /
                             (c.gamma[i] * c.gamma[j]);
            c.u_corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            c.u_corr(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.u_corr);
    if (es.eigenvalues().minCoeff() < -1e-10) {
        throw RegimeError("coupling: residual correlation not positive semi-definite");
    }
    c.a = std::move(a);
    c.b = std::move(b);
    return c;
}

Eigen::MatrixXd SpotVolCoupling::factor_correlation(const InnovationLaw& law) const {
    const auto n = static_cast<Eigen::Index>(a.size());
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto ui = static_cast<std::size_t>(i);
            const auto uj = static_cast<std::size_t>(j);
            out(i, j) = (2.0 + law.excess_kurtosis) * a[ui] * a[uj] + b[ui] * b[uj] -
                        law.skew * (a[ui] * b[uj] + a[uj] * b[ui]) + gamma[ui] * gamma[uj] * u_corr(i, j);
        }
    return out;
}

// ---------------------------------------------------------------- path state

PathState::PathState(const Simulator* sim) : sim_(sim) {
    const std::size_t n = sim->params().n();
    y_.assign(n, 0.0);
    cov_.assign(n * n, 0.0);
    dwbar_.assign(n, 0.0);
    dw_.assign(n, 0.0);
}

double PathState::log_compensator(double u) const {
    const double tau = u - t_;
    const auto& th = sim_->theta_;
    const auto& k = sim_->params_.k;
    const std::size_t n = th.size();
    if (sim_->nonlinear_table_) return sim_->nonlinear_compensator(tau, step_);
    double c = 0.0;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) {
            const double om = th[a] * th[b] * sim_->omega_rho_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
            c += om * std::exp(-(k[a] + k[b]) * tau) * cov_[a * n + b];
        }
    return 0.5 * c;
}

double PathState::xi(double u) const {
    const double tau = std::max(u - t_, 0.0);
    const double base = (*sim_->curve0_)(u);
    const auto& th = sim_->theta_;
    const auto& k = sim_->params_.k;
    double x = 0.0;
    for (std::size_t a = 0; a < th.size(); ++a) x += th[a] * std::exp(-k[a] * tau) * y_[a];
    if (sim_->config_.scheme == CurveScheme::linear_perturbation) return base * std::max(1.0 + x, 1e-12);
    return base * std::exp(x - log_compensator(u));
}

double PathState::kernel_integral(double a, double b, double decay, double origin) const {
    if (!(b >= a) || a < 0.0) throw DomainError("path kernel integral: need 0 <= a <= b");
    const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / kSegmentYears - 1e-9)));
    const double len = (b - a) / pieces;
    double total = 0.0;
    for (int p = 0; p < pieces; ++p) {
        const double lo = a + p * len;
        total += gauss_legendre16(
            [&](double tau) { return xi(t_ + tau) * std::exp(-decay * (tau - origin)); }, lo, lo + len);
    }
    return total;
}

// ---------------------------------------------------------------- simulator

Simulator::Simulator(const ForwardCurve& curve0, ModelParams params, SimConfig config)
    : curve0_(&curve0), params_(std::move(params)), config_(std::move(config)) {
    params_.validate();
    if (!(config_.dt > 0.0)) throw ValidationError("simulation step must be positive");
    if (config_.paths == 0) throw ValidationError("simulation needs at least one path");
    if (!(config_.lambda_scale >= 0.0)) throw ValidationError("lambda_scale must be non-negative");
    const std::size_t n = params_.n();
    theta_.resize(n);
    for (std::size_t a = 0; a < n; ++a) theta_[a] = config_.lambda_scale * params_.theta[a];
    chol_ = params_.cholesky();
    const Eigen::Map<const Eigen::VectorXd> mu(params_.mu.data(), static_cast<Eigen::Index>(n));
    drift_step_ = std::sqrt(config_.dt) * chol_ * mu;
    mixture_ = fit_innovation_mixture(config_.innovation);
    symmetric_ = config_.innovation.skew == 0.0 && mixture_.size() == 1;
    omega_rho_ = params_.rho;
    if (config_.coupling) {
        const auto& c = *config_.coupling;
        if (c.a.size() != n || c.b.size() != n || c.gamma.size() != n) throw ValidationError("coupling sizes disagree");
        Eigen::LLT<Eigen::MatrixXd> llt(floor_correlation(c.u_corr));
        if (llt.info() != Eigen::Success) throw NumericalError("Cholesky of the residual correlation failed");
        u_chol_ = llt.matrixL();
        omega_rho_ = c.factor_correlation(config_.innovation);
        for (std::size_t a = 0; a < n; ++a) symmetric_ = symmetric_ && c.a[a] == 0.0 && c.b[a] == 0.0;
    }
    // Exact per-lag compensator when the shocks are i.i.d. but not Gaussian.
    nonlinear_table_ = config_.coupling && !config_.vol_of_vol && config_.scheme == CurveScheme::exponential;
    if (nonlinear_table_) {
        const auto& c = *config_.coupling;
        const auto lags = static_cast<std::size_t>(kMaxLagYears / config_.dt) + 4;
        const double sq = std::sqrt(config_.dt);
        const Eigen::MatrixXd ucov = u_chol_ * u_chol_.transpose();
        psi_prefix_.assign(lags + 1, 0.0);
        Eigen::VectorXd cg(static_cast<Eigen::Index>(n));
        for (std::size_t l = 0; l < lags; ++l) {
            const double lag = static_cast<double>(l) * config_.dt;
            double a_sum = 0.0, b_sum = 0.0;
            for (std::size_t a = 0; a < n; ++a) {
                const double w = theta_[a] * std::exp(-params_.k[a] * lag);
                a_sum += w * c.a[a];
                b_sum += w * c.b[a];
                cg[static_cast<Eigen::Index>(a)] = w * c.gamma[a];
            }
            const double psi = 0.5 * config_.dt * cg.dot(ucov * cg) + mixture_quadratic_log_mgf(mixture_, sq * a_sum, sq * b_sum);
            psi_prefix_[l + 1] = psi_prefix_[l] + psi;
        }
    }
}

double Simulator::nonlinear_compensator(double tenor, std::size_t steps_done) const {
    // sum_{m=1}^{N} psi(tenor + m dt), psi linear between grid lags
    const double pos = std::max(tenor, 0.0) / config_.dt;
    const auto i = static_cast<std::size_t>(pos);
    const double f = pos - static_cast<double>(i);
    const std::size_t top = i + steps_done + 2;
    if (top >= psi_prefix_.size()) throw DomainError("simulation horizon beyond the compensator table");
    const double lo = psi_prefix_[i + steps_done + 1] - psi_prefix_[i + 1];
    const double hi = psi_prefix_[i + steps_done + 2] - psi_prefix_[i + 2];
    return (1.0 - f) * lo + f * hi;
}

std::size_t Simulator::chunk_count() const {
    const std::size_t per = std::max<std::size_t>(2, config_.chunk_paths + (config_.chunk_paths % 2));
    return (config_.paths + per - 1) / per;
}

void Simulator::run(std::size_t steps,
                    const std::function<std::unique_ptr<PathObserver>(std::size_t)>& make_observer,
                    const std::function<void(std::size_t, std::unique_ptr<PathObserver>)>& collect) const {
    for (std::size_t c = 0; c < chunk_count(); ++c) {
        std::unique_ptr<PathObserver> obs = make_observer(c);
        run_chunk(c, steps, *obs);
        collect(c, std::move(obs));
    }
}

void Simulator::draw_step(std::mt19937_64& rng, bool flip, std::vector<double>& eps, double& z,
                          std::vector<double>& dwbar) const {
    std::normal_distribution<double> normal;
    const std::size_t n = params_.n();
    if (mixture_.size() == 1) {
        z = normal(rng);
    } else {
        std::uniform_real_distribution<double> unif;
        const double u = unif(rng);
        double acc = 0.0;
        std::size_t pick = mixture_.size() - 1;
        for (std::size_t i = 0; i < mixture_.size(); ++i) {
            acc += mixture_[i].weight;
            if (u < acc) {
                pick = i;
                break;
            }
        }
        z = mixture_[pick].mean + mixture_[pick].sd * normal(rng);
    }
    for (std::size_t a = 0; a < n; ++a) eps[a] = normal(rng);
    if (flip) {
        z = -z;
        for (double& e : eps) e = -e;
    }
    if (config_.coupling) {
        const auto& c = *config_.coupling;
        for (std::size_t a = 0; a < n; ++a) {
            double u = 0.0;
            for (std::size_t b = 0; b <= a; ++b) u += u_chol_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * eps[b];
            dwbar[a] = c.a[a] * (z * z - 1.0) - c.b[a] * z + c.gamma[a] * u;
        }
    } else {
        for (std::size_t a = 0; a < n; ++a) {
            double u = 0.0;
            for (std::size_t b = 0; b <= a; ++b) u += chol_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * eps[b];
            dwbar[a] = u;
        }
    }
}

void Simulator::run_chunk(std::size_t chunk, std::size_t steps, PathObserver& obs) const {
    const std::size_t per = std::max<std::size_t>(2, config_.chunk_paths + (config_.chunk_paths % 2));
    const std::size_t first = chunk * per;
    const std::size_t last = std::min(config_.paths, first + per);
    const std::size_t n = params_.n();
    const bool antithetic = config_.antithetic && symmetric_;
    const double dt = config_.dt;
    const double sq = std::sqrt(dt);
    std::vector<double> decay(n);
    for (std::size_t a = 0; a < n; ++a) decay[a] = std::exp(-params_.k[a] * dt);
    std::vector<double> pair_decay(n * n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) pair_decay[a * n + b] = std::exp(-(params_.k[a] + params_.k[b]) * dt);

    const LambdaProcess lam = config_.vol_of_vol.value_or(LambdaProcess{});
    const double lam_decay = std::exp(-lam.k * dt);
    const double lam_sd = lam.sigma * std::sqrt(-std::expm1(-2.0 * lam.k * dt) / (2.0 * lam.k));
    const double log_lam_inf = std::log(lam.lambda_inf);

    std::vector<double> eps(n);
    PathState s(this);
    const auto seed_lo = static_cast<std::uint32_t>(config_.seed & 0xffffffffu);
    const auto seed_hi = static_cast<std::uint32_t>(config_.seed >> 32);
    for (std::size_t path = first; path < last; ++path) {
        const std::size_t stream = antithetic ? path / 2 : path;
        const bool flip = antithetic && (path % 2 == 1);
        std::seed_seq seq{seed_lo, seed_hi, static_cast<std::uint32_t>(stream & 0xffffffffu),
                          static_cast<std::uint32_t>(stream >> 32)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> normal;

        s.t_ = 0.0;
        s.step_ = 0;
        s.path_ = path;
        s.spot_ = config_.spot0;
        s.ret_ = 0.0;
        s.dz_ = 0.0;
        s.lambda_ = config_.vol_of_vol ? lam.lambda0 : 1.0;
        std::fill(s.y_.begin(), s.y_.end(), 0.0);
        std::fill(s.cov_.begin(), s.cov_.end(), 0.0);
        std::fill(s.dwbar_.begin(), s.dwbar_.end(), 0.0);
        std::fill(s.dw_.begin(), s.dw_.end(), 0.0);
        obs.on_path_start(s);

        for (std::size_t step = 0; step < steps; ++step) {
            const double spot_var = s.spot_variance();
            double z = 0.0;
            draw_step(rng, flip, eps, z, s.dwbar_);
            const double ratio = config_.vol_of_vol ? s.lambda_ / lam.lambda_inf : 1.0;
            const double scale = std::sqrt(ratio);
            for (std::size_t a = 0; a < n; ++a) {
                s.dw_[a] = sq * scale * s.dwbar_[a] + (config_.real_measure_drift ? drift_step_[static_cast<Eigen::Index>(a)] : 0.0);
            }
            s.dz_ = z;
            s.ret_ = std::max(std::sqrt(std::max(spot_var, 0.0) * dt) * z, -0.99);
            s.spot_ *= 1.0 + s.ret_;
            for (std::size_t a = 0; a < n; ++a) s.y_[a] = decay[a] * (s.y_[a] + s.dw_[a]);
            if (!nonlinear_table_) {
                for (std::size_t i = 0; i < n * n; ++i) s.cov_[i] = pair_decay[i] * (s.cov_[i] + dt * ratio);
            }
            if (config_.vol_of_vol) {
                double e = normal(rng);
                if (flip) e = -e;
                const double x = log_lam_inf + (std::log(s.lambda_) - log_lam_inf) * lam_decay + lam_sd * e;
                s.lambda_ = std::exp(x);
            }
            s.t_ = static_cast<double>(step + 1) * dt;
            s.step_ = step + 1;
            obs.on_step(s);
        }
        obs.on_path_end(s);
    }
}

// ---------------------------------------------------------------- statistics helpers

void RunningStat::add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
}

void RunningStat::merge(const RunningStat& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
        *this = o;
        return;
    }
    const double total = static_cast<double>(n_ + o.n_);
    const double d = o.mean_ - mean_;
    mean_ += d * static_cast<double>(o.n_) / total;
    m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / total;
    n_ += o.n_;
}

McEstimate RunningStat::estimate() const {
    return {mean_, n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0, n_};
}

// ---------------------------------------------------------------- estimators

namespace {

struct TerminalObserver : PathObserver {
    std::function<double(const PathState&)> fn;
    RunningStat stat;
    void on_path_end(const PathState& s) override { stat.add(fn(s)); }
};

McEstimate run_terminal(const Simulator& sim, std::size_t steps, std::function<double(const PathState&)> fn) {
    auto parts = sim.run_collect<TerminalObserver>(steps, [&](std::size_t) {
        auto o = std::make_unique<TerminalObserver>();
        o->fn = fn;
        return o;
    });
    RunningStat total;
    for (const auto& p : parts) total.merge(p->stat);
    return total.estimate();
}

ModelParams effective_params(const Simulator& sim) {
    return sim.params().scaled(sim.config().lambda_scale);
}

}  // namespace

McEstimate mc_vix_future(const Simulator& sim, double t1, double t2) {
    if (!(t2 > t1)) throw DomainError("mc_vix_future: need t1 < t2");
    const std::size_t steps = steps_for(t1, sim.config().dt);
    const double window = t2 - t1;
    return run_terminal(sim, steps, [window](const PathState& s) {
        return std::sqrt(s.kernel_integral(0.0, window, 0.0) / window);
    });
}

std::vector<FutureVolEstimate> mc_future_vols(const Simulator& sim, const std::vector<double>& tau1, double window) {
    const double dt = sim.config().dt;
    const ModelParams p = effective_params(sim);
    const std::size_t n = p.n();
    std::vector<double> v0(tau1.size());
    for (std::size_t i = 0; i < tau1.size(); ++i) {
        if (!(tau1[i] > dt)) throw DomainError("mc_future_vols: expiry must be beyond one step");
        v0[i] = price_vix_future(sim.initial_curve(), p, tau1[i], tau1[i] + window).price;
    }
    const std::size_t width = tau1.size() + n;
    struct Obs : RowCollector {
        using RowCollector::RowCollector;
        const std::vector<double>* tau1 = nullptr;
        const std::vector<double>* v0 = nullptr;
        const ModelParams* p = nullptr;
        double dt = 0.0, window = 0.0;
        void on_path_end(const PathState& s) override {
            for (std::size_t i = 0; i < tau1->size(); ++i) {
                const double t = (*tau1)[i] - dt;
                const double v1 = price_vix_future(s.curve(), *p, t, t + window).price;
                rows.push_back(std::log(v1 / (*v0)[i]));
            }
            for (double w : s.last_dw()) rows.push_back(w);
        }
    };
    auto parts = sim.run_collect<Obs>(1, [&](std::size_t) {
        auto o = std::make_unique<Obs>(width);
        o->tau1 = &tau1;
        o->v0 = &v0;
        o->p = &p;
        o->dt = dt;
        o->window = window;
        return o;
    });
    const Eigen::MatrixXd data = stack_rows(parts, width);
    const auto rows = data.rows();
    const Eigen::MatrixXd dw = data.rightCols(static_cast<Eigen::Index>(n)) / std::sqrt(dt);
    Eigen::MatrixXd design(rows, static_cast<Eigen::Index>(n) + 1);
    design.col(0).setOnes();
    design.rightCols(static_cast<Eigen::Index>(n)) = dw;
    const auto qr = design.colPivHouseholderQr();

    std::vector<FutureVolEstimate> out;
    for (std::size_t i = 0; i < tau1.size(); ++i) {
        const Eigen::VectorXd x = data.col(static_cast<Eigen::Index>(i)) / std::sqrt(dt);
        Eigen::MatrixXd mom(rows, 2);
        mom.col(0) = x;
        mom.col(1) = x.array().square();
        FutureVolEstimate e;
        e.tau1 = tau1[i];
        e.vol = delta_method(mom, [](const Eigen::VectorXd& m) { return std::sqrt(std::max(m[1] - m[0] * m[0], 0.0)); });
        const Eigen::VectorXd beta = qr.solve(x);
        for (std::size_t a = 0; a < n; ++a) e.loadings.push_back(beta[static_cast<Eigen::Index>(a) + 1]);
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<McEstimate> mc_curve_martingale(const Simulator& sim, double horizon, const std::vector<double>& u) {
    const std::size_t steps = steps_for(horizon, sim.config().dt);
    for (double x : u)
        if (x < horizon) throw DomainError("mc_curve_martingale: tenor before the horizon");
    struct Obs : PathObserver {
        const std::vector<double>* u = nullptr;
        const ForwardCurve* c0 = nullptr;
        std::vector<RunningStat> stats;
        void on_path_end(const PathState& s) override {
            for (std::size_t i = 0; i < u->size(); ++i) stats[i].add(s.xi((*u)[i]) / (*c0)((*u)[i]));
        }
    };
    auto parts = sim.run_collect<Obs>(steps, [&](std::size_t) {
        auto o = std::make_unique<Obs>();
        o->u = &u;
        o->c0 = &sim.initial_curve();
        o->stats.resize(u.size());
        return o;
    });
    std::vector<McEstimate> out;
    for (std::size_t i = 0; i < u.size(); ++i) {
        RunningStat t;
        for (const auto& p : parts) t.merge(p->stats[i]);
        out.push_back(t.estimate());
    }
    return out;
}

McEstimate mc_realized_variance(const Simulator& sim, double horizon) {
    const std::size_t steps = steps_for(horizon, sim.config().dt);
    if (steps == 0) throw DomainError("mc_realized_variance: empty horizon");
    struct Obs : PathObserver {
        double acc = 0.0, horizon = 0.0;
        RunningStat stat;
        void on_path_start(const PathState&) override { acc = 0.0; }
        void on_step(const PathState& s) override { acc += s.last_return() * s.last_return(); }
        void on_path_end(const PathState&) override { stat.add(acc / horizon); }
    };
    auto parts = sim.run_collect<Obs>(steps, [&](std::size_t) {
        auto o = std::make_unique<Obs>();
        o->horizon = horizon;
        return o;
    });
    RunningStat total;
    for (const auto& p : parts) total.merge(p->stat);
    return total.estimate();
}

std::vector<LagCorrelation> mc_lag_correlations(const Simulator& sim, const std::vector<std::size_t>& lags) {
    if (lags.empty()) return {};
    const std::size_t max_lag = *std::max_element(lags.begin(), lags.end());
    const std::size_t width = 1 + lags.size();
    struct Obs : RowCollector {
        using RowCollector::RowCollector;
        const std::vector<std::size_t>* lags = nullptr;
        std::vector<double> rets;
        void on_path_start(const PathState&) override { rets.clear(); }
        void on_step(const PathState& s) override { rets.push_back(s.last_return()); }
        void on_path_end(const PathState&) override {
            rows.push_back(rets[0]);
            for (std::size_t l : *lags) rows.push_back(rets[l]);
        }
    };
    auto parts = sim.run_collect<Obs>(max_lag + 1, [&](std::size_t) {
        auto o = std::make_unique<Obs>(width);
        o->lags = &lags;
        return o;
    });
    const Eigen::MatrixXd data = stack_rows(parts, width);
    std::vector<LagCorrelation> out;
    for (std::size_t i = 0; i < lags.size(); ++i) {
        const Eigen::ArrayXd r0 = data.col(0).array();
        const Eigen::ArrayXd rl = data.col(static_cast<Eigen::Index>(i) + 1).array();
        Eigen::MatrixXd lev(data.rows(), 3);
        lev.col(0) = (r0 * rl.square()).matrix();
        lev.col(1) = r0.square().matrix();
        lev.col(2) = rl.square().matrix();
        Eigen::MatrixXd clu(data.rows(), 3);
        clu.col(0) = (r0.square() * rl.square()).matrix();
        clu.col(1) = lev.col(1);
        clu.col(2) = lev.col(2);
        LagCorrelation c;
        c.lag = lags[i];
        c.leverage = delta_method(lev, [](const Eigen::VectorXd& m) { return m[0] / (std::sqrt(m[1]) * m[2]); });
        c.clustering = delta_method(clu, [](const Eigen::VectorXd& m) { return m[0] / (m[1] * m[2]) - 1.0; });
        out.push_back(c);
    }
    return out;
}

std::vector<double> mc_terminal_log_returns(const Simulator& sim, double horizon) {
    const std::size_t steps = steps_for(horizon, sim.config().dt);
    struct Obs : PathObserver {
        std::vector<double> out;
        double s0 = 1.0;
        void on_path_end(const PathState& s) override { out.push_back(std::log(s.spot() / s0)); }
    };
    auto parts = sim.run_collect<Obs>(steps, [&](std::size_t) {
        auto o = std::make_unique<Obs>();
        o->s0 = sim.config().spot0;
        return o;
    });
    std::vector<double> out;
    out.reserve(sim.config().paths);
    for (const auto& p : parts) out.insert(out.end(), p->out.begin(), p->out.end());
    return out;
}

McEstimate mc_return_skewness(const Simulator& sim, double horizon) {
    const std::vector<double> x = mc_terminal_log_returns(sim, horizon);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(x.size()), 3);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        m(r, 0) = x[i];
        m(r, 1) = x[i] * x[i];
        m(r, 2) = x[i] * x[i] * x[i];
    }
    return delta_method(m, [](const Eigen::VectorXd& v) {
        const double var = v[1] - v[0] * v[0];
        return (v[2] - 3.0 * v[0] * v[1] + 2.0 * v[0] * v[0] * v[0]) / std::pow(var, 1.5);
    });
}

double bs_call(double spot, double strike, double vol, double maturity) {
    if (!(vol > 0.0) || !(maturity > 0.0)) return std::max(spot - strike, 0.0);
    const double sd = vol * std::sqrt(maturity);
    const double d1 = std::log(spot / strike) / sd + 0.5 * sd;
    auto ncdf = [](double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); };
    return spot * ncdf(d1) - strike * ncdf(d1 - sd);
}

double bs_vega(double spot, double strike, double vol, double maturity) {
    const double sd = vol * std::sqrt(maturity);
    const double d1 = std::log(spot / strike) / sd + 0.5 * sd;
    return spot * std::sqrt(maturity) * std::exp(-0.5 * d1 * d1) / std::sqrt(2.0 * std::numbers::pi);
}

double implied_vol(double price, double spot, double strike, double maturity) {
    const double intrinsic = std::max(spot - strike, 0.0);
    if (!(price > intrinsic) || !(price < spot)) return std::numeric_limits<double>::quiet_NaN();
    auto f = [&](double v) { return bs_call(spot, strike, v, maturity) - price; };
    double lo = 1e-6, hi = 1.0;
    while (f(hi) < 0.0) {
        hi *= 2.0;
        if (hi > 1e3) return std::numeric_limits<double>::quiet_NaN();
    }
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(
        f, lo, hi, [](double a, double b) { return std::abs(b - a) < 1e-12; }, iters);
    return 0.5 * (r.first + r.second);
}

std::vector<SmilePoint> mc_smile(const Simulator& sim, double maturity, const std::vector<double>& moneyness) {
    const std::vector<double> x = mc_terminal_log_returns(sim, maturity);
    const double s0 = sim.config().spot0;
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::ArrayXd st(n);
    for (Eigen::Index i = 0; i < n; ++i) st[i] = s0 * std::exp(x[static_cast<std::size_t>(i)]);
    const Eigen::ArrayXd cv = st - s0;  // mean zero under the pricing measure
    const double cv_var = (cv - cv.mean()).square().sum();
    std::vector<SmilePoint> out;
    for (double m : moneyness) {
        const double strike = s0 * (1.0 + m);
        const Eigen::ArrayXd pay = (st - strike).max(0.0);
        const double beta = ((pay - pay.mean()) * (cv - cv.mean())).sum() / cv_var;
        const Eigen::ArrayXd adj = pay - beta * cv;
        const double price = adj.mean();
        const double se = std::sqrt((adj - price).square().sum() / static_cast<double>(n - 1) / static_cast<double>(n));
        SmilePoint p;
        p.moneyness = m;
        p.implied_vol.mean = implied_vol(price, s0, strike, maturity);
        p.implied_vol.se = se / bs_vega(s0, strike, p.implied_vol.mean, maturity);
        p.implied_vol.samples = static_cast<std::size_t>(n);
        out.push_back(p);
    }
    return out;
}

McEstimate mc_varswap_variance(const Simulator& sim, double maturity) {
    const std::size_t steps = steps_for(maturity, sim.config().dt);
    if (steps == 0) throw DomainError("mc_varswap_variance: empty maturity");
    struct Obs : PathObserver {
        double maturity = 0.0, accrued = 0.0, mark = 0.0, mark0 = 0.0, sum = 0.0;
        RunningStat stat;
        double value(const PathState& s) const {
            const double rest = std::max(maturity - s.time(), 0.0);
            return (accrued + (rest > 1e-12 ? s.kernel_integral(0.0, rest, 0.0) : 0.0)) / maturity;
        }
        void on_path_start(const PathState& s) override {
            accrued = 0.0;
            sum = 0.0;
            mark0 = mark = value(s);
        }
        void on_step(const PathState& s) override {
            accrued += s.last_return() * s.last_return();
            const double next = value(s);
            sum += (next - mark) * (next - mark);
            mark = next;
        }
        void on_path_end(const PathState&) override { stat.add(sum / (maturity * mark0 * mark0)); }
    };
    auto parts = sim.run_collect<Obs>(steps, [&](std::size_t) {
        auto o = std::make_unique<Obs>();
        o->maturity = maturity;
        return o;
    });
    RunningStat total;
    for (const auto& p : parts) total.merge(p->stat);
    return total.estimate();
}

McEstimate mc_future_total_variance(const Simulator& sim, double expiry, double window) {
    const std::size_t steps = steps_for(expiry, sim.config().dt);
    if (steps == 0) throw DomainError("mc_future_total_variance: empty life");
    const ModelParams p = effective_params(sim);
    struct Obs : PathObserver {
        const ModelParams* p = nullptr;
        double expiry = 0.0, window = 0.0, last = 0.0, sum = 0.0, dt = 0.0;
        std::size_t steps = 0;
        RunningStat stat;
        double log_price(const PathState& s) const {
            const double tau = std::max(expiry - s.time(), 0.0);
            if (tau < 1e-12) return 0.5 * std::log(s.kernel_integral(0.0, window, 0.0) / window);
            return std::log(price_vix_future(s.curve(), *p, tau, tau + window).price);
        }
        void on_path_start(const PathState& s) override {
            sum = 0.0;
            last = log_price(s);
        }
        void on_step(const PathState& s) override {
            const double now = log_price(s);
            sum += (now - last) * (now - last);
            last = now;
        }
        void on_path_end(const PathState&) override { stat.add(sum / (static_cast<double>(steps) * dt)); }
    };
    auto parts = sim.run_collect<Obs>(steps, [&](std::size_t) {
        auto o = std::make_unique<Obs>();
        o->p = &p;
        o->expiry = expiry;
        o->window = window;
        o->dt = sim.config().dt;
        o->steps = steps;
        return o;
    });
    RunningStat total;
    for (const auto& q : parts) total.merge(q->stat);
    return total.estimate();
}

void dump_paths(const Simulator& sim, std::size_t steps, const std::vector<double>& tenor_grid,
                const std::filesystem::path& out) {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw ValidationError("cannot write " + out.string());
    auto put = [&](auto v) { f.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    put(static_cast<std::uint64_t>(sim.config().paths));
    put(static_cast<std::uint64_t>(steps));
    put(static_cast<std::uint64_t>(tenor_grid.size()));
    for (double x : tenor_grid) put(x);
    struct Obs : PathObserver {
        std::ofstream* f = nullptr;
        const std::vector<double>* grid = nullptr;
        void write(const PathState& s) {
            auto put = [&](double v) { f->write(reinterpret_cast<const char*>(&v), sizeof(v)); };
            put(s.spot());
            for (double u : *grid) put(s.xi(s.time() + u));
        }
        void on_step(const PathState& s) override { write(s); }
    };
    sim.run(
        steps,
        [&](std::size_t) -> std::unique_ptr<PathObserver> {
            auto o = std::make_unique<Obs>();
            o->f = &f;
            o->grid = &tenor_grid;
            return o;
        },
        [](std::size_t, std::unique_ptr<PathObserver>) {});
    if (!f) throw NumericalError("write failed for " + out.string());
}

}  // namespace vardyn
