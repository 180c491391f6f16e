#include "vardyn/calibration.hpp"

#include "vardyn/errors.hpp"

#include <gsl/gsl_multimin.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>

namespace vardyn {

namespace {

double tenor_of(const BusinessCalendar& cal, Date from, Date to) {
    return cal.business_days_between(from, to) / kTradingDaysPerYear;
}

// Sufficient statistics of one day for fixed loadings: G = M' D^-1 M, h = M' D^-1 y,
// and the parameter-free part of the log-density.
struct DayStats {
    Eigen::MatrixXd g;
    Eigen::VectorXd h;
    double constant = 0.0;
    double dt = 0.0;
};

DayStats day_stats(const DayWorkspace& ws) {
    DayStats s;
    const Eigen::VectorXd dinv = ws.noise_var.cwiseInverse();
    s.g = ws.loadings.transpose() * dinv.asDiagonal() * ws.loadings;
    s.h = ws.loadings.transpose() * dinv.cwiseProduct(ws.y);
    const double m = static_cast<double>(ws.y.size());
    s.constant = -0.5 * m * std::log(2.0 * std::numbers::pi) - 0.5 * ws.noise_var.array().log().sum() -
                 0.5 * ws.y.dot(dinv.cwiseProduct(ws.y));
    s.dt = ws.dt;
    return s;
}

// Correlation matrix from unconstrained parameters (atanh of the lower triangle, row-major).
std::optional<Eigen::MatrixXd> corr_from(const double* z, std::size_t n) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::size_t p = 0;
    for (std::size_t a = 1; a < n; ++a)
        for (std::size_t b = 0; b < a; ++b, ++p) {
            const double v = std::tanh(z[p]);
            r(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
            r(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = v;
        }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
    if (es.eigenvalues().minCoeff() < 1e-8) return std::nullopt;
    return r;
}

struct Objective {
    const std::vector<DayStats>* days = nullptr;
    std::vector<double> k;
    std::size_t n = 0;

    // Profiled log-likelihood; fills params (with the optimal mu). NaN when infeasible.
    double loglik(const double* x, ModelParams* out) const {
        const auto ni = static_cast<Eigen::Index>(n);
        auto rho = corr_from(x + n, n);
        if (!rho) return std::numeric_limits<double>::quiet_NaN();
        Eigen::VectorXd theta(ni);
        for (std::size_t a = 0; a < n; ++a) theta[static_cast<Eigen::Index>(a)] = std::exp(x[a]);
        if (!theta.allFinite() || theta.maxCoeff() > 50.0) return std::numeric_limits<double>::quiet_NaN();
        Eigen::LLT<Eigen::MatrixXd> chol(*rho);
        const Eigen::MatrixXd s = theta.asDiagonal() * Eigen::MatrixXd(chol.matrixL());

        double total = 0.0;
        Eigen::MatrixXd sum_ainv = Eigen::MatrixXd::Zero(ni, ni);
        Eigen::VectorXd sum_ainv_c = Eigen::VectorXd::Zero(ni);
        double sum_quad = 0.0;
        for (const auto& d : *days) {
            const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(ni, ni) + d.dt * s.transpose() * d.g * s;
            Eigen::LLT<Eigen::MatrixXd> llt(a);
            const Eigen::MatrixXd l = llt.matrixL();
            const double logdet = 2.0 * l.diagonal().array().log().sum();
            const Eigen::VectorXd c = std::sqrt(d.dt) * s.transpose() * d.h;
            const Eigen::MatrixXd ainv = llt.solve(Eigen::MatrixXd::Identity(ni, ni));
            const Eigen::VectorXd ainv_c = ainv * c;
            total += d.constant - 0.5 * logdet;
            sum_ainv += ainv;
            sum_ainv_c += ainv_c;
            sum_quad += c.dot(ainv_c);
        }
        const double nd = static_cast<double>(days->size());
        const Eigen::MatrixXd curv = nd * Eigen::MatrixXd::Identity(ni, ni) - sum_ainv;
        const Eigen::VectorXd mu = curv.llt().solve(sum_ainv_c);
        total += 0.5 * (mu.dot(sum_ainv * mu) + 2.0 * mu.dot(sum_ainv_c) + sum_quad) - 0.5 * nd * mu.squaredNorm();
        if (out != nullptr) {
            out->k = k;
            out->theta.assign(theta.data(), theta.data() + ni);
            out->rho = *rho;
            out->mu.assign(mu.data(), mu.data() + ni);
        }
        return total;
    }
};

double gsl_objective(const gsl_vector* v, void* p) {
    const auto* obj = static_cast<const Objective*>(p);
    const double ll = obj->loglik(v->data, nullptr);
    return std::isfinite(ll) ? -ll : 1e300;
}

struct SimplexResult {
    std::vector<double> x;
    double value = 1e300;
};

SimplexResult run_simplex(const Objective& obj, const std::vector<double>& x0, double step) {
    const std::size_t dim = x0.size();
    gsl_multimin_function f{&gsl_objective, dim, const_cast<Objective*>(&obj)};
    gsl_vector* x = gsl_vector_alloc(dim);
    gsl_vector* ss = gsl_vector_alloc(dim);
    for (std::size_t i = 0; i < dim; ++i) gsl_vector_set(x, i, x0[i]);
    gsl_vector_set_all(ss, step);
    gsl_multimin_fminimizer* m = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim);
    gsl_multimin_fminimizer_set(m, &f, x, ss);
    for (int it = 0; it < 2000; ++it) {
        if (gsl_multimin_fminimizer_iterate(m) != GSL_SUCCESS) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m), 1e-8) == GSL_SUCCESS) break;
    }
    SimplexResult r;
    r.x.assign(m->x->data, m->x->data + dim);
    r.value = m->fval;
    gsl_multimin_fminimizer_free(m);
    gsl_vector_free(x);
    gsl_vector_free(ss);
    return r;
}

std::vector<double> encode(const ModelParams& p) {
    std::vector<double> x;
    for (double t : p.theta) x.push_back(std::log(std::max(t, 1e-4)));
    for (std::size_t a = 1; a < p.n(); ++a)
        for (std::size_t b = 0; b < a; ++b)
            x.push_back(std::atanh(std::clamp(p.rho(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)), -0.99, 0.99)));
    return x;
}

ModelParams default_guess(const std::vector<double>& k) {
    ModelParams p;
    p.k = k;
    const auto n = static_cast<Eigen::Index>(k.size());
    p.theta.assign(k.size(), 1.0);
    p.rho = Eigen::MatrixXd::Constant(n, n, 0.3);
    p.rho.diagonal().setOnes();
    p.mu.assign(k.size(), 0.0);
    return p;
}

std::vector<std::vector<double>> grid_points(const CalibrationConfig& cfg) {
    std::vector<std::vector<double>> out{{}};
    for (std::size_t a = 0; a < cfg.factors; ++a) {
        std::vector<std::vector<double>> next;
        for (const auto& prefix : out)
            for (double k : cfg.k_grids[a]) {
                if (!prefix.empty() && !(k < prefix.back())) continue;
                auto p = prefix;
                p.push_back(k);
                next.push_back(std::move(p));
            }
        out = std::move(next);
    }
    return out;
}

std::vector<DayWorkspace> select_columns(const std::vector<DayWorkspace>& all, const std::vector<double>& all_k,
                                         const std::vector<double>& k) {
    std::vector<Eigen::Index> cols;
    for (double v : k) {
        const auto it = std::find(all_k.begin(), all_k.end(), v);
        cols.push_back(static_cast<Eigen::Index>(it - all_k.begin()));
    }
    std::vector<DayWorkspace> out;
    out.reserve(all.size());
    for (const auto& w : all) {
        DayWorkspace c;
        c.date = w.date;
        c.dt = w.dt;
        c.y = w.y;
        c.noise_var = w.noise_var;
        c.loadings.resize(w.loadings.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) c.loadings.col(static_cast<Eigen::Index>(j)) = w.loadings.col(cols[j]);
        out.push_back(std::move(c));
    }
    return out;
}

Eigen::VectorXd standardise(const Eigen::VectorXd& v) {
    if (v.size() < 2) return v;
    const double m = v.mean();
    const double sd = std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
    return sd > 0.0 ? Eigen::VectorXd((v.array() - m) / sd) : Eigen::VectorXd(v.array() - m);
}

}  // namespace

double day_loglik(const DayWorkspace& ws, const ModelParams& params) {
    const auto n = static_cast<Eigen::Index>(params.n());
    if (ws.loadings.cols() != n || ws.loadings.rows() != ws.y.size() || ws.noise_var.size() != ws.y.size())
        throw ValidationError("workspace dimensions disagree with the model");
    const DayStats d = day_stats(ws);
    const Eigen::MatrixXd s = params.omega_root();
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) + d.dt * s.transpose() * d.g * s;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) throw NumericalError("likelihood: inner matrix not positive definite");
    const Eigen::MatrixXd l = llt.matrixL();
    const Eigen::Map<const Eigen::VectorXd> mu(params.mu.data(), n);
    const Eigen::VectorXd j = mu + std::sqrt(d.dt) * s.transpose() * d.h;
    return d.constant - l.diagonal().array().log().sum() + 0.5 * j.dot(llt.solve(j)) - 0.5 * mu.squaredNorm();
}

FactorPosterior day_posterior(const DayWorkspace& ws, const ModelParams& params) {
    const auto n = static_cast<Eigen::Index>(params.n());
    const DayStats d = day_stats(ws);
    const Eigen::MatrixXd tri = params.cholesky();
    const Eigen::MatrixXd s = params.omega_root();
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) + d.dt * s.transpose() * d.g * s;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) throw NumericalError("posterior: normal equations singular");
    const Eigen::Map<const Eigen::VectorXd> mu(params.mu.data(), n);
    FactorPosterior p;
    p.u = llt.solve(mu + std::sqrt(d.dt) * s.transpose() * d.h);
    p.u_cov = llt.solve(Eigen::MatrixXd::Identity(n, n));
    p.dw = std::sqrt(d.dt) * tri * p.u;
    return p;
}

Eigen::MatrixXd loading_matrix(const VarianceCurve& curve, const FuturesObservation& day,
                               const std::vector<Date>& expiries, const std::vector<double>& k,
                               const BusinessCalendar& cal) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(expiries.size()), static_cast<Eigen::Index>(k.size()));
    for (std::size_t i = 0; i < expiries.size(); ++i) {
        const FutureQuote* q = day.find(expiries[i]);
        if (q == nullptr) throw ValidationError("loading_matrix: future not quoted on " + format_date(day.date));
        const double t1 = tenor_of(cal, day.date, expiries[i]);
        for (std::size_t a = 0; a < k.size(); ++a) {
            const double k2 = curve.kernel_integral(t1, t1 + kVixWindow, k[a], 0.0) / kVixWindow;
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) = 0.5 * k2 / (q->price * q->price);
        }
    }
    return m;
}

std::vector<DayWorkspace> build_workspaces(const ObservationSet& obs, const std::vector<VarianceCurve>& curves,
                                           const std::vector<double>& k) {
    if (curves.size() != obs.days.size()) throw ValidationError("one curve per observation day required");
    std::vector<DayWorkspace> out;
    for (std::size_t t = 0; t + 1 < obs.days.size(); ++t) {
        const auto& today = obs.days[t];
        const auto& next = obs.days[t + 1];
        DayWorkspace ws;
        ws.date = today.date;
        ws.dt = obs.calendar.business_days_between(today.date, next.date) / kTradingDaysPerYear;
        if (!(ws.dt > 0.0)) throw ValidationError("observation dates must be distinct business days");
        std::vector<double> y, nv;
        for (const auto& q : today.futures) {
            if (!(q.expiry > next.date)) continue;
            const FutureQuote* q2 = next.find(q.expiry);
            if (q2 == nullptr) continue;
            ws.expiries.push_back(q.expiry);
            y.push_back(q2->price / q.price - 1.0);
            nv.push_back(q.liquidity_sigma * q.liquidity_sigma * ws.dt);
        }
        if (ws.expiries.empty()) continue;
        ws.y = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
        ws.noise_var = Eigen::Map<Eigen::VectorXd>(nv.data(), static_cast<Eigen::Index>(nv.size()));
        ws.loadings = loading_matrix(curves[t], today, ws.expiries, k, obs.calendar);
        out.push_back(std::move(ws));
    }
    return out;
}

void CalibrationConfig::validate() const {
    if (factors < 1 || factors > 3) throw ValidationError("calibration supports 1 to 3 factors");
    if (k_grids.size() < factors) throw ValidationError("one k grid per factor required");
    for (std::size_t a = 0; a < factors; ++a) {
        if (k_grids[a].empty()) throw ValidationError("empty k grid");
        for (double k : k_grids[a])
            if (!(k > 0.0)) throw ValidationError("k grid values must be positive");
    }
    if (!(tolerance > 0.0) || max_outer_iterations < 1 || restarts < 0 || curve_refits < 1)
        throw ValidationError("bad calibration tolerances");
}

std::vector<VarianceCurve> fit_daily_curves(const ObservationSet& obs, const ModelParams& params,
                                            const CalibrationConfig& cfg, const std::vector<VarianceCurve>* previous) {
    std::vector<VarianceCurve> out;
    out.reserve(obs.days.size());
    for (std::size_t t = 0; t < obs.days.size(); ++t) {
        const auto& day = obs.days[t];
        if (day.futures.empty()) throw ValidationError("no futures quoted on " + format_date(day.date));
        std::vector<StrikeTarget> targets;
        for (const auto& q : day.futures) {
            StrikeTarget s;
            const double t1 = tenor_of(obs.calendar, day.date, q.expiry);
            s.window = {t1, t1 + kVixWindow};
            s.strike = q.price;
            const double err = q.price * q.liquidity_sigma * std::sqrt(kDeltaT);
            s.weight = 1.0 / (err * err);
            targets.push_back(s);
        }
        std::optional<StrikeTarget> cash;
        if (day.vix_cash) cash = StrikeTarget{{0.0, kVixWindow}, *day.vix_cash, cfg.vix_cash_weight};

        const VarianceCurve* init = (previous != nullptr && previous->size() == obs.days.size()) ? &(*previous)[t]
                                    : (!out.empty() ? &out.back() : nullptr);
        std::optional<VarianceCurve> curve;
        if (init != nullptr) curve = *init;
        for (int pass = 0; pass < cfg.curve_refits; ++pass) {
            std::vector<StrikeTarget> adj = targets;
            if (curve) {
                for (std::size_t i = 0; i < adj.size(); ++i) {
                    const double cc = convexity_correction(*curve, params, adj[i].window.start, adj[i].window.end);
                    adj[i].strike = day.futures[i].price / (1.0 - cc);
                }
            }
            try {
                curve = fit_curve(adj, cfg.curve, cash, curve ? &*curve : nullptr);
            } catch (const ConvergenceError& e) {
                spdlog::warn("curve fit on {} stopped early: {}", format_date(day.date), e.what());
                curve = VarianceCurve(cfg.curve.knots, e.best_iterate(), std::nullopt, cfg.curve.max_tenor);
            }
        }
        out.push_back(curve->with_anchor(day.date));
    }
    return out;
}

GridPoint fit_at_speeds(const std::vector<DayWorkspace>& ws, const std::vector<double>& k, const CalibrationConfig& cfg,
                        const std::optional<ModelParams>& warm) {
    if (ws.empty()) throw ValidationError("calibration needs at least one day pair");
    std::vector<DayStats> stats;
    stats.reserve(ws.size());
    for (const auto& w : ws) stats.push_back(day_stats(w));
    Objective obj{&stats, k, k.size()};

    std::vector<std::vector<double>> starts;
    if (warm) starts.push_back(encode(*warm));
    starts.push_back(encode(default_guess(k)));
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> jitter(0.0, 0.5);

    SimplexResult best;
    for (const auto& s : starts) {
        auto r = run_simplex(obj, s, 0.3);
        if (r.value < best.value) best = r;
    }
    for (int i = 0; i < cfg.restarts; ++i) {
        auto s = best.x;
        for (double& v : s) v += jitter(rng);
        auto r = run_simplex(obj, s, 0.3);
        if (r.value < best.value) best = r;
    }
    best = std::min(best, run_simplex(obj, best.x, 0.05),
                    [](const SimplexResult& a, const SimplexResult& b) { return a.value < b.value; });

    GridPoint gp;
    gp.k = k;
    gp.loglik = obj.loglik(best.x.data(), &gp.params);
    if (!std::isfinite(gp.loglik)) throw ConvergenceError("likelihood maximisation found no feasible point", best.x);
    gp.params.validate();
    return gp;
}

CalibrationResult calibrate(const ObservationSet& obs, const CalibrationConfig& cfg,
                            const std::optional<ModelParams>& initial) {
    cfg.validate();
    if (static_cast<int>(obs.days.size()) < cfg.min_days)
        throw ValidationError("calibration needs at least " + std::to_string(cfg.min_days) + " observation days");
    const auto grid = grid_points(cfg);
    if (grid.empty()) throw ValidationError("k grids admit no strictly decreasing combination");
    std::set<double> uniq;
    for (const auto& g : grid) uniq.insert(g.begin(), g.end());
    const std::vector<double> all_k(uniq.begin(), uniq.end());

    ModelParams params = initial ? *initial : [&] {
        auto p = default_guess(grid[grid.size() / 2]);
        return p;
    }();
    if (params.n() != cfg.factors) throw ValidationError("initial params have the wrong factor count");

    CalibrationResult res;
    std::map<std::vector<double>, ModelParams> warm;
    double prev_ll = std::numeric_limits<double>::quiet_NaN();
    for (int it = 1; it <= cfg.max_outer_iterations; ++it) {
        res.curves = fit_daily_curves(obs, params, cfg, res.curves.empty() ? nullptr : &res.curves);
        const auto ws_all = build_workspaces(obs, res.curves, all_k);
        res.degenerate = std::all_of(ws_all.begin(), ws_all.end(),
                                     [](const DayWorkspace& w) { return w.y.cwiseAbs().maxCoeff() < 1e-14; });
        if (res.degenerate) spdlog::warn("calibration: quotes show no day-to-day variation");

        CalibrationConfig light = cfg;
        light.restarts = 0;
        res.profile.clear();
        std::size_t best_i = 0;
        for (const auto& k : grid) {
            const auto ws = select_columns(ws_all, all_k, k);
            std::optional<ModelParams> start;
            if (auto f = warm.find(k); f != warm.end()) start = f->second;
            else if (!res.profile.empty()) start = res.profile.back().params;
            auto gp = fit_at_speeds(ws, k, light, start);
            warm[k] = gp.params;
            res.profile.push_back(std::move(gp));
            if (res.profile.back().loglik > res.profile[best_i].loglik) best_i = res.profile.size() - 1;
        }
        // restarts only where they matter: at the grid optimum
        const auto& kb = res.profile[best_i].k;
        auto refined = fit_at_speeds(select_columns(ws_all, all_k, kb), kb, cfg, res.profile[best_i].params);
        if (refined.loglik > res.profile[best_i].loglik) res.profile[best_i] = refined;

        params = res.profile[best_i].params;
        res.params = params;
        res.loglik = res.profile[best_i].loglik;
        res.outer_iterations = it;
        spdlog::info("calibration iteration {}: loglik {:.6f}", it, res.loglik);
        if (std::isfinite(prev_ll) && std::abs(res.loglik - prev_ll) <= cfg.tolerance * std::abs(prev_ll)) return res;
        prev_ll = res.loglik;
    }
    std::vector<double> best = params.k;
    best.insert(best.end(), params.theta.begin(), params.theta.end());
    for (std::size_t a = 1; a < params.n(); ++a)
        for (std::size_t b = 0; b < a; ++b) best.push_back(params.rho(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
    best.insert(best.end(), params.mu.begin(), params.mu.end());
    throw ConvergenceError("calibration did not converge in " + std::to_string(cfg.max_outer_iterations) +
                               " outer iterations",
                           best);
}

bool has_interior_maximum(const std::vector<GridPoint>& profile, const CalibrationConfig& cfg) {
    if (profile.empty()) return false;
    const auto best = std::max_element(profile.begin(), profile.end(),
                                       [](const GridPoint& a, const GridPoint& b) { return a.loglik < b.loglik; });
    for (std::size_t a = 0; a < best->k.size(); ++a) {
        const auto& g = cfg.k_grids[a];
        const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
        if (best->k[a] == *lo || best->k[a] == *hi) return false;
    }
    return true;
}

void write_profile_csv(const std::vector<GridPoint>& profile, const std::filesystem::path& out) {
    std::ofstream f(out);
    if (!f) throw ValidationError("cannot write " + out.string());
    if (profile.empty()) return;
    const std::size_t n = profile.front().k.size();
    for (std::size_t a = 0; a < n; ++a) f << "k" << a << ",";
    for (std::size_t a = 0; a < n; ++a) f << "theta" << a << ",";
    for (std::size_t a = 1; a < n; ++a)
        for (std::size_t b = 0; b < a; ++b) f << "rho" << a << b << ",";
    for (std::size_t a = 0; a < n; ++a) f << "mu" << a << ",";
    f << "loglik\n";
    f.precision(12);
    for (const auto& g : profile) {
        for (double v : g.k) f << v << ",";
        for (double v : g.params.theta) f << v << ",";
        for (std::size_t a = 1; a < n; ++a)
            for (std::size_t b = 0; b < a; ++b) f << g.params.rho(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) << ",";
        for (double v : g.params.mu) f << v << ",";
        f << g.loglik << "\n";
    }
}

FactorSeries extract_factors(const ObservationSet& obs, const std::vector<VarianceCurve>& curves,
                             const ModelParams& params, const SpotSeries* spot) {
    const auto ws = build_workspaces(obs, curves, params.k);
    std::map<Date, std::size_t> curve_of;
    for (std::size_t i = 0; i < obs.days.size(); ++i) curve_of[obs.days[i].date] = i;
    std::map<Date, std::size_t> spot_of;
    if (spot != nullptr)
        for (std::size_t i = 0; i + 1 < spot->dates.size(); ++i) spot_of[spot->dates[i]] = i;

    FactorSeries fs;
    const auto n = static_cast<Eigen::Index>(params.n());
    const auto days = static_cast<Eigen::Index>(ws.size());
    fs.dw.resize(days, n);
    fs.spot_variance.resize(days);
    if (spot != nullptr) fs.dz.resize(days);
    for (Eigen::Index t = 0; t < days; ++t) {
        const auto& w = ws[static_cast<std::size_t>(t)];
        fs.dates.push_back(w.date);
        fs.dw.row(t) = day_posterior(w, params).dw.transpose();
        const double xi0 = curves[curve_of.at(w.date)](0.0);
        fs.spot_variance[t] = xi0;
        if (spot != nullptr) {
            const auto it = spot_of.find(w.date);
            if (it == spot_of.end()) throw ValidationError("spot series has no return for " + format_date(w.date));
            fs.dz[t] = spot->returns[it->second] / std::sqrt(xi0);
        }
    }
    fs.dw_bar.resize(days, n);
    for (Eigen::Index a = 0; a < n; ++a) fs.dw_bar.col(a) = standardise(fs.dw.col(a));
    if (spot != nullptr) fs.dz_bar = standardise(fs.dz);
    return fs;
}

nlohmann::json FactorSeries::to_json() const {
    nlohmann::json j;
    std::vector<std::string> d;
    for (auto x : dates) d.push_back(format_date(x));
    j["dates"] = d;
    std::vector<std::vector<double>> w(static_cast<std::size_t>(dw.rows()));
    for (Eigen::Index t = 0; t < dw.rows(); ++t)
        for (Eigen::Index a = 0; a < dw.cols(); ++a) w[static_cast<std::size_t>(t)].push_back(dw(t, a));
    j["dw"] = w;
    j["dz"] = std::vector<double>(dz.data(), dz.data() + dz.size());
    j["spot_variance"] = std::vector<double>(spot_variance.data(), spot_variance.data() + spot_variance.size());
    return j;
}

FactorSeries FactorSeries::from_json(const nlohmann::json& j) {
    FactorSeries fs;
    for (const auto& s : j.at("dates")) fs.dates.push_back(parse_date(s.get<std::string>()));
    const auto w = j.at("dw").get<std::vector<std::vector<double>>>();
    const auto days = static_cast<Eigen::Index>(w.size());
    const auto n = w.empty() ? 0 : static_cast<Eigen::Index>(w.front().size());
    if (static_cast<std::size_t>(days) != fs.dates.size()) throw ValidationError("factor series lengths disagree");
    fs.dw.resize(days, n);
    for (Eigen::Index t = 0; t < days; ++t) {
        if (static_cast<Eigen::Index>(w[static_cast<std::size_t>(t)].size()) != n) throw ValidationError("ragged dw");
        for (Eigen::Index a = 0; a < n; ++a) fs.dw(t, a) = w[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)];
    }
    const auto dz = j.at("dz").get<std::vector<double>>();
    fs.dz = Eigen::Map<const Eigen::VectorXd>(dz.data(), static_cast<Eigen::Index>(dz.size()));
    const auto sv = j.at("spot_variance").get<std::vector<double>>();
    fs.spot_variance = Eigen::Map<const Eigen::VectorXd>(sv.data(), static_cast<Eigen::Index>(sv.size()));
    fs.dw_bar.resize(days, n);
    for (Eigen::Index a = 0; a < n; ++a) fs.dw_bar.col(a) = standardise(fs.dw.col(a));
    if (fs.dz.size() > 0) fs.dz_bar = standardise(fs.dz);
    return fs;
}

void write_curves_jsonl(const std::vector<VarianceCurve>& curves, const std::filesystem::path& out) {
    std::ofstream f(out);
    if (!f) throw ValidationError("cannot write " + out.string());
    for (const auto& c : curves) f << c.to_json().dump() << "\n";
}

std::vector<VarianceCurve> read_curves_jsonl(const std::filesystem::path& in) {
    std::ifstream f(in);
    if (!f) throw ValidationError("cannot open " + in.string());
    std::vector<VarianceCurve> out;
    std::string line;
    std::size_t no = 0;
    while (std::getline(f, line)) {
        ++no;
        if (line.empty()) continue;
        try {
            out.push_back(VarianceCurve::from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw ParseError(in.string(), no, e.what());
        }
    }
    return out;
}

}  // namespace vardyn
