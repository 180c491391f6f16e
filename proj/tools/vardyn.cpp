#include "vardyn/analytics.hpp"
#include "vardyn/calibration.hpp"
#include "vardyn/errors.hpp"
#include "vardyn/market_data.hpp"
#include "vardyn/montecarlo.hpp"
#include "vardyn/spotvol.hpp"
#include "vardyn/statistics.hpp"
#include "vardyn/synthetic.hpp"
#include "vardyn/validation.hpp"
#include "vardyn/volofvol.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vardyn;

namespace {

/// Bad flags, bad config or a missing input: exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything a subcommand may read from --config. Validated before any compute.
struct RunConfig {
    std::uint64_t seed = 20240611;
    double lambda_scale = 1.0;
    std::size_t factors = 2;
    CalibrationConfig calibration;
    LiquidityConfig liquidity;
    std::optional<std::string> holidays;
    std::size_t paths = 20000;
    json synthetic = json::object();

    static RunConfig from_json(const json& j) {
        static const std::set<std::string> known = {"seed",       "lambda_scale", "factors",   "k_grids",
                                                    "tolerance",  "max_outer_iterations",      "restarts",
                                                    "liquidity_scale", "min_volume", "volume_half_life_days",
                                                    "holidays",   "paths",        "synthetic"};
        if (!j.is_object()) throw UsageError("config must be a JSON object");
        for (const auto& [key, _] : j.items())
            if (!known.contains(key)) throw UsageError("unknown config key '" + key + "'");
        RunConfig c;
        try {
            if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
            if (j.contains("lambda_scale")) c.lambda_scale = j["lambda_scale"].get<double>();
            if (j.contains("factors")) c.factors = j["factors"].get<std::size_t>();
            if (j.contains("k_grids")) c.calibration.k_grids = j["k_grids"].get<std::vector<std::vector<double>>>();
            if (j.contains("tolerance")) c.calibration.tolerance = j["tolerance"].get<double>();
            if (j.contains("max_outer_iterations")) c.calibration.max_outer_iterations = j["max_outer_iterations"].get<int>();
            if (j.contains("restarts")) c.calibration.restarts = j["restarts"].get<int>();
            if (j.contains("liquidity_scale")) c.liquidity.scale = j["liquidity_scale"].get<double>();
            if (j.contains("min_volume")) c.liquidity.min_volume = j["min_volume"].get<double>();
            if (j.contains("volume_half_life_days")) c.liquidity.smoothing_half_life_days = j["volume_half_life_days"].get<double>();
            if (j.contains("holidays")) c.holidays = j["holidays"].get<std::string>();
            if (j.contains("paths")) c.paths = j["paths"].get<std::size_t>();
            if (j.contains("synthetic")) c.synthetic = j["synthetic"];
        } catch (const json::exception& e) {
            throw UsageError(std::string("config: ") + e.what());
        }
        if (j.contains("factors") && !j.contains("k_grids")) {
            if (c.factors == 1) {
                std::set<double> all;
                for (const auto& g : c.calibration.k_grids) all.insert(g.begin(), g.end());
                c.calibration.k_grids = {std::vector<double>(all.begin(), all.end())};
            } else if (c.factors != 2) {
                throw UsageError("config: k_grids is required with " + std::to_string(c.factors) + " factors");
            }
        }
        c.calibration.factors = c.factors;
        return c;
    }

    void validate() const {
        if (factors < 1 || factors > 3) throw UsageError("config: factors must be 1, 2 or 3");
        if (!(lambda_scale > 0.0)) throw UsageError("config: lambda_scale must be positive");
        if (paths < 2) throw UsageError("config: paths must be at least 2");
        if (!(liquidity.scale > 0.0) || !(liquidity.min_volume > 0.0)) throw UsageError("config: liquidity terms must be positive");
        try {
            calibration.validate();
            if (!synthetic.empty()) (void)SyntheticSpec::from_json(synthetic);
        } catch (const ValidationError& e) {
            throw UsageError(std::string("config: ") + e.what());
        }
    }
};

/// Flags shared by every subcommand; input paths default to files inside the output directory.
struct Common {
    std::string out = "run";
    std::string config;
    std::optional<std::uint64_t> seed;
    RunConfig run;

    [[nodiscard]] fs::path dir() const { return out; }
    [[nodiscard]] std::uint64_t master_seed() const { return seed.value_or(run.seed); }
    [[nodiscard]] fs::path input(const std::string& flag, const char* name) const {
        const fs::path p = flag.empty() ? dir() / name : fs::path(flag);
        if (!fs::exists(p)) throw UsageError("missing input file: " + p.string());
        return p;
    }
    [[nodiscard]] std::optional<fs::path> optional_input(const std::string& flag, const char* name) const {
        if (!flag.empty()) return input(flag, name);
        const fs::path p = dir() / name;
        return fs::exists(p) ? std::optional<fs::path>(p) : std::nullopt;
    }
};

json read_json(const fs::path& p) {
    std::ifstream f(p);
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw ParseError(p.string(), 0, e.what());
    }
}

void write_json(const fs::path& p, const json& j) {
    std::ofstream f(p);
    if (!f) throw ValidationError("cannot write " + p.string());
    f << j.dump(2) << "\n";
}

void record_timing(const fs::path& dir, const std::string& step, double seconds) {
    const fs::path p = dir / "timings.json";
    json t = fs::exists(p) ? read_json(p) : json::object();
    t[step] = seconds;
    write_json(p, t);
}

BusinessCalendar calendar(const RunConfig& c) {
    if (!c.holidays) return {};
    if (!fs::exists(*c.holidays)) throw UsageError("missing input file: " + *c.holidays);
    return BusinessCalendar::from_holiday_file(*c.holidays);
}

struct Inputs {
    std::string futures, vix, spot, params, curves, factors, nonlinear;
};

ObservationSet load_observations(const Common& c, const Inputs& in) {
    const auto rows = load_futures_rows(c.input(in.futures, "futures.csv"));
    const auto vix = load_levels(c.input(in.vix, "vix.csv"));
    return assemble_observations(rows, vix, calendar(c.run), c.run.liquidity);
}

ModelParams load_params(const Common& c, const Inputs& in) {
    return ModelParams::from_json(read_json(c.input(in.params, "params.json")));
}

FactorSeries load_factors(const Common& c, const Inputs& in) {
    return FactorSeries::from_json(read_json(c.input(in.factors, "factors.json")));
}

/// "1m,3m,6m,2w,10d,1y" or plain year fractions, on the 252-day clock.
std::vector<double> parse_maturities(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) throw UsageError("empty maturity in '" + text + "'");
        const char unit = item.back();
        double scale = 1.0;
        std::string number = item;
        if (std::isalpha(static_cast<unsigned char>(unit))) {
            number.pop_back();
            switch (unit) {
                case 'd': scale = 1.0 / 252.0; break;
                case 'w': scale = 5.0 / 252.0; break;
                case 'm': scale = 21.0 / 252.0; break;
                case 'y': scale = 1.0; break;
                default: throw UsageError("unknown maturity unit in '" + item + "'");
            }
        }
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(number, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != number.size() || !(v > 0.0)) throw UsageError("bad maturity '" + item + "'");
        out.push_back(v * scale);
    }
    if (out.empty()) throw UsageError("no maturities given");
    return out;
}

Eigen::VectorXd column(const Eigen::MatrixXd& m, Eigen::Index c) { return m.col(c); }

std::vector<std::string> factor_names(std::size_t n) {
    if (n == 2) return {"fast", "slow"};
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("factor" + std::to_string(i));
    return out;
}

// --- subcommands

void cmd_synth(const Common& c, std::optional<int> days, std::optional<double> noise) {
    SyntheticSpec spec = SyntheticSpec::from_json(c.run.synthetic);
    if (!c.run.synthetic.contains("seed")) spec.seed = derive_seed(c.master_seed(), "synth");
    if (!c.run.synthetic.contains("liquidity_scale")) spec.liquidity = c.run.liquidity;
    if (days) spec.days = *days;
    if (noise) spec.noise_multiplier = *noise;
    // Default dynamics: reference spot law with the replica quadratic coupling.
    if (!c.run.synthetic.contains("innovation")) spec.innovation = SpotMoments::reference().law();
    if (!c.run.synthetic.contains("coupling") && spec.truth.n() == 2)
        spec.coupling = SpotVolCoupling::consistent({0.045, 0.0}, {0.55, 0.83}, spec.innovation, spec.truth.rho);
    const auto data = generate(spec);
    write_dataset(data, c.dir());
    fmt::print("wrote {} days, {} futures quotes to {}\n", data.dates.size(), data.futures.size(), c.dir().string());
}

void cmd_ingest(const Common& c, const Inputs& in) {
    const auto obs = load_observations(c, in);
    json j;
    j["days"] = obs.days.size();
    if (!obs.days.empty()) {
        j["first"] = format_date(obs.days.front().date);
        j["last"] = format_date(obs.days.back().date);
    }
    std::size_t quotes = 0, with_cash = 0;
    for (const auto& d : obs.days) {
        quotes += d.futures.size();
        with_cash += d.vix_cash.has_value() ? 1 : 0;
    }
    j["quotes"] = quotes;
    j["days_with_index"] = with_cash;
    if (const auto spot = c.optional_input(in.spot, "spot.csv")) j["spot_closes"] = load_spot(*spot).closes.size();
    write_json(c.dir() / "ingest.json", j);
    fmt::print("{} days, {} quotes\n", obs.days.size(), quotes);
}

void cmd_calibrate(const Common& c, const Inputs& in) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto obs = load_observations(c, in);
    CalibrationConfig cfg = c.run.calibration;
    cfg.seed = derive_seed(c.master_seed(), "calibrate");
    const auto r = calibrate(obs, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(c.dir() / "params.json", r.params.to_json());
    write_curves_jsonl(r.curves, c.dir() / "curves.jsonl");
    write_profile_csv(r.profile, c.dir() / "profile.csv");
    const bool interior = has_interior_maximum(r.profile, cfg);
    write_json(c.dir() / "calibration.json", {{"params", r.params.to_json()},
                                              {"loglik", r.loglik},
                                              {"outer_iterations", r.outer_iterations},
                                              {"interior_maximum", interior},
                                              {"degenerate", r.degenerate},
                                              {"days", obs.days.size()},
                                              {"seconds", secs}});
    fmt::print("k = ({}), theta = ({}), loglik {:.2f}, {} iterations, interior maximum: {}\n",
               fmt::join(r.params.k, ", "), fmt::join(r.params.theta, ", "), r.loglik, r.outer_iterations, interior);
}

void cmd_extract(const Common& c, const Inputs& in) {
    const auto obs = load_observations(c, in);
    const auto curves = read_curves_jsonl(c.input(in.curves, "curves.jsonl"));
    const auto params = load_params(c, in);
    std::optional<SpotSeries> spot;
    if (const auto p = c.optional_input(in.spot, "spot.csv")) spot = load_spot(*p);
    const auto f = extract_factors(obs, curves, params, spot ? &*spot : nullptr);
    write_json(c.dir() / "factors.json", f.to_json());
    fmt::print("{} factor increments{}\n", f.dates.size(), spot ? " with spot" : "");
}

void cmd_stats(const Common& c, const Inputs& in) {
    const auto f = load_factors(c, in);
    const auto names = factor_names(static_cast<std::size_t>(f.dw.cols()));
    const std::vector<int> lags = {1, 5, 21, 63};
    auto acf_json = [&](const Eigen::VectorXd& x) {
        json a = json::array();
        for (const auto& p : autocorrelation(x, lags)) a.push_back({{"lag", p.lag}, {"value", p.value}, {"band", p.band}});
        return a;
    };
    json j;
    for (Eigen::Index a = 0; a < f.dw.cols(); ++a) {
        const auto x = column(f.dw, a);
        j["factors"][names[static_cast<std::size_t>(a)]] = {{"moments", moments(x).to_json()},
                                                            {"acf_abs", acf_json(x.cwiseAbs())}};
    }
    if (f.dz.size() > 0) {
        j["spot"] = {{"moments", moments(f.dz).to_json()}, {"acf", acf_json(f.dz)}, {"acf_squared", acf_json(f.dz.cwiseAbs2())}};
        j["risk_premium"] = risk_premium_stats(f).to_json();
        for (Eigen::Index a = 0; a < f.dw.cols(); ++a)
            j["distance_correlation"][names[static_cast<std::size_t>(a)]] = distance_correlation(f.dz, column(f.dw, a));
    }
    write_json(c.dir() / "stats.json", j);
    fmt::print("stats for {} increments\n", f.dates.size());
}

void cmd_modes(const Common& c, const Inputs& in) {
    const auto curves = read_curves_jsonl(c.input(in.curves, "curves.jsonl"));
    const auto params = load_params(c, in);
    const auto data = kl_modes(curves, calendar(c.run));
    const auto model = model_modes(params);
    const std::size_t count = std::min<std::size_t>(params.n(), 2);
    const auto overlaps = mode_overlaps(data, model, count);
    write_json(c.dir() / "modes.json", {{"data", data.to_json()}, {"model", model.to_json()}, {"overlaps", overlaps}});
    fmt::print("top-2 share {:.5f}, overlaps ({:.4f})\n", data.shares[0] + (data.shares.size() > 1 ? data.shares[1] : 0.0),
               fmt::join(overlaps, ", "));
}

void cmd_nonlinear(const Common& c, const Inputs& in) {
    const auto f = load_factors(c, in);
    if (f.dz.size() == 0) throw UsageError("factors.json has no spot series; rerun extract with spot.csv");
    const auto fit = fit_nonlinear(f);
    json j = fit.to_json();
    if (const auto p = c.optional_input(in.params, "params.json")) {
        const auto params = ModelParams::from_json(read_json(*p));
        if (params.n() == fit.n()) {
            json rows = json::array();
            for (int lag : {1, 5, 21, 63}) {
                const double d = lag * kDeltaT;
                rows.push_back({{"lag_days", lag},
                                {"leverage", leverage_correlation(fit, params, d)},
                                {"clustering", volatility_clustering(fit, params, d)}});
            }
            j["lag_correlations"] = rows;
            j["clustering_nonlinear_share"] = clustering_nonlinear_share(fit, params);
            j["exogenous_vol"] = sigma_v(fit, params, 0.0);
        }
    }
    write_json(c.dir() / "nonlinear.json", j);
    fmt::print("a = ({}), b = ({}), gamma = ({})\n", fmt::join(fit.a, ", "), fmt::join(fit.b, ", "), fmt::join(fit.gamma, ", "));
}

void cmd_garch(const Common& c, const Inputs& in, std::optional<double> slope) {
    const auto f = load_factors(c, in);
    if (f.dz.size() < 2) throw UsageError("factors.json has no spot series; rerun extract with spot.csv");
    const auto params = load_params(c, in);
    const auto fit = NonlinearFit::from_json(read_json(c.input(in.nonlinear, "nonlinear.json")));
    double curve_slope = 0.0;
    if (slope) {
        curve_slope = *slope;
    } else if (const auto p = c.optional_input(in.curves, "curves.jsonl")) {
        const auto curves = read_curves_jsonl(*p);
        for (const auto& cv : curves) curve_slope += cv.slope(0.0);
        curve_slope /= static_cast<double>(curves.size());
    }
    const auto m = moments(f.dz);
    std::vector<double> drift;
    for (Eigen::Index a = 0; a < f.dw.cols(); ++a) drift.push_back(f.dw.col(a).mean() / kDeltaT);
    const auto model = garch_map(fit, params, curve_slope, SpotMoments{m.mean, m.vol, m.skew, m.excess_kurtosis}, drift);

    // r_t = dZ_t sqrt(xi_t^t), aligned with the variance path
    std::vector<double> ret, var(f.spot_variance.data(), f.spot_variance.data() + f.spot_variance.size());
    for (Eigen::Index t = 0; t + 1 < f.dz.size(); ++t) ret.push_back(f.dz[t] * std::sqrt(f.spot_variance[t]));
    const auto direct = fit_garch_direct(ret, var);
    write_json(c.dir() / "garch.json", {{"model", model.to_json()},
                                        {"data", direct.coefficients.to_json()},
                                        {"data_std_errors", direct.std_errors},
                                        {"curve_slope", curve_slope},
                                        {"samples", direct.samples}});
    fmt::print("phi1 model {:.4f}, data {:.4f} +- {:.4f}\n", model.phi1, direct.coefficients.phi1, direct.std_errors[1]);
}

void cmd_vvix(const Common& c, const Inputs& in, const std::string& vvix_flag, double first_expiry_days) {
    const auto params = c.optional_input(in.params, "params.json") ? load_params(c, in) : ModelParams::reference_two_factor();
    {
        std::ofstream f(c.dir() / "vvix_term_structure.csv");
        f << "tau1_days,future_vol,vvix\n";
        for (int d = 1; d <= 180; ++d) {
            const double tau = d / 365.0;
            f << fmt::format("{},{:.10g},{:.10g}\n", d, std::sqrt(vix_future_total_variance(params, tau)),
                             model_vvix(params, tau, tau + kVixWindow));
        }
    }
    const double t1 = first_expiry_days / 365.0;
    const double model = model_vvix(params, t1, t1 + kVixWindow);
    std::vector<double> levels;
    std::vector<Date> dates;
    std::string source;
    if (!vvix_flag.empty()) {
        if (!fs::exists(vvix_flag)) throw UsageError("missing input file: " + vvix_flag);
        for (const auto& [d, v] : load_levels(vvix_flag)) {
            dates.push_back(d);
            levels.push_back(v / 100.0);
        }
        source = vvix_flag;
    } else {
        // No index data: an Ornstein-Uhlenbeck ratio path around the default long-run level.
        const LambdaProcess lp;
        std::mt19937_64 rng(derive_seed(c.master_seed(), "vvix"));
        std::normal_distribution<double> nd;
        const double decay = std::exp(-lp.k * kDeltaT);
        const double sd = lp.sigma * std::sqrt((1.0 - decay * decay) / (2.0 * lp.k));
        double x = std::log(lp.lambda0);
        for (int t = 0; t < 2500; ++t) {
            levels.push_back(model * std::exp(0.5 * x));
            x = std::log(lp.lambda_inf) + (x - std::log(lp.lambda_inf)) * decay + sd * nd(rng);
        }
        source = "simulated";
    }
    const auto lambda = lambda_ratio(levels, model);

    std::map<std::string, Eigen::VectorXd> aligned;
    if (!dates.empty()) {
        if (const auto p = c.optional_input(in.factors, "factors.json")) {
            // correlations only when every factor date has an index level and the dates are contiguous
            const auto f = FactorSeries::from_json(read_json(*p));
            const auto first = std::find(dates.begin(), dates.end(), f.dates.empty() ? Date{} : f.dates.front());
            const auto off = static_cast<std::size_t>(first - dates.begin());
            const bool contiguous = first != dates.end() && off + f.dates.size() < dates.size() &&
                                    std::equal(f.dates.begin(), f.dates.end(), dates.begin() + static_cast<long>(off));
            if (contiguous) {
                std::vector<double> sub(lambda.begin() + static_cast<long>(off),
                                        lambda.begin() + static_cast<long>(off + f.dates.size() + 1));
                const auto names = factor_names(static_cast<std::size_t>(f.dw.cols()));
                for (Eigen::Index a = 0; a < f.dw.cols(); ++a) aligned["dW_" + names[static_cast<std::size_t>(a)]] = f.dw.col(a);
                if (f.dz.size() > 0) aligned["dZ"] = f.dz;
                const auto state = fit_lambda_process(sub, kDeltaT, aligned);
                write_json(c.dir() / "vvix.json", {{"source", source}, {"model_vvix", model}, {"first_expiry_days", first_expiry_days},
                                                   {"process", state.to_json()}, {"half_life_days", state.half_life() * 252.0}});
                fmt::print("model VVIX {:.2f}%, lambda_inf {:.3f}, half-life {:.1f} days\n", 100 * model, state.lambda_inf,
                           state.half_life() * 252.0);
                return;
            }
        }
    }
    const auto state = fit_lambda_process(lambda);
    write_json(c.dir() / "vvix.json", {{"source", source}, {"model_vvix", model}, {"first_expiry_days", first_expiry_days},
                                       {"process", state.to_json()}, {"half_life_days", state.half_life() * 252.0}});
    fmt::print("model VVIX {:.2f}%, lambda_inf {:.3f}, half-life {:.1f} days\n", 100 * model, state.lambda_inf,
               state.half_life() * 252.0);
}

void cmd_analytics(const Common& c, const Inputs& in, const std::string& maturities, std::optional<double> lambda) {
    const auto mats = parse_maturities(maturities);
    const auto params = load_params(c, in);
    const auto fit = NonlinearFit::from_json(read_json(c.input(in.nonlinear, "nonlinear.json")));
    if (fit.n() != params.n()) throw UsageError("nonlinear.json and params.json disagree on the factor count");
    std::optional<VarianceCurve> curve;
    if (const auto p = c.optional_input(in.curves, "curves.jsonl")) curve = read_curves_jsonl(*p).back();
    const auto flat = VarianceCurve::flat(0.04);
    const ForwardCurve& used = curve ? static_cast<const ForwardCurve&>(*curve) : flat;
    const double scale = lambda.value_or(c.run.lambda_scale);
    std::ofstream f(c.dir() / "analytics.csv");
    f << "maturity,sigma_vs,atm_spread,skew,spread_linear,spread_nonlinear,skew_linear,skew_nonlinear,"
         "return_skewness,ssr,varswap_sampling,varswap_implied,varswap_shocks,varswap_total,shock_variance_share,"
         "shock_vol_share\n";
    for (double T : mats) {
        const auto r = analytics_row(used, params, fit, T, scale);
        const auto& s = r.smile;
        const auto& v = r.varswap;
        f << fmt::format("{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},"
                         "{:.10g},{:.10g},{:.10g},{:.10g}\n",
                         T, s.sigma_vs, s.atm_spread, s.skew, s.spread_linear, s.spread_nonlinear, s.skew_linear,
                         s.skew_nonlinear, r.skewness, r.ssr, v.sampling, v.implied, v.shocks, v.total, v.shock_share(),
                         v.shock_vol_share());
    }
    fmt::print("{} maturities written to {}\n", mats.size(), (c.dir() / "analytics.csv").string());
}

void cmd_simulate(const Common& c, const Inputs& in, std::optional<std::size_t> paths, double horizon, bool dump,
                  std::size_t dump_paths_count) {
    const auto params = c.optional_input(in.params, "params.json") ? load_params(c, in) : ModelParams::reference_two_factor();
    std::optional<VarianceCurve> curve;
    if (const auto p = c.optional_input(in.curves, "curves.jsonl")) curve = read_curves_jsonl(*p).back();
    const auto flat = VarianceCurve::flat(0.04);
    const ForwardCurve& used = curve ? static_cast<const ForwardCurve&>(*curve) : flat;
    SimConfig cfg;
    cfg.paths = paths.value_or(c.run.paths);
    cfg.seed = derive_seed(c.master_seed(), "simulate");
    cfg.lambda_scale = c.run.lambda_scale;
    if (const auto p = c.optional_input(in.nonlinear, "nonlinear.json")) {
        const auto fit = NonlinearFit::from_json(read_json(*p));
        if (fit.n() == params.n()) {
            cfg.innovation = fit.law();
            cfg.coupling = SpotVolCoupling::consistent(fit.a, fit.b, fit.law(), params.rho);
        }
    }
    const Simulator sim(used, params, cfg);
    json futures = json::array();
    for (int m = 1; m <= 6; ++m) {
        const double t1 = 21.0 * m / 252.0;
        const auto mc = mc_vix_future(sim, t1, t1 + kVixWindow);
        const auto px = price_vix_future(used, sim.params().scaled(cfg.lambda_scale), t1, t1 + kVixWindow);
        futures.push_back({{"expiry", t1}, {"mc", mc.mean}, {"se", mc.se}, {"model", px.price}});
    }
    const auto rv = mc_realized_variance(sim, horizon);
    const auto sk = mc_return_skewness(sim, horizon);
    write_json(c.dir() / "simulate.json", {{"paths", cfg.paths},
                                           {"seed", cfg.seed},
                                           {"horizon", horizon},
                                           {"lambda_scale", cfg.lambda_scale},
                                           {"vix_futures", futures},
                                           {"realized_variance", {{"mean", rv.mean}, {"se", rv.se}}},
                                           {"return_skewness", {{"mean", sk.mean}, {"se", sk.se}}}});
    if (dump) {
        SimConfig small = cfg;
        small.paths = dump_paths_count;
        const Simulator ds(used, params, small);
        const auto steps = static_cast<std::size_t>(std::llround(horizon / cfg.dt));
        dump_paths(ds, steps, default_mode_tenors(), c.dir() / "paths.bin");
    }
    fmt::print("{} paths, realized variance {:.5f} +- {:.5f}\n", cfg.paths, rv.mean, rv.se);
}

int cmd_validate(const Common& c, const std::string& run, const std::vector<int>& only) {
    ValidationOptions o;
    o.seed = c.master_seed();
    o.only = only;
    const fs::path run_dir = run.empty() ? c.dir() : fs::path(run);
    if (!fs::exists(run_dir)) throw UsageError("missing run directory: " + run_dir.string());
    o.run_dir = run_dir;
    const auto results = run_validation(o);
    std::cout << pass_table(results);
    const bool ok = suite_passed(results);
    write_json(c.dir() / "validation.json", {{"seed", o.seed}, {"passed", ok}, {"criteria", results_json(results)}});
    std::cout << (ok ? "suite passed" : "suite FAILED") << "\n";
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Forward-variance model calibration, factor analysis and derivative analytics"};
    app.require_subcommand(1);
    Common common;
    Inputs in;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", common.out, "output directory; inputs default to files inside it")->capture_default_str();
        sub->add_option("--config", common.config, "RunConfig JSON");
        sub->add_option("--seed", common.seed, "master seed");
    };
    auto add = [&](CLI::App* sub, std::initializer_list<std::pair<const char*, std::string*>> flags) {
        for (const auto& [name, target] : flags) sub->add_option(name, *target);
    };

    auto* synth = app.add_subcommand("synth", "simulate a futures/index/spot dataset with known truth");
    std::optional<int> days;
    std::optional<double> noise;
    synth->add_option("--days", days, "number of business days");
    synth->add_option("--noise", noise, "quote-noise multiplier (0 = exact prices)");

    auto* ingest = app.add_subcommand("ingest", "load and check futures, index and spot files");
    add(ingest, {{"--futures", &in.futures}, {"--vix", &in.vix}, {"--spot", &in.spot}});

    auto* calibrate_cmd = app.add_subcommand("calibrate", "maximum-likelihood calibration and daily curves");
    add(calibrate_cmd, {{"--futures", &in.futures}, {"--vix", &in.vix}, {"--spot", &in.spot}});

    auto* extract = app.add_subcommand("extract", "posterior factor increments");
    add(extract, {{"--futures", &in.futures}, {"--vix", &in.vix}, {"--spot", &in.spot}, {"--params", &in.params},
                  {"--curves", &in.curves}});

    auto* stats = app.add_subcommand("stats", "factor moments, tails, autocorrelations and risk premium");
    add(stats, {{"--factors", &in.factors}});

    auto* modes = app.add_subcommand("modes", "eigenmodes of daily curve variations vs the model");
    add(modes, {{"--curves", &in.curves}, {"--params", &in.params}});

    auto* nonlinear = app.add_subcommand("nonlinear", "quadratic spot/vol coupling fit");
    add(nonlinear, {{"--factors", &in.factors}, {"--params", &in.params}});

    auto* garch = app.add_subcommand("garch", "model GARCH coefficients and direct regression");
    std::optional<double> slope;
    add(garch, {{"--factors", &in.factors}, {"--params", &in.params}, {"--nonlinear", &in.nonlinear}, {"--curves", &in.curves}});
    garch->add_option("--curve-slope", slope, "short-end slope of xi; default is the mean over curves.jsonl");

    auto* vvix = app.add_subcommand("vvix", "VIX-future vol term structure, model VVIX and lambda process");
    std::string vvix_file;
    double first_expiry_days = 14.0;
    add(vvix, {{"--params", &in.params}, {"--factors", &in.factors}});
    vvix->add_option("--vvix", vvix_file, "date,level file in vol points");
    vvix->add_option("--first-expiry-days", first_expiry_days, "calendar days to the first expiry")->capture_default_str();

    auto* analytics = app.add_subcommand("analytics", "smile, skew, SSR and variance-swap term structure");
    std::string maturities = "1m,3m,6m";
    std::optional<double> lambda;
    add(analytics, {{"--params", &in.params}, {"--nonlinear", &in.nonlinear}, {"--curves", &in.curves}});
    analytics->add_option("--maturities", maturities, "comma list: 10d, 2w, 3m, 1y or year fractions")->capture_default_str();
    analytics->add_option("--lambda-scale", lambda, "vol-of-vol scale");

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo ensemble summary");
    std::optional<std::size_t> paths;
    double horizon = 0.25;
    bool dump = false;
    std::size_t dump_count = 100;
    add(simulate, {{"--params", &in.params}, {"--curves", &in.curves}, {"--nonlinear", &in.nonlinear}});
    simulate->add_option("--paths", paths, "number of paths");
    simulate->add_option("--horizon", horizon, "years")->capture_default_str();
    simulate->add_flag("--dump", dump, "write paths.bin");
    simulate->add_option("--dump-paths", dump_count, "paths in the binary dump")->capture_default_str();

    auto* validate = app.add_subcommand("validate", "run the acceptance suite and print a pass table");
    std::string run_dir;
    std::vector<int> only;
    validate->add_option("--run", run_dir, "pipeline run directory (default: --out)");
    validate->add_option("--only", only, "criterion ids")->delimiter(',');

    for (auto* sub : app.get_subcommands({})) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    CLI::App* chosen = app.get_subcommands().front();
    const std::string step = chosen->get_name();
    try {
        if (!common.config.empty()) {
            if (!fs::exists(common.config)) throw UsageError("missing input file: " + common.config);
            common.run = RunConfig::from_json(read_json(common.config));
        }
        common.run.validate();
        if (step != "synth" && step != "validate" && step != "vvix" && step != "simulate" && !fs::exists(common.dir()))
            throw UsageError("missing output directory: " + common.dir().string());
        fs::create_directories(common.dir());

        const auto t0 = std::chrono::steady_clock::now();
        int code = 0;
        if (step == "synth") cmd_synth(common, days, noise);
        else if (step == "ingest") cmd_ingest(common, in);
        else if (step == "calibrate") cmd_calibrate(common, in);
        else if (step == "extract") cmd_extract(common, in);
        else if (step == "stats") cmd_stats(common, in);
        else if (step == "modes") cmd_modes(common, in);
        else if (step == "nonlinear") cmd_nonlinear(common, in);
        else if (step == "garch") cmd_garch(common, in, slope);
        else if (step == "vvix") cmd_vvix(common, in, vvix_file, first_expiry_days);
        else if (step == "analytics") cmd_analytics(common, in, maturities, lambda);
        else if (step == "simulate") cmd_simulate(common, in, paths, horizon, dump, dump_count);
        else if (step == "validate") code = cmd_validate(common, run_dir, only);
        record_timing(common.dir(), step, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        return code;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << step << " failed: " << e.what() << "\n";
        return 1;
    }
}
