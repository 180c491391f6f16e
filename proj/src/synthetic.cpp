#include "vardyn/synthetic.hpp"

#include "vardyn/errors.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <set>

namespace vardyn {

namespace {

using namespace std::chrono;

nlohmann::json coupling_json(const SpotVolCoupling& c) {
    nlohmann::json j;
    j["a"] = c.a;
    j["b"] = c.b;
    j["gamma"] = c.gamma;
    std::vector<std::vector<double>> u(static_cast<std::size_t>(c.u_corr.rows()));
    for (Eigen::Index i = 0; i < c.u_corr.rows(); ++i)
        for (Eigen::Index k = 0; k < c.u_corr.cols(); ++k) u[static_cast<std::size_t>(i)].push_back(c.u_corr(i, k));
    j["u_corr"] = u;
    return j;
}

SpotVolCoupling coupling_from(const nlohmann::json& j) {
    SpotVolCoupling c;
    c.a = j.at("a").get<std::vector<double>>();
    c.b = j.at("b").get<std::vector<double>>();
    c.gamma = j.at("gamma").get<std::vector<double>>();
    const auto u = j.at("u_corr").get<std::vector<std::vector<double>>>();
    c.u_corr.resize(static_cast<Eigen::Index>(u.size()), static_cast<Eigen::Index>(u.size()));
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t k = 0; k < u.size(); ++k) c.u_corr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = u[i].at(k);
    return c;
}

// One row per business day: prices and bookkeeping for the live futures.
class RecordObserver : public PathObserver {
public:
    RecordObserver(const SyntheticSpec& spec, const BusinessCalendar& cal, const std::vector<Date>& dates,
                   const std::vector<Date>& expiries, SyntheticDataset& out)
        : spec_(spec), cal_(cal), dates_(dates), expiries_(expiries), out_(out), rng_(spec.seed ^ 0x9e3779b97f4a7c15ULL) {}

    void on_path_start(const PathState& s) override { record(s); }
    void on_step(const PathState& s) override {
        const auto t = static_cast<Eigen::Index>(s.step() - 1);
        for (std::size_t a = 0; a < s.last_dw().size(); ++a) out_.true_dw(t, static_cast<Eigen::Index>(a)) = s.last_dw()[a];
        out_.true_dz[t] = s.last_dz() * std::sqrt(kDeltaT);
        record(s);
    }

private:
    void record(const PathState& s) {
        const Date today = dates_[s.step()];
        out_.closes.push_back(s.spot());
        out_.true_spot_variance.push_back(s.spot_variance());
        std::normal_distribution<double> normal;
        int rank = 0;
        for (Date e : expiries_) {
            if (e < today) continue;
            if (rank >= spec_.live_futures) break;
            const double tau = cal_.business_days_between(today, e) / kTradingDaysPerYear;
            const double price = price_vix_future(s.curve(), spec_.truth, tau, tau + kVixWindow).price;
            const double volume = spec_.volumes[std::min<std::size_t>(static_cast<std::size_t>(rank), spec_.volumes.size() - 1)];
            const double sigma = liquidity_sigma(volume, spec_.liquidity) * spec_.noise_multiplier;
            const double noisy = price * std::exp(sigma * std::sqrt(0.5 * kDeltaT) * normal(rng_));
            const double settle = 100.0 * noisy / vix_adjustment_factor(cal_.business_days_between(e, e + days{30}));
            out_.futures.push_back({today, e, settle, volume});
            ++rank;
        }
        const double cash = std::sqrt(s.kernel_integral(0.0, kVixWindow, 0.0) / kVixWindow);
        out_.vix_levels[today] = 100.0 * cash / vix_adjustment_factor(cal_.business_days_between(today, today + days{30}));
    }

    const SyntheticSpec& spec_;
    const BusinessCalendar& cal_;
    const std::vector<Date>& dates_;
    const std::vector<Date>& expiries_;
    SyntheticDataset& out_;
    std::mt19937_64 rng_;
};

}  // namespace

nlohmann::json SyntheticSpec::to_json() const {
    nlohmann::json j;
    j["truth"] = truth.to_json();
    j["initial_knot_values"] = initial_knot_values;
    j["days"] = days;
    j["start"] = format_date(start);
    j["live_futures"] = live_futures;
    j["volumes"] = volumes;
    j["noise_multiplier"] = noise_multiplier;
    j["liquidity_scale"] = liquidity.scale;
    j["seed"] = seed;
    j["real_measure_drift"] = real_measure_drift;
    j["innovation"] = {{"skew", innovation.skew}, {"excess_kurtosis", innovation.excess_kurtosis}};
    if (coupling) j["coupling"] = coupling_json(*coupling);
    j["spot0"] = spot0;
    return j;
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {"truth", "initial_knot_values", "days", "start", "live_futures",
                                                "volumes", "noise_multiplier", "liquidity_scale", "seed",
                                                "real_measure_drift", "innovation", "coupling", "spot0"};
    for (const auto& [key, _] : j.items())
        if (!known.contains(key)) throw ValidationError("unknown synthetic spec key '" + key + "'");
    SyntheticSpec s;
    if (j.contains("truth")) s.truth = ModelParams::from_json(j["truth"]);
    if (j.contains("initial_knot_values")) s.initial_knot_values = j["initial_knot_values"].get<std::vector<double>>();
    if (j.contains("days")) s.days = j["days"].get<int>();
    if (j.contains("start")) s.start = parse_date(j["start"].get<std::string>());
    if (j.contains("live_futures")) s.live_futures = j["live_futures"].get<int>();
    if (j.contains("volumes")) s.volumes = j["volumes"].get<std::vector<double>>();
    if (j.contains("noise_multiplier")) s.noise_multiplier = j["noise_multiplier"].get<double>();
    if (j.contains("liquidity_scale")) s.liquidity.scale = j["liquidity_scale"].get<double>();
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("real_measure_drift")) s.real_measure_drift = j["real_measure_drift"].get<bool>();
    if (j.contains("innovation")) {
        s.innovation.skew = j["innovation"].at("skew").get<double>();
        s.innovation.excess_kurtosis = j["innovation"].at("excess_kurtosis").get<double>();
    }
    if (j.contains("coupling")) s.coupling = coupling_from(j["coupling"]);
    if (j.contains("spot0")) s.spot0 = j["spot0"].get<double>();
    return s;
}

std::vector<Date> monthly_expiries(Date from, Date to) {
    std::vector<Date> out;
    year_month ym{year_month_day{from}.year(), year_month_day{from}.month()};
    for (;; ym += months{1}) {
        const Date e = sys_days{year_month_weekday{ym.year(), ym.month(), weekday_indexed{Wednesday, 3}}};
        if (e > to) break;
        if (e >= from) out.push_back(e);
    }
    return out;
}

SyntheticDataset generate(const SyntheticSpec& spec) {
    if (spec.days < 2) throw ValidationError("synthetic dataset needs at least two days");
    if (spec.live_futures < 1 || spec.volumes.empty()) throw ValidationError("synthetic dataset needs live futures");
    if (!(spec.noise_multiplier >= 0.0)) throw ValidationError("noise multiplier must be non-negative");
    spec.truth.validate();

    const BusinessCalendar cal{std::vector<Date>{}};
    std::vector<Date> dates{spec.start};
    if (!cal.is_business_day(spec.start)) dates[0] = cal.add_business_days(spec.start, 1);
    for (int i = 1; i < spec.days; ++i) dates.push_back(cal.add_business_days(dates.back(), 1));
    const auto expiries = monthly_expiries(dates.front(), dates.back() + days{31 * (spec.live_futures + 2)});

    // the path runs years past the initial curve's last knot, where it is flat
    const auto fitted = VarianceCurve::interpolate(spec.initial_knot_values);
    const VarianceCurve curve(fitted.knots(), fitted.log_coeffs(), std::nullopt, 1e3);
    SimConfig cfg;
    cfg.paths = 1;
    cfg.seed = spec.seed;
    cfg.antithetic = false;
    cfg.real_measure_drift = spec.real_measure_drift;
    cfg.innovation = spec.innovation;
    cfg.coupling = spec.coupling;
    cfg.spot0 = spec.spot0;
    const Simulator sim(curve, spec.truth, cfg);

    SyntheticDataset out;
    out.dates = dates;
    const auto pairs = static_cast<Eigen::Index>(spec.days - 1);
    out.true_dw.resize(pairs, static_cast<Eigen::Index>(spec.truth.n()));
    out.true_dz.resize(pairs);
    sim.run(
        static_cast<std::size_t>(spec.days - 1),
        [&](std::size_t) -> std::unique_ptr<PathObserver> {
            return std::make_unique<RecordObserver>(spec, cal, dates, expiries, out);
        },
        [](std::size_t, std::unique_ptr<PathObserver>) {});

    out.truth = spec.to_json();
    out.truth["noise_convention"] = "log level noise sigma_L * sqrt(dt/2) * eta";
    std::vector<std::vector<double>> dw(static_cast<std::size_t>(pairs));
    for (Eigen::Index t = 0; t < pairs; ++t)
        for (Eigen::Index a = 0; a < out.true_dw.cols(); ++a) dw[static_cast<std::size_t>(t)].push_back(out.true_dw(t, a));
    out.truth["true_dw"] = dw;
    out.truth["true_dz"] = std::vector<double>(out.true_dz.data(), out.true_dz.data() + pairs);
    out.truth["true_spot_variance"] = out.true_spot_variance;
    return out;
}

ObservationSet SyntheticDataset::observations(const LiquidityConfig& liquidity) const {
    return assemble_observations(futures, vix_levels, BusinessCalendar{std::vector<Date>{}}, liquidity);
}

SpotSeries SyntheticDataset::spot() const { return make_spot_series(dates, closes); }

void write_dataset(const SyntheticDataset& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name);
        if (!f) throw ValidationError("cannot write " + (dir / name).string());
        return f;
    };
    char buf[128];
    {
        auto f = open("futures.csv");
        f << "date,expiry,settle,volume\n";
        for (const auto& r : data.futures) {
            std::snprintf(buf, sizeof buf, "%s,%s,%.12g,%.0f\n", format_date(r.date).c_str(),
                          format_date(r.expiry).c_str(), r.settle, r.volume);
            f << buf;
        }
    }
    {
        auto f = open("vix.csv");
        f << "date,level\n";
        for (const auto& [d, v] : data.vix_levels) {
            std::snprintf(buf, sizeof buf, "%s,%.12g\n", format_date(d).c_str(), v);
            f << buf;
        }
    }
    {
        auto f = open("spot.csv");
        f << "date,close\n";
        for (std::size_t i = 0; i < data.dates.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%s,%.12g\n", format_date(data.dates[i]).c_str(), data.closes[i]);
            f << buf;
        }
    }
    auto f = open("truth.json");
    f << data.truth.dump(2) << "\n";
}

}  // namespace vardyn
