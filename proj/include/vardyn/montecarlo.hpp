#pragma once

#include "vardyn/market_data.hpp"
#include "vardyn/model.hpp"
#include "vardyn/variance_curve.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <vector>

namespace vardyn {

/// Law of the standardised spot innovation dZbar (mean 0, variance 1).
struct InnovationLaw {
    double skew = 0.0;
    double excess_kurtosis = 0.0;

    [[nodiscard]] bool gaussian() const { return skew == 0.0 && excess_kurtosis == 0.0; }
};

struct MixtureComponent {
    double weight = 1.0;
    double mean = 0.0;
    double sd = 1.0;
};

/// Two-component Gaussian mixture with mean 0, variance 1 and the requested skew and excess
/// kurtosis. Throws ValidationError when no such mixture exists (kurtosis too low for the skew).
[[nodiscard]] std::vector<MixtureComponent> fit_innovation_mixture(const InnovationLaw& law);

/// log E[exp(A (Z^2 - 1) - B Z)] for Z drawn from the mixture. Requires 2 A sd_i^2 < 1.
[[nodiscard]] double mixture_quadratic_log_mgf(const std::vector<MixtureComponent>& mix, double a, double b);

/// Quadratic spot/vol coupling dWbar^a = a_a (Z^2 - 1) - b_a Z + gamma_a U^a, corr(U) = u_corr.
struct SpotVolCoupling {
    std::vector<double> a;
    std::vector<double> b;
    std::vector<double> gamma;
    Eigen::MatrixXd u_corr;

    /// Picks gamma so that each dWbar has unit variance and u_corr so that the factor
    /// correlation equals `rho`. Throws RegimeError if that is impossible.
    [[nodiscard]] static SpotVolCoupling consistent(std::vector<double> a, std::vector<double> b,
                                                    const InnovationLaw& law, const Eigen::MatrixXd& rho);
    /// Correlation of (dWbar^a, dWbar^b) implied by the coupling.
    [[nodiscard]] Eigen::MatrixXd factor_correlation(const InnovationLaw& law) const;
};

/// Mean-reverting multiplicative scale on vol-of-vol: log lambda is Ornstein-Uhlenbeck around
/// log lambda_inf; factor vols are multiplied by sqrt(lambda_t / lambda_inf).
struct LambdaProcess {
    double lambda_inf = 1.26;
    double k = 16.0;
    double sigma = 1.52;
    double lambda0 = 1.26;
};

enum class CurveScheme {
    exponential,          ///< exact lognormal step; positive and martingale
    linear_perturbation,  ///< xi_t^u = xi_0^u (1 + sum theta chi); first-order validation mode
};

struct SimConfig {
    std::size_t paths = 10000;
    double dt = kDeltaT;
    std::uint64_t seed = 20240611;
    double lambda_scale = 1.0;  ///< theta -> lambda_scale * theta
    bool antithetic = true;     ///< ignored when the innovation law is not symmetric
    bool real_measure_drift = false;
    InnovationLaw innovation;
    std::optional<SpotVolCoupling> coupling;
    std::optional<LambdaProcess> vol_of_vol;
    CurveScheme scheme = CurveScheme::exponential;
    std::size_t chunk_paths = 2000;
    double spot0 = 100.0;
};

class Simulator;

/// Read-only view of one path at the current step.
class PathState {
public:
    [[nodiscard]] double time() const { return t_; }
    [[nodiscard]] std::size_t step() const { return step_; }
    [[nodiscard]] std::size_t path() const { return path_; }
    [[nodiscard]] double spot() const { return spot_; }
    /// Return of the step just taken, (S_t - S_{t-dt}) / S_{t-dt}.
    [[nodiscard]] double last_return() const { return ret_; }
    [[nodiscard]] double last_dz() const { return dz_; }
    /// Standardised factor shocks of the step just taken (unit variance, before drift).
    [[nodiscard]] const std::vector<double>& last_dwbar() const { return dwbar_; }
    /// Factor increments dW^a of the step just taken (variance dt, including scale and drift).
    [[nodiscard]] const std::vector<double>& last_dw() const { return dw_; }
    [[nodiscard]] double lambda() const { return lambda_; }

    /// xi_t^u for absolute time u >= t.
    [[nodiscard]] double xi(double u) const;
    /// xi_t^t, the current spot variance.
    [[nodiscard]] double spot_variance() const { return xi(t_); }
    /// int_{t+a}^{t+b} xi_t^u exp(-decay (u - t - origin)) du, tenors relative to now.
    [[nodiscard]] double kernel_integral(double a, double b, double decay, double origin = 0.0) const;
    /// The current curve as a function of tenor u - t.
    [[nodiscard]] const ForwardCurve& curve() const { return view_; }

private:
    friend class Simulator;

    class View final : public ForwardCurve {
    public:
        explicit View(const PathState* s) : s_(s) {}
        double operator()(double tenor) const override { return s_->xi(s_->t_ + tenor); }
        double kernel_integral(double a, double b, double decay, double origin) const override {
            return s_->kernel_integral(a, b, decay, origin);
        }

    private:
        const PathState* s_;
    };

    explicit PathState(const Simulator* sim);
    PathState(const PathState&) = delete;
    PathState& operator=(const PathState&) = delete;

    [[nodiscard]] double log_compensator(double u) const;

    const Simulator* sim_;
    View view_{this};
    double t_ = 0.0;
    std::size_t step_ = 0;
    std::size_t path_ = 0;
    double spot_ = 0.0;
    double ret_ = 0.0;
    double dz_ = 0.0;
    double lambda_ = 1.0;
    std::vector<double> y_;      // per-factor exponentially weighted shock sums
    std::vector<double> cov_;    // per-pair accumulators for the Gaussian compensator
    std::vector<double> dwbar_;
    std::vector<double> dw_;
};

/// Receives every step of every path in one chunk. One observer is created per chunk and
/// chunks are merged in index order, so results do not depend on scheduling.
class PathObserver {
public:
    virtual ~PathObserver() = default;
    virtual void on_path_start(const PathState&) {}
    virtual void on_step(const PathState&) {}
    virtual void on_path_end(const PathState&) {}
};

class Simulator {
public:
    Simulator(const ForwardCurve& curve0, ModelParams params, SimConfig config);
    Simulator(const ForwardCurve&& curve0, ModelParams params, SimConfig config) = delete;  // keeps a reference

    [[nodiscard]] const SimConfig& config() const { return config_; }
    [[nodiscard]] const ModelParams& params() const { return params_; }
    /// theta after lambda_scale.
    [[nodiscard]] const std::vector<double>& theta() const { return theta_; }
    [[nodiscard]] const ForwardCurve& initial_curve() const { return *curve0_; }
    [[nodiscard]] std::size_t chunk_count() const;

    /// Simulates `steps` steps on every path. `make_observer(chunk)` is called once per chunk.
    void run(std::size_t steps,
             const std::function<std::unique_ptr<PathObserver>(std::size_t chunk)>& make_observer,
             const std::function<void(std::size_t chunk, std::unique_ptr<PathObserver>)>& collect) const;

    /// Typed convenience wrapper: returns one observer per chunk, in chunk order.
    template <class Obs, class Make>
    std::vector<std::unique_ptr<Obs>> run_collect(std::size_t steps, Make make) const {
        std::vector<std::unique_ptr<Obs>> out(chunk_count());
        run(
            steps, [&](std::size_t c) -> std::unique_ptr<PathObserver> { return make(c); },
            [&](std::size_t c, std::unique_ptr<PathObserver> o) { out[c].reset(static_cast<Obs*>(o.release())); });
        return out;
    }

private:
    friend class PathState;

    void run_chunk(std::size_t chunk, std::size_t steps, PathObserver& obs) const;
    void draw_step(std::mt19937_64& rng, bool flip, std::vector<double>& eps, double& z,
                   std::vector<double>& dwbar) const;
    [[nodiscard]] double nonlinear_compensator(double tenor, std::size_t steps_done) const;

    const ForwardCurve* curve0_;
    ModelParams params_;
    SimConfig config_;
    std::vector<double> theta_;
    Eigen::MatrixXd chol_;
    Eigen::MatrixXd u_chol_;
    Eigen::MatrixXd omega_rho_;  // correlation of the factor shocks actually simulated
    Eigen::VectorXd drift_step_;  // sqrt(dt) TrI mu
    std::vector<MixtureComponent> mixture_;
    bool symmetric_ = true;
    bool nonlinear_table_ = false;
    std::vector<double> psi_prefix_;  // prefix sums of the per-lag log-MGF, lag grid dt
};

/// Mean and standard error of a Monte Carlo estimate.
struct McEstimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t samples = 0;
};

/// Welford accumulator that merges across chunks.
class RunningStat {
public:
    void add(double x);
    void merge(const RunningStat& o);
    [[nodiscard]] double mean() const { return mean_; }
    [[nodiscard]] double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    [[nodiscard]] std::size_t count() const { return n_; }
    [[nodiscard]] McEstimate estimate() const;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// E[sqrt((1/(t2-t1)) int_{t1}^{t2} xi_{t1}^u du)], t1 on the step grid.
[[nodiscard]] McEstimate mc_vix_future(const Simulator& sim, double t1, double t2);

/// Annualised one-step vol of log V for futures priced by the model pricing formula on the
/// simulated curve, expiry tenors `tau1` (each > dt). Also returns the MC regression loadings.
struct FutureVolEstimate {
    double tau1 = 0.0;
    McEstimate vol;  ///< std(delta log V) / sqrt(dt), SE from the delta method
    std::vector<double> loadings;  ///< OLS of delta log V / sqrt(dt) on dW^a / sqrt(dt)... per factor
};
[[nodiscard]] std::vector<FutureVolEstimate> mc_future_vols(const Simulator& sim, const std::vector<double>& tau1,
                                                            double window = kVixWindow);

/// Sample mean of xi_T^u / xi_0^u over grid tenors u (absolute times >= horizon).
[[nodiscard]] std::vector<McEstimate> mc_curve_martingale(const Simulator& sim, double horizon,
                                                          const std::vector<double>& u);

/// Realised variance (1/T) sum r^2 over [0, T].
[[nodiscard]] McEstimate mc_realized_variance(const Simulator& sim, double horizon);

/// Leverage and clustering estimators at lag steps: E[r_0 r_L^2] / (sqrt(E r_0^2) E r_L^2) and
/// Cov(r_0^2, r_L^2) / (E r_0^2 E r_L^2), SEs by the delta method over paths.
struct LagCorrelation {
    std::size_t lag = 0;
    McEstimate leverage;
    McEstimate clustering;
};
[[nodiscard]] std::vector<LagCorrelation> mc_lag_correlations(const Simulator& sim, const std::vector<std::size_t>& lags);

/// Terminal log-returns log(S_T/S_0), for option pricing and skewness.
[[nodiscard]] std::vector<double> mc_terminal_log_returns(const Simulator& sim, double horizon);

/// Skewness of log(S_T/S_0) with a delta-method SE.
[[nodiscard]] McEstimate mc_return_skewness(const Simulator& sim, double horizon);

/// Black-Scholes call price and implied vol (zero rates, unit-free spot).
[[nodiscard]] double bs_call(double spot, double strike, double vol, double maturity);
[[nodiscard]] double bs_vega(double spot, double strike, double vol, double maturity);
/// Bracketed root-find to 1e-10; returns NaN when the price is outside arbitrage bounds.
[[nodiscard]] double implied_vol(double price, double spot, double strike, double maturity);

struct SmilePoint {
    double moneyness = 0.0;  ///< K / S - 1
    McEstimate implied_vol;
};
/// Implied vols of simulated call prices (spot-measure control variate E[S_T] = S_0).
[[nodiscard]] std::vector<SmilePoint> mc_smile(const Simulator& sim, double maturity,
                                               const std::vector<double>& moneyness);

/// Total variance of a variance swap over [0, T]: E[(1/T) sum_u (delta V_u)^2] / V_0^2 with the
/// daily mark V_u = (1/T)(accrued sum r^2 + int_u^T xi_u^s ds).
[[nodiscard]] McEstimate mc_varswap_variance(const Simulator& sim, double maturity);

/// Average of (delta log V)^2 / dt over the life of a future with expiry `expiry`, priced by the model
/// pricing formula along the path.
[[nodiscard]] McEstimate mc_future_total_variance(const Simulator& sim, double expiry, double window = kVixWindow);

/// Binary dump of per-path spot and xi on a tenor grid. Layout, little-endian:
/// uint64 paths, uint64 steps, uint64 grid_size, grid doubles, then for each path and step
/// (spot, xi(t + grid_0), ..., xi(t + grid_{m-1})) as doubles.
void dump_paths(const Simulator& sim, std::size_t steps, const std::vector<double>& tenor_grid,
                const std::filesystem::path& out);

}  // namespace vardyn
