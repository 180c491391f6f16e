#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vardyn {

using Date = std::chrono::sys_days;

/// Parses YYYY-MM-DD. Throws ValidationError on anything else.
[[nodiscard]] Date parse_date(std::string_view text);
[[nodiscard]] std::string format_date(Date d);

/// Model clock: one business day is 1/252 of a year.
inline constexpr double kTradingDaysPerYear = 252.0;
inline constexpr double kDeltaT = 1.0 / kTradingDaysPerYear;
/// Averaging window of the VIX definition, 30 calendar days.
inline constexpr double kVixWindow = 30.0 / 365.0;

/// Weekday calendar with an optional holiday list.
class BusinessCalendar {
public:
    BusinessCalendar() = default;
    explicit BusinessCalendar(std::vector<Date> holidays);

    /// One ISO date per line; blank lines and '#' comments ignored.
    [[nodiscard]] static BusinessCalendar from_holiday_file(const std::filesystem::path& path);

    [[nodiscard]] bool is_business_day(Date d) const;
    /// Number of business days in (from, to]; negative when to < from.
    [[nodiscard]] int business_days_between(Date from, Date to) const;
    [[nodiscard]] Date add_business_days(Date d, int n) const;
    /// Year fraction on the model clock between two dates.
    [[nodiscard]] double year_fraction(Date from, Date to) const {
        return business_days_between(from, to) / kTradingDaysPerYear;
    }

private:
    std::vector<Date> holidays_;  // sorted, unique
};

struct SpotSeries {
    std::vector<Date> dates;
    std::vector<double> closes;
    std::vector<double> returns;  // r_t = (S_{t+1} - S_t) / S_t, size = dates.size() - 1
};

/// Builds a validated series: sorts by date, rejects duplicates and non-positive closes.
[[nodiscard]] SpotSeries make_spot_series(std::vector<Date> dates, std::vector<double> closes);
/// Reads `date,close`.
[[nodiscard]] SpotSeries load_spot(const std::filesystem::path& path);

/// sqrt(252/365 * 30/n_returns). Equal to 1 when n_returns = 30*252/365.
[[nodiscard]] double vix_adjustment_factor(double n_returns);
/// Rescales a quote whose variance window is (window_start, window_start + 30 calendar days]
/// by the number of business-day returns in that window.
[[nodiscard]] double adjust_vix_quote(double raw, Date window_start, const BusinessCalendar& calendar);

struct LiquidityConfig {
    double scale = 3.0;          ///< c in c / sqrt(volume); annualised error vol at volume 1
    double min_volume = 100.0;   ///< volume floor v_min
    double smoothing_half_life_days = 0.0;  ///< 0 = raw volume
};

/// c / sqrt(max(volume, v_min)); annualised error vol of a futures variation.
[[nodiscard]] double liquidity_sigma(double volume, const LiquidityConfig& config);

struct FutureQuote {
    Date expiry;
    double price = 0.0;            ///< adjusted, decimal (0.20 = 20 vol points)
    double volume = 0.0;           ///< contracts/day after optional smoothing
    double liquidity_sigma = 0.0;  ///< annualised error vol
};

struct FuturesObservation {
    Date date;
    /// Adjusted VIX level, decimal. Used for curve extraction only, never in the variation likelihood.
    std::optional<double> vix_cash;
    std::vector<FutureQuote> futures;  ///< strictly increasing expiries, all >= date

    [[nodiscard]] const FutureQuote* find(Date expiry) const;
};

struct ObservationSet {
    std::vector<FuturesObservation> days;
    BusinessCalendar calendar;
};

struct FuturesRow {
    Date date;
    Date expiry;
    double settle = 0.0;  ///< vol points, unadjusted
    double volume = 0.0;
};

/// Reads `date,expiry,settle,volume`.
[[nodiscard]] std::vector<FuturesRow> load_futures_rows(const std::filesystem::path& path);
/// Reads a two-column `date,level` file (vix.csv, vvix.csv). Levels stay in file units.
[[nodiscard]] std::map<Date, double> load_levels(const std::filesystem::path& path);

/// Groups rows by date, converts vol points to decimals, applies the return-count
/// adjustment and attaches liquidity error vols.
[[nodiscard]] ObservationSet assemble_observations(const std::vector<FuturesRow>& rows,
                                                   const std::map<Date, double>& vix_levels,
                                                   const BusinessCalendar& calendar,
                                                   const LiquidityConfig& liquidity);

}  // namespace vardyn
