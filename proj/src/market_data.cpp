#include "vardyn/market_data.hpp"

#include "vardyn/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace vardyn {

namespace {

using namespace std::chrono;

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        while (!field.empty() && field.front() == ' ') field.erase(field.begin());
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end) {
        throw ValidationError("not a number: '" + text + "'");
    }
    return v;
}

/// Calls row(fields, line_no) for every data row; the header must match `header` exactly.
template <class RowFn>
void read_csv(const std::filesystem::path& path, const std::vector<std::string>& header, RowFn row) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    bool seen_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv(line);
        if (!seen_header) {
            if (fields != header) {
                throw ParseError(path.string(), line_no, "unexpected header");
            }
            seen_header = true;
            continue;
        }
        if (fields.size() != header.size()) {
            throw ParseError(path.string(), line_no,
                             "expected " + std::to_string(header.size()) + " fields");
        }
        try {
            row(fields, line_no);
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(path.string(), line_no, e.what());
        }
    }
    if (!seen_header) {
        throw ParseError(path.string(), line_no, "missing header");
    }
}

bool is_weekend(Date d) {
    const weekday wd{d};
    return wd == Saturday || wd == Sunday;
}

// Weekdays in (from, to] for from <= to.
int weekdays_between(Date from, Date to) {
    const int days = (to - from).count();
    int count = (days / 7) * 5;
    Date cursor = from + std::chrono::days{(days / 7) * 7};
    while (cursor < to) {
        cursor += std::chrono::days{1};
        if (!is_weekend(cursor)) ++count;
    }
    return count;
}

}  // namespace

Date parse_date(std::string_view text) {
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw ValidationError("bad date '" + std::string(text) + "', expected YYYY-MM-DD");
    }
    auto parse_part = [&](std::size_t pos, std::size_t len, auto& out) {
        auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
        if (ec != std::errc{} || ptr != text.data() + pos + len) {
            throw ValidationError("bad date '" + std::string(text) + "'");
        }
    };
    parse_part(0, 4, y);
    parse_part(5, 2, m);
    parse_part(8, 2, d);
    const year_month_day ymd{year{y}, month{m}, day{d}};
    if (!ymd.ok()) {
        throw ValidationError("invalid calendar date '" + std::string(text) + "'");
    }
    return sys_days{ymd};
}

std::string format_date(Date d) {
    const year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

BusinessCalendar::BusinessCalendar(std::vector<Date> holidays) : holidays_(std::move(holidays)) {
    std::sort(holidays_.begin(), holidays_.end());
    holidays_.erase(std::unique(holidays_.begin(), holidays_.end()), holidays_.end());
}

BusinessCalendar BusinessCalendar::from_holiday_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open " + path.string());
    }
    std::vector<Date> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        try {
            out.push_back(parse_date(line));
        } catch (const std::exception& e) {
            throw ParseError(path.string(), line_no, e.what());
        }
    }
    return BusinessCalendar(std::move(out));
}

bool BusinessCalendar::is_business_day(Date d) const {
    return !is_weekend(d) && !std::binary_search(holidays_.begin(), holidays_.end(), d);
}

int BusinessCalendar::business_days_between(Date from, Date to) const {
    if (to < from) return -business_days_between(to, from);
    int count = weekdays_between(from, to);
    const auto lo = std::upper_bound(holidays_.begin(), holidays_.end(), from);
    const auto hi = std::upper_bound(holidays_.begin(), holidays_.end(), to);
    for (auto it = lo; it != hi; ++it) {
        if (!is_weekend(*it)) --count;
    }
    return count;
}

Date BusinessCalendar::add_business_days(Date d, int n) const {
    const int step = n >= 0 ? 1 : -1;
    for (int moved = 0; moved != n;) {
        d += std::chrono::days{step};
        if (is_business_day(d)) moved += step;
    }
    return d;
}

SpotSeries make_spot_series(std::vector<Date> dates, std::vector<double> closes) {
    if (dates.size() != closes.size()) {
        throw ValidationError("spot: dates and closes differ in length");
    }
    std::vector<std::size_t> order(dates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dates[a] < dates[b]; });
    SpotSeries s;
    s.dates.reserve(dates.size());
    s.closes.reserve(dates.size());
    for (std::size_t i : order) {
        if (!(closes[i] > 0.0)) {
            throw ValidationError("spot: non-positive close on " + format_date(dates[i]));
        }
        if (!s.dates.empty() && s.dates.back() == dates[i]) {
            throw ValidationError("spot: duplicate date " + format_date(dates[i]));
        }
        s.dates.push_back(dates[i]);
        s.closes.push_back(closes[i]);
    }
    for (std::size_t i = 1; i < s.closes.size(); ++i) {
        s.returns.push_back((s.closes[i] - s.closes[i - 1]) / s.closes[i - 1]);
    }
    return s;
}

SpotSeries load_spot(const std::filesystem::path& path) {
    std::vector<Date> dates;
    std::vector<double> closes;
    read_csv(path, {"date", "close"}, [&](const std::vector<std::string>& f, std::size_t) {
        dates.push_back(parse_date(f[0]));
        closes.push_back(parse_double(f[1]));
    });
    return make_spot_series(std::move(dates), std::move(closes));
}

double vix_adjustment_factor(double n_returns) {
    if (!(n_returns > 0.0)) {
        throw ValidationError("vix adjustment: zero business days in window");
    }
    return std::sqrt(kTradingDaysPerYear / 365.0 * 30.0 / n_returns);
}

double adjust_vix_quote(double raw, Date window_start, const BusinessCalendar& calendar) {
    const int n = calendar.business_days_between(window_start, window_start + std::chrono::days{30});
    return raw * vix_adjustment_factor(n);
}

double liquidity_sigma(double volume, const LiquidityConfig& config) {
    return config.scale / std::sqrt(std::max(volume, config.min_volume));
}

const FutureQuote* FuturesObservation::find(Date expiry) const {
    auto it = std::lower_bound(futures.begin(), futures.end(), expiry,
                               [](const FutureQuote& q, Date e) { return q.expiry < e; });
    return (it != futures.end() && it->expiry == expiry) ? &*it : nullptr;
}

std::vector<FuturesRow> load_futures_rows(const std::filesystem::path& path) {
    std::vector<FuturesRow> rows;
    read_csv(path, {"date", "expiry", "settle", "volume"},
             [&](const std::vector<std::string>& f, std::size_t) {
                 FuturesRow r{parse_date(f[0]), parse_date(f[1]), parse_double(f[2]),
                              parse_double(f[3])};
                 if (!(r.settle > 0.0)) throw ValidationError("non-positive settle");
                 if (r.volume < 0.0) throw ValidationError("negative volume");
                 rows.push_back(r);
             });
    return rows;
}

std::map<Date, double> load_levels(const std::filesystem::path& path) {
    std::map<Date, double> out;
    read_csv(path, {"date", "level"}, [&](const std::vector<std::string>& f, std::size_t) {
        const Date d = parse_date(f[0]);
        const double v = parse_double(f[1]);
        if (!(v > 0.0)) throw ValidationError("non-positive level");
        if (!out.emplace(d, v).second) throw ValidationError("duplicate date " + f[0]);
    });
    return out;
}

ObservationSet assemble_observations(const std::vector<FuturesRow>& rows,
                                     const std::map<Date, double>& vix_levels,
                                     const BusinessCalendar& calendar,
                                     const LiquidityConfig& liquidity) {
    std::map<Date, std::vector<FuturesRow>> by_date;
    for (const auto& r : rows) {
        if (r.expiry < r.date) continue;  // expired contracts carry no information
        by_date[r.date].push_back(r);
    }

    // Exponentially smoothed volume per expiry, in date order.
    std::map<Date, double> smoothed;
    const double decay = liquidity.smoothing_half_life_days > 0.0
                             ? std::exp(-std::log(2.0) / liquidity.smoothing_half_life_days)
                             : 0.0;

    ObservationSet set;
    set.calendar = calendar;
    for (auto& [date, day_rows] : by_date) {
        std::sort(day_rows.begin(), day_rows.end(),
                  [](const FuturesRow& a, const FuturesRow& b) { return a.expiry < b.expiry; });
        FuturesObservation obs;
        obs.date = date;
        if (auto it = vix_levels.find(date); it != vix_levels.end()) {
            obs.vix_cash = adjust_vix_quote(it->second / 100.0, date, calendar);
        }
        for (const auto& r : day_rows) {
            if (!obs.futures.empty() && obs.futures.back().expiry == r.expiry) {
                throw ValidationError("duplicate future " + format_date(r.expiry) + " on " +
                                      format_date(date));
            }
            double volume = r.volume;
            if (decay > 0.0) {
                auto [it, fresh] = smoothed.emplace(r.expiry, volume);
                if (!fresh) it->second = decay * it->second + (1.0 - decay) * volume;
                volume = it->second;
            }
            FutureQuote q;
            q.expiry = r.expiry;
            q.price = adjust_vix_quote(r.settle / 100.0, r.expiry, calendar);
            q.volume = volume;
            q.liquidity_sigma = liquidity_sigma(volume, liquidity);
            obs.futures.push_back(q);
        }
        set.days.push_back(std::move(obs));
    }
    return set;
}

}  // namespace vardyn
