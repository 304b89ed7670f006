#include "cavar/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "cavar/csv.hpp"
#include "cavar/error.hpp"

namespace cavar {

Date parse_date(std::string_view text) {
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    const std::string s(text.substr(0, 10));
    if (s.size() != 10 || s[4] != '-' || s[7] != '-' || std::sscanf(s.c_str(), "%4d-%2u-%2u", &y, &m, &d) != 3) {
        fail(ErrorCode::ParseError, "invalid ISO-8601 date '" + std::string(text) + "'");
    }
    const Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!date.ok()) {
        fail(ErrorCode::ParseError, "invalid calendar date '" + std::string(text) + "'");
    }
    return date;
}

std::string format_date(Date d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
}

void PriceSeries::validate() const {
    if (dates.size() != close.size()) {
        fail(ErrorCode::LengthMismatch, "price series: dates and closes differ in length");
    }
    for (const auto* col : {&open, &high, &low}) {
        if (!col->empty() && col->size() != close.size()) {
            fail(ErrorCode::LengthMismatch, "price series: optional column length differs from close");
        }
    }
    for (std::size_t i = 0; i < close.size(); ++i) {
        if (!(close[i] > 0.0) || !std::isfinite(close[i])) {
            fail(ErrorCode::NonPositivePrice, "non-positive close at index " + std::to_string(i));
        }
        if (i > 0 && !(dates[i - 1] < dates[i])) {
            fail(ErrorCode::ParseError, "dates not strictly increasing at index " + std::to_string(i));
        }
    }
}

ReturnSeries ReturnSeries::slice(IndexRange range) const {
    ReturnSeries out;
    if (!dates.empty()) {
        out.dates.assign(dates.begin() + static_cast<std::ptrdiff_t>(range.begin),
                         dates.begin() + static_cast<std::ptrdiff_t>(range.end));
    }
    out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(range.begin),
                      values.begin() + static_cast<std::ptrdiff_t>(range.end));
    return out;
}

std::vector<double> FeatureMatrix::row(std::size_t i) const {
    std::vector<double> r(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) r[c] = columns[c][i];
    return r;
}

FeatureMatrix FeatureMatrix::slice(IndexRange range) const {
    FeatureMatrix out;
    out.names = names;
    const auto b = static_cast<std::ptrdiff_t>(range.begin);
    const auto e = static_cast<std::ptrdiff_t>(range.end);
    if (!dates.empty()) out.dates.assign(dates.begin() + b, dates.begin() + e);
    for (const auto& col : columns) out.columns.emplace_back(col.begin() + b, col.begin() + e);
    return out;
}

PriceSeries read_price_csv(std::istream& in) {
    const csv::Table table = csv::read(in);
    const int date_col = table.column("date");
    const int close_col = table.column("close");
    if (date_col < 0 || close_col < 0) {
        fail(ErrorCode::ParseError, "price csv: header must contain 'date' and 'close'");
    }
    const int open_col = table.column("open");
    const int high_col = table.column("high");
    const int low_col = table.column("low");

    PriceSeries prices;
    auto cell = [](const std::vector<std::string>& row, int col) -> std::string_view {
        return col >= 0 && static_cast<std::size_t>(col) < row.size() ? std::string_view(row[col]) : std::string_view();
    };
    auto as_number = [](std::string_view text) {
        return text.empty() || text == "null" || text == "NaN" ? NAN : csv::parse_double(text);
    };
    for (const auto& row : table.rows) {
        const std::string_view close_text = cell(row, close_col);
        const double close = as_number(close_text);
        // Missing trading days are dropped rather than interpolated.
        if (std::isnan(close)) continue;
        prices.dates.push_back(parse_date(cell(row, date_col)));
        prices.close.push_back(close);
        if (open_col >= 0) prices.open.push_back(as_number(cell(row, open_col)));
        if (high_col >= 0) prices.high.push_back(as_number(cell(row, high_col)));
        if (low_col >= 0) prices.low.push_back(as_number(cell(row, low_col)));
    }
    prices.validate();
    return prices;
}

PriceSeries read_price_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::Io, "cannot open " + path);
    }
    return read_price_csv(in);
}

void write_price_csv(std::ostream& out, const PriceSeries& prices) {
    out << "date,open,high,low,close\n";
    auto or_close = [&](const std::vector<double>& col, std::size_t i) {
        return col.empty() ? prices.close[i] : col[i];
    };
    for (std::size_t i = 0; i < prices.size(); ++i) {
        csv::write_row(out, {format_date(prices.dates[i]), csv::format_double(or_close(prices.open, i)),
                             csv::format_double(or_close(prices.high, i)), csv::format_double(or_close(prices.low, i)),
                             csv::format_double(prices.close[i])});
    }
}

ReturnSeries compute_log_returns(const PriceSeries& prices) {
    if (prices.size() < 2) {
        fail(ErrorCode::TooShort, "log returns need at least 2 prices, got " + std::to_string(prices.size()));
    }
    for (std::size_t i = 0; i < prices.size(); ++i) {
        if (!(prices.close[i] > 0.0)) {
            fail(ErrorCode::NonPositivePrice, "non-positive close at index " + std::to_string(i));
        }
    }
    ReturnSeries out;
    out.values.reserve(prices.size() - 1);
    for (std::size_t i = 1; i < prices.size(); ++i) {
        out.values.push_back(std::log(prices.close[i] / prices.close[i - 1]));
        if (!prices.dates.empty()) out.dates.push_back(prices.dates[i]);
    }
    return out;
}

SplitBounds split_bounds(std::size_t n, const SplitSpec& spec) {
    const double sum = spec.train + spec.validation + spec.test;
    for (double f : {spec.train, spec.validation, spec.test}) {
        if (!(f > 0.0 && f < 1.0)) {
            fail(ErrorCode::InvalidParams, "split fractions must lie in (0,1)");
        }
    }
    if (std::fabs(sum - 1.0) > 1e-9) {
        fail(ErrorCode::InvalidParams, "split fractions must sum to 1");
    }
    // The small slack keeps e.g. 0.29 * 100 from flooring to 28.
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train * static_cast<double>(n) + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(spec.validation * static_cast<double>(n) + 1e-9));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
        fail(ErrorCode::EmptyPartition, "split of " + std::to_string(n) + " rows leaves an empty partition");
    }
    return {{0, n_train}, {n_train, n_train + n_val}, {n_train + n_val, n}};
}

Split<ReturnSeries> chronological_split(const ReturnSeries& series, const SplitSpec& spec) {
    const SplitBounds b = split_bounds(series.size(), spec);
    return {series.slice(b.train), series.slice(b.validation), series.slice(b.test)};
}

Split<FeatureMatrix> chronological_split(const FeatureMatrix& matrix, const SplitSpec& spec) {
    const SplitBounds b = split_bounds(matrix.rows(), spec);
    return {matrix.slice(b.train), matrix.slice(b.validation), matrix.slice(b.test)};
}

Normalized apply_minmax(const FeatureMatrix& matrix, const std::vector<ColumnScale>& scales) {
    if (scales.size() != matrix.cols()) {
        fail(ErrorCode::LengthMismatch, "normalization: scale count differs from column count");
    }
    Normalized out;
    out.matrix.names = matrix.names;
    out.matrix.dates = matrix.dates;
    out.scales = scales;
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
        const double lo = scales[c].min;
        const double span = scales[c].max - scales[c].min;
        std::vector<double> col(matrix.columns[c].size());
        for (std::size_t i = 0; i < col.size(); ++i) {
            double v = (matrix.columns[c][i] - lo) / span;
            if (v < 0.0 || v > 1.0) {
                v = std::clamp(v, 0.0, 1.0);
                ++out.clamp_count;
            }
            col[i] = v;
        }
        out.matrix.columns.push_back(std::move(col));
    }
    return out;
}

Normalized minmax_normalize(const FeatureMatrix& matrix, IndexRange fit_window, ConstantColumnPolicy policy) {
    if (fit_window.empty() || fit_window.end > matrix.rows()) {
        fail(ErrorCode::EmptyWindow, "normalization fit window is empty or out of range");
    }
    FeatureMatrix kept;
    kept.dates = matrix.dates;
    std::vector<ColumnScale> scales;
    std::vector<std::string> dropped;
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
        const auto& col = matrix.columns[c];
        const auto first = col.begin() + static_cast<std::ptrdiff_t>(fit_window.begin);
        const auto last = col.begin() + static_cast<std::ptrdiff_t>(fit_window.end);
        const auto [lo, hi] = std::minmax_element(first, last);
        if (!(*hi > *lo)) {
            if (policy == ConstantColumnPolicy::Throw) {
                fail(ErrorCode::ConstantColumn, "constant column '" + matrix.names[c] + "' in fit window");
            }
            dropped.push_back(matrix.names[c]);
            continue;
        }
        kept.names.push_back(matrix.names[c]);
        kept.columns.push_back(col);
        scales.push_back({matrix.names[c], *lo, *hi});
    }
    Normalized out = apply_minmax(kept, scales);
    out.dropped = std::move(dropped);
    return out;
}

std::vector<std::optional<double>> compute_indicator(const PriceSeries& prices, IndicatorKind kind,
                                                     std::size_t window) {
    const auto& p = prices.close;
    const std::size_t n = p.size();
    const std::size_t needed = kind == IndicatorKind::RSI ? window + 1 : window;
    if (window < 2 || n < needed) {
        fail(ErrorCode::WindowTooLarge, "indicator window " + std::to_string(window) + " does not fit " +
                                            std::to_string(n) + " prices");
    }
    std::vector<std::optional<double>> out(n);
    const auto w = static_cast<double>(window);

    auto trailing_mean = [&](std::size_t t) {
        double s = 0.0;
        for (std::size_t k = t + 1 - window; k <= t; ++k) s += p[k];
        return s / w;
    };

    switch (kind) {
        case IndicatorKind::SMA:
            for (std::size_t t = window - 1; t < n; ++t) out[t] = trailing_mean(t);
            break;
        case IndicatorKind::EMA: {
            const double k = 2.0 / (w + 1.0);
            double ema = trailing_mean(window - 1);
            out[window - 1] = ema;
            for (std::size_t t = window; t < n; ++t) {
                ema = k * p[t] + (1.0 - k) * ema;
                out[t] = ema;
            }
            break;
        }
        case IndicatorKind::RSI: {
            // Wilder smoothing seeded by the simple average of the first window changes.
            double gain = 0.0;
            double loss = 0.0;
            for (std::size_t t = 1; t <= window; ++t) {
                const double d = p[t] - p[t - 1];
                (d > 0.0 ? gain : loss) += std::fabs(d);
            }
            gain /= w;
            loss /= w;
            auto rsi = [](double g, double l) {
                if (l == 0.0) return g == 0.0 ? 50.0 : 100.0;
                return 100.0 - 100.0 / (1.0 + g / l);
            };
            out[window] = rsi(gain, loss);
            for (std::size_t t = window + 1; t < n; ++t) {
                const double d = p[t] - p[t - 1];
                gain = (gain * (w - 1.0) + std::max(d, 0.0)) / w;
                loss = (loss * (w - 1.0) + std::max(-d, 0.0)) / w;
                out[t] = rsi(gain, loss);
            }
            break;
        }
        case IndicatorKind::BollingerUpper:
        case IndicatorKind::BollingerLower: {
            const double sign = kind == IndicatorKind::BollingerUpper ? 1.0 : -1.0;
            for (std::size_t t = window - 1; t < n; ++t) {
                const double mean = trailing_mean(t);
                double ss = 0.0;
                for (std::size_t k = t + 1 - window; k <= t; ++k) ss += (p[k] - mean) * (p[k] - mean);
                out[t] = mean + sign * 2.0 * std::sqrt(ss / w);
            }
            break;
        }
    }
    return out;
}

std::vector<std::optional<Signal>> build_trading_signal(const PriceSeries& prices, Strategy strategy,
                                                        const SignalConfig& config) {
    const std::size_t n = prices.size();
    std::vector<std::optional<Signal>> out(n);
    if (strategy == Strategy::RSIRule) {
        const auto rsi = compute_indicator(prices, IndicatorKind::RSI, config.rsi_window);
        for (std::size_t t = 1; t < n; ++t) {
            if (!rsi[t] || !rsi[t - 1]) continue;
            const double prev = *rsi[t - 1];
            const double cur = *rsi[t];
            if (prev < config.rsi_lower && cur >= config.rsi_lower) {
                out[t] = Signal::Buy;
            } else if (prev > config.rsi_upper && cur <= config.rsi_upper) {
                out[t] = Signal::Sell;
            } else {
                out[t] = Signal::Stay;
            }
        }
        return out;
    }
    const IndicatorKind kind = strategy == Strategy::SMACross ? IndicatorKind::SMA : IndicatorKind::EMA;
    const auto fast = compute_indicator(prices, kind, config.fast);
    const auto slow = compute_indicator(prices, kind, config.slow);
    for (std::size_t t = 1; t < n; ++t) {
        if (!fast[t] || !slow[t] || !fast[t - 1] || !slow[t - 1]) continue;
        // Differences within rounding noise count as "equal" so a flat series never crosses.
        auto gap = [](double f, double s) {
            const double d = f - s;
            return std::fabs(d) <= 1e-12 * std::fabs(s) ? 0.0 : d;
        };
        const double before = gap(*fast[t - 1], *slow[t - 1]);
        const double now = gap(*fast[t], *slow[t]);
        if (before <= 0.0 && now > 0.0) {
            out[t] = Signal::Buy;
        } else if (before >= 0.0 && now < 0.0) {
            out[t] = Signal::Sell;
        } else {
            out[t] = Signal::Stay;
        }
    }
    return out;
}

}  // namespace cavar
