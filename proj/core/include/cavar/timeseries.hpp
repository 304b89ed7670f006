#pragma once

#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cavar {

using Date = std::chrono::year_month_day;

/// Parses an ISO-8601 calendar date (YYYY-MM-DD).
Date parse_date(std::string_view text);
std::string format_date(Date d);

/// Half-open index range [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    bool empty() const noexcept { return end <= begin; }
};

struct PriceSeries {
    std::vector<Date> dates;
    std::vector<double> close;
    // Either empty or the same length as close.
    std::vector<double> open;
    std::vector<double> high;
    std::vector<double> low;

    std::size_t size() const noexcept { return close.size(); }
    /// Checks strictly increasing dates and strictly positive prices.
    void validate() const;
};

/// values[t] = ln(close[t+1] / close[t]), dated at the later close.
struct ReturnSeries {
    std::vector<Date> dates;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    ReturnSeries slice(IndexRange range) const;
};

/// Column-major feature table; row i is dated dates[i].
struct FeatureMatrix {
    std::vector<std::string> names;
    std::vector<Date> dates;
    std::vector<std::vector<double>> columns;

    std::size_t rows() const noexcept {
        return !dates.empty() ? dates.size() : (columns.empty() ? 0 : columns.front().size());
    }
    std::size_t cols() const noexcept { return columns.size(); }
    std::vector<double> row(std::size_t i) const;
    FeatureMatrix slice(IndexRange range) const;
};

struct SplitSpec {
    double train = 0.6;
    double validation = 0.2;
    double test = 0.2;
};

struct SplitBounds {
    IndexRange train;
    IndexRange validation;
    IndexRange test;
};

/// Parses CSV with a header containing at least `date` and `close`; `open`,
/// `high`, `low` are picked up when present and other columns are ignored.
/// Rows with an empty close are dropped.
PriceSeries read_price_csv(std::istream& in);
PriceSeries read_price_csv_file(const std::string& path);
void write_price_csv(std::ostream& out, const PriceSeries& prices);

ReturnSeries compute_log_returns(const PriceSeries& prices);

/// Boundaries use floor(fraction * n) for train and validation; the
/// remainder goes to test.
SplitBounds split_bounds(std::size_t n, const SplitSpec& spec);

template <class Series>
struct Split {
    Series train;
    Series validation;
    Series test;
};

Split<ReturnSeries> chronological_split(const ReturnSeries& series, const SplitSpec& spec);
Split<FeatureMatrix> chronological_split(const FeatureMatrix& matrix, const SplitSpec& spec);

struct ColumnScale {
    std::string name;
    double min = 0.0;
    double max = 0.0;
};

enum class ConstantColumnPolicy { Drop, Throw };

struct Normalized {
    FeatureMatrix matrix;
    std::vector<ColumnScale> scales;
    std::size_t clamp_count = 0;
    std::vector<std::string> dropped;
};

/// Min-max scaling with statistics taken from fit_window only; rows outside
/// the window are clamped into [0, 1].
Normalized minmax_normalize(const FeatureMatrix& matrix, IndexRange fit_window,
                            ConstantColumnPolicy policy = ConstantColumnPolicy::Drop);

/// Applies previously fitted scales (matched by column order).
Normalized apply_minmax(const FeatureMatrix& matrix, const std::vector<ColumnScale>& scales);

enum class IndicatorKind { SMA, EMA, RSI, BollingerUpper, BollingerLower };

/// Trailing-window indicator aligned with the price index; entries without a
/// full window are empty.
std::vector<std::optional<double>> compute_indicator(const PriceSeries& prices, IndicatorKind kind,
                                                     std::size_t window);

enum class Signal : int { Sell = -1, Stay = 0, Buy = 1 };
enum class Strategy { SMACross, EMACross, RSIRule };

struct SignalConfig {
    std::size_t fast = 5;
    std::size_t slow = 15;
    std::size_t rsi_window = 14;
    double rsi_lower = 30.0;
    double rsi_upper = 70.0;
};

/// Event-coded signals: Buy/Sell only on the day a cross happens.
std::vector<std::optional<Signal>> build_trading_signal(const PriceSeries& prices, Strategy strategy,
                                                        const SignalConfig& config = {});

}  // namespace cavar
