#pragma once

#include <string>
#include <vector>

#include "cavar/timeseries.hpp"

namespace cavar::features {

/// A precomputed column aligned with the return index (values[t] must only
/// use information available before r_t, e.g. a one-step volatility forecast).
struct ExtraColumn {
    std::string name;
    std::vector<double> values;
};

struct FeatureOptions {
    std::size_t bollinger_window = 20;
    SignalConfig signals;
};

struct FeatureSet {
    /// Row i describes return index first_row + i and is dated like that return.
    FeatureMatrix matrix;
    std::size_t first_row = 0;
};

/// Builds the state row for every return r_t from prices up to close[t] (the
/// close before r_t is realised), lagged returns and supplied extra columns.
/// Recognised names: "Close", "Open", "High", "Low", "SMA n", "EMA n",
/// "RSI n", "BB upper", "BB lower", "Signal 1" (SMA cross), "Signal 2" (EMA
/// cross), "Signal 3" (RSI rule), "Return lag k", and any extra column name.
/// Rows before every requested column is defined are dropped.
FeatureSet build_features(const PriceSeries& prices, const ReturnSeries& returns, const std::vector<std::string>& names,
                          const std::vector<ExtraColumn>& extra = {}, const FeatureOptions& options = {});

/// True if `name` is understood without extra columns.
bool is_builtin_feature(const std::string& name);

}  // namespace cavar::features
