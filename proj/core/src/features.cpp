#include "cavar/features.hpp"

#include <algorithm>
#include <charconv>
#include <optional>

#include "cavar/error.hpp"

namespace cavar::features {

namespace {

using Column = std::vector<std::optional<double>>;

std::optional<std::size_t> suffix_number(const std::string& name, std::string_view prefix) {
    if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
    std::size_t value = 0;
    const char* first = name.data() + prefix.size();
    const char* last = name.data() + name.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || value == 0) return std::nullopt;
    return value;
}

Column from_signals(const std::vector<std::optional<Signal>>& s) {
    Column out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i]) out[i] = static_cast<double>(static_cast<int>(*s[i]));
    }
    return out;
}

Column from_prices(const std::vector<double>& v, const char* name, std::size_t n) {
    if (v.size() != n) fail(ErrorCode::InvalidParams, std::string("feature ") + name + " needs that price column");
    return Column(v.begin(), v.end());
}

// Column indexed by price position; value at t is the state before r_t.
std::optional<Column> builtin(const std::string& name, const PriceSeries& prices, const ReturnSeries& returns,
                              const FeatureOptions& options) {
    const std::size_t n = prices.size();
    if (name == "Close") return from_prices(prices.close, "Close", n);
    if (name == "Open") return from_prices(prices.open, "Open", n);
    if (name == "High") return from_prices(prices.high, "High", n);
    if (name == "Low") return from_prices(prices.low, "Low", n);
    if (name == "BB upper") return compute_indicator(prices, IndicatorKind::BollingerUpper, options.bollinger_window);
    if (name == "BB lower") return compute_indicator(prices, IndicatorKind::BollingerLower, options.bollinger_window);
    if (name == "Signal 1") return from_signals(build_trading_signal(prices, Strategy::SMACross, options.signals));
    if (name == "Signal 2") return from_signals(build_trading_signal(prices, Strategy::EMACross, options.signals));
    if (name == "Signal 3") return from_signals(build_trading_signal(prices, Strategy::RSIRule, options.signals));
    if (auto w = suffix_number(name, "SMA ")) return compute_indicator(prices, IndicatorKind::SMA, *w);
    if (auto w = suffix_number(name, "EMA ")) return compute_indicator(prices, IndicatorKind::EMA, *w);
    if (auto w = suffix_number(name, "RSI ")) return compute_indicator(prices, IndicatorKind::RSI, *w);
    if (auto k = suffix_number(name, "Return lag ")) {
        Column out(n);
        for (std::size_t t = *k; t < returns.size(); ++t) out[t] = returns.values[t - *k];
        return out;
    }
    return std::nullopt;
}

}  // namespace

bool is_builtin_feature(const std::string& name) {
    static const char* fixed[] = {"Close", "Open", "High", "Low", "BB upper", "BB lower", "Signal 1", "Signal 2", "Signal 3"};
    if (std::find(std::begin(fixed), std::end(fixed), name) != std::end(fixed)) return true;
    return suffix_number(name, "SMA ") || suffix_number(name, "EMA ") || suffix_number(name, "RSI ") ||
           suffix_number(name, "Return lag ");
}

FeatureSet build_features(const PriceSeries& prices, const ReturnSeries& returns, const std::vector<std::string>& names,
                          const std::vector<ExtraColumn>& extra, const FeatureOptions& options) {
    if (returns.size() + 1 != prices.size()) {
        fail(ErrorCode::LengthMismatch, "build_features: returns must be one shorter than prices");
    }
    if (names.empty()) fail(ErrorCode::InvalidParams, "build_features: no features requested");
    const std::size_t n = returns.size();

    std::vector<Column> columns;
    for (const std::string& name : names) {
        auto it = std::find_if(extra.begin(), extra.end(), [&](const ExtraColumn& c) { return c.name == name; });
        if (it != extra.end()) {
            if (it->values.size() != n) {
                fail(ErrorCode::LengthMismatch, "build_features: column '" + name + "' is not aligned with returns");
            }
            columns.emplace_back(it->values.begin(), it->values.end());
            continue;
        }
        std::optional<Column> col = builtin(name, prices, returns, options);
        if (!col) fail(ErrorCode::InvalidParams, "build_features: unknown feature '" + name + "'");
        col->resize(n);
        columns.push_back(std::move(*col));
    }

    std::size_t first = 0;
    for (std::size_t j = 0; j < columns.size(); ++j) {
        std::size_t k = 0;
        while (k < n && !columns[j][k]) ++k;
        for (std::size_t t = k; t < n; ++t) {
            if (!columns[j][t]) {
                fail(ErrorCode::NonFinite, "build_features: feature '" + names[j] + "' has a gap after warm-up");
            }
        }
        first = std::max(first, k);
    }
    if (first >= n) fail(ErrorCode::TooShort, "build_features: no row has every feature defined");

    FeatureSet out;
    out.first_row = first;
    out.matrix.names = names;
    out.matrix.dates.assign(returns.dates.begin() + static_cast<std::ptrdiff_t>(first), returns.dates.end());
    for (const Column& c : columns) {
        std::vector<double> v;
        v.reserve(n - first);
        for (std::size_t t = first; t < n; ++t) v.push_back(*c[t]);
        out.matrix.columns.push_back(std::move(v));
    }
    return out;
}

}  // namespace cavar::features
