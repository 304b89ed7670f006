#include "cavar/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cavar/error.hpp"

namespace cavar::labeling {

double select_threshold(std::span<const double> returns, std::span<const double> var,
                        const ThresholdConfig& config) {
    if (returns.size() != var.size()) {
        fail(ErrorCode::LengthMismatch, "select_threshold: returns and VaR are not aligned");
    }
    if (config.horizon == 0 || config.horizon > returns.size()) {
        fail(ErrorCode::InvalidParams, "select_threshold: horizon " + std::to_string(config.horizon) +
                                           " exceeds the available history of " + std::to_string(returns.size()));
    }
    const std::size_t begin = config.anchor == HorizonAnchor::Trailing ? returns.size() - config.horizon : 0;
    const std::size_t end = begin + config.horizon;
    double c = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t k = begin; k < end; ++k) {
        if (returns[k] < var[k]) {
            c = any ? std::max(c, returns[k]) : returns[k];
            any = true;
        }
    }
    if (!any) {
        fail(ErrorCode::NoViolations, "select_threshold: no VaR violations within the horizon; widen H or raise alpha");
    }
    return c;
}

RiskLabelSeries label_returns(std::span<const double> returns, double threshold) {
    if (!std::isfinite(threshold)) {
        fail(ErrorCode::DomainError, "label_returns: threshold must be finite");
    }
    RiskLabelSeries out;
    out.threshold = threshold;
    out.labels.reserve(returns.size());
    for (double r : returns) out.labels.push_back(r <= threshold ? 1 : 0);
    return out;
}

ClassRatio class_ratio(std::span<const std::uint8_t> labels) {
    const auto ones = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
    const std::size_t zeros = labels.size() - ones;
    if (ones == 0 || zeros == 0) {
        fail(ErrorCode::SingleClass, "class_ratio: labels contain a single class");
    }
    ClassRatio out;
    out.minority = std::min(ones, zeros);
    out.majority = std::max(ones, zeros);
    out.rho = static_cast<double>(out.minority) / static_cast<double>(out.majority);
    return out;
}

}  // namespace cavar::labeling
