#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cavar::labeling {

enum class HorizonAnchor {
    /// The last H observations of the supplied window.
    Trailing,
    /// The first H observations.
    Leading,
};

struct ThresholdConfig {
    std::size_t horizon = 250;
    double alpha = 0.05;
    HorizonAnchor anchor = HorizonAnchor::Trailing;
};

/// c = max{ r_k : r_k < VaR_k } over the horizon, i.e. the mildest loss that
/// still breached the VaR. Throws NoViolations when nothing breached.
double select_threshold(std::span<const double> returns, std::span<const double> var,
                        const ThresholdConfig& config);

struct RiskLabelSeries {
    /// 1 = high risk (r_t <= c), 0 = low risk.
    std::vector<std::uint8_t> labels;
    double threshold = 0.0;

    std::size_t size() const noexcept { return labels.size(); }
};

RiskLabelSeries label_returns(std::span<const double> returns, double threshold);

struct ClassRatio {
    double rho = 1.0;
    std::size_t minority = 0;
    std::size_t majority = 0;
};

/// rho = minority count / majority count. Throws SingleClass.
ClassRatio class_ratio(std::span<const std::uint8_t> labels);

}  // namespace cavar::labeling
