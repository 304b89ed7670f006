#pragma once

#include <cstdint>
#include <span>

namespace cavar::metrics {

/// Positive class is 1 (high risk).
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }
};

ConfusionMatrix confusion(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels);

struct Scores {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double specificity = 0.0;
    double f1 = 0.0;
    double g_mean = 0.0;
    // Set when the ratio had a zero denominator and was reported as 0.
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool specificity_undefined = false;
    bool f1_undefined = false;
};

Scores scores(const ConfusionMatrix& cm);

/// F1 from precision and recall directly (0 when both are 0).
double f1_score(double precision, double recall);

}  // namespace cavar::metrics
