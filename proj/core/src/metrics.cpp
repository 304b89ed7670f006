#include "cavar/metrics.hpp"

#include <cmath>

#include "cavar/error.hpp"

namespace cavar::metrics {

ConfusionMatrix confusion(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels) {
    if (predictions.size() != labels.size()) {
        fail(ErrorCode::LengthMismatch, "confusion: predictions and labels differ in length");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool p = predictions[i] != 0;
        const bool y = labels[i] != 0;
        if (p && y) ++cm.tp;
        else if (p) ++cm.fp;
        else if (y) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

double f1_score(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

Scores scores(const ConfusionMatrix& cm) {
    if (cm.total() == 0) {
        fail(ErrorCode::EmptyMatrix, "scores: empty confusion matrix");
    }
    Scores s;
    auto ratio = [](std::size_t num, std::size_t den, bool& undefined) {
        undefined = den == 0;
        return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    s.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    s.precision = ratio(cm.tp, cm.tp + cm.fp, s.precision_undefined);
    s.recall = ratio(cm.tp, cm.tp + cm.fn, s.recall_undefined);
    s.specificity = ratio(cm.tn, cm.tn + cm.fp, s.specificity_undefined);
    s.f1_undefined = s.precision + s.recall == 0.0;
    s.f1 = f1_score(s.precision, s.recall);
    s.g_mean = std::sqrt(s.recall * s.specificity);
    return s;
}

}  // namespace cavar::metrics
