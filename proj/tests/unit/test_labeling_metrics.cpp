#include <cmath>

#include <gtest/gtest.h>

#include "cavar/error.hpp"
#include "cavar/labeling.hpp"
#include "cavar/metrics.hpp"
#include "cavar/rng.hpp"

namespace cavar {
namespace {

using labeling::ThresholdConfig;

ThresholdConfig horizon(std::size_t h) {
    ThresholdConfig c;
    c.horizon = h;
    return c;
}

TEST(Threshold, MildestViolation) {
    EXPECT_EQ(labeling::select_threshold(std::vector<double>{-0.05, -0.02, 0.01},
                                         std::vector<double>{-0.03, -0.03, -0.03}, horizon(3)),
              -0.05);
    EXPECT_EQ(labeling::select_threshold(std::vector<double>{-0.05, -0.035}, std::vector<double>{-0.03, -0.03},
                                         horizon(2)),
              -0.035);
}

TEST(Threshold, NoViolations) {
    try {
        labeling::select_threshold(std::vector<double>{0.01, 0.0}, std::vector<double>{-0.03, -0.03}, horizon(2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoViolations);
    }
}

TEST(Threshold, HorizonAnchor) {
    const std::vector<double> r{-0.10, 0.0, 0.0, -0.04};
    const std::vector<double> v(4, -0.03);
    EXPECT_EQ(labeling::select_threshold(r, v, horizon(2)), -0.04);
    ThresholdConfig lead = horizon(2);
    lead.anchor = labeling::HorizonAnchor::Leading;
    EXPECT_EQ(labeling::select_threshold(r, v, lead), -0.10);
}

TEST(Threshold, IsItselfTheMildestViolation) {
    Rng rng(4, "test.threshold");
    std::vector<double> r(500), v(500);
    for (std::size_t i = 0; i < r.size(); ++i) {
        r[i] = 0.01 * rng.normal();
        v[i] = -0.016 + 0.002 * rng.normal();
    }
    const double c = labeling::select_threshold(r, v, horizon(500));
    bool found = false;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (r[i] == c) found = found || c < v[i];
        if (r[i] < v[i]) EXPECT_LE(r[i], c);
    }
    EXPECT_TRUE(found);
}

TEST(Labels, BoundaryInclusive) {
    const auto l = labeling::label_returns(std::vector<double>{-0.03, -0.02, 0.0}, -0.02);
    EXPECT_EQ(l.labels, (std::vector<std::uint8_t>{1, 1, 0}));
    const auto none = labeling::label_returns(std::vector<double>{-0.03, 0.01}, -0.5);
    EXPECT_EQ(none.labels, (std::vector<std::uint8_t>{0, 0}));
}

TEST(Labels, MonotoneInThreshold) {
    Rng rng(2, "test.labels");
    std::vector<double> r(300);
    for (double& x : r) x = 0.01 * rng.normal();
    auto prev = labeling::label_returns(r, -0.03).labels;
    for (double c = -0.029; c < 0.03; c += 0.001) {
        const auto cur = labeling::label_returns(r, c).labels;
        for (std::size_t i = 0; i < r.size(); ++i) ASSERT_GE(cur[i], prev[i]);
        prev = cur;
    }
}

TEST(ClassRatio, Examples) {
    EXPECT_DOUBLE_EQ(labeling::class_ratio(std::vector<std::uint8_t>{1, 0, 0, 0}).rho, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(labeling::class_ratio(std::vector<std::uint8_t>{1, 0, 1, 0}).rho, 1.0);
    std::vector<std::uint8_t> counts(1039 + 2928, 0);
    std::fill(counts.begin(), counts.begin() + 1039, 1);
    EXPECT_DOUBLE_EQ(labeling::class_ratio(counts).rho, 1039.0 / 2928.0);
    EXPECT_NEAR(labeling::class_ratio(counts).rho, 0.3549, 1e-4);
    EXPECT_THROW(labeling::class_ratio(std::vector<std::uint8_t>{0, 0}), Error);
}

TEST(Confusion, Extremes) {
    const std::vector<std::uint8_t> y{1, 0, 0, 1, 0};
    const auto same = metrics::confusion(y, y);
    EXPECT_EQ(same.fp, 0u);
    EXPECT_EQ(same.fn, 0u);
    std::vector<std::uint8_t> flipped;
    for (auto v : y) flipped.push_back(1 - v);
    const auto opp = metrics::confusion(flipped, y);
    EXPECT_EQ(opp.tp, 0u);
    EXPECT_EQ(opp.tn, 0u);
    EXPECT_THROW(metrics::confusion(std::vector<std::uint8_t>{1}, y), Error);
}

TEST(Scores, PerfectAndRecallZero) {
    const metrics::Scores perfect = metrics::scores({5, 0, 7, 0});
    for (double v : {perfect.accuracy, perfect.precision, perfect.recall, perfect.specificity, perfect.f1,
                     perfect.g_mean}) {
        EXPECT_EQ(v, 1.0);
    }
    const metrics::Scores none = metrics::scores({0, 0, 10, 4});
    EXPECT_EQ(none.recall, 0.0);
    EXPECT_EQ(none.g_mean, 0.0);
    EXPECT_EQ(none.f1, 0.0);
    EXPECT_TRUE(none.precision_undefined);
}

TEST(Scores, F1FromPrecisionRecall) {
    EXPECT_NEAR(metrics::f1_score(0.853, 0.540), 0.6614, 1e-4);
    EXPECT_EQ(metrics::f1_score(0.0, 0.0), 0.0);
}

TEST(Scores, RandomMatrixInvariants) {
    Rng rng(9, "test.scores");
    for (int k = 0; k < 1000; ++k) {
        const metrics::ConfusionMatrix cm{rng.below(50), rng.below(50), rng.below(50), rng.below(50)};
        if (cm.total() == 0) continue;
        const metrics::Scores s = metrics::scores(cm);
        for (double v : {s.accuracy, s.precision, s.recall, s.specificity, s.f1, s.g_mean}) {
            ASSERT_GE(v, 0.0);
            ASSERT_LE(v, 1.0);
        }
        ASSERT_LE(s.g_mean, std::max(s.recall, s.specificity) + 1e-15);
        ASSERT_GE(s.g_mean, std::min(s.recall, s.specificity) - 1e-15);
        const double pos = static_cast<double>(cm.tp + cm.fn);
        const double neg = static_cast<double>(cm.tn + cm.fp);
        ASSERT_NEAR(s.accuracy, (s.recall * pos + s.specificity * neg) / static_cast<double>(cm.total()), 1e-12);
    }
}

}  // namespace
}  // namespace cavar
