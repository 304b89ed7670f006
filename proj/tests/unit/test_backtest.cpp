#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "cavar/backtest.hpp"
#include "cavar/distributions.hpp"
#include "cavar/error.hpp"
#include "cavar/rng.hpp"

namespace cavar::backtest {
namespace {

// Independent oracle: LR_ind from transition counts with 0*log(0) = 0.
double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

double independence_oracle(const std::vector<std::uint8_t>& h) {
    double n00 = 0, n01 = 0, n10 = 0, n11 = 0;
    for (std::size_t t = 1; t < h.size(); ++t) {
        if (!h[t - 1]) (h[t] ? n01 : n00) += 1;
        else (h[t] ? n11 : n10) += 1;
    }
    const double p01 = n01 / (n00 + n01), p11 = n11 / (n10 + n11), p = (n01 + n11) / (n00 + n01 + n10 + n11);
    const double l0 = xlogy(n00 + n10, 1 - p) + xlogy(n01 + n11, p);
    const double l1 = xlogy(n00, 1 - p01) + xlogy(n01, p01) + xlogy(n10, 1 - p11) + xlogy(n11, p11);
    return -2 * (l0 - l1);
}

TEST(Violations, StrictInequality) {
    const std::vector<double> v{-0.03, -0.03};
    EXPECT_EQ(count_violations(v, v).x, 0u);
    const auto h = count_violations(std::vector<double>{-0.05, 0.01}, v);
    EXPECT_EQ(h.x, 1u);
    EXPECT_EQ(h.hits, (std::vector<std::uint8_t>{1, 0}));
    EXPECT_THROW(count_violations(std::vector<double>{1.0}, v), Error);
}

TEST(Kupiec, NullFixedPoint) {
    const TestResult r = kupiec_pof(50, 1000, 0.05);
    EXPECT_EQ(r.statistic, 0.0);
    EXPECT_EQ(r.p_value, 1.0);
    EXPECT_EQ(r.decision, Decision::AcceptH0);
    EXPECT_NEAR(r.critical_value, 3.8415, 1e-3);
}

TEST(Kupiec, ClosedForms) {
    const TestResult zero = kupiec_pof(0, 100, 0.05);
    EXPECT_NEAR(zero.statistic, -200 * std::log(0.95), 1e-10);
    EXPECT_EQ(zero.decision, Decision::RejectH0);
    const TestResult r73 = kupiec_pof(73, 1000, 0.05);
    const double p = 0.073;
    EXPECT_NEAR(r73.statistic, 2 * (73 * std::log(p / 0.05) + 927 * std::log((1 - p) / 0.95)), 1e-10);
    EXPECT_EQ(r73.decision, Decision::RejectH0);
}

TEST(Kupiec, MinimisedAtNominalRate) {
    const std::size_t n = 400;
    std::size_t best = 0;
    double best_lr = INFINITY;
    for (std::size_t x = 0; x <= n; ++x) {
        const double lr = kupiec_pof(x, n, 0.05).statistic;
        ASSERT_GE(lr, 0.0);
        if (lr < best_lr) {
            best_lr = lr;
            best = x;
        }
    }
    EXPECT_EQ(best, 20u);
    EXPECT_EQ(best_lr, 0.0);
}

TEST(Independence, NullFixedPoint) {
    // n00=2, n01=2, n10=2, n11=2: pi01 = pi11 = 0.5.
    const std::vector<std::uint8_t> h{0, 0, 0, 1, 1, 1, 0, 1, 0};
    EXPECT_NEAR(christoffersen_independence(h).statistic, 0.0, 1e-12);
}

TEST(Independence, ClusteredAndAlternating) {
    const std::vector<std::uint8_t> clustered{0, 0, 0, 0, 1, 1, 1, 1};
    const TestResult c = christoffersen_independence(clustered);
    EXPECT_NEAR(c.statistic, independence_oracle(clustered), 1e-12);
    EXPECT_EQ(c.decision, Decision::RejectH0);

    std::vector<std::uint8_t> alt(100);
    for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 == 0;
    const TestResult a = christoffersen_independence(alt);
    EXPECT_NEAR(a.statistic, independence_oracle(alt), 1e-10);
    EXPECT_EQ(a.decision, Decision::RejectH0);
    const TransitionCounts tc = transition_counts(alt);
    EXPECT_EQ(tc.n11, 0u);
    EXPECT_EQ(tc.n00, 0u);
}

TEST(ConditionalCoverage, Additivity) {
    Rng rng(6, "test.cc");
    for (int k = 0; k < 200; ++k) {
        std::vector<std::uint8_t> h(250 + rng.below(500));
        const double rate = 0.01 + 0.1 * rng.uniform();
        for (auto& v : h) v = rng.uniform() < rate;
        if (std::count(h.begin(), h.end(), 1) == 0) continue;
        const double uc = kupiec_pof(std::count(h.begin(), h.end(), 1), h.size(), 0.05).statistic;
        const double ind = christoffersen_independence(h).statistic;
        const TestResult cc = christoffersen_cc(h, 0.05);
        ASSERT_NEAR(cc.statistic, uc + ind, 1e-12);
        ASSERT_EQ(cc.df, 2);
    }
}

TEST(ConditionalCoverage, NullAndClustered) {
    std::vector<std::uint8_t> h;
    for (int rep = 0; rep < 5; ++rep) {
        for (int i = 0; i < 20; ++i) h.push_back(i == 7 ? 1 : 0);
    }
    h.push_back(0);
    const TestResult null = christoffersen_cc(std::vector<std::uint8_t>(h.begin(), h.end() - 1), 0.05);
    EXPECT_GE(null.p_value, 0.05);

    std::vector<std::uint8_t> clustered(200, 0);
    std::fill(clustered.begin() + 50, clustered.begin() + 80, 1);
    const TestResult c = christoffersen_cc(clustered, 0.05);
    EXPECT_NEAR(c.critical_value, 5.9915, 1e-3);
    EXPECT_EQ(c.decision, Decision::RejectH0);
    EXPECT_EQ(kupiec_pof(30, 200, 0.05).decision, Decision::RejectH0);
    EXPECT_EQ(christoffersen_independence(clustered).decision, Decision::RejectH0);
}

TEST(DecisionRule, UpperTailTestsRejectAboveCritical) {
    Rng rng(8, "test.decide");
    for (int k = 0; k < 300; ++k) {
        std::vector<std::uint8_t> h(100 + rng.below(300));
        for (auto& v : h) v = rng.uniform() < 0.08;
        for (const TestResult& r : {kupiec_pof(std::count(h.begin(), h.end(), 1), h.size(), 0.05),
                                    christoffersen_independence(h), christoffersen_cc(h, 0.05)}) {
            ASSERT_EQ(r.tail, Tail::Upper);
            ASSERT_EQ(r.decision == Decision::RejectH0, r.statistic > r.critical_value);
            ASSERT_EQ(r.decision == Decision::RejectH0, r.p_value < r.level);
        }
    }
}

// Exact null of W+ by enumerating all 2^n sign assignments.
std::vector<double> enumerate_signed_rank(std::size_t n) {
    const std::size_t max = n * (n + 1) / 2;
    std::vector<double> pmf(max + 1, 0.0);
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        std::size_t w = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) w += i + 1;
        }
        pmf[w] += 1.0;
    }
    for (double& p : pmf) p /= static_cast<double>(1u << n);
    return pmf;
}

TEST(Wilcoxon, DistributionMatchesEnumeration) {
    for (std::size_t n = 1; n <= 12; ++n) {
        const auto pmf = signed_rank_distribution(n);
        const auto ref = enumerate_signed_rank(n);
        ASSERT_EQ(pmf.size(), ref.size());
        for (std::size_t w = 0; w < pmf.size(); ++w) EXPECT_NEAR(pmf[w], ref[w], 1e-15);
        EXPECT_NEAR(std::accumulate(pmf.begin(), pmf.end(), 0.0), 1.0, 1e-13);
    }
}

TEST(Wilcoxon, AllNegativeDifferences) {
    const std::vector<double> a{1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<double> b;
    for (double x : a) b.push_back(x + 10.0 + x * 0.1);
    const TestResult r = wilcoxon_signed_rank(a, b, Alternative::Less);
    EXPECT_EQ(r.statistic, 0.0);
    EXPECT_EQ(r.p_value, 0.00390625);
    EXPECT_TRUE(r.exact);
    EXPECT_EQ(r.decision, Decision::RejectH0);
}

TEST(Wilcoxon, ExactTailProbability) {
    // Differences with ranks 1..8 where ranks 1, 3 and 4 are positive: W+ = 8.
    const std::vector<double> d{1, -2, 3, 4, -5, -6, -7, -8};
    std::vector<double> a(d), b(8, 0.0);
    const TestResult r = wilcoxon_signed_rank(a, b, Alternative::Less);
    EXPECT_EQ(r.statistic, 8.0);
    const auto ref = enumerate_signed_rank(8);
    const double tail = std::accumulate(ref.begin(), ref.begin() + 9, 0.0);
    EXPECT_NEAR(r.p_value, tail, 1e-15);
    EXPECT_NEAR(r.p_value, 0.0976, 5e-4);
}

TEST(Wilcoxon, ZeroDifferencesDroppedAndAllZeroRejected) {
    const std::vector<double> a{1, 2, 3};
    try {
        wilcoxon_signed_rank(a, a, Alternative::TwoSided);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AllZeroDifferences);
    }
    const TestResult r = wilcoxon_signed_rank(std::vector<double>{1, 2, 5}, std::vector<double>{1, 3, 7},
                                              Alternative::Less);
    EXPECT_NEAR(r.p_value, 0.25, 1e-15);
}

TEST(Wilcoxon, TwoSidedDoublesSmallerTail) {
    const std::vector<double> d{1, -2, 3, 4, -5, -6, -7, -8};
    const std::vector<double> zero(8, 0.0);
    const double less = wilcoxon_signed_rank(d, zero, Alternative::Less).p_value;
    const double greater = wilcoxon_signed_rank(d, zero, Alternative::Greater).p_value;
    const double two = wilcoxon_signed_rank(d, zero, Alternative::TwoSided).p_value;
    EXPECT_NEAR(two, std::min(1.0, 2 * std::min(less, greater)), 1e-15);
}

TEST(MannWhitney, IdenticalSamples) {
    const std::vector<double> a{1, 2, 3, 4, 5, 6};
    const TestResult r = mann_whitney_u(a, a, Alternative::TwoSided);
    EXPECT_EQ(mann_whitney_statistic(a, a), 18.0);
    EXPECT_NEAR(r.p_value, 1.0, 1e-12);
    EXPECT_EQ(r.decision, Decision::AcceptH0);
}

TEST(MannWhitney, SeparatedSamples) {
    std::vector<double> a, b;
    for (int i = 0; i < 30; ++i) {
        a.push_back(i);
        b.push_back(100 + i);
    }
    EXPECT_EQ(mann_whitney_statistic(a, b), 0.0);
    EXPECT_EQ(mann_whitney_statistic(b, a), 900.0);
    const TestResult r = mann_whitney_u(a, b, Alternative::Less);
    EXPECT_LT(r.p_value, 1e-9);
    EXPECT_GT(mann_whitney_u(a, b, Alternative::Greater).p_value, 0.999);
}

TEST(MannWhitney, PowerOnShiftedGaussians) {
    int rejections = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed, "test.mw");
        std::vector<double> a(700), b(700);
        for (double& x : a) x = rng.normal();
        for (double& x : b) x = rng.normal() + 0.5;
        if (mann_whitney_u(a, b, Alternative::TwoSided).p_value < 0.01) ++rejections;
    }
    EXPECT_GE(rejections, 19);
}

TEST(MannWhitney, EmptySample) { EXPECT_THROW(mann_whitney_u({}, std::vector<double>{1.0}, Alternative::Less), Error); }

TEST(RankTests, LowerTailDecisionConsistency) {
    Rng rng(12, "test.ranks");
    for (int k = 0; k < 200; ++k) {
        std::vector<double> a(8 + rng.below(30)), b(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = rng.normal();
            b[i] = rng.normal() + 0.3;
        }
        const TestResult r = wilcoxon_signed_rank(a, b, Alternative::Less);
        ASSERT_EQ(r.tail, Tail::Lower);
        ASSERT_EQ(r.decision == Decision::RejectH0, decide(r.statistic, r.critical_value, r.tail) == Decision::RejectH0);
        ASSERT_EQ(r.decision == Decision::RejectH0, r.p_value <= r.level);
    }
}

}  // namespace
}  // namespace cavar::backtest
