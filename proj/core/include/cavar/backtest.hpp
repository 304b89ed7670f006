#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cavar::backtest {

struct ViolationSeries {
    /// hits[t] = 1 iff r_t < VaR_t (strict).
    std::vector<std::uint8_t> hits;
    std::size_t n = 0;
    std::size_t x = 0;
};

ViolationSeries count_violations(std::span<const double> returns, std::span<const double> var);

enum class Decision { AcceptH0, RejectH0 };

/// Which side of the critical value rejects. Chi-square statistics reject
/// above (statistic > critical); rank statistics reject below
/// (statistic <= critical).
enum class Tail { Upper, Lower };

struct TestResult {
    std::string name;
    double statistic = 0.0;
    /// Chi-square degrees of freedom; 0 for rank tests.
    int df = 0;
    /// True when the p-value comes from the exact null distribution.
    bool exact = false;
    double critical_value = 0.0;
    double p_value = 1.0;
    double level = 0.05;
    Tail tail = Tail::Upper;
    Decision decision = Decision::AcceptH0;
};

/// Applies the tail rule to statistic/critical_value.
Decision decide(double statistic, double critical_value, Tail tail);

/// Kupiec proportion-of-failures likelihood ratio, chi-square(1).
TestResult kupiec_pof(std::size_t x, std::size_t n, double alpha, double level = 0.05);

struct TransitionCounts {
    std::size_t n00 = 0;
    std::size_t n01 = 0;
    std::size_t n10 = 0;
    std::size_t n11 = 0;
};

TransitionCounts transition_counts(std::span<const std::uint8_t> hits);

/// Christoffersen first-order Markov independence LR, chi-square(1).
TestResult christoffersen_independence(std::span<const std::uint8_t> hits, double level = 0.05);

/// Conditional coverage LR_cc = LR_uc + LR_ind, chi-square(2).
TestResult christoffersen_cc(std::span<const std::uint8_t> hits, double alpha, double level = 0.05);

/// Alternative hypothesis on a (relative to b): less means a tends to be smaller.
enum class Alternative { Less, Greater, TwoSided };

/// Wilcoxon signed-rank on paired samples; zero differences are dropped.
/// Exact null distribution (midranks allowed) for n <= 25, normal
/// approximation with tie and continuity corrections above.
TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, Alternative alternative,
                                double level = 0.05);

/// Null pmf of W+ over 0..n(n+1)/2 for untied ranks 1..n.
std::vector<double> signed_rank_distribution(std::size_t n);

/// Mann-Whitney U with midranks; normal approximation with tie and
/// continuity corrections.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b, Alternative alternative,
                          double level = 0.05);

/// U statistic of sample a (number of pairs with a > b, ties counting 1/2).
double mann_whitney_statistic(std::span<const double> a, std::span<const double> b);

std::string to_string(Decision d);
std::string to_string(Alternative a);
Alternative parse_alternative(const std::string& text);

}  // namespace cavar::backtest
