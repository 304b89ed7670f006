#include "cavar/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cavar/distributions.hpp"
#include "cavar/error.hpp"

namespace cavar::backtest {

namespace {

// k * ln(p) with the convention 0 * ln(0) = 0.
double xlogy(double k, double p) { return k == 0.0 ? 0.0 : k * std::log(p); }

TestResult chi_square_result(std::string name, double statistic, int df, double level) {
    TestResult r;
    r.name = std::move(name);
    r.statistic = std::max(statistic, 0.0);
    r.df = df;
    r.level = level;
    r.critical_value = dist::chi_square_critical(df, level);
    r.p_value = dist::chi_square_sf(r.statistic, df);
    r.tail = Tail::Upper;
    r.decision = decide(r.statistic, r.critical_value, r.tail);
    return r;
}

double lr_uc(std::size_t x, std::size_t n, double alpha) {
    const auto xd = static_cast<double>(x);
    const auto nd = static_cast<double>(n);
    const double pi_hat = xd / nd;
    const double null_ll = xlogy(nd - xd, 1.0 - alpha) + xlogy(xd, alpha);
    const double alt_ll = xlogy(nd - xd, 1.0 - pi_hat) + xlogy(xd, pi_hat);
    return -2.0 * (null_ll - alt_ll);
}

double lr_ind(const TransitionCounts& c) {
    const auto n00 = static_cast<double>(c.n00);
    const auto n01 = static_cast<double>(c.n01);
    const auto n10 = static_cast<double>(c.n10);
    const auto n11 = static_cast<double>(c.n11);
    const double total = n00 + n01 + n10 + n11;
    const double pi = (n01 + n11) / total;
    const double null_ll = xlogy(n00 + n10, 1.0 - pi) + xlogy(n01 + n11, pi);
    // Rows without observations contribute nothing.
    double alt_ll = 0.0;
    if (n00 + n01 > 0.0) {
        const double pi01 = n01 / (n00 + n01);
        alt_ll += xlogy(n00, 1.0 - pi01) + xlogy(n01, pi01);
    }
    if (n10 + n11 > 0.0) {
        const double pi11 = n11 / (n10 + n11);
        alt_ll += xlogy(n10, 1.0 - pi11) + xlogy(n11, pi11);
    }
    return -2.0 * (null_ll - alt_ll);
}

// Midranks (1-based) of values; also returns the tie-correction sum of t^3 - t.
std::vector<double> midranks(std::span<const double> values, double& tie_term) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    std::vector<double> ranks(n);
    tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        const auto t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    return ranks;
}

// Lower-tail result for a statistic with a discrete exact null given as
// cumulative probabilities over doubled-rank sums.
TestResult lower_tail_result(std::string name, double statistic, double p, double critical, bool exact,
                             double level) {
    TestResult r;
    r.name = std::move(name);
    r.statistic = statistic;
    r.df = 0;
    r.exact = exact;
    r.level = level;
    r.p_value = std::clamp(p, 0.0, 1.0);
    r.critical_value = critical;
    r.tail = Tail::Lower;
    r.decision = decide(statistic, critical, Tail::Lower);
    return r;
}

}  // namespace

ViolationSeries count_violations(std::span<const double> returns, std::span<const double> var) {
    if (returns.size() != var.size()) {
        fail(ErrorCode::LengthMismatch, "count_violations: returns and VaR are not aligned");
    }
    ViolationSeries v;
    v.n = returns.size();
    v.hits.resize(v.n);
    for (std::size_t t = 0; t < v.n; ++t) {
        v.hits[t] = returns[t] < var[t] ? 1 : 0;
        v.x += v.hits[t];
    }
    return v;
}

Decision decide(double statistic, double critical_value, Tail tail) {
    const bool reject = tail == Tail::Upper ? statistic > critical_value : statistic <= critical_value;
    return reject ? Decision::RejectH0 : Decision::AcceptH0;
}

TestResult kupiec_pof(std::size_t x, std::size_t n, double alpha, double level) {
    if (n == 0) {
        fail(ErrorCode::DegenerateInput, "kupiec_pof: no observations");
    }
    if (x > n) {
        fail(ErrorCode::DomainError, "kupiec_pof: more violations than observations");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        fail(ErrorCode::DomainError, "kupiec_pof: alpha must lie in (0,1)");
    }
    return chi_square_result("kupiec_pof", lr_uc(x, n, alpha), 1, level);
}

TransitionCounts transition_counts(std::span<const std::uint8_t> hits) {
    TransitionCounts c;
    for (std::size_t t = 1; t < hits.size(); ++t) {
        const bool prev = hits[t - 1] != 0;
        const bool cur = hits[t] != 0;
        if (!prev && !cur) ++c.n00;
        else if (!prev) ++c.n01;
        else if (!cur) ++c.n10;
        else ++c.n11;
    }
    return c;
}

TestResult christoffersen_independence(std::span<const std::uint8_t> hits, double level) {
    if (hits.size() < 2) {
        fail(ErrorCode::DegenerateInput, "christoffersen_independence: need at least one transition");
    }
    return chi_square_result("christoffersen_independence", lr_ind(transition_counts(hits)), 1, level);
}

TestResult christoffersen_cc(std::span<const std::uint8_t> hits, double alpha, double level) {
    if (hits.size() < 2) {
        fail(ErrorCode::DegenerateInput, "christoffersen_cc: need at least one transition");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        fail(ErrorCode::DomainError, "christoffersen_cc: alpha must lie in (0,1)");
    }
    const auto x = static_cast<std::size_t>(std::count(hits.begin(), hits.end(), std::uint8_t{1}));
    const double uc = lr_uc(x, hits.size(), alpha);
    const double ind = lr_ind(transition_counts(hits));
    return chi_square_result("christoffersen_cc", uc + ind, 2, level);
}

std::vector<double> signed_rank_distribution(std::size_t n) {
    const std::size_t max_sum = n * (n + 1) / 2;
    std::vector<double> counts(max_sum + 1, 0.0);
    counts[0] = 1.0;
    for (std::size_t r = 1; r <= n; ++r) {
        for (std::size_t s = max_sum; s >= r; --s) counts[s] += counts[s - r];
    }
    const double total = std::ldexp(1.0, static_cast<int>(n));
    for (double& c : counts) c /= total;
    return counts;
}

TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, Alternative alternative,
                                double level) {
    if (a.size() != b.size()) {
        fail(ErrorCode::LengthMismatch, "wilcoxon_signed_rank: paired samples differ in length");
    }
    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) diffs.push_back(d);
    }
    if (diffs.empty()) {
        fail(ErrorCode::AllZeroDifferences, "wilcoxon_signed_rank: every paired difference is zero");
    }
    const std::size_t n = diffs.size();
    std::vector<double> magnitudes(n);
    for (std::size_t i = 0; i < n; ++i) magnitudes[i] = std::fabs(diffs[i]);
    double tie_term = 0.0;
    const std::vector<double> ranks = midranks(magnitudes, tie_term);

    double w_plus = 0.0;
    double w_minus = 0.0;
    for (std::size_t i = 0; i < n; ++i) (diffs[i] > 0.0 ? w_plus : w_minus) += ranks[i];

    double statistic = 0.0;
    double tail_level = level;
    switch (alternative) {
        case Alternative::Less:
            statistic = w_plus;
            break;
        case Alternative::Greater:
            statistic = w_minus;
            break;
        case Alternative::TwoSided:
            statistic = std::min(w_plus, w_minus);
            tail_level = 0.5 * level;
            break;
    }
    const double scale = alternative == Alternative::TwoSided ? 2.0 : 1.0;

    if (n <= 25) {
        // Midranks are multiples of 1/2, so doubled ranks are integers and the
        // subset-sum distribution over sign patterns is exact.
        std::vector<std::size_t> doubled(n);
        std::size_t max_sum = 0;
        for (std::size_t i = 0; i < n; ++i) {
            doubled[i] = static_cast<std::size_t>(std::lround(2.0 * ranks[i]));
            max_sum += doubled[i];
        }
        std::vector<double> counts(max_sum + 1, 0.0);
        counts[0] = 1.0;
        std::size_t reach = 0;
        for (std::size_t r : doubled) {
            reach += r;
            for (std::size_t s = reach; s >= r; --s) counts[s] += counts[s - r];
        }
        const double total = std::ldexp(1.0, static_cast<int>(n));
        std::vector<double> cdf(max_sum + 1);
        double acc = 0.0;
        for (std::size_t s = 0; s <= max_sum; ++s) {
            acc += counts[s];
            cdf[s] = acc / total;
        }
        const auto obs = static_cast<std::size_t>(std::lround(2.0 * statistic));
        const double p = scale * cdf[obs];
        // Largest attainable statistic whose lower-tail mass stays within the level.
        double critical = -1.0;
        for (std::size_t s = 0; s <= max_sum; ++s) {
            if (counts[s] == 0.0) continue;
            if (cdf[s] <= tail_level) critical = 0.5 * static_cast<double>(s);
            else break;
        }
        return lower_tail_result("wilcoxon_signed_rank", statistic, p, critical, true, level);
    }

    const auto nd = static_cast<double>(n);
    const double mean = nd * (nd + 1.0) / 4.0;
    const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
    const double sd = std::sqrt(var);
    const double p = sd > 0.0 ? scale * dist::normal_cdf((statistic - mean + 0.5) / sd) : 1.0;
    const double critical = mean - 0.5 + sd * dist::normal_quantile(tail_level);
    return lower_tail_result("wilcoxon_signed_rank", statistic, p, critical, false, level);
}

double mann_whitney_statistic(std::span<const double> a, std::span<const double> b) {
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    double tie_term = 0.0;
    const std::vector<double> ranks = midranks(pooled, tie_term);
    const double rank_sum = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(a.size()), 0.0);
    const auto n1 = static_cast<double>(a.size());
    return rank_sum - n1 * (n1 + 1.0) / 2.0;
}

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b, Alternative alternative,
                          double level) {
    if (a.empty() || b.empty()) {
        fail(ErrorCode::EmptySample, "mann_whitney_u: both samples must be non-empty");
    }
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    double tie_term = 0.0;
    const std::vector<double> ranks = midranks(pooled, tie_term);
    const auto n1 = static_cast<double>(a.size());
    const auto n2 = static_cast<double>(b.size());
    const double big_n = n1 + n2;
    const double rank_sum = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(a.size()), 0.0);
    const double u_a = rank_sum - n1 * (n1 + 1.0) / 2.0;
    const double u_b = n1 * n2 - u_a;

    double statistic = 0.0;
    double tail_level = level;
    double scale = 1.0;
    switch (alternative) {
        case Alternative::Less:
            statistic = u_a;
            break;
        case Alternative::Greater:
            statistic = u_b;
            break;
        case Alternative::TwoSided:
            statistic = std::min(u_a, u_b);
            tail_level = 0.5 * level;
            scale = 2.0;
            break;
    }
    const double mean = n1 * n2 / 2.0;
    const double var = n1 * n2 / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    const double sd = var > 0.0 ? std::sqrt(var) : 0.0;
    const double p = sd > 0.0 ? scale * dist::normal_cdf((statistic - mean + 0.5) / sd) : 1.0;
    const double critical = sd > 0.0 ? mean - 0.5 + sd * dist::normal_quantile(tail_level) : -1.0;
    return lower_tail_result("mann_whitney_u", statistic, p, critical, false, level);
}

std::string to_string(Decision d) { return d == Decision::RejectH0 ? "RejectH0" : "AcceptH0"; }

std::string to_string(Alternative a) {
    switch (a) {
        case Alternative::Less:
            return "less";
        case Alternative::Greater:
            return "greater";
        case Alternative::TwoSided:
            return "two_sided";
    }
    return "two_sided";
}

Alternative parse_alternative(const std::string& text) {
    if (text == "less") return Alternative::Less;
    if (text == "greater") return Alternative::Greater;
    if (text == "two_sided" || text == "two-sided") return Alternative::TwoSided;
    fail(ErrorCode::ConfigInvalid, "unknown alternative '" + text + "'");
}

}  // namespace cavar::backtest
