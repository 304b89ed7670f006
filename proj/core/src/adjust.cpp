#include "cavar/adjust.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cavar/backtest.hpp"
#include "cavar/error.hpp"
#include "cavar/rng.hpp"

namespace cavar::adjust {

namespace {

void check_aligned(std::size_t a, std::size_t b, std::size_t c) {
    if (a != b || b != c) {
        fail(ErrorCode::LengthMismatch, "adjust: returns, VaR and predictions are not aligned");
    }
}

std::size_t violations_in(std::span<const double> returns, std::span<const double> base,
                          std::span<const std::uint8_t> predictions, const AdjustmentParams& p, IndexRange w) {
    const double low = 1.0 - p.b1;
    const double high = 1.0 + p.b2;
    std::size_t x = 0;
    for (std::size_t t = w.begin; t < w.end; ++t) {
        const double v = (predictions[t] ? high : low) * base[t];
        x += returns[t] < v ? 1 : 0;
    }
    return x;
}

double reflect(double x, double upper) {
    while (x < 0.0 || x >= upper) {
        if (x < 0.0) x = -x;
        if (x >= upper) x = 2.0 * upper - x;
        if (x == upper) x = std::nextafter(upper, 0.0);
    }
    return x;
}

}  // namespace

void validate(const AdjustmentParams& params) {
    if (!(params.b1 >= 0.0 && params.b1 < 0.5 && params.b2 >= 0.0 && params.b2 < 0.5)) {
        fail(ErrorCode::InvalidParams, "adjustment coefficients must lie in [0, 0.5)");
    }
}

AdjustedVarSeries adjust_var(std::span<const double> base_var, std::span<const std::uint8_t> predictions,
                             const AdjustmentParams& params) {
    validate(params);
    if (base_var.size() != predictions.size()) {
        fail(ErrorCode::LengthMismatch, "adjust_var: VaR and predictions differ in length");
    }
    AdjustedVarSeries out;
    out.values.resize(base_var.size());
    out.multipliers.resize(base_var.size());
    const double low = 1.0 - params.b1;
    const double high = 1.0 + params.b2;
    for (std::size_t t = 0; t < base_var.size(); ++t) {
        out.multipliers[t] = predictions[t] ? high : low;
        out.values[t] = out.multipliers[t] * base_var[t];
    }
    return out;
}

std::vector<IndexRange> rolling_windows(std::size_t n, std::size_t count) {
    if (count == 0 || n < count) {
        fail(ErrorCode::EmptyWindow, "rolling_windows: " + std::to_string(n) + " rows cannot form " +
                                         std::to_string(count) + " windows");
    }
    const std::size_t len = n / count;
    std::vector<IndexRange> windows;
    for (std::size_t k = 0; k < count; ++k) {
        windows.push_back({k * len, k + 1 == count ? n : (k + 1) * len});
    }
    return windows;
}

GridResult grid_search_calibrate(std::span<const double> returns, std::span<const double> base_var,
                                 std::span<const std::uint8_t> predictions, const GridOptions& options) {
    check_aligned(returns.size(), base_var.size(), predictions.size());
    if (!(options.step > 0.0) || !(options.upper > 0.0 && options.upper <= 0.5)) {
        fail(ErrorCode::InvalidParams, "grid_search_calibrate: step must be positive and upper in (0, 0.5]");
    }
    const std::vector<IndexRange> windows =
        options.windows.empty() ? rolling_windows(returns.size(), 4) : options.windows;
    if (windows.size() < 2) {
        fail(ErrorCode::EmptyWindow, "grid_search_calibrate: at least 2 rolling windows are required");
    }
    for (const IndexRange& w : windows) {
        if (w.empty() || w.end > returns.size()) {
            fail(ErrorCode::EmptyWindow, "grid_search_calibrate: empty or out-of-range window");
        }
    }

    std::vector<double> grid;
    for (int k = 0;; ++k) {
        const double b = k * options.step;
        if (b >= options.upper - 1e-12) break;
        grid.push_back(b);
    }

    GridResult result;
    std::vector<std::uint8_t> hits;
    std::size_t best_rank_sum = std::numeric_limits<std::size_t>::max();
    std::size_t best_i = 0;
    bool have_best = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const AdjustmentParams p{grid[i], grid[j]};
            GridCell cell{p.b1, p.b2, 0, 0.0};
            for (const IndexRange& w : windows) {
                const std::size_t x = violations_in(returns, base_var, predictions, p, w);
                cell.violations += x;
                switch (options.objective) {
                    case Objective::ViolationCount:
                        cell.objective += static_cast<double>(x);
                        break;
                    case Objective::CoverageDeviation:
                        cell.objective += std::fabs(static_cast<double>(x) - static_cast<double>(w.size()) * options.alpha);
                        break;
                    case Objective::ConditionalCoverage:
                        hits.clear();
                        for (std::size_t t = w.begin; t < w.end; ++t) {
                            hits.push_back(returns[t] < (predictions[t] ? 1.0 + p.b2 : 1.0 - p.b1) * base_var[t] ? 1 : 0);
                        }
                        cell.objective += backtest::christoffersen_cc(hits, options.alpha).statistic;
                        break;
                }
            }
            // Parsimony tie-break on grid indices keeps the comparison exact.
            const bool better = !have_best || cell.objective < result.best_objective - 1e-12 ||
                                (std::fabs(cell.objective - result.best_objective) <= 1e-12 &&
                                 (i + j < best_rank_sum || (i + j == best_rank_sum && i < best_i)));
            if (better) {
                have_best = true;
                result.best = p;
                result.best_objective = cell.objective;
                result.best_violations = cell.violations;
                best_rank_sum = i + j;
                best_i = i;
            }
            result.surface.push_back(cell);
        }
    }
    return result;
}

double binomial_log_likelihood(std::size_t x, std::size_t n, double alpha) {
    if (n == 0) return 0.0;
    const auto xd = static_cast<double>(x);
    const auto nd = static_cast<double>(n);
    const double log_choose = std::lgamma(nd + 1.0) - std::lgamma(xd + 1.0) - std::lgamma(nd - xd + 1.0);
    return log_choose + xd * std::log(alpha) + (nd - xd) * std::log1p(-alpha);
}

PosteriorSample mcmc_calibrate(std::span<const double> returns, std::span<const double> base_var,
                               std::span<const std::uint8_t> predictions, double alpha, const McmcOptions& options) {
    check_aligned(returns.size(), base_var.size(), predictions.size());
    if (options.draws < 5000) {
        fail(ErrorCode::InvalidParams, "mcmc_calibrate: at least 5000 post burn-in draws are required");
    }
    if (!(alpha > 0.0 && alpha < 1.0) || !(options.proposal_sd > 0.0) ||
        !(options.upper > 0.0 && options.upper <= 0.5)) {
        fail(ErrorCode::InvalidParams, "mcmc_calibrate: invalid alpha, proposal scale or bound");
    }
    const IndexRange all{0, returns.size()};
    const std::size_t n = returns.size();
    auto log_post = [&](const AdjustmentParams& p) {
        return options.likelihood(violations_in(returns, base_var, predictions, p, all), n, alpha);
    };

    Rng rng(options.seed, "adjust.mcmc");
    PosteriorSample out;
    out.burn_in = options.draws / 4;
    const std::size_t total = options.draws + out.burn_in;
    out.b1.reserve(options.draws);
    out.b2.reserve(options.draws);

    AdjustmentParams current{0.5 * options.upper, 0.5 * options.upper};
    double current_lp = log_post(current);
    std::size_t accepted = 0;
    for (std::size_t it = 0; it < total; ++it) {
        const AdjustmentParams proposal{reflect(current.b1 + options.proposal_sd * rng.normal(), options.upper),
                                        reflect(current.b2 + options.proposal_sd * rng.normal(), options.upper)};
        const double proposal_lp = log_post(proposal);
        const double log_u = std::log(rng.uniform());
        if (log_u < proposal_lp - current_lp) {
            current = proposal;
            current_lp = proposal_lp;
            ++accepted;
        }
        if (it >= out.burn_in) {
            out.b1.push_back(current.b1);
            out.b2.push_back(current.b2);
        }
    }
    out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(total);
    // A flat likelihood accepts every reflected proposal; that is a prior
    // draw, not a stuck chain, so only an informative window is checked here.
    const bool informative = n > 0;
    if (out.acceptance_rate < 0.05 || (informative && out.acceptance_rate > 0.95)) {
        fail(ErrorCode::DegenerateChain,
             "mcmc_calibrate: acceptance rate " + std::to_string(out.acceptance_rate) + " outside [0.05, 0.95]");
    }
    return out;
}

std::string to_string(Objective objective) {
    switch (objective) {
        case Objective::ViolationCount: return "violations";
        case Objective::CoverageDeviation: return "coverage";
        case Objective::ConditionalCoverage: return "cc";
    }
    return "unknown";
}

Objective parse_objective(const std::string& text) {
    for (Objective o : {Objective::ViolationCount, Objective::CoverageDeviation, Objective::ConditionalCoverage}) {
        if (to_string(o) == text) return o;
    }
    fail(ErrorCode::InvalidParams, "unknown objective '" + text + "' (expected violations, coverage or cc)");
}

}  // namespace cavar::adjust
