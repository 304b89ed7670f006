#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cavar/timeseries.hpp"

namespace cavar::adjust {

/// Both coefficients lie in [0, 0.5).
struct AdjustmentParams {
    double b1 = 0.0;
    double b2 = 0.0;
};

void validate(const AdjustmentParams& params);

struct AdjustedVarSeries {
    std::vector<double> values;
    /// kappa_t in {1 - b1, 1 + b2}; values[t] = multipliers[t] * base[t].
    std::vector<double> multipliers;
};

/// Low-risk prediction (0) scales VaR by (1 - b1), high-risk (1) by (1 + b2).
AdjustedVarSeries adjust_var(std::span<const double> base_var, std::span<const std::uint8_t> predictions,
                             const AdjustmentParams& params);

/// `count` contiguous windows of equal length tiling [0, n); the last one
/// absorbs the remainder.
std::vector<IndexRange> rolling_windows(std::size_t n, std::size_t count = 4);

enum class Objective {
    /// Total violations summed over windows.
    ViolationCount,
    /// Sum over windows of |violations - n_w * alpha|.
    CoverageDeviation,
    /// Sum over windows of the Christoffersen conditional-coverage statistic.
    ConditionalCoverage,
};

/// "violations", "coverage" or "cc".
std::string to_string(Objective objective);
Objective parse_objective(const std::string& text);

struct GridOptions {
    double step = 0.05;
    double upper = 0.5;
    double alpha = 0.05;
    Objective objective = Objective::ConditionalCoverage;
    /// Defaults to rolling_windows(n, 4) when empty.
    std::vector<IndexRange> windows;
};

struct GridCell {
    double b1 = 0.0;
    double b2 = 0.0;
    std::size_t violations = 0;
    double objective = 0.0;
};

struct GridResult {
    AdjustmentParams best;
    std::size_t best_violations = 0;
    double best_objective = 0.0;
    /// Row-major over b1, then b2.
    std::vector<GridCell> surface;
};

/// Exhaustive grid over [0, upper)^2. Ties break toward the smaller b1 + b2,
/// then the smaller b1.
GridResult grid_search_calibrate(std::span<const double> returns, std::span<const double> base_var,
                                 std::span<const std::uint8_t> predictions, const GridOptions& options = {});

/// log p(x violations | n days); the default is Binomial(n, alpha).
using ViolationLikelihood = std::function<double(std::size_t x, std::size_t n, double alpha)>;

double binomial_log_likelihood(std::size_t x, std::size_t n, double alpha);

struct McmcOptions {
    /// Kept draws after burn-in (>= 5000); burn-in adds 25% so that it is
    /// 20% of the full chain.
    std::size_t draws = 5000;
    double proposal_sd = 0.03;
    double upper = 0.5;
    std::uint64_t seed = 1;
    ViolationLikelihood likelihood = binomial_log_likelihood;
};

struct PosteriorSample {
    std::vector<double> b1;
    std::vector<double> b2;
    double acceptance_rate = 0.0;
    std::size_t burn_in = 0;
};

/// Random-walk Metropolis-Hastings over (b1, b2) with a uniform prior on
/// [0, upper)^2 and Gaussian proposals reflected at the boundary.
PosteriorSample mcmc_calibrate(std::span<const double> returns, std::span<const double> base_var,
                               std::span<const std::uint8_t> predictions, double alpha,
                               const McmcOptions& options = {});

}  // namespace cavar::adjust
