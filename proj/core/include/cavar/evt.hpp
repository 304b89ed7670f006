#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cavar/backtest.hpp"

namespace cavar::evt {

struct ExceedanceSet {
    /// e = VaR_t - r_t for every violation day, in date order; all positive.
    std::vector<double> values;
    /// Index of each exceedance in the input series.
    std::vector<std::size_t> positions;

    std::size_t count() const noexcept { return values.size(); }
};

ExceedanceSet extract_exceedances(std::span<const double> returns, std::span<const double> adjusted_var);

struct GpdParams {
    double mu = 0.0;
    double beta = 1.0;
    double xi = 0.0;
};

/// Upper end of the support (+inf unless xi < 0).
double gpd_upper_endpoint(const GpdParams& params);

/// Throws OutOfSupport outside [mu, upper endpoint].
double gpd_cdf(double e, const GpdParams& params);

double gpd_quantile(double p, const GpdParams& params);

/// -inf for samples outside the support.
double gpd_log_likelihood(std::span<const double> excesses, const GpdParams& params);

struct GpdFitOptions {
    /// Also estimate the location (constrained below the smallest excess).
    bool fit_location = false;
    int max_iterations = 2000;
    double diameter_tol = 1e-9;
};

struct GpdFit {
    GpdParams params;
    double loglik = 0.0;
    bool converged = false;
    /// Log-likelihood at each multi-start point.
    std::vector<double> start_logliks;
    std::vector<std::string> warnings;
};

/// Simplex MLE over (log beta, xi) with xi restricted to (-0.5, 2).
/// Starts from moment estimates and xi in {0.1, 0.5, 1.0}.
GpdFit fit_gpd_mle(std::span<const double> excesses, const GpdFitOptions& options = {});

/// Refit from a single supplied start; used inside the bootstrap.
GpdFit refit_gpd(std::span<const double> excesses, const GpdParams& start, const GpdFitOptions& options = {});

/// sup |F_n - F| by the sorted-sample formula.
double ks_statistic(std::span<const double> excesses, const GpdParams& params);

struct KsOptions {
    std::size_t n_mc = 2000;
    std::uint64_t seed = 1;
    double level = 0.05;
    GpdFitOptions fit;
};

/// Parametric-bootstrap KS test: each replicate simulates from `params`,
/// refits and recomputes D. p = (1 + #{D* >= D}) / (1 + n_mc). The critical
/// value is the bootstrap order statistic consistent with that p-value, so
/// D > critical iff p <= level.
backtest::TestResult ks_test(std::span<const double> excesses, const GpdParams& params, const KsOptions& options = {});

}  // namespace cavar::evt
