#pragma once

#include <cstdint>
#include <vector>

#include "cavar/garch.hpp"
#include "cavar/rng.hpp"
#include "cavar/timeseries.hpp"

namespace cavar::simulate {

inline constexpr std::size_t kGarchBurnIn = 500;

struct GarchPath {
    ReturnSeries returns;
    std::vector<double> sigma;
};

/// Forward simulation of the (GJR-)GARCH recursion with unit-variance
/// innovations; the first 500 draws are discarded.
GarchPath simulate_garch(const garch::Params& params, const garch::Spec& spec, std::size_t length,
                         std::uint64_t seed);

struct RegimePath {
    ReturnSeries returns;
    /// 1 while in the high-volatility regime.
    std::vector<std::uint8_t> regimes;
    std::vector<double> sigma;
};

/// Symmetric two-state Markov chain selecting the daily volatility of
/// zero-mean Gaussian returns. The chain starts in a uniformly drawn state.
RegimePath simulate_regime_switch(double low_vol, double high_vol, double switch_prob, std::size_t length,
                                  std::uint64_t seed);

/// Inverse-CDF draws from GPD(0, beta, xi).
std::vector<double> simulate_gpd(double beta, double xi, std::size_t n, std::uint64_t seed);
std::vector<double> simulate_gpd(double beta, double xi, std::size_t n, Rng& rng);

struct Blobs {
    FeatureMatrix features;
    std::vector<std::uint8_t> labels;
};

/// Two isotropic 2-D Gaussian clusters in random order. The minority class
/// (label 1) is centred at +separation*sigma along the diagonal direction
/// (1,1)/sqrt(2), the majority at -separation*sigma, so the means are
/// 2*separation standard deviations apart. Minority share is 1/(1+imbalance).
Blobs simulate_blobs(double imbalance, std::size_t n, double separation, std::uint64_t seed, double sigma = 1.0);

/// Weekday calendar starting at `start` (weekends skipped).
std::vector<Date> business_days(Date start, std::size_t count);

/// Price path P_0 * exp(cumsum(r)), one observation longer than `returns`.
PriceSeries prices_from_returns(const std::vector<double>& returns, double initial_price, Date start);

}  // namespace cavar::simulate
