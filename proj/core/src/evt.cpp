#include "cavar/evt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cavar/error.hpp"
#include "cavar/optimize.hpp"
#include "cavar/rng.hpp"
#include "cavar/simulate.hpp"

namespace cavar::evt {

namespace {

constexpr double kXiLow = -0.5;
constexpr double kXiSpan = 2.5;
constexpr double kExpLimit = 1e-8;
constexpr double kInf = std::numeric_limits<double>::infinity();

double xi_from(double t) { return kXiLow + kXiSpan / (1.0 + std::exp(-t)); }

double xi_to(double xi) {
    const double clamped = std::clamp(xi, kXiLow + 1e-6, kXiLow + kXiSpan - 1e-6);
    const double s = (clamped - kXiLow) / kXiSpan;
    return std::log(s / (1.0 - s));
}

struct Layout {
    double min_excess = 0.0;
    double scale = 1.0;
    bool fit_location = false;

    GpdParams decode(std::span<const double> th) const {
        GpdParams p;
        p.beta = std::exp(th[0]);
        p.xi = xi_from(th[1]);
        p.mu = fit_location ? min_excess - scale * std::exp(th[2]) : 0.0;
        return p;
    }

    std::vector<double> encode(const GpdParams& p) const {
        std::vector<double> th{std::log(p.beta), xi_to(p.xi)};
        if (fit_location) {
            const double gap = std::max(min_excess - p.mu, 1e-3 * scale);
            th.push_back(std::log(gap / scale));
        }
        return th;
    }
};

GpdFit run_fit(std::span<const double> x, const std::vector<GpdParams>& starts, const GpdFitOptions& options) {
    Layout layout;
    layout.fit_location = options.fit_location;
    layout.min_excess = *std::min_element(x.begin(), x.end());
    layout.scale = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    if (!(layout.scale > 0.0)) layout.scale = 1.0;

    const auto objective = [&](std::span<const double> th) { return -gpd_log_likelihood(x, layout.decode(th)); };
    opt::NelderMeadOptions nm;
    nm.initial_step = 0.3;
    nm.diameter_tol = options.diameter_tol;
    nm.max_iterations = options.max_iterations;

    GpdFit best;
    double best_value = kInf;
    for (const GpdParams& s : starts) {
        const std::vector<double> th0 = layout.encode(s);
        best.start_logliks.push_back(-objective(th0));
        opt::Minimum m = opt::nelder_mead(objective, th0, nm);
        // One restart from the optimum guards against premature collapse.
        opt::Minimum again = opt::nelder_mead(objective, m.x, nm);
        if (again.value <= m.value) m = std::move(again);
        if (m.value < best_value) {
            best_value = m.value;
            best.params = layout.decode(m.x);
            best.converged = m.converged;
        }
    }
    if (!std::isfinite(best_value)) {
        fail(ErrorCode::ConvergenceFailure, "fit_gpd_mle: likelihood is not finite at any start");
    }
    best.loglik = -best_value;
    if (best.params.xi > kXiLow + kXiSpan - 1e-3) best.warnings.push_back("xi at upper bound 2");
    if (best.params.xi < kXiLow + 1e-3) best.warnings.push_back("xi at lower bound -0.5");
    return best;
}

void check_sample(std::span<const double> x, std::size_t minimum, const char* who) {
    if (x.size() < minimum) {
        fail(ErrorCode::TooFewExceedances, std::string(who) + ": " + std::to_string(x.size()) +
                                               " exceedances, need at least " + std::to_string(minimum));
    }
    for (double v : x) {
        if (!std::isfinite(v)) fail(ErrorCode::NonFinite, std::string(who) + ": non-finite excess");
    }
}

}  // namespace

ExceedanceSet extract_exceedances(std::span<const double> returns, std::span<const double> adjusted_var) {
    if (returns.size() != adjusted_var.size()) {
        fail(ErrorCode::LengthMismatch, "extract_exceedances: returns and VaR differ in length");
    }
    ExceedanceSet out;
    for (std::size_t t = 0; t < returns.size(); ++t) {
        if (returns[t] < adjusted_var[t]) {
            out.values.push_back(adjusted_var[t] - returns[t]);
            out.positions.push_back(t);
        }
    }
    if (out.values.empty()) fail(ErrorCode::NoExceedances, "extract_exceedances: no VaR violations");
    return out;
}

double gpd_upper_endpoint(const GpdParams& params) {
    return params.xi < 0.0 ? params.mu - params.beta / params.xi : kInf;
}

double gpd_cdf(double e, const GpdParams& params) {
    if (!(params.beta > 0.0)) fail(ErrorCode::InvalidParams, "gpd_cdf: beta must be positive");
    if (!(e >= params.mu) || e > gpd_upper_endpoint(params)) {
        fail(ErrorCode::OutOfSupport, "gpd_cdf: argument outside the support");
    }
    const double y = (e - params.mu) / params.beta;
    if (std::fabs(params.xi) < kExpLimit) return -std::expm1(-y);
    const double base = 1.0 + params.xi * y;
    if (base <= 0.0) return 1.0;
    return -std::expm1(-std::log1p(params.xi * y) / params.xi);
}

double gpd_quantile(double p, const GpdParams& params) {
    if (!(p >= 0.0 && p < 1.0)) fail(ErrorCode::DomainError, "gpd_quantile: p must lie in [0, 1)");
    if (std::fabs(params.xi) < kExpLimit) return params.mu - params.beta * std::log1p(-p);
    return params.mu + params.beta * std::expm1(-params.xi * std::log1p(-p)) / params.xi;
}

double gpd_log_likelihood(std::span<const double> excesses, const GpdParams& params) {
    if (!(params.beta > 0.0)) return -kInf;
    const auto n = static_cast<double>(excesses.size());
    double sum = 0.0;
    if (std::fabs(params.xi) < kExpLimit) {
        for (double e : excesses) {
            const double y = (e - params.mu) / params.beta;
            if (y < 0.0) return -kInf;
            sum += y;
        }
        return -n * std::log(params.beta) - sum;
    }
    for (double e : excesses) {
        const double y = (e - params.mu) / params.beta;
        const double z = params.xi * y;
        if (y < 0.0 || !(z > -1.0)) return -kInf;
        sum += std::log1p(z);
    }
    return -n * std::log(params.beta) - (1.0 + 1.0 / params.xi) * sum;
}

GpdFit fit_gpd_mle(std::span<const double> excesses, const GpdFitOptions& options) {
    check_sample(excesses, 20, "fit_gpd_mle");
    const auto n = static_cast<double>(excesses.size());
    const double mean = std::accumulate(excesses.begin(), excesses.end(), 0.0) / n;
    double var = 0.0;
    for (double e : excesses) var += (e - mean) * (e - mean);
    var /= n - 1.0;
    if (!(mean > 0.0)) fail(ErrorCode::DomainError, "fit_gpd_mle: excesses must have a positive mean");

    std::vector<GpdParams> starts;
    if (var > 0.0) {
        const double ratio = mean * mean / var;
        const double xi = std::clamp(0.5 * (1.0 - ratio), -0.45, 1.9);
        starts.push_back({0.0, std::max(mean * (1.0 - xi), 1e-3 * mean), xi});
    }
    for (double xi : {0.1, 0.5, 1.0}) {
        starts.push_back({0.0, mean * std::max(1.0 - xi, 0.25), xi});
    }
    GpdFit fit = run_fit(excesses, starts, options);
    if (excesses.size() < 50) fit.warnings.push_back("fewer than 50 exceedances");
    return fit;
}

GpdFit refit_gpd(std::span<const double> excesses, const GpdParams& start, const GpdFitOptions& options) {
    check_sample(excesses, 2, "refit_gpd");
    return run_fit(excesses, {start}, options);
}

double ks_statistic(std::span<const double> excesses, const GpdParams& params) {
    if (excesses.empty()) fail(ErrorCode::EmptySample, "ks_statistic: empty sample");
    std::vector<double> x(excesses.begin(), excesses.end());
    std::sort(x.begin(), x.end());
    const auto n = static_cast<double>(x.size());
    const double upper = gpd_upper_endpoint(params);
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double f;
        if (x[i] < params.mu) {
            f = 0.0;
        } else if (x[i] > upper) {
            f = 1.0;
        } else {
            f = gpd_cdf(x[i], params);
        }
        const double hi = static_cast<double>(i + 1) / n - f;
        const double lo = f - static_cast<double>(i) / n;
        d = std::max({d, hi, lo});
    }
    return std::min(d, 1.0);
}

backtest::TestResult ks_test(std::span<const double> excesses, const GpdParams& params, const KsOptions& options) {
    check_sample(excesses, 5, "ks_test");
    if (options.n_mc < 2000) fail(ErrorCode::InvalidParams, "ks_test: at least 2000 bootstrap replicates are required");
    if (!(params.beta > 0.0)) fail(ErrorCode::InvalidParams, "ks_test: beta must be positive");

    const double d = ks_statistic(excesses, params);
    const Rng master(options.seed, "evt.ks");
    std::vector<double> boot(options.n_mc);
    std::size_t at_least = 0;
    for (std::size_t r = 0; r < options.n_mc; ++r) {
        Rng rng = master.split(r);
        std::vector<double> sample = simulate::simulate_gpd(params.beta, params.xi, excesses.size(), rng);
        for (double& e : sample) e += params.mu;
        GpdParams refit = params;
        try {
            refit = refit_gpd(sample, params, options.fit).params;
        } catch (const Error&) {
            // Keep the generating parameters for a replicate that cannot be refit.
        }
        boot[r] = ks_statistic(sample, refit);
        at_least += boot[r] >= d ? 1 : 0;
    }

    backtest::TestResult result;
    result.name = "KS-GPD";
    result.statistic = d;
    result.level = options.level;
    result.tail = backtest::Tail::Upper;
    result.p_value = static_cast<double>(1 + at_least) / static_cast<double>(1 + options.n_mc);

    const double budget = options.level * static_cast<double>(options.n_mc + 1);
    const long m = static_cast<long>(std::floor(budget + 1e-9)) - 1;
    if (m < 0) {
        result.critical_value = kInf;
    } else {
        std::sort(boot.begin(), boot.end(), std::greater<>());
        result.critical_value = boot[static_cast<std::size_t>(m)];
    }
    result.decision = result.p_value > options.level ? backtest::Decision::AcceptH0 : backtest::Decision::RejectH0;
    return result;
}

}  // namespace cavar::evt
