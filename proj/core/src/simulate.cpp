#include "cavar/simulate.hpp"

#include <cmath>
#include <numbers>

#include "cavar/error.hpp"

namespace cavar::simulate {

namespace {

constexpr Date kDefaultStart{std::chrono::year{2000}, std::chrono::January, std::chrono::day{3}};

double draw_innovation(Rng& rng, const garch::Spec& spec, double nu) {
    if (spec.innovation == garch::InnovationKind::Normal) return rng.normal();
    return rng.student_t(nu) * std::sqrt((nu - 2.0) / nu);
}

}  // namespace

std::vector<Date> business_days(Date start, std::size_t count) {
    std::vector<Date> out;
    out.reserve(count);
    std::chrono::sys_days day{start};
    while (out.size() < count) {
        const std::chrono::weekday wd{day};
        if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) out.emplace_back(day);
        day += std::chrono::days{1};
    }
    return out;
}

GarchPath simulate_garch(const garch::Params& params, const garch::Spec& spec, std::size_t length,
                         std::uint64_t seed) {
    garch::validate(spec, params);
    Rng rng(seed, "simulate.garch");
    const double persistence = params.alpha1 + params.beta1 + 0.5 * params.gamma;
    double var = params.alpha0 / (1.0 - persistence);
    double eps_prev = 0.0;
    GarchPath path;
    path.returns.values.reserve(length);
    path.sigma.reserve(length);
    for (std::size_t t = 0; t < length + kGarchBurnIn; ++t) {
        if (t > 0) {
            const double arch =
                params.alpha1 + (spec.model == garch::Model::GJR && eps_prev < 0.0 ? params.gamma : 0.0);
            var = params.alpha0 + arch * eps_prev * eps_prev + params.beta1 * var;
        }
        const double sigma = std::sqrt(var);
        eps_prev = sigma * draw_innovation(rng, spec, params.nu);
        if (t >= kGarchBurnIn) {
            path.returns.values.push_back(params.mu + eps_prev);
            path.sigma.push_back(sigma);
        }
    }
    path.returns.dates = business_days(kDefaultStart, length);
    return path;
}

RegimePath simulate_regime_switch(double low_vol, double high_vol, double switch_prob, std::size_t length,
                                  std::uint64_t seed) {
    if (!(low_vol > 0.0 && low_vol < high_vol) || !(switch_prob >= 0.0 && switch_prob < 1.0)) {
        fail(ErrorCode::InvalidParams, "simulate_regime_switch: need 0 < low_vol < high_vol and switch_prob in [0,1)");
    }
    Rng rng(seed, "simulate.regime");
    RegimePath path;
    path.returns.values.reserve(length);
    std::uint8_t state = rng.uniform() < 0.5 ? 1 : 0;
    for (std::size_t t = 0; t < length; ++t) {
        if (t > 0 && rng.uniform() < switch_prob) state = state ? 0 : 1;
        const double sigma = state ? high_vol : low_vol;
        path.regimes.push_back(state);
        path.sigma.push_back(sigma);
        path.returns.values.push_back(sigma * rng.normal());
    }
    path.returns.dates = business_days(kDefaultStart, length);
    return path;
}

std::vector<double> simulate_gpd(double beta, double xi, std::size_t n, Rng& rng) {
    if (!(beta > 0.0) || !std::isfinite(xi)) {
        fail(ErrorCode::InvalidParams, "simulate_gpd: beta must be positive and xi finite");
    }
    std::vector<double> out(n);
    for (double& e : out) {
        const double u = rng.uniform();
        e = std::fabs(xi) < 1e-12 ? -beta * std::log1p(-u) : beta * (std::pow(1.0 - u, -xi) - 1.0) / xi;
    }
    return out;
}

std::vector<double> simulate_gpd(double beta, double xi, std::size_t n, std::uint64_t seed) {
    Rng rng(seed, "simulate.gpd");
    return simulate_gpd(beta, xi, n, rng);
}

Blobs simulate_blobs(double imbalance, std::size_t n, double separation, std::uint64_t seed, double sigma) {
    if (!(imbalance >= 1.0) || n < 2 || !(sigma > 0.0) || !(separation >= 0.0)) {
        fail(ErrorCode::InvalidParams, "simulate_blobs: need imbalance >= 1, n >= 2, sigma > 0, separation >= 0");
    }
    Rng rng(seed, "simulate.blobs");
    auto minority = static_cast<std::size_t>(std::llround(static_cast<double>(n) / (1.0 + imbalance)));
    minority = std::clamp<std::size_t>(minority, 1, n - 1);

    std::vector<std::uint8_t> labels(n, 0);
    for (std::size_t i = 0; i < minority; ++i) labels[i] = 1;
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = rng.below(i + 1);
        std::swap(labels[i], labels[j]);
    }

    const double offset = separation * sigma / std::numbers::sqrt2;
    Blobs out;
    out.features.names = {"x1", "x2"};
    out.features.columns.assign(2, std::vector<double>(n));
    out.features.dates = business_days(kDefaultStart, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double centre = labels[i] ? offset : -offset;
        out.features.columns[0][i] = centre + sigma * rng.normal();
        out.features.columns[1][i] = centre + sigma * rng.normal();
    }
    out.labels = std::move(labels);
    return out;
}

PriceSeries prices_from_returns(const std::vector<double>& returns, double initial_price, Date start) {
    if (!(initial_price > 0.0)) {
        fail(ErrorCode::InvalidParams, "prices_from_returns: initial price must be positive");
    }
    PriceSeries prices;
    prices.dates = business_days(start, returns.size() + 1);
    prices.close.reserve(returns.size() + 1);
    double log_price = std::log(initial_price);
    prices.close.push_back(initial_price);
    for (double r : returns) {
        log_price += r;
        prices.close.push_back(std::exp(log_price));
    }
    return prices;
}

}  // namespace cavar::simulate
