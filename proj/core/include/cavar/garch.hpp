#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cavar/timeseries.hpp"

namespace cavar::garch {

enum class Model { GARCH, GJR };
enum class InnovationKind { Normal, StudentT };

struct Innovation {
    InnovationKind kind = InnovationKind::Normal;
    /// Degrees of freedom, used only for StudentT (> 2).
    double nu = 0.0;

    static Innovation normal() { return {}; }
    static Innovation student_t(double nu) { return {InnovationKind::StudentT, nu}; }
};

/// Orders are fixed at (1,1).
struct Spec {
    Model model = Model::GARCH;
    InnovationKind innovation = InnovationKind::Normal;
};

struct Params {
    double mu = 0.0;
    double alpha0 = 0.0;
    double alpha1 = 0.0;
    double beta1 = 0.0;
    double gamma = 0.0;  // GJR only
    double nu = 0.0;     // StudentT only
};

/// Throws InvalidParams unless positivity and covariance stationarity hold.
void validate(const Spec& spec, const Params& params);

/// Conditional volatility sigma_t for each observation. sigma_0^2 is the
/// sample variance of `returns` unless an initial variance is supplied.
std::vector<double> filter_volatility(std::span<const double> returns, const Spec& spec, const Params& params,
                                      std::optional<double> initial_variance = std::nullopt);

/// sigma for the observation following the last one in `returns`.
double next_sigma(std::span<const double> returns, std::span<const double> sigma, const Spec& spec,
                  const Params& params);

double negative_log_likelihood(std::span<const double> returns, const Spec& spec, const Params& params,
                               std::optional<double> initial_variance = std::nullopt);

struct FitOptions {
    /// Number of multi-start points (at least 3 are always used).
    int starts = 3;
    int max_iterations = 2000;
    double diameter_tol = 1e-8;
    /// Fix mu at zero instead of estimating it.
    bool zero_mean = false;
};

struct GarchFit {
    Spec spec;
    Params params;
    double loglik = 0.0;
    std::vector<double> sigma;
    std::vector<double> std_residuals;
    bool converged = false;
    int iterations = 0;
    /// Log-likelihood at each multi-start initial point.
    std::vector<double> start_logliks;
    std::vector<std::string> warnings;
};

/// Conditional maximum likelihood by Nelder-Mead over unconstrained
/// transforms of the parameters, best of several starts.
GarchFit fit_mle(std::span<const double> returns, const Spec& spec, const FitOptions& options = {});

/// Innovation quantile F_z^{-1}(alpha) of the unit-variance innovation.
double quantile(const Innovation& innovation, double alpha);

/// Innovation of a fitted model (normal or standardized t with the fitted nu).
Innovation innovation_of(const Spec& spec, const Params& params);

struct VarSeries {
    double alpha = 0.0;
    std::vector<Date> dates;
    /// values[t] is the forecast made at t-1 for return t.
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
};

/// VaR_t = mu + sigma_t * F^{-1}(alpha); negative for small alpha.
VarSeries var_from_sigma(std::span<const double> sigma, double mu, const Innovation& innovation, double alpha);

/// One-step-ahead VaR path over the fitted sample.
VarSeries var_forecast(const GarchFit& fit, double alpha, bool use_mean = true);

/// E[r | r < VaR] per date under the conditional distribution.
std::vector<double> es_from_sigma(std::span<const double> sigma, double mu, const Innovation& innovation,
                                  double alpha);
std::vector<double> es_forecast(const GarchFit& fit, double alpha, bool use_mean = true);

std::string to_string(Model model);
std::string to_string(InnovationKind kind);
Model parse_model(const std::string& text);
InnovationKind parse_innovation(const std::string& text);

}  // namespace cavar::garch
