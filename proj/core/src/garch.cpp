#include "cavar/garch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "cavar/distributions.hpp"
#include "cavar/error.hpp"
#include "cavar/optimize.hpp"

namespace cavar::garch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sample_mean(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
    const double m = sample_mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size());
}

bool params_ok(const Spec& spec, const Params& p) {
    if (!(p.alpha0 > 0.0) || !(p.alpha1 >= 0.0) || !(p.beta1 >= 0.0) || !std::isfinite(p.mu)) return false;
    if (spec.model == Model::GARCH) {
        if (p.gamma != 0.0 || !(p.alpha1 + p.beta1 < 1.0)) return false;
    } else if (!(p.alpha1 + p.gamma >= 0.0) || !(p.alpha1 + p.beta1 + 0.5 * p.gamma < 1.0)) {
        return false;
    }
    if (spec.innovation == InnovationKind::StudentT && !(p.nu > 2.0)) return false;
    return true;
}

// One step of the variance recursion. GARCH and GJR share the arithmetic so
// GJR with gamma = 0 reproduces GARCH exactly.
inline double step_variance(const Spec& spec, const Params& p, double eps, double prev_var) {
    const double arch = p.alpha1 + (spec.model == Model::GJR && eps < 0.0 ? p.gamma : 0.0);
    return p.alpha0 + arch * eps * eps + p.beta1 * prev_var;
}

// Returns +inf when the recursion leaves the finite positive range.
double nll_unchecked(std::span<const double> r, const Spec& spec, const Params& p, double var0) {
    const bool student = spec.innovation == InnovationKind::StudentT;
    const double t_const = student ? std::lgamma(0.5 * (p.nu + 1.0)) - std::lgamma(0.5 * p.nu) -
                                         0.5 * std::log(std::numbers::pi * (p.nu - 2.0))
                                   : 0.0;
    const double log_2pi = std::log(2.0 * std::numbers::pi);
    double var = var0;
    double total = 0.0;
    for (std::size_t t = 0; t < r.size(); ++t) {
        if (t > 0) var = step_variance(spec, p, r[t - 1] - p.mu, var);
        if (!(var > 0.0) || !std::isfinite(var)) return kInf;
        const double eps = r[t] - p.mu;
        if (student) {
            const double z2 = eps * eps / var;
            total -= t_const - 0.5 * (p.nu + 1.0) * std::log1p(z2 / (p.nu - 2.0)) - 0.5 * std::log(var);
        } else {
            total += 0.5 * (log_2pi + std::log(var)) + eps * eps / (2.0 * var);
        }
    }
    return std::isfinite(total) ? total : kInf;
}

// Unconstrained coordinates:
//   [0] mu offset in units of the sample sd (absent with zero_mean)
//   [1] log alpha0
//   [2],[3] softmax weights mapping (A, B) into {A, B > 0, A + B < 1}
//   [4] GJR: gamma = 2A tanh(phi), alpha1 = A (1 - tanh(phi))
//   [5] StudentT: log(nu - 2)
// A is the symmetric-equivalent ARCH loading alpha1 + gamma/2 and B = beta1,
// so every point satisfies the stationarity constraints by construction.
struct Transform {
    Spec spec;
    bool zero_mean;
    double mean;
    double sd;

    Params decode(std::span<const double> th) const {
        std::size_t k = 0;
        Params p;
        p.mu = zero_mean ? 0.0 : mean + th[k++] * sd;
        p.alpha0 = std::exp(th[k++]);
        const double ea = std::exp(th[k++]);
        const double eb = std::exp(th[k++]);
        const double denom = 1.0 + ea + eb;
        const double a = ea / denom;
        p.beta1 = eb / denom;
        if (spec.model == Model::GJR) {
            const double tanh = std::tanh(th[k++]);
            p.gamma = 2.0 * a * tanh;
            p.alpha1 = a * (1.0 - tanh);
        } else {
            p.alpha1 = a;
        }
        if (spec.innovation == InnovationKind::StudentT) p.nu = 2.0 + std::exp(th[k++]);
        return p;
    }

    std::vector<double> encode(const Params& p) const {
        std::vector<double> th;
        if (!zero_mean) th.push_back((p.mu - mean) / sd);
        th.push_back(std::log(p.alpha0));
        const double a = p.alpha1 + 0.5 * p.gamma;
        const double slack = 1.0 - a - p.beta1;
        th.push_back(std::log(a / slack));
        th.push_back(std::log(p.beta1 / slack));
        if (spec.model == Model::GJR) th.push_back(std::atanh(std::clamp(0.5 * p.gamma / a, -0.999, 0.999)));
        if (spec.innovation == InnovationKind::StudentT) th.push_back(std::log(p.nu - 2.0));
        return th;
    }
};

}  // namespace

void validate(const Spec& spec, const Params& params) {
    if (!params_ok(spec, params)) {
        fail(ErrorCode::InvalidParams, "GARCH parameters violate positivity or stationarity constraints");
    }
}

std::vector<double> filter_volatility(std::span<const double> returns, const Spec& spec, const Params& params,
                                      std::optional<double> initial_variance) {
    validate(spec, params);
    if (returns.empty()) {
        fail(ErrorCode::TooShort, "filter_volatility: empty return series");
    }
    double var = initial_variance.value_or(sample_variance(returns));
    if (!(var > 0.0)) {
        // A flat sample has no variance; start from the intercept instead.
        var = params.alpha0;
    }
    std::vector<double> sigma(returns.size());
    sigma[0] = std::sqrt(var);
    for (std::size_t t = 1; t < returns.size(); ++t) {
        var = step_variance(spec, params, returns[t - 1] - params.mu, var);
        sigma[t] = std::sqrt(var);
    }
    return sigma;
}

double next_sigma(std::span<const double> returns, std::span<const double> sigma, const Spec& spec,
                  const Params& params) {
    if (returns.empty() || returns.size() != sigma.size()) {
        fail(ErrorCode::LengthMismatch, "next_sigma: returns and sigma must be non-empty and aligned");
    }
    const double prev = sigma.back() * sigma.back();
    return std::sqrt(step_variance(spec, params, returns.back() - params.mu, prev));
}

double negative_log_likelihood(std::span<const double> returns, const Spec& spec, const Params& params,
                               std::optional<double> initial_variance) {
    validate(spec, params);
    if (returns.empty()) {
        fail(ErrorCode::TooShort, "negative_log_likelihood: empty return series");
    }
    const double nll = nll_unchecked(returns, spec, params, initial_variance.value_or(sample_variance(returns)));
    if (!std::isfinite(nll)) {
        fail(ErrorCode::NonFinite, "negative_log_likelihood: variance recursion is not finite");
    }
    return nll;
}

GarchFit fit_mle(std::span<const double> returns, const Spec& spec, const FitOptions& options) {
    if (returns.size() < 250) {
        fail(ErrorCode::TooShort, "fit_mle needs at least 250 returns, got " + std::to_string(returns.size()));
    }
    const double mean = sample_mean(returns);
    const double var = sample_variance(returns);
    // Rounding leaves a tiny positive variance on a constant series.
    if (!(var > 1e-12 * mean * mean) || var == 0.0) {
        fail(ErrorCode::ConvergenceFailure, "fit_mle: return series has zero variance");
    }
    GarchFit fit;
    fit.spec = spec;
    if (returns.size() < 1000) {
        fit.warnings.push_back("fewer than 1000 returns; estimates may be unreliable");
    }

    const Transform tr{spec, options.zero_mean, mean, std::sqrt(var)};
    const double var0 = var;
    auto objective = [&](std::span<const double> th) {
        const Params p = tr.decode(th);
        return params_ok(spec, p) ? nll_unchecked(returns, spec, p, var0) : kInf;
    };

    struct Start {
        double a, b, gamma_share;
    };
    std::vector<Start> starts = {{0.05, 0.90, 0.0}, {0.10, 0.80, 0.3}, {0.20, 0.60, -0.3}};
    for (int extra = 3; extra < options.starts; ++extra) {
        const double a = 0.02 + 0.04 * extra;
        starts.push_back({a, std::min(0.97 - a, 0.95 - 0.02 * extra), 0.1 * (extra % 3 - 1)});
    }

    opt::NelderMeadOptions nm;
    nm.initial_step = 0.25;
    nm.diameter_tol = options.diameter_tol;

    double best_value = kInf;
    std::vector<double> best_theta;
    for (const Start& s : starts) {
        Params p0;
        p0.mu = options.zero_mean ? 0.0 : mean;
        p0.alpha0 = var * (1.0 - s.a - s.b);
        p0.beta1 = s.b;
        if (spec.model == Model::GJR) {
            p0.gamma = 2.0 * s.a * s.gamma_share;
            p0.alpha1 = s.a - 0.5 * p0.gamma;
        } else {
            p0.alpha1 = s.a;
        }
        p0.nu = spec.innovation == InnovationKind::StudentT ? 8.0 : 0.0;
        std::vector<double> theta = tr.encode(p0);
        fit.start_logliks.push_back(-objective(theta));

        // Restart the simplex at the optimum until a restart no longer improves it.
        int budget = options.max_iterations;
        opt::Minimum m;
        bool converged = false;
        double previous = objective(theta);
        m.value = previous;
        for (int round = 0; round < 4 && budget > 0; ++round) {
            nm.max_iterations = budget;
            m = opt::nelder_mead(objective, theta, nm);
            budget -= m.iterations;
            fit.iterations += m.iterations;
            const double improvement = previous - m.value;
            theta = m.x;
            previous = m.value;
            converged = m.converged;
            if (round > 0 && converged && improvement < 1e-9) break;
            nm.initial_step = 0.05;
        }
        nm.initial_step = 0.25;
        if (m.value < best_value) {
            best_value = m.value;
            best_theta = theta;
            fit.converged = converged;
        }
    }
    if (best_theta.empty() || !std::isfinite(best_value)) {
        fail(ErrorCode::ConvergenceFailure, "fit_mle: no start produced a finite likelihood");
    }

    fit.params = tr.decode(best_theta);
    fit.loglik = -best_value;
    fit.sigma = filter_volatility(returns, spec, fit.params, var0);
    fit.std_residuals.resize(returns.size());
    for (std::size_t t = 0; t < returns.size(); ++t) {
        fit.std_residuals[t] = (returns[t] - fit.params.mu) / fit.sigma[t];
    }
    if (!fit.converged) {
        fit.warnings.push_back("simplex did not reach the diameter tolerance within the iteration budget");
    }
    return fit;
}

double quantile(const Innovation& innovation, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        fail(ErrorCode::DomainError, "quantile: alpha must lie in (0,1)");
    }
    if (innovation.kind == InnovationKind::Normal) {
        return dist::normal_quantile(alpha);
    }
    if (!(innovation.nu > 2.0)) {
        fail(ErrorCode::DomainError, "quantile: Student-t degrees of freedom must exceed 2");
    }
    return dist::std_student_t_quantile(alpha, innovation.nu);
}

Innovation innovation_of(const Spec& spec, const Params& params) {
    return spec.innovation == InnovationKind::Normal ? Innovation::normal() : Innovation::student_t(params.nu);
}

VarSeries var_from_sigma(std::span<const double> sigma, double mu, const Innovation& innovation, double alpha) {
    const double q = quantile(innovation, alpha);
    VarSeries out;
    out.alpha = alpha;
    out.values.resize(sigma.size());
    for (std::size_t t = 0; t < sigma.size(); ++t) out.values[t] = mu + sigma[t] * q;
    return out;
}

VarSeries var_forecast(const GarchFit& fit, double alpha, bool use_mean) {
    return var_from_sigma(fit.sigma, use_mean ? fit.params.mu : 0.0, innovation_of(fit.spec, fit.params), alpha);
}

std::vector<double> es_from_sigma(std::span<const double> sigma, double mu, const Innovation& innovation,
                                  double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        fail(ErrorCode::DomainError, "es: alpha must lie in (0,1)");
    }
    // Tail mean of the unit-variance innovation below its alpha-quantile.
    double tail_mean = 0.0;
    if (innovation.kind == InnovationKind::Normal) {
        tail_mean = -dist::normal_pdf(dist::normal_quantile(alpha)) / alpha;
    } else {
        const double nu = innovation.nu;
        if (!(nu > 2.0)) {
            fail(ErrorCode::DomainError, "es: Student-t degrees of freedom must exceed 2");
        }
        const double q = dist::student_t_quantile(alpha, nu);
        const double ordinary = -(nu + q * q) / (nu - 1.0) * dist::student_t_pdf(q, nu) / alpha;
        tail_mean = ordinary * std::sqrt((nu - 2.0) / nu);
    }
    std::vector<double> out(sigma.size());
    for (std::size_t t = 0; t < sigma.size(); ++t) out[t] = mu + sigma[t] * tail_mean;
    return out;
}

std::vector<double> es_forecast(const GarchFit& fit, double alpha, bool use_mean) {
    return es_from_sigma(fit.sigma, use_mean ? fit.params.mu : 0.0, innovation_of(fit.spec, fit.params), alpha);
}

std::string to_string(Model model) { return model == Model::GARCH ? "GARCH" : "GJR"; }

std::string to_string(InnovationKind kind) { return kind == InnovationKind::Normal ? "normal" : "student_t"; }

Model parse_model(const std::string& text) {
    if (text == "GARCH" || text == "garch") return Model::GARCH;
    if (text == "GJR" || text == "gjr" || text == "GJR-GARCH" || text == "gjr-garch") return Model::GJR;
    fail(ErrorCode::ConfigInvalid, "unknown GARCH model '" + text + "'");
}

InnovationKind parse_innovation(const std::string& text) {
    if (text == "normal" || text == "Normal") return InnovationKind::Normal;
    if (text == "student_t" || text == "StudentT" || text == "t") return InnovationKind::StudentT;
    fail(ErrorCode::ConfigInvalid, "unknown innovation distribution '" + text + "'");
}

}  // namespace cavar::garch
