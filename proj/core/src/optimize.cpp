#include "cavar/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cavar::opt {

namespace {

double safe_eval(const Objective& f, const std::vector<double>& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return std::sqrt(s);
}

}  // namespace

Minimum nelder_mead(const Objective& f, std::vector<double> start, const NelderMeadOptions& options) {
    const std::size_t n = start.size();
    std::vector<std::vector<double>> vertex(n + 1, start);
    for (std::size_t i = 0; i < n; ++i) {
        vertex[i + 1][i] += options.initial_step;
    }
    std::vector<double> value(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        value[i] = safe_eval(f, vertex[i]);
    }

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n);
    std::vector<double> trial(n);
    std::vector<double> trial2(n);

    Minimum result;
    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value[a] < value[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[n - 1];

        double diameter = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            diameter = std::max(diameter, distance(vertex[i], vertex[best]));
        }
        if (diameter < options.diameter_tol) {
            result.converged = true;
            break;
        }

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < n; ++k) centroid[k] += vertex[i][k];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        for (std::size_t k = 0; k < n; ++k) trial[k] = centroid[k] + (centroid[k] - vertex[worst][k]);
        const double reflected = safe_eval(f, trial);

        if (reflected < value[best]) {
            for (std::size_t k = 0; k < n; ++k) trial2[k] = centroid[k] + 2.0 * (centroid[k] - vertex[worst][k]);
            const double expanded = safe_eval(f, trial2);
            if (expanded < reflected) {
                vertex[worst] = trial2;
                value[worst] = expanded;
            } else {
                vertex[worst] = trial;
                value[worst] = reflected;
            }
            continue;
        }
        if (reflected < value[second]) {
            vertex[worst] = trial;
            value[worst] = reflected;
            continue;
        }
        const bool outside = reflected < value[worst];
        for (std::size_t k = 0; k < n; ++k) {
            trial2[k] = outside ? centroid[k] + 0.5 * (trial[k] - centroid[k])
                                : centroid[k] + 0.5 * (vertex[worst][k] - centroid[k]);
        }
        const double contracted = safe_eval(f, trial2);
        if (contracted < (outside ? reflected : value[worst])) {
            vertex[worst] = trial2;
            value[worst] = contracted;
            continue;
        }
        // Shrink toward the best vertex.
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (std::size_t k = 0; k < n; ++k) {
                vertex[i][k] = vertex[best][k] + 0.5 * (vertex[i][k] - vertex[best][k]);
            }
            value[i] = safe_eval(f, vertex[i]);
        }
    }

    const auto best = static_cast<std::size_t>(std::min_element(value.begin(), value.end()) - value.begin());
    result.x = vertex[best];
    result.value = value[best];
    result.iterations = iter;
    return result;
}

}  // namespace cavar::opt
