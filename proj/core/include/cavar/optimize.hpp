#pragma once

#include <functional>
#include <span>
#include <vector>

namespace cavar::opt {

using Objective = std::function<double(std::span<const double>)>;

struct NelderMeadOptions {
    double initial_step = 0.1;
    /// Converged once every vertex lies within this distance of the best one.
    double diameter_tol = 1e-8;
    int max_iterations = 2000;
};

struct Minimum {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Derivative-free downhill simplex. Non-finite objective values are treated
/// as +inf, so infeasible regions can be signalled by returning inf or NaN.
Minimum nelder_mead(const Objective& f, std::vector<double> start, const NelderMeadOptions& options = {});

}  // namespace cavar::opt
