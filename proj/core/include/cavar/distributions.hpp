#pragma once

// Scalar special functions and distribution helpers shared by the volatility,
// backtesting and EVT modules.

namespace cavar::dist {

double normal_pdf(double x);
double normal_cdf(double x);

/// Standard normal quantile (Wichura AS241, ~1e-16 relative accuracy).
double normal_quantile(double p);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Solves I_x(a, b) = p for x in [0, 1].
double incomplete_beta_inverse(double a, double b, double p);

/// Ordinary Student-t with nu > 0 degrees of freedom.
double student_t_pdf(double t, double nu);
double student_t_cdf(double t, double nu);
double student_t_quantile(double p, double nu);

/// Unit-variance Student-t (ordinary t scaled by sqrt((nu-2)/nu)), nu > 2.
double std_student_t_log_pdf(double z, double nu);
double std_student_t_quantile(double p, double nu);

/// Chi-square survival function, closed form for df in {1, 2}.
double chi_square_sf(double statistic, int df);

/// Upper critical value c with chi_square_sf(c, df) = level, df in {1, 2}.
double chi_square_critical(int df, double level = 0.05);

}  // namespace cavar::dist
