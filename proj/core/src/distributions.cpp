#include "cavar/distributions.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cavar/error.hpp"

namespace cavar::dist {

double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        fail(ErrorCode::DomainError, "normal_quantile: p must lie in (0,1), got " + std::to_string(p));
    }
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                 45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
              133.14166789178437745) * r + 3.387132872796366608);
        const double den =
            (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                 21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
              42.313330701600911252) * r + 1.0);
        return q * num / den;
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value = 0.0;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                 1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
              4.6303378461565452959) * r + 1.42343711074968357734);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                 0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
              2.05319162663775882187) * r + 1.0);
        value = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                 0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
              5.4637849111641143699) * r + 6.6579046435011037772);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                 7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
              0.59983220655588793769) * r + 1.0);
        value = num / den;
    }
    return q < 0.0 ? -value : value;
}

namespace {

double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Continued fraction for I_x(a,b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-16;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 10000; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) {
            break;
        }
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0) || std::isnan(x)) {
        fail(ErrorCode::DomainError, "incomplete_beta: a, b must be positive");
    }
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double incomplete_beta_inverse(double a, double b, double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        fail(ErrorCode::DomainError, "incomplete_beta_inverse: p must lie in [0,1]");
    }
    if (p == 0.0) return 0.0;
    if (p == 1.0) return 1.0;
    // Safeguarded Newton inside a shrinking bisection bracket.
    const double lb = log_beta(a, b);
    double lo = 0.0;
    double hi = 1.0;
    double x = a / (a + b);
    for (int iter = 0; iter < 300; ++iter) {
        const double f = incomplete_beta(a, b, x) - p;
        if (f == 0.0) return x;
        if (f < 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        const double log_density = (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - lb;
        const double density = std::exp(log_density);
        double next = (density > 0.0 && std::isfinite(density)) ? x - f / density : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
        }
        if (std::fabs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::fabs(x) ||
            hi - lo <= std::numeric_limits<double>::min()) {
            return next;
        }
        x = next;
    }
    return x;
}

double student_t_pdf(double t, double nu) {
    const double log_norm = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                            0.5 * std::log(nu * std::numbers::pi);
    return std::exp(log_norm - 0.5 * (nu + 1.0) * std::log1p(t * t / nu));
}

double student_t_cdf(double t, double nu) {
    if (!(nu > 0.0)) {
        fail(ErrorCode::DomainError, "student_t_cdf: nu must be positive");
    }
    const double tail = 0.5 * incomplete_beta(0.5 * nu, 0.5, nu / (nu + t * t));
    return t > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double nu) {
    if (!(p > 0.0 && p < 1.0)) {
        fail(ErrorCode::DomainError, "student_t_quantile: p must lie in (0,1), got " + std::to_string(p));
    }
    if (!(nu > 0.0)) {
        fail(ErrorCode::DomainError, "student_t_quantile: nu must be positive");
    }
    if (p == 0.5) return 0.0;
    const double lower = p < 0.5 ? p : 1.0 - p;
    // Two-sided tail mass 2*lower = I_x(nu/2, 1/2) with x = nu/(nu+t^2); for
    // moderate tails solve in y = 1 - x, which stays well conditioned as nu grows.
    double t = 0.0;
    if (2.0 * lower < 1e-3) {
        const double x = incomplete_beta_inverse(0.5 * nu, 0.5, 2.0 * lower);
        t = std::sqrt(nu * (1.0 - x) / x);
    } else {
        const double y = incomplete_beta_inverse(0.5, 0.5 * nu, 1.0 - 2.0 * lower);
        t = std::sqrt(nu * y / (1.0 - y));
    }
    return p < 0.5 ? -t : t;
}

double std_student_t_log_pdf(double z, double nu) {
    return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
           0.5 * std::log(std::numbers::pi * (nu - 2.0)) -
           0.5 * (nu + 1.0) * std::log1p(z * z / (nu - 2.0));
}

double std_student_t_quantile(double p, double nu) {
    if (!(nu > 2.0)) {
        fail(ErrorCode::DomainError, "std_student_t_quantile: nu must exceed 2");
    }
    return student_t_quantile(p, nu) * std::sqrt((nu - 2.0) / nu);
}

double chi_square_sf(double statistic, int df) {
    if (std::isnan(statistic)) {
        fail(ErrorCode::DomainError, "chi_square_sf: statistic is NaN");
    }
    if (statistic <= 0.0) return 1.0;
    switch (df) {
        case 1:
            return std::erfc(std::sqrt(0.5 * statistic));
        case 2:
            return std::exp(-0.5 * statistic);
        default:
            fail(ErrorCode::DomainError, "chi_square_sf: only df 1 and 2 are supported");
    }
}

double chi_square_critical(int df, double level) {
    if (!(level > 0.0 && level < 1.0)) {
        fail(ErrorCode::DomainError, "chi_square_critical: level must lie in (0,1)");
    }
    switch (df) {
        case 1: {
            const double z = normal_quantile(1.0 - 0.5 * level);
            return z * z;
        }
        case 2:
            return -2.0 * std::log(level);
        default:
            fail(ErrorCode::DomainError, "chi_square_critical: only df 1 and 2 are supported");
    }
}

}  // namespace cavar::dist
