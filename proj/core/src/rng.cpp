#include "cavar/rng.hpp"

#include <cmath>
#include <numbers>

namespace cavar {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

Rng::Rng(std::uint64_t seed, std::string_view tag, std::uint64_t stream)
    : key_(mix64(mix64(seed + kGolden) ^ mix64(fnv1a64(tag)) ^ mix64(stream * kGolden + 1))) {}

Rng Rng::split(std::uint64_t stream) const {
    return Rng(mix64(key_ ^ mix64((stream + 1) * kGolden)));
}

std::uint64_t Rng::next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double Rng::uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection on the top of the range keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) {
        x = next_u64();
    }
    return x % n;
}

double Rng::normal() {
    // Box-Muller, one value per pair of uniforms; no cached state so the
    // stream position stays a simple count of draws.
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gamma(double shape) {
    if (shape < 1.0) {
        const double u = uniform();
        return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) {
            continue;
        }
        v = v * v * v;
        const double u = uniform();
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
            return d * v;
        }
    }
}

double Rng::student_t(double nu) {
    const double z = normal();
    const double chi2 = 2.0 * gamma(0.5 * nu);
    return z / std::sqrt(chi2 / nu);
}

}  // namespace cavar
