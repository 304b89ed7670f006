#pragma once

#include <cstdint>
#include <string_view>

namespace cavar {

/// Counter-based generator. Output i of a stream is a pure function of
/// (key, i), and the key is derived from (master seed, module tag, stream
/// index). Distribution sampling is implemented here rather than through
/// <random> so simulated data is identical across standard libraries.
class Rng {
public:
    Rng(std::uint64_t seed, std::string_view tag, std::uint64_t stream = 0);

    /// Independent child stream; does not advance this generator.
    Rng split(std::uint64_t stream) const;

    std::uint64_t next_u64();

    /// Uniform on the open interval (0, 1).
    double uniform();

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    double normal();

    /// Gamma(shape, 1), Marsaglia-Tsang.
    double gamma(double shape);

    /// Ordinary Student-t with nu degrees of freedom (variance nu/(nu-2)).
    double student_t(double nu);

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    explicit Rng(std::uint64_t key) : key_(key) {}

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace cavar
