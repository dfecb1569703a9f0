#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace hdgee {

std::uint64_t splitmix64(std::uint64_t& state) noexcept;
std::uint64_t mix64(std::uint64_t x) noexcept;

/// xoshiro256** engine; satisfies UniformRandomBitGenerator so it plugs into
/// <random> distributions.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;

private:
    std::array<std::uint64_t, 4> s_;
};

/// Independent stream keyed by (seed, replication, cluster). Streams for
/// different keys never depend on the order in which they are created.
Xoshiro256 derive_stream(std::uint64_t seed, std::uint64_t replication, std::uint64_t cluster) noexcept;

}  // namespace hdgee
