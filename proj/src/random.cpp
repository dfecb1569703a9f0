#include "hdgee/random.hpp"

namespace hdgee {
namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    state += 0x9E3779B97F4A7C15ULL;
    return mix64(state);
}

std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Xoshiro256::Xoshiro256(std::uint64_t seed) noexcept {
    std::uint64_t state = seed;
    for (auto& word : s_) word = splitmix64(state);
}

Xoshiro256::result_type Xoshiro256::operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Xoshiro256::uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1p-53; }

Xoshiro256 derive_stream(std::uint64_t seed, std::uint64_t replication, std::uint64_t cluster) noexcept {
    std::uint64_t key = mix64(seed ^ 0x6A09E667F3BCC909ULL);
    key = mix64(key ^ mix64(replication + 0xBB67AE8584CAA73BULL));
    key = mix64(key ^ mix64(cluster + 0x3C6EF372FE94F82BULL));
    return Xoshiro256(key);
}

}  // namespace hdgee
