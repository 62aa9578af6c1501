#pragma once

#include <bit>
#include <cmath>
#include <cstdint>

namespace cusploc {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
} // namespace detail

/// Derive an independent substream key from a master seed and up to three
/// stream coordinates (detector index, replicate index, n, ...). Adding a new
/// coordinate value never perturbs streams at other coordinates, which keeps
/// experiment outputs stable when the schedule or thread count changes.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = master;
    std::uint64_t h = detail::splitmix64(s);
    s ^= a + 0x632be59bd9b4e019ULL;
    h ^= detail::splitmix64(s);
    s ^= b + 0x9e6c63d0876a9a47ULL;
    h ^= detail::splitmix64(s);
    s ^= c + 0xd1b54a32d192ed03ULL;
    h ^= detail::splitmix64(s);
    return h;
}

/// xoshiro256++ generator. All distribution transforms are written out
/// explicitly (no std::*_distribution) so that streams are bit-reproducible
/// across standard libraries and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = detail::splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = std::rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = std::rotl(s_[3], 45);
        return result;
    }

    /// Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Exponential with unit rate.
    double exponential() { return -std::log(uniform()); }

    /// Standard normal (Box-Muller; one value per call, no cached spare).
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::uint64_t s_[4];
};

} // namespace cusploc
