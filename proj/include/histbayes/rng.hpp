#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace histbayes {

/// xoshiro256** (Blackman & Vigna) seeded through SplitMix64.
///
/// jump() advances the state by 2^128 draws and long_jump() by 2^192, so
/// streams obtained by repeated jumping never overlap. Chains take
/// jump-separated streams; calibration experiments take long_jump-separated
/// streams and jump inside them.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) noexcept {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    /// Stream `index` of `seed`: the seeded engine jumped `index` times.
    static Rng stream(std::uint64_t seed, std::uint64_t index) noexcept {
        Rng rng(seed);
        for (std::uint64_t i = 0; i < index; ++i) rng.jump();
        return rng;
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    void jump() noexcept {
        static constexpr std::array<std::uint64_t, 4> kJump = {
            0x180ec6d33cfd0abaULL, 0xd5a61266f0c9392cULL, 0xa9582618e03fc9aaULL,
            0x39abdc4529b1661cULL};
        apply(kJump);
    }

    void long_jump() noexcept {
        static constexpr std::array<std::uint64_t, 4> kLongJump = {
            0x76e15d3efefdcbbfULL, 0xc5004e441c522fb3ULL, 0x77710069854ee241ULL,
            0x39109bb02acbe635ULL};
        apply(kLongJump);
    }

    friend bool operator==(const Rng&, const Rng&) = default;

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    static std::uint64_t splitmix64(std::uint64_t& x) noexcept {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    void apply(const std::array<std::uint64_t, 4>& poly) noexcept {
        std::array<std::uint64_t, 4> acc{};
        for (std::uint64_t word : poly) {
            for (int b = 0; b < 64; ++b) {
                if (word & (std::uint64_t{1} << b)) {
                    for (int i = 0; i < 4; ++i) acc[i] ^= state_[i];
                }
                (*this)();
            }
        }
        state_ = acc;
    }

    std::array<std::uint64_t, 4> state_{};
};

// Variate helpers. Boost.Random's distributions are used instead of <random>
// so that draws are identical across standard library implementations.

inline double uniform01(Rng& rng) {
    return boost::random::uniform_01<double>{}(rng);
}

inline double standard_normal(Rng& rng) {
    return boost::random::normal_distribution<double>{0.0, 1.0}(rng);
}

/// Gamma variate with shape `alpha` and *rate* `beta`.
inline double gamma_variate(Rng& rng, double alpha, double beta) {
    return boost::random::gamma_distribution<double>{alpha, 1.0 / beta}(rng);
}

inline std::int64_t poisson_variate(Rng& rng, double mean) {
    if (!(mean > 0.0)) return 0;
    return boost::random::poisson_distribution<std::int64_t, double>{mean}(rng);
}

}  // namespace histbayes
