#pragma once

#include <cmath>
#include <cstdint>

namespace daq8 {

// Counter-based randomness. Every random value in the engine is a pure
// function of (key, counter), so parallel evaluation order cannot change
// results and resuming from a checkpoint only needs the integer cursors.

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr uint64_t derive_key(uint64_t key, uint64_t part) { return mix64(key + kGolden * (part + 1)); }

template <typename... Rest>
constexpr uint64_t derive_key(uint64_t key, uint64_t part, Rest... rest) {
    return derive_key(derive_key(key, part), rest...);
}

// One splitmix64 stream addressed by counter.
struct CounterRng {
    uint64_t key = 0;

    uint64_t bits(uint64_t counter) const { return mix64(key + kGolden * (counter + 1)); }

    // uniform in [0, 1) with 24-bit resolution (float-exact)
    float uniform(uint64_t counter) const {
        return static_cast<float>(bits(counter) >> 40) * 0x1.0p-24f;
    }

    double uniform_double(uint64_t counter) const {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

    // standard normal via Box-Muller; consumes two counter slots per value
    float normal(uint64_t counter) const {
        const double u1 = uniform_double(2 * counter);
        const double u2 = uniform_double(2 * counter + 1);
        const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        return static_cast<float>(r * std::cos(6.283185307179586 * u2));
    }
};

} // namespace daq8
