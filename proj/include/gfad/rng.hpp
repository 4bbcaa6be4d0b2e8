#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

#include "gfad/numeric.hpp"

namespace gfad {

/// Stream purposes. Each (seed, cell, phase, trial, purpose) path yields an
/// independent stream, so results never depend on which worker ran a trial.
enum class StreamPurpose : std::uint64_t {
    Pilot = 1,
    Activity = 2,
    Channel = 3,
    Noise = 4,
    CoordinateOrder = 5,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Folds a path of identifiers into a 64-bit stream key:
/// key = mix(...mix(mix(seed) ^ path[0]) ^ path[1] ...).
std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

/// Counter-based generator: the k-th output is splitmix64(key + k * golden).
/// Satisfies UniformRandomBitGenerator so it plugs into <random> distributions.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t key) : key_(key) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double normal();
    /// CN(0, 1): (x + j y) / sqrt(2), x and y standard normal.
    cdouble complex_normal();

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace gfad
