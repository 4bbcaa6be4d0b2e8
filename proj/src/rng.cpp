#include "gfad/rng.hpp"

#include <cmath>

namespace gfad {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t k = splitmix64(seed);
    for (std::uint64_t p : path) k = splitmix64(k ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
    return k;
}

CounterRng::result_type CounterRng::operator()() {
    return splitmix64(key_ + (counter_++) * kGolden);
}

double CounterRng::uniform() {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double CounterRng::normal() {
    return normal_(*this);
}

cdouble CounterRng::complex_normal() {
    const double x = normal();
    const double y = normal();
    return {x * M_SQRT1_2, y * M_SQRT1_2};
}

} // namespace gfad
