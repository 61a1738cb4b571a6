#include "metamf/rng.hpp"

#include <cmath>

namespace metamf {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

Seed derive_seed(Seed base, std::uint64_t stream) {
    return Seed{splitmix64(base.value + 0x9E3779B97F4A7C15ULL * (stream + 1))};
}

Seed derive_seed(Seed base, std::uint64_t stream, std::uint64_t index) {
    return derive_seed(derive_seed(base, stream), index);
}

std::uint64_t Rng::next_below(std::uint64_t bound) {
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % bound;
}

double Rng::next_normal() {
    if (have_spare_normal_) {
        have_spare_normal_ = false;
        return spare_normal_;
    }
    double u1;
    do {
        u1 = next_double();
    } while (u1 <= 0.0);
    const double u2 = next_double();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_normal_ = radius * std::sin(angle);
    have_spare_normal_ = true;
    return radius * std::cos(angle);
}

}  // namespace metamf
