#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace metamf {

/// Identical seed implies bit-identical initialization and sampling sequences.
struct Seed {
    std::uint64_t value = 0;
};

/// Derives an independent stream seed from a base seed (SplitMix64 mixing).
Seed derive_seed(Seed base, std::uint64_t stream);
Seed derive_seed(Seed base, std::uint64_t stream, std::uint64_t index);

/// Deterministic random source. The mt19937_64 engine is fully specified by the
/// standard; uniform draws and shuffles are produced here by hand so that the
/// sequences do not depend on the standard library's distribution internals.
class Rng {
public:
    explicit Rng(Seed seed) : engine_(seed.value) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1), 53 bits of precision.
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    /// Uniform integer in [0, bound) by rejection; bound must be nonzero.
    std::uint64_t next_below(std::uint64_t bound);

    /// Standard normal via Box-Muller.
    double next_normal();

    template <class T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i + 1));
            std::swap(v[i], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

}  // namespace metamf
