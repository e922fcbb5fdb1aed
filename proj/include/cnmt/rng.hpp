#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace cnmt {

/// Seeded generator whose output depends only on the seed.
///
/// std::mt19937_64 has a standard-mandated output sequence; the standard
/// distributions do not, so the conversions to floating point, ranges and
/// normals are done here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double normal(double mean, double stddev);

    /// Uniform integer in [0, n), n > 0.
    std::size_t below(std::size_t n);

    template <typename V>
    void shuffle(V& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = below(i);
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Derives an independent seed for a named sub-stream of a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace cnmt
