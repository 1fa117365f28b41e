#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>

namespace oscar {

// Counter-based random streams. Every stream is a pure function of the keys
// it was derived from, so parallel and serial schedules draw identical
// numbers. No shared mutable generator anywhere.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t state) : state_(state) {}

    // Derives an independent stream from (seed, key...). Keys are mixed with
    // the splitmix64 finalizer so that nearby counters give unrelated states.
    static RandomStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
        std::uint64_t h = mix(seed ^ 0x9E3779B97F4A7C15ULL);
        for (std::uint64_t k : keys) {
            h = mix(h ^ mix(k + 0xD1B54A32D192ED03ULL));
        }
        return RandomStream(h);
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    // Uniform in [0, 1) with 53 bits of resolution.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). Fixed-point multiply keeps it branch-free
    // and platform-independent.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Draws an index from unnormalized nonnegative weights by inverse CDF.
    // Returns the last positive-weight index when rounding pushes the draw
    // past the total mass.
    std::size_t next_weighted(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = next_unit() * total;
        double cum = 0.0;
        std::size_t last_positive = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0) continue;
            last_positive = i;
            cum += weights[i];
            if (u < cum) return i;
        }
        return last_positive;
    }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

} // namespace oscar
