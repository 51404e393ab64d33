#pragma once

#include <cstdint>
#include <cmath>

namespace stochtrack {

// Counter-based random streams. A stream is keyed on
// (master seed, particle id, step index, sub-iteration index), so any particle's
// noise can be regenerated in isolation and results do not depend on the order
// in which particles are advanced.

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}
}  // namespace detail

class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t particle_id,
              std::uint64_t step_index, std::uint64_t subiter) {
        // Fold the four key words through splitmix so nearby keys decorrelate.
        std::uint64_t s = master_seed;
        s ^= detail::splitmix64(s) + 0x632be59bd9b4e019ull * (particle_id + 1);
        s ^= detail::splitmix64(s) + 0x9e3779b97f4a7c15ull * (step_index + 1);
        s ^= detail::splitmix64(s) + 0xc2b2ae3d27d4eb4full * (subiter + 1);
        state_ = s;
        (void)next_u64();  // warm-up so low-entropy keys do not leak structure
    }

    std::uint64_t next_u64() { return detail::splitmix64(state_); }

    // Uniform in (0, 1); never returns 0 or 1.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal, Marsaglia polar method. Pairs are cached.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_uniform() - 1.0;
            v = 2.0 * next_uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

private:
    std::uint64_t state_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Plain sequential generator for utility randomness (mesh jitter, seeding).
class SeqRng {
public:
    explicit SeqRng(std::uint64_t seed) : state_(seed ^ 0x5851f42d4c957f2dull) {
        (void)detail::splitmix64(state_);
    }
    std::uint64_t next_u64() { return detail::splitmix64(state_); }
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }
    // Uniform in [a, b)
    double next_in(double a, double b) { return a + (b - a) * next_uniform(); }
    // Uniform integer in [0, n)
    std::uint64_t next_below(std::uint64_t n) {
        // Lemire-style rejection-free enough for utility use.
        return static_cast<std::uint64_t>(next_uniform() * static_cast<double>(n)) % n;
    }

private:
    std::uint64_t state_;
};

}  // namespace stochtrack
