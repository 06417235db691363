#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace symconv {

// Deterministic splittable PRNG. One stream per concern (init, shuffle,
// augmentation, ...) is derived from the run seed so results do not depend
// on evaluation order elsewhere.
//
// The generator is splitmix64; normal deviates come from Box-Muller with an
// explicit draw order. Both are spelled out here rather than taken from
// <random> because libstdc++'s distributions are not pinned across versions,
// and checkpoints must be reproducible from the seed alone.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Rejection keeps the distribution exact.
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Standard normal, Box-Muller. Draws two uniforms per pair; the cosine
    // branch is returned first.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        // avoid log(0)
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Derives an independent stream; mixing is one splitmix64 scramble of
    // (state, tag), so derived streams are stable across runs.
    Rng derive(std::uint64_t tag) const {
        Rng child(state_ ^ (0x9e3779b97f4a7c15ULL + tag * 0xbf58476d1ce4e5b9ULL));
        child.next_u64();
        return child;
    }

    Rng derive(std::string_view tag) const { return derive(fnv1a(tag)); }

    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        return h;
    }

private:
    std::uint64_t state_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace symconv
