#ifndef PIPECACHE_RNG_HPP
#define PIPECACHE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace pipecache {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/*
 * Seeded random stream with cross-platform stable output.
 *
 * std::mt19937_64 is fully specified by the standard; the distribution
 * helpers below avoid std::uniform_*_distribution, whose output is
 * implementation-defined.  spawn() derives an independent child stream
 * from (base seed, child index) only, so sibling streams never perturb
 * each other when branches are added or removed.
 */
class SplitRng {
public:
    explicit SplitRng(std::uint64_t seed)
        : base_seed_(seed), engine_(splitmix64(seed)) {}

    std::uint64_t base_seed() const { return base_seed_; }

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1).
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi].
    double uniform_real(double lo, double hi)
    {
        return lo + uniform01() * (hi - lo);
    }

    // Uniform in exponent over [lo, hi]; requires lo > 0.
    double log_uniform(double lo, double hi)
    {
        return std::exp(uniform_real(std::log(lo), std::log(hi)));
    }

    // Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi)
    {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0)  // full 64-bit range
            return static_cast<std::int64_t>(next());
        const auto wide = static_cast<unsigned __int128>(next());
        return lo + static_cast<std::int64_t>((wide * span) >> 64);
    }

    std::size_t pick_index(std::size_t count)
    {
        return static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(count) - 1));
    }

    bool bernoulli(double p) { return uniform01() < p; }

    template <typename T>
    void shuffle(std::vector<T>& items)
    {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(items[i - 1], items[j]);
        }
    }

    // Independent child stream for branch `index`.
    SplitRng spawn(std::uint64_t index) const
    {
        return SplitRng(splitmix64(base_seed_ ^ (0x9e3779b97f4a7c15ull * (index + 1))));
    }

private:
    std::uint64_t base_seed_;
    std::mt19937_64 engine_;
};

}

#endif
