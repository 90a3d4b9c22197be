#pragma once

#include <cstdint>
#include <initializer_list>
#include <utility>
#include <span>
#include <vector>

namespace fstl {

// Portable seeded randomness: xoshiro256** seeded through splitmix64. The
// <random> distributions are implementation-defined, so the few the
// simulator needs are derived here from the raw 64-bit output.

std::uint64_t splitmix64(std::uint64_t x);

/// Mixes a list of integers into one seed (order-sensitive).
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    /// Standard normal via Box-Muller.
    double normal();

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t state_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// 0..n-1 in a seeded random order.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

}  // namespace fstl
