#pragma once

#include <cstdint>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include <cstddef>
#include <utility>
#include <vector>

namespace isac {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Independent seed for substream (`stream`, `index`) of a base seed. Lets
/// per-frame generators be created in any order with identical results.
inline constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                           std::uint64_t index = 0) {
    return splitmix64(splitmix64(base ^ splitmix64(stream)) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

/// Same sequence as std::mt19937_64.
using Rng = boost::random::mt19937_64;

/// Fisher-Yates shuffle with a portable index distribution.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        boost::random::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(v[i - 1], v[pick(rng)]);
    }
}

}  // namespace isac
