#include "qabench/rng.hpp"

#include <limits>

namespace qabench {

std::uint64_t Rng::below(std::uint64_t n)
{
    // Rejection sampling on the top of the range keeps the result unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % n);
    std::uint64_t x = engine_();
    while (x >= limit)
        x = engine_();
    return x % n;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt)
{
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt)
{
    return mix_seed(seed, fnv1a64(salt));
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis)
{
    std::uint64_t h = basis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace qabench
