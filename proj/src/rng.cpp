#include "dime/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace dime {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) {
    std::uint64_t h = kFnvOffset;
    for (unsigned char ch : tag) {
        h ^= ch;
        h *= kFnvPrime;
    }
    return splitmix64(root ^ h);
}

double Rng::normal() {
    // (0, 1] for the log, [0, 1) for the angle.
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) {
        return 0;
    }
    const std::uint64_t limit = (std::numeric_limits<std::uint64_t>::max() / n) * n;
    std::uint64_t r = next_u64();
    while (r >= limit) {
        r = next_u64();
    }
    return r % n;
}

std::vector<int> Rng::sample_without_replacement(int n, int k) {
    std::vector<int> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), 0);
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const auto j = static_cast<std::size_t>(i) +
                       below(static_cast<std::uint64_t>(n - i));
        std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
        out.push_back(pool[static_cast<std::size_t>(i)]);
    }
    return out;
}

}  // namespace dime
