#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace dime {

// Deterministic seed derivation: one root seed fans out to independent
// sub-seeds keyed by role tags ("mlp/init", "rq1/point=17", ...), so any
// stage of a pipeline can be re-run in isolation.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag);

// Seeded random stream. mt19937_64 output is fixed by the C++ standard and
// the transforms below touch only the uniform words, so equal seeds give
// equal sequences across runs and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    // Raw 64-bit words consumed so far.
    std::uint64_t position() const noexcept { return position_; }

    std::uint64_t next_u64() {
        ++position_;
        return engine_();
    }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via the Box-Muller pair transform. Uncached: every
    // draw consumes exactly two uniform words.
    double normal();

    // Uniform integer in [0, n); rejection keeps it exact.
    std::uint64_t below(std::uint64_t n);

    // In-place Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

    // k distinct indices from [0, n), in draw order.
    std::vector<int> sample_without_replacement(int n, int k);

private:
    std::uint64_t seed_ = 0;
    std::uint64_t position_ = 0;
    std::mt19937_64 engine_;
};

}  // namespace dime
