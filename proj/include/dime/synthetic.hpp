#pragma once

#include "dime/model.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace dime {

inline constexpr int kSyntheticDim = 10;

struct SyntheticPoint {
    std::array<double, kSyntheticDim> d1{};
    std::array<double, kSyntheticDim> d2{};
    double score = 0.0;
    int label = 0;
};

struct DatasetSplits {
    std::vector<SyntheticPoint> train;
    std::vector<SyntheticPoint> valid;
    std::vector<SyntheticPoint> test;
    std::uint64_t seed = 0;

    std::size_t total() const { return train.size() + valid.size() + test.size(); }
};

// sum(d1) + sum(d2) + d1.d2; both arguments must have length 10.
double synthetic_score(std::span<const double> d1, std::span<const double> d2);

// Draws i.i.d. N(0,1) coordinate pairs, discards candidates with
// |score| < 0.01, labels by sign, and splits the retained points
// 8/1/1 in generation order. Deterministic per seed; n >= 10.
DatasetSplits generate_synthetic(std::uint64_t seed, int n);

struct GroundTruthExplanations {
    std::array<double, kSyntheticDim> uc1{};  // = d1
    std::array<double, kSyntheticDim> uc2{};  // = d2
    std::array<double, kSyntheticDim> mi{};   // = d1 * d2 elementwise
};

GroundTruthExplanations ground_truth(const SyntheticPoint& p);

ModalityPair to_modality_pair(const SyntheticPoint& p);

// One line-delimited JSON file per split (train.jsonl / valid.jsonl /
// test.jsonl); the first line of each file records the generator version
// and seed.
void save_splits(const DatasetSplits& splits, const std::filesystem::path& dir);
DatasetSplits load_splits(const std::filesystem::path& dir);

}  // namespace dime
