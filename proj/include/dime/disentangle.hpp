#pragma once

#include "dime/model.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dime {

// Fixed evaluation sample set. The point under explanation must be one of
// its members.
struct SampleSet {
    std::vector<ModalityPair> points;
    std::vector<std::string> ids;  // one per point; defaulted when empty

    int size() const noexcept { return static_cast<int>(points.size()); }
};

SampleSet make_sample_set(std::vector<ModalityPair> points,
                          std::vector<std::string> ids = {});

// N x N x C cache of model logits over all cross-pairings of a sample set:
// entry (i, j) holds M(x1_i, x2_j). Row, column, and grand means are cached
// with fixed-order summation so that the incremental updates in
// decompose_perturbed reproduce them bit-for-bit. Immutable once built.
class LogitTable {
public:
    // Exactly N^2 model evaluations through one evaluate_batch call.
    static LogitTable build(Model& model, const SampleSet& samples);
    static LogitTable from_values(int n, int c, std::vector<double> logits,
                                  std::vector<std::string> ids = {});

    int sample_count() const noexcept { return n_; }
    int class_count() const noexcept { return c_; }

    std::span<const double> at(int i, int j) const;
    std::span<const double> row_mean(int i) const;   // mean over j of row i
    std::span<const double> col_mean(int j) const;   // mean over i of column j
    std::span<const double> grand_mean() const;
    const std::vector<std::string>& sample_ids() const noexcept { return ids_; }
    const std::vector<double>& raw() const noexcept { return logits_; }

    // Copy with column k replaced by fresh logits (fresh[i] = M(x1_i, new_x2));
    // used by the swap test.
    LogitTable with_replaced_column(int k, const std::vector<LogitVector>& fresh) const;

    void save(const std::filesystem::path& file) const;
    static LogitTable load(const std::filesystem::path& file);

private:
    LogitTable() = default;
    void recompute_means();

    int n_ = 0;
    int c_ = 0;
    std::vector<double> logits_;      // n*n*c, row-major
    std::vector<double> row_means_;   // n*c
    std::vector<double> col_means_;   // n*c
    std::vector<double> grand_mean_;  // c
    std::vector<std::string> ids_;
};

struct DecomposedLogits {
    LogitVector full;  // M at the point
    LogitVector uc;    // row mean + column mean - grand mean
    LogitVector mi;    // full - uc
};

// Decomposition at diagonal point k from the cached means.
DecomposedLogits decompose_point(const LogitTable& table, int k);

// Decomposition at point k with `perturbed` substituted for modality `side`
// (1 or 2). Runs the model exactly N times (the replaced row or column) and
// patches the affected means in O(N) from the cached totals; the table is
// never mutated. With the original value this returns decompose_point's
// result bit-for-bit.
DecomposedLogits decompose_perturbed(const LogitTable& table, const SampleSet& samples,
                                     int k, int side, const ModalityValue& perturbed,
                                     Model& model);

// Double-centered interaction grid, flattened row-major (n*n*c): entry
// (i, j) = L[i][j] - row_mean_i - col_mean_j + grand_mean. Every row and
// column of the result has zero mean.
std::vector<double> mi_grid(const LogitTable& table);

}  // namespace dime
