#pragma once

#include "dime/disentangle.hpp"
#include "dime/surrogate.hpp"
#include "dime/synthetic.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dime {

struct DimeConfig {
    std::uint64_t seed = 1;
    int emap_samples = 32;  // sample-set size N
    SurrogateConfig surrogate;
    int grid_rows = 0;  // segmentation for grid-raster modalities
    int grid_cols = 0;
};

struct SideExplanations {
    Explanation uc;
    Explanation mi;
    Explanation full;
};

// The three surrogate fits (UC / MI / FULL) for one modality side, all from
// one shared perturbation batch: exactly S*N model evaluations.
SideExplanations explain_side(Model& model, const SampleSet& samples,
                              const LogitTable& table, int k, int c, int side,
                              const DimeConfig& config);

struct DimeReport {
    int point_index = 0;
    int class_index = 0;
    int predicted_class = 0;
    DecomposedLogits logits;
    Explanation uc1, uc2, mi1, mi2, lime1, lime2;
};

// The four disentangled explanations plus the undisentangled baselines for
// sample-set member k, explaining the class-c logit. 2*S*N evaluations on a
// prebuilt table, N^2 more when the table is built here.
DimeReport dime_explain(Model& model, const SampleSet& samples, const LogitTable& table,
                        int k, int c, const DimeConfig& config);
DimeReport dime_explain(Model& model, const SampleSet& samples, int k, int c,
                        const DimeConfig& config);

struct PointCorrelations {
    int test_index = 0;
    // rows: d1, d2, d1*d2; columns: UC1, MI1, LIME1, UC2, MI2, LIME2
    std::array<std::array<double, 6>, 3> corr{};
    bool excluded = false;  // a correlation was undefined (constant weights)
    bool low_r2 = false;    // some fit had R^2 < 0.1 (flagged, not excluded)
};

struct Rq1Result {
    std::array<std::array<double, 6>, 3> means{};
    int n_points = 0;  // points included in the means
    int excluded = 0;
    std::vector<PointCorrelations> points;
};

// Correlation study against the synthetic ground truths on n_points test
// points, explained in sample-set groups of N so each group shares one
// logit table. Explains the class-1 logit. Points run independently across
// `workers` threads (in-process models only); aggregation is order-free.
Rq1Result validate_rq1(Model& model, const DatasetSplits& splits, int n_points,
                       const DimeConfig& config, int workers = 1);

struct SwapPair {
    int k = 0;  // sample-set member whose modality-2 value is swapped
    ModalityValue replacement;
};

struct SwapPairOutcome {
    int k = 0;
    double uc1_distance = 0.0;
    double mi1_distance = 0.0;
    bool excluded = false;  // zero-weight explanation on either side of the swap
};

struct SwapTestResult {
    double mean_uc1_distance = 0.0;
    double mean_mi1_distance = 0.0;
    int pairs_used = 0;
    int excluded = 0;
    std::vector<SwapPairOutcome> outcomes;
};

// Cosine distance of the modality-1 UC / MI explanation weights before and
// after replacing one sample's modality-2 value (same seeds, same sample
// set otherwise).
SwapTestResult swap_test(Model& model, const SampleSet& samples,
                         const std::vector<SwapPair>& pairs, int c,
                         const DimeConfig& config);

struct TopkTable {
    // rows: UC, MI; columns: modality 1, modality 2
    std::array<std::array<double, 2>, 2> mean_abs{};
    int k = 5;
    int reports = 0;
};

TopkTable topk_report(std::span<const DimeReport> reports, int k = 5);

nlohmann::json report_to_json(const DimeReport& report);
std::string render_report(const DimeReport& report, const std::vector<std::string>& labels1,
                          const std::vector<std::string>& labels2);
nlohmann::json rq1_to_json(const Rq1Result& result);
std::string render_rq1(const Rq1Result& result);
nlohmann::json swap_to_json(const SwapTestResult& result);
nlohmann::json topk_to_json(const TopkTable& table);

}  // namespace dime
