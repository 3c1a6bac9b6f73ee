#pragma once

#include "dime/model.hpp"
#include "json.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dime {

struct SurrogateConfig {
    int sample_count = 1000;        // perturbations per explanation (S)
    double keep_probability = 0.5;  // chance a feature survives a mask
    double kernel_width = 0.25;     // width on normalized Hamming distance
    double lambda = 1e-3;           // ridge penalty
};

// Interpretable-feature decomposition of one modality value.
struct FeatureSpace {
    ModalityValue::Kind kind = ModalityValue::Kind::Dense;
    int feature_count = 0;
    std::vector<std::string> labels;
    // Segmentation geometry, grid kind only.
    int grid_rows = 0;
    int grid_cols = 0;
    int raster_rows = 0;
    int raster_cols = 0;
};

// dense: one feature per dimension; tokens: one per token; grid raster: one
// per cell of a uniform grid_rows x grid_cols partition. Grid parameters
// are only accepted for raster values.
FeatureSpace segment(const ModalityValue& v, int grid_rows = 0, int grid_cols = 0);

// Realizes a mask over v: masked dense dimensions become 0.0, masked tokens
// are removed, masked grid cells are zeroed.
ModalityValue apply_mask(const ModalityValue& v, const FeatureSpace& fs,
                         std::span<const std::uint8_t> mask);

struct PerturbationBatch {
    int sample_count = 0;   // S
    int feature_count = 0;  // F
    std::vector<std::uint8_t> masks;      // S x F row-major; row 0 is all-ones
    std::vector<ModalityValue> realized;  // per mask
    std::vector<double> kernel_weights;   // in (0, 1]
    std::uint64_t seed = 0;

    std::span<const std::uint8_t> mask(int s) const {
        return {masks.data() + static_cast<std::size_t>(s) *
                                   static_cast<std::size_t>(feature_count),
                static_cast<std::size_t>(feature_count)};
    }
};

// S masks with features kept independently at keep_probability. Row 0 is
// always the all-ones mask and (for keep_probability < 1) no other row is;
// kernel weight = exp(-(hamming/F)^2 / width^2). Requires S >= F + 2.
PerturbationBatch perturb(const ModalityValue& v, const FeatureSpace& fs,
                          int sample_count, std::uint64_t seed,
                          double keep_probability, double kernel_width);

struct ExplanationProvenance {
    std::uint64_t seed = 0;
    int emap_samples = 0;  // N, filled by the orchestrator
    int lime_samples = 0;  // S
    double lambda = 0.0;
    double keep_probability = 0.0;
    double kernel_width = 0.0;
    bool degenerate = false;  // all-identical-mask batch, weights forced to zero
};

struct Explanation {
    enum class Kind { UC, MI, FULL };

    Kind kind = Kind::FULL;
    int modality = 1;
    int class_index = 0;
    std::vector<double> weights;
    double intercept = 0.0;
    double r2 = 0.0;  // weighted fit quality
    ExplanationProvenance provenance;
};

std::string_view explanation_kind_name(Explanation::Kind kind);
Explanation::Kind explanation_kind_from_name(std::string_view name);

// Kernel-weighted ridge of targets against the mask indicators. Retries
// once with an escalated lambda when the normal equations are singular;
// an all-identical-mask batch degenerates to zero weights with the
// degenerate flag set instead of erroring.
Explanation fit(const PerturbationBatch& batch, std::span<const double> targets,
                double lambda, Explanation::Kind kind, int modality, int class_index);

// perturb + evaluate target_fn on every realized value + fit.
Explanation explain_modality(const std::function<double(const ModalityValue&)>& target_fn,
                             const ModalityValue& v, const FeatureSpace& fs,
                             const SurrogateConfig& config, std::uint64_t seed,
                             Explanation::Kind kind, int modality, int class_index);

void to_json(nlohmann::json& j, const Explanation& e);
void from_json(const nlohmann::json& j, Explanation& e);

}  // namespace dime
