#include "dime/surrogate.hpp"

#include "dime/error.hpp"
#include "dime/numerics.hpp"
#include "dime/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dime {

namespace {

bool all_ones(std::span<const std::uint8_t> mask) {
    return std::all_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; });
}

// Cell bounds of a uniform partition: block b of `grid` cells over `extent`.
std::pair<int, int> cell_range(int extent, int grid, int b) {
    return {b * extent / grid, (b + 1) * extent / grid};
}

}  // namespace

FeatureSpace segment(const ModalityValue& v, int grid_rows, int grid_cols) {
    FeatureSpace fs;
    fs.kind = v.kind();
    switch (v.kind()) {
        case ModalityValue::Kind::Dense: {
            if (grid_rows != 0 || grid_cols != 0) {
                throw InvalidArgumentError("grid parameters only apply to raster values");
            }
            fs.feature_count = v.feature_count();
            for (int i = 0; i < fs.feature_count; ++i) {
                fs.labels.push_back("dim:" + std::to_string(i));
            }
            return fs;
        }
        case ModalityValue::Kind::Tokens: {
            if (grid_rows != 0 || grid_cols != 0) {
                throw InvalidArgumentError("grid parameters only apply to raster values");
            }
            const auto& toks = v.token_values();
            if (toks.empty()) {
                throw DegenerateInputError("cannot segment an empty token sequence");
            }
            fs.feature_count = static_cast<int>(toks.size());
            for (std::size_t i = 0; i < toks.size(); ++i) {
                fs.labels.push_back(std::to_string(i) + ":" + toks[i]);
            }
            return fs;
        }
        case ModalityValue::Kind::Grid: {
            const auto& g = v.grid_value();
            if (grid_rows < 1 || grid_cols < 1) {
                throw InvalidArgumentError("raster segmentation needs grid rows/cols >= 1");
            }
            if (grid_rows > g.rows || grid_cols > g.cols) {
                throw InvalidArgumentError("segmentation grid finer than the raster");
            }
            fs.feature_count = grid_rows * grid_cols;
            fs.grid_rows = grid_rows;
            fs.grid_cols = grid_cols;
            fs.raster_rows = g.rows;
            fs.raster_cols = g.cols;
            for (int r = 0; r < grid_rows; ++r) {
                for (int c = 0; c < grid_cols; ++c) {
                    fs.labels.push_back("cell:" + std::to_string(r) + "," + std::to_string(c));
                }
            }
            return fs;
        }
    }
    throw InvalidArgumentError("unknown modality kind");
}

ModalityValue apply_mask(const ModalityValue& v, const FeatureSpace& fs,
                         std::span<const std::uint8_t> mask) {
    if (static_cast<int>(mask.size()) != fs.feature_count) {
        throw InvalidArgumentError("mask length does not match feature count");
    }
    switch (fs.kind) {
        case ModalityValue::Kind::Dense: {
            auto values = v.dense_values();
            for (std::size_t i = 0; i < values.size(); ++i) {
                if (mask[i] == 0) {
                    values[i] = 0.0;
                }
            }
            return ModalityValue::dense(std::move(values));
        }
        case ModalityValue::Kind::Tokens: {
            const auto& toks = v.token_values();
            std::vector<std::string> kept;
            for (std::size_t i = 0; i < toks.size(); ++i) {
                if (mask[i] != 0) {
                    kept.push_back(toks[i]);
                }
            }
            return ModalityValue::tokens(std::move(kept));
        }
        case ModalityValue::Kind::Grid: {
            GridRaster g = v.grid_value();
            for (int br = 0; br < fs.grid_rows; ++br) {
                const auto [r0, r1] = cell_range(fs.raster_rows, fs.grid_rows, br);
                for (int bc = 0; bc < fs.grid_cols; ++bc) {
                    if (mask[static_cast<std::size_t>(br * fs.grid_cols + bc)] != 0) {
                        continue;
                    }
                    const auto [c0, c1] = cell_range(fs.raster_cols, fs.grid_cols, bc);
                    for (int r = r0; r < r1; ++r) {
                        for (int c = c0; c < c1; ++c) {
                            g.cells[static_cast<std::size_t>(r * fs.raster_cols + c)] = 0.0;
                        }
                    }
                }
            }
            return ModalityValue::grid(std::move(g));
        }
    }
    throw InvalidArgumentError("unknown modality kind");
}

PerturbationBatch perturb(const ModalityValue& v, const FeatureSpace& fs, int sample_count,
                          std::uint64_t seed, double keep_probability, double kernel_width) {
    const int f = fs.feature_count;
    if (sample_count < f + 2) {
        throw InvalidArgumentError("perturbation count must be at least F + 2");
    }
    if (keep_probability < 0.0 || keep_probability > 1.0) {
        throw InvalidArgumentError("keep probability must lie in [0, 1]");
    }
    if (kernel_width <= 0.0) {
        throw InvalidArgumentError("kernel width must be positive");
    }

    PerturbationBatch batch;
    batch.sample_count = sample_count;
    batch.feature_count = f;
    batch.seed = seed;
    batch.masks.assign(static_cast<std::size_t>(sample_count) * static_cast<std::size_t>(f),
                       1);

    Rng rng(seed);
    const bool degenerate_keep = keep_probability >= 1.0;
    for (int s = 1; s < sample_count; ++s) {
        auto* row = batch.masks.data() +
                    static_cast<std::size_t>(s) * static_cast<std::size_t>(f);
        if (degenerate_keep) {
            continue;  // every mask stays all-ones; fit degenerates to the intercept
        }
        for (int attempt = 0;; ++attempt) {
            for (int i = 0; i < f; ++i) {
                row[i] = rng.uniform() < keep_probability ? 1 : 0;
            }
            if (!all_ones({row, static_cast<std::size_t>(f)})) {
                break;
            }
            if (attempt >= 100000) {
                // keep_probability just under 1 can stall rejection; drop one
                // feature to keep the anchor mask unique.
                row[rng.below(static_cast<std::uint64_t>(f))] = 0;
                break;
            }
        }
    }

    batch.realized.reserve(static_cast<std::size_t>(sample_count));
    batch.kernel_weights.resize(static_cast<std::size_t>(sample_count));
    for (int s = 0; s < sample_count; ++s) {
        const auto mask = batch.mask(s);
        batch.realized.push_back(apply_mask(v, fs, mask));
        int off = 0;
        for (auto m : mask) {
            off += (m == 0) ? 1 : 0;
        }
        const double d = static_cast<double>(off) / static_cast<double>(f);
        batch.kernel_weights[static_cast<std::size_t>(s)] =
            std::exp(-(d * d) / (kernel_width * kernel_width));
    }
    return batch;
}

std::string_view explanation_kind_name(Explanation::Kind kind) {
    switch (kind) {
        case Explanation::Kind::UC:
            return "UC";
        case Explanation::Kind::MI:
            return "MI";
        case Explanation::Kind::FULL:
            return "FULL";
    }
    return "unknown";
}

Explanation::Kind explanation_kind_from_name(std::string_view name) {
    if (name == "UC") {
        return Explanation::Kind::UC;
    }
    if (name == "MI") {
        return Explanation::Kind::MI;
    }
    if (name == "FULL") {
        return Explanation::Kind::FULL;
    }
    throw InvalidArgumentError("unknown explanation kind: " + std::string(name));
}

Explanation fit(const PerturbationBatch& batch, std::span<const double> targets,
                double lambda, Explanation::Kind kind, int modality, int class_index) {
    const int s = batch.sample_count;
    const int f = batch.feature_count;
    if (static_cast<int>(targets.size()) != s) {
        throw InvalidArgumentError("target count does not match perturbation count");
    }

    Explanation e;
    e.kind = kind;
    e.modality = modality;
    e.class_index = class_index;
    e.provenance.seed = batch.seed;
    e.provenance.lime_samples = s;
    e.provenance.lambda = lambda;

    const Eigen::Map<const Eigen::VectorXd> y(targets.data(), s);
    const Eigen::Map<const Eigen::VectorXd> w(batch.kernel_weights.data(), s);
    const double total = w.sum();

    bool identical = true;
    for (int i = 1; i < s && identical; ++i) {
        identical = std::equal(batch.mask(i).begin(), batch.mask(i).end(),
                               batch.mask(0).begin());
    }
    if (identical) {
        e.provenance.degenerate = true;
        e.weights.assign(static_cast<std::size_t>(f), 0.0);
        e.intercept = w.dot(y) / total;
        const double ss_res = (w.array() * (y.array() - e.intercept).square()).sum();
        e.r2 = ss_res <= 1e-24 ? 1.0 : 0.0;
        return e;
    }

    Eigen::MatrixXd design(s, f);
    for (int i = 0; i < s; ++i) {
        const auto mask = batch.mask(i);
        for (int j = 0; j < f; ++j) {
            design(i, j) = static_cast<double>(mask[static_cast<std::size_t>(j)]);
        }
    }

    RidgeFit ridge;
    try {
        ridge = weighted_ridge(design, y, w, lambda);
    } catch (const SingularSystemError&) {
        const double escalated = lambda > 0.0 ? lambda * 1000.0 : 1e-6;
        ridge = weighted_ridge(design, y, w, escalated);
        e.provenance.lambda = escalated;
    }

    e.weights.assign(ridge.coefficients.data(), ridge.coefficients.data() + f);
    e.intercept = ridge.intercept;

    const Eigen::VectorXd fitted =
        (design * ridge.coefficients).array() + ridge.intercept;
    const double y_mean = w.dot(y) / total;
    const double ss_res = (w.array() * (y - fitted).array().square()).sum();
    const double ss_tot = (w.array() * (y.array() - y_mean).square()).sum();
    if (ss_tot > 0.0) {
        e.r2 = 1.0 - ss_res / ss_tot;
    } else {
        e.r2 = ss_res <= 1e-24 ? 1.0 : 0.0;
    }
    return e;
}

Explanation explain_modality(const std::function<double(const ModalityValue&)>& target_fn,
                             const ModalityValue& v, const FeatureSpace& fs,
                             const SurrogateConfig& config, std::uint64_t seed,
                             Explanation::Kind kind, int modality, int class_index) {
    const PerturbationBatch batch = perturb(v, fs, config.sample_count, seed,
                                            config.keep_probability, config.kernel_width);
    std::vector<double> targets(static_cast<std::size_t>(batch.sample_count));
    for (int s = 0; s < batch.sample_count; ++s) {
        targets[static_cast<std::size_t>(s)] =
            target_fn(batch.realized[static_cast<std::size_t>(s)]);
    }
    Explanation e = fit(batch, targets, config.lambda, kind, modality, class_index);
    e.provenance.keep_probability = config.keep_probability;
    e.provenance.kernel_width = config.kernel_width;
    return e;
}

void to_json(nlohmann::json& j, const Explanation& e) {
    j = nlohmann::json{
        {"kind", explanation_kind_name(e.kind)},
        {"modality", e.modality},
        {"class", e.class_index},
        {"weights", e.weights},
        {"intercept", e.intercept},
        {"r2", e.r2},
        {"provenance",
         {{"seed", e.provenance.seed},
          {"emap_samples", e.provenance.emap_samples},
          {"lime_samples", e.provenance.lime_samples},
          {"lambda", e.provenance.lambda},
          {"keep_probability", e.provenance.keep_probability},
          {"kernel_width", e.provenance.kernel_width},
          {"degenerate", e.provenance.degenerate}}},
    };
}

void from_json(const nlohmann::json& j, Explanation& e) {
    e.kind = explanation_kind_from_name(j.at("kind").get<std::string>());
    e.modality = j.at("modality").get<int>();
    e.class_index = j.at("class").get<int>();
    e.weights = j.at("weights").get<std::vector<double>>();
    e.intercept = j.at("intercept").get<double>();
    e.r2 = j.at("r2").get<double>();
    const auto& p = j.at("provenance");
    e.provenance.seed = p.at("seed").get<std::uint64_t>();
    e.provenance.emap_samples = p.at("emap_samples").get<int>();
    e.provenance.lime_samples = p.at("lime_samples").get<int>();
    e.provenance.lambda = p.at("lambda").get<double>();
    e.provenance.keep_probability = p.at("keep_probability").get<double>();
    e.provenance.kernel_width = p.at("kernel_width").get<double>();
    e.provenance.degenerate = p.at("degenerate").get<bool>();
}

}  // namespace dime
