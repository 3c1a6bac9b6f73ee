#include "dime/dime.hpp"

#include "dime/error.hpp"
#include "dime/numerics.hpp"
#include "dime/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <sstream>
#include <thread>

namespace dime {

namespace {

constexpr int kValidationClass = 1;
constexpr double kLowR2Flag = 0.1;

FeatureSpace segment_for(const ModalityValue& v, const DimeConfig& config) {
    if (v.kind() == ModalityValue::Kind::Grid) {
        return segment(v, config.grid_rows, config.grid_cols);
    }
    return segment(v);
}

void stamp(Explanation& e, const DimeConfig& config) {
    e.provenance.emap_samples = config.emap_samples;
    e.provenance.keep_probability = config.surrogate.keep_probability;
    e.provenance.kernel_width = config.surrogate.kernel_width;
}

}  // namespace

SideExplanations explain_side(Model& model, const SampleSet& samples,
                              const LogitTable& table, int k, int c, int side,
                              const DimeConfig& config) {
    if (side != 1 && side != 2) {
        throw InvalidArgumentError("side must be 1 or 2");
    }
    if (k < 0 || k >= table.sample_count()) {
        throw InvalidArgumentError("point index out of range");
    }
    if (c < 0 || c >= table.class_count()) {
        throw InvalidArgumentError("class index out of range");
    }

    const ModalityValue& value = (side == 1) ? samples.points[static_cast<std::size_t>(k)].x1
                                             : samples.points[static_cast<std::size_t>(k)].x2;
    const FeatureSpace fs = segment_for(value, config);
    const std::uint64_t seed = derive_seed(
        config.seed, "side=" + std::to_string(side) + "/k=" + std::to_string(k));
    const PerturbationBatch batch =
        perturb(value, fs, config.surrogate.sample_count, seed,
                config.surrogate.keep_probability, config.surrogate.kernel_width);

    const auto s = static_cast<std::size_t>(batch.sample_count);
    std::vector<double> t_uc(s), t_mi(s), t_full(s);
    for (std::size_t i = 0; i < s; ++i) {
        const DecomposedLogits dec =
            decompose_perturbed(table, samples, k, side, batch.realized[i], model);
        const auto ch = static_cast<std::size_t>(c);
        t_full[i] = dec.full[ch];
        t_uc[i] = dec.uc[ch];
        t_mi[i] = dec.mi[ch];
    }

    SideExplanations out{
        fit(batch, t_uc, config.surrogate.lambda, Explanation::Kind::UC, side, c),
        fit(batch, t_mi, config.surrogate.lambda, Explanation::Kind::MI, side, c),
        fit(batch, t_full, config.surrogate.lambda, Explanation::Kind::FULL, side, c),
    };
    stamp(out.uc, config);
    stamp(out.mi, config);
    stamp(out.full, config);
    return out;
}

DimeReport dime_explain(Model& model, const SampleSet& samples, const LogitTable& table,
                        int k, int c, const DimeConfig& config) {
    DimeReport report;
    report.point_index = k;
    report.class_index = c;
    report.logits = decompose_point(table, k);
    report.predicted_class = static_cast<int>(
        std::max_element(report.logits.full.begin(), report.logits.full.end()) -
        report.logits.full.begin());

    const SideExplanations side1 = explain_side(model, samples, table, k, c, 1, config);
    const SideExplanations side2 = explain_side(model, samples, table, k, c, 2, config);
    report.uc1 = side1.uc;
    report.mi1 = side1.mi;
    report.lime1 = side1.full;
    report.uc2 = side2.uc;
    report.mi2 = side2.mi;
    report.lime2 = side2.full;
    return report;
}

DimeReport dime_explain(Model& model, const SampleSet& samples, int k, int c,
                        const DimeConfig& config) {
    const LogitTable table = LogitTable::build(model, samples);
    return dime_explain(model, samples, table, k, c, config);
}

Rq1Result validate_rq1(Model& model, const DatasetSplits& splits, int n_points,
                       const DimeConfig& config, int workers) {
    const int n = config.emap_samples;
    if (n < 2) {
        throw InvalidArgumentError("emap_samples must be at least 2");
    }
    if (n_points < 1) {
        throw InvalidArgumentError("validate_rq1 needs at least one point");
    }
    const int groups = (n_points + n - 1) / n;
    const int needed = groups * n;
    if (needed > static_cast<int>(splits.test.size())) {
        throw InvalidArgumentError("test split too small: need " + std::to_string(needed) +
                                   " points, have " + std::to_string(splits.test.size()));
    }

    Rng selector(derive_seed(config.seed, "rq1/selection"));
    const std::vector<int> chosen =
        selector.sample_without_replacement(static_cast<int>(splits.test.size()), needed);

    Rq1Result result;
    result.points.resize(static_cast<std::size_t>(n_points));

    for (int g = 0; g < groups; ++g) {
        std::vector<ModalityPair> points;
        std::vector<std::string> ids;
        points.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const int test_index = chosen[static_cast<std::size_t>(g * n + i)];
            points.push_back(to_modality_pair(splits.test[static_cast<std::size_t>(test_index)]));
            ids.push_back("test:" + std::to_string(test_index));
        }
        const SampleSet samples = make_sample_set(std::move(points), std::move(ids));
        const LogitTable table = LogitTable::build(model, samples);

        const int explained = std::min(n, n_points - g * n);
        std::atomic<int> cursor{0};
        auto run = [&]() {
            for (;;) {
                const int k = cursor.fetch_add(1);
                if (k >= explained) {
                    return;
                }
                const int test_index = chosen[static_cast<std::size_t>(g * n + k)];
                DimeConfig per_point = config;
                per_point.seed =
                    derive_seed(config.seed, "rq1/point=" + std::to_string(test_index));
                const DimeReport report =
                    dime_explain(model, samples, table, k, kValidationClass, per_point);

                PointCorrelations pc;
                pc.test_index = test_index;
                const GroundTruthExplanations gt =
                    ground_truth(splits.test[static_cast<std::size_t>(test_index)]);
                const std::array<std::span<const double>, 3> targets{
                    std::span<const double>(gt.uc1), std::span<const double>(gt.uc2),
                    std::span<const double>(gt.mi)};
                const std::array<const Explanation*, 6> columns{
                    &report.uc1, &report.mi1, &report.lime1,
                    &report.uc2, &report.mi2, &report.lime2};
                pc.low_r2 = std::any_of(columns.begin(), columns.end(),
                                        [](const Explanation* e) { return e->r2 < kLowR2Flag; });
                try {
                    for (std::size_t r = 0; r < 3; ++r) {
                        for (std::size_t col = 0; col < 6; ++col) {
                            pc.corr[r][col] = pearson(targets[r], columns[col]->weights);
                        }
                    }
                } catch (const DegenerateInputError&) {
                    pc.excluded = true;
                }
                result.points[static_cast<std::size_t>(g * n + k)] = pc;
            }
        };

        const int thread_count = std::max(1, std::min(workers, explained));
        if (thread_count == 1) {
            run();
        } else {
            std::vector<std::thread> pool;
            pool.reserve(static_cast<std::size_t>(thread_count));
            for (int t = 0; t < thread_count; ++t) {
                pool.emplace_back(run);
            }
            for (auto& t : pool) {
                t.join();
            }
        }
    }

    for (const auto& pc : result.points) {
        if (pc.excluded) {
            ++result.excluded;
            continue;
        }
        ++result.n_points;
        for (std::size_t r = 0; r < 3; ++r) {
            for (std::size_t col = 0; col < 6; ++col) {
                result.means[r][col] += pc.corr[r][col];
            }
        }
    }
    if (result.n_points > 0) {
        for (auto& row : result.means) {
            for (auto& v : row) {
                v /= static_cast<double>(result.n_points);
            }
        }
    }
    return result;
}

SwapTestResult swap_test(Model& model, const SampleSet& samples,
                         const std::vector<SwapPair>& pairs, int c,
                         const DimeConfig& config) {
    if (pairs.empty()) {
        throw InvalidArgumentError("swap_test needs at least one pair");
    }
    const LogitTable before_table = LogitTable::build(model, samples);

    SwapTestResult result;
    result.outcomes.reserve(pairs.size());
    double uc_sum = 0.0;
    double mi_sum = 0.0;
    for (const auto& pair : pairs) {
        const int k = pair.k;
        if (k < 0 || k >= samples.size()) {
            throw InvalidArgumentError("swap pair index out of range");
        }
        if (pair.replacement.kind() !=
            samples.points[static_cast<std::size_t>(k)].x2.kind()) {
            throw InvalidArgumentError("replacement modality kind mismatch");
        }

        const SideExplanations before =
            explain_side(model, samples, before_table, k, c, 1, config);

        SampleSet swapped = samples;
        swapped.points[static_cast<std::size_t>(k)].x2 = pair.replacement;
        std::vector<ModalityPair> column;
        column.reserve(static_cast<std::size_t>(samples.size()));
        for (int i = 0; i < samples.size(); ++i) {
            column.push_back(ModalityPair{samples.points[static_cast<std::size_t>(i)].x1,
                                          pair.replacement});
        }
        const LogitTable after_table =
            before_table.with_replaced_column(k, model.evaluate_batch(column));
        const SideExplanations after =
            explain_side(model, swapped, after_table, k, c, 1, config);

        SwapPairOutcome outcome;
        outcome.k = k;
        try {
            outcome.uc1_distance = cosine_distance(before.uc.weights, after.uc.weights);
            outcome.mi1_distance = cosine_distance(before.mi.weights, after.mi.weights);
            uc_sum += outcome.uc1_distance;
            mi_sum += outcome.mi1_distance;
            ++result.pairs_used;
        } catch (const DegenerateInputError&) {
            outcome.excluded = true;
            ++result.excluded;
        }
        result.outcomes.push_back(outcome);
    }
    if (result.pairs_used > 0) {
        result.mean_uc1_distance = uc_sum / result.pairs_used;
        result.mean_mi1_distance = mi_sum / result.pairs_used;
    }
    return result;
}

TopkTable topk_report(std::span<const DimeReport> reports, int k) {
    if (reports.empty()) {
        throw InvalidArgumentError("topk_report needs at least one report");
    }
    TopkTable table;
    table.k = k;
    table.reports = static_cast<int>(reports.size());
    for (const auto& report : reports) {
        const std::array<const Explanation*, 4> cells{&report.uc1, &report.uc2, &report.mi1,
                                                      &report.mi2};
        const std::array<std::pair<int, int>, 4> slots{
            std::pair{0, 0}, std::pair{0, 1}, std::pair{1, 0}, std::pair{1, 1}};
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const auto& weights = cells[i]->weights;
            const int kk = std::min<int>(k, static_cast<int>(weights.size()));
            table.mean_abs[static_cast<std::size_t>(slots[i].first)]
                          [static_cast<std::size_t>(slots[i].second)] +=
                topk_mean_abs(weights, kk);
        }
    }
    for (auto& row : table.mean_abs) {
        for (auto& v : row) {
            v /= static_cast<double>(table.reports);
        }
    }
    return table;
}

nlohmann::json report_to_json(const DimeReport& report) {
    return nlohmann::json{
        {"point_index", report.point_index},
        {"class", report.class_index},
        {"predicted_class", report.predicted_class},
        {"logits",
         {{"full", report.logits.full}, {"uc", report.logits.uc}, {"mi", report.logits.mi}}},
        {"uc1", report.uc1},
        {"uc2", report.uc2},
        {"mi1", report.mi1},
        {"mi2", report.mi2},
        {"lime1", report.lime1},
        {"lime2", report.lime2},
    };
}

namespace {

void render_weights(std::ostringstream& out, const char* title, const Explanation& e,
                    const std::vector<std::string>& labels) {
    out << title << "  (class " << e.class_index << ", r2 " << e.r2 << ", intercept "
        << e.intercept << ")\n";
    for (std::size_t i = 0; i < e.weights.size(); ++i) {
        const std::string label =
            i < labels.size() ? labels[i] : ("feature:" + std::to_string(i));
        char line[128];
        std::snprintf(line, sizeof(line), "  %-16s %+.6f\n", label.c_str(), e.weights[i]);
        out << line;
    }
}

}  // namespace

std::string render_report(const DimeReport& report, const std::vector<std::string>& labels1,
                          const std::vector<std::string>& labels2) {
    std::ostringstream out;
    out << "point " << report.point_index << ": predicted class " << report.predicted_class
        << ", explaining class " << report.class_index << "\n";
    out << "logits full=[";
    for (std::size_t i = 0; i < report.logits.full.size(); ++i) {
        out << (i ? ", " : "") << report.logits.full[i];
    }
    out << "]  uc=[";
    for (std::size_t i = 0; i < report.logits.uc.size(); ++i) {
        out << (i ? ", " : "") << report.logits.uc[i];
    }
    out << "]  mi=[";
    for (std::size_t i = 0; i < report.logits.mi.size(); ++i) {
        out << (i ? ", " : "") << report.logits.mi[i];
    }
    out << "]\n\n";
    render_weights(out, "UC1", report.uc1, labels1);
    render_weights(out, "MI1", report.mi1, labels1);
    render_weights(out, "LIME1", report.lime1, labels1);
    render_weights(out, "UC2", report.uc2, labels2);
    render_weights(out, "MI2", report.mi2, labels2);
    render_weights(out, "LIME2", report.lime2, labels2);
    return out.str();
}

nlohmann::json rq1_to_json(const Rq1Result& result) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& pc : result.points) {
        points.push_back(nlohmann::json{{"test_index", pc.test_index},
                                        {"correlations", pc.corr},
                                        {"excluded", pc.excluded},
                                        {"low_r2", pc.low_r2}});
    }
    return nlohmann::json{
        {"table", result.means},
        {"n_points", result.n_points},
        {"excluded", result.excluded},
        {"rows", {"d1", "d2", "d1*d2"}},
        {"columns", {"UC1", "MI1", "LIME1", "UC2", "MI2", "LIME2"}},
        {"points", points},
    };
}

std::string render_rq1(const Rq1Result& result) {
    static constexpr std::array<const char*, 3> kRows{"d1", "d2", "d1*d2"};
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-12s %8s %8s %8s %8s %8s %8s\n", "ground truth",
                  "UC1", "MI1", "LIME1", "UC2", "MI2", "LIME2");
    out << line;
    for (std::size_t r = 0; r < 3; ++r) {
        std::snprintf(line, sizeof(line),
                      "%-12s %8.3f %8.3f %8.3f %8.3f %8.3f %8.3f\n", kRows[r],
                      result.means[r][0], result.means[r][1], result.means[r][2],
                      result.means[r][3], result.means[r][4], result.means[r][5]);
        out << line;
    }
    out << "points: " << result.n_points << " included, " << result.excluded
        << " excluded\n";
    return out.str();
}

nlohmann::json swap_to_json(const SwapTestResult& result) {
    nlohmann::json outcomes = nlohmann::json::array();
    for (const auto& o : result.outcomes) {
        outcomes.push_back(nlohmann::json{{"k", o.k},
                                          {"uc1_distance", o.uc1_distance},
                                          {"mi1_distance", o.mi1_distance},
                                          {"excluded", o.excluded}});
    }
    return nlohmann::json{
        {"mean_uc1_distance", result.mean_uc1_distance},
        {"mean_mi1_distance", result.mean_mi1_distance},
        {"pairs_used", result.pairs_used},
        {"excluded", result.excluded},
        {"outcomes", outcomes},
    };
}

nlohmann::json topk_to_json(const TopkTable& table) {
    return nlohmann::json{
        {"k", table.k},
        {"reports", table.reports},
        {"rows", {"UC", "MI"}},
        {"columns", {"modality1", "modality2"}},
        {"mean_abs", table.mean_abs},
    };
}

}  // namespace dime
