// Command-line front end: data generation, training, explaining, validation,
// swap testing, and cost benchmarking. Every command is deterministic for a
// fixed configuration, randomness flows from one root seed through tagged
// derivations, and the effective configuration is echoed into each JSON
// artifact.

#include "CLI11.hpp"
#include "json.hpp"

#include "dime/dime.hpp"
#include "dime/error.hpp"
#include "dime/external_model.hpp"
#include "dime/mlp.hpp"
#include "dime/rng.hpp"
#include "dime/synthetic.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunConfig {
    std::uint64_t seed = 1;
    int n_samples = 32;       // EMAP sample-set size N
    int lime_samples = 1000;  // surrogate perturbations S
    double lambda = 1e-3;
    double kernel_width = 0.25;
    double keep_prob = 0.5;
    int grid_rows = 0;
    int grid_cols = 0;
    std::string model = "builtin";
    int workers = 1;
    std::string data;
    std::string out;
};

dime::DimeConfig to_dime_config(const RunConfig& rc) {
    dime::DimeConfig cfg;
    cfg.seed = rc.seed;
    cfg.emap_samples = rc.n_samples;
    cfg.surrogate.sample_count = rc.lime_samples;
    cfg.surrogate.lambda = rc.lambda;
    cfg.surrogate.kernel_width = rc.kernel_width;
    cfg.surrogate.keep_probability = rc.keep_prob;
    cfg.grid_rows = rc.grid_rows;
    cfg.grid_cols = rc.grid_cols;
    return cfg;
}

json config_echo(const RunConfig& rc) {
    return json{{"seed", rc.seed},
                {"n_samples", rc.n_samples},
                {"lime_samples", rc.lime_samples},
                {"lambda", rc.lambda},
                {"kernel_width", rc.kernel_width},
                {"keep_prob", rc.keep_prob},
                {"grid_rows", rc.grid_rows},
                {"grid_cols", rc.grid_cols},
                {"model", rc.model},
                {"workers", rc.workers},
                {"data", rc.data}};
}

void write_json_file(const fs::path& path, const json& j) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw dime::Error("cannot open " + path.string() + " for writing");
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw dime::Error("write failed: " + path.string());
    }
}

std::unique_ptr<dime::Model> open_model(const RunConfig& rc) {
    if (rc.model.rfind("cmd:", 0) == 0) {
        return std::make_unique<dime::ExternalModelSession>(rc.model.substr(4));
    }
    fs::path path;
    if (rc.model == "builtin") {
        if (rc.data.empty()) {
            throw dime::InvalidArgumentError("--model builtin needs --data for model.json");
        }
        path = fs::path(rc.data) / "model.json";
    } else if (rc.model.rfind("builtin:", 0) == 0) {
        path = rc.model.substr(8);
    } else {
        throw dime::InvalidArgumentError(
            "--model must be builtin, builtin:<file>, or cmd:<command>");
    }
    return std::make_unique<dime::MlpModel>(dime::MlpModel::load(path));
}

// Sample-set indices for one explained test point: the point itself first,
// then N-1 seed-drawn companions from the test split.
std::vector<int> companion_indices(std::uint64_t seed, int test_size, int n, int point) {
    if (n > test_size) {
        throw dime::InvalidArgumentError("n-samples exceeds the test split size");
    }
    dime::Rng rng(dime::derive_seed(seed, "explain/selection"));
    std::vector<int> picked = rng.sample_without_replacement(test_size, n);
    const auto at = std::find(picked.begin(), picked.end(), point);
    if (at != picked.end()) {
        std::iter_swap(picked.begin(), at);
    } else {
        picked.back() = point;
        std::iter_swap(picked.begin(), picked.end() - 1);
    }
    return picked;
}

dime::SampleSet sample_set_from_test(const dime::DatasetSplits& splits,
                                     const std::vector<int>& indices) {
    std::vector<dime::ModalityPair> points;
    std::vector<std::string> ids;
    points.reserve(indices.size());
    for (int idx : indices) {
        points.push_back(dime::to_modality_pair(splits.test[static_cast<std::size_t>(idx)]));
        ids.push_back("test:" + std::to_string(idx));
    }
    return dime::make_sample_set(std::move(points), std::move(ids));
}

int cmd_gen_data(const RunConfig& rc, int n) {
    const auto splits = dime::generate_synthetic(rc.seed, n);
    dime::save_splits(splits, rc.out);
    std::size_t positives = 0;
    for (const auto& p : splits.train) {
        positives += static_cast<std::size_t>(p.label);
    }
    for (const auto& p : splits.valid) {
        positives += static_cast<std::size_t>(p.label);
    }
    for (const auto& p : splits.test) {
        positives += static_cast<std::size_t>(p.label);
    }
    json manifest{{"command", "gen-data"},
                  {"config", {{"seed", rc.seed}, {"n", n}}},
                  {"generator", "dime-synthetic-v1"},
                  {"counts",
                   {{"train", splits.train.size()},
                    {"valid", splits.valid.size()},
                    {"test", splits.test.size()}}},
                  {"label1_fraction",
                   static_cast<double>(positives) / static_cast<double>(splits.total())}};
    write_json_file(fs::path(rc.out) / "manifest.json", manifest);
    std::cout << "wrote " << splits.train.size() << "/" << splits.valid.size() << "/"
              << splits.test.size() << " points to " << rc.out << "\n";
    return 0;
}

int cmd_train(const RunConfig& rc, const dime::MlpTrainOptions& opts, double floor,
              const std::string& out_model, const std::string& out_metrics) {
    const auto splits = dime::load_splits(rc.data);
    const auto result = dime::mlp_train(splits, opts);
    result.model.save(out_model);
    json metrics{{"command", "train"},
                 {"config",
                  {{"seed", opts.seed},
                   {"epochs", opts.epochs},
                   {"batch_size", opts.batch_size},
                   {"learning_rate", opts.learning_rate},
                   {"momentum", opts.momentum},
                   {"lr_decay", opts.lr_decay},
                   {"floor", floor},
                   {"data", rc.data}}},
                 {"train_accuracy", result.report.train_accuracy},
                 {"valid_accuracy", result.report.valid_accuracy},
                 {"test_accuracy", result.report.test_accuracy},
                 {"final_loss", result.report.final_loss}};
    write_json_file(out_metrics, metrics);
    std::cout << "train/valid/test accuracy: " << result.report.train_accuracy << " / "
              << result.report.valid_accuracy << " / " << result.report.test_accuracy
              << "\n";
    if (result.report.test_accuracy < floor) {
        std::cerr << "test accuracy " << result.report.test_accuracy
                  << " is below the configured floor " << floor << "\n";
        return 1;
    }
    return 0;
}

int cmd_explain(const RunConfig& rc, int point, int class_index) {
    const auto splits = dime::load_splits(rc.data);
    if (point < 0 || point >= static_cast<int>(splits.test.size())) {
        throw dime::InvalidArgumentError("--point outside the test split");
    }
    auto model = open_model(rc);
    const auto indices =
        companion_indices(rc.seed, static_cast<int>(splits.test.size()), rc.n_samples, point);
    const auto samples = sample_set_from_test(splits, indices);
    const auto cfg = to_dime_config(rc);
    const auto report = dime::dime_explain(*model, samples, 0, class_index, cfg);

    json artifact{{"command", "explain"},
                  {"config", config_echo(rc)},
                  {"test_index", point},
                  {"sample_ids", samples.ids},
                  {"report", dime::report_to_json(report)}};
    if (!rc.out.empty()) {
        write_json_file(rc.out, artifact);
    }
    const auto& pt = samples.points[0];
    const auto fs1 = dime::segment(pt.x1, pt.x1.kind() == dime::ModalityValue::Kind::Grid
                                              ? rc.grid_rows
                                              : 0,
                                   pt.x1.kind() == dime::ModalityValue::Kind::Grid
                                       ? rc.grid_cols
                                       : 0);
    const auto fs2 = dime::segment(pt.x2, pt.x2.kind() == dime::ModalityValue::Kind::Grid
                                              ? rc.grid_rows
                                              : 0,
                                   pt.x2.kind() == dime::ModalityValue::Kind::Grid
                                       ? rc.grid_cols
                                       : 0);
    std::cout << dime::render_report(report, fs1.labels, fs2.labels);
    return 0;
}

struct ValidateThresholds {
    double min_uc_corr = 0.90;
    double min_mi_corr = 0.80;
    double max_off_corr = 0.15;
    double lime_low = 0.40;
    double lime_high = 0.90;
};

int cmd_validate(const RunConfig& rc, int points, const ValidateThresholds& th) {
    const auto splits = dime::load_splits(rc.data);
    auto model = open_model(rc);
    int workers = rc.workers;
    if (rc.model.rfind("cmd:", 0) == 0 && workers > 1) {
        std::cerr << "external sessions are serial; forcing --workers 1\n";
        workers = 1;
    }
    const auto result = dime::validate_rq1(*model, splits, points, to_dime_config(rc), workers);

    // On-target cells, their LIME counterparts, and everything else.
    const auto& m = result.means;
    std::vector<std::string> failures;
    auto expect = [&failures](bool ok, const std::string& what) {
        if (!ok) {
            failures.push_back(what);
        }
    };
    expect(m[0][0] >= th.min_uc_corr, "corr(UC1,d1) >= min_uc_corr");
    expect(m[1][3] >= th.min_uc_corr, "corr(UC2,d2) >= min_uc_corr");
    expect(m[2][1] >= th.min_mi_corr, "corr(MI1,d1*d2) >= min_mi_corr");
    expect(m[2][4] >= th.min_mi_corr, "corr(MI2,d1*d2) >= min_mi_corr");
    static constexpr std::array<std::pair<int, int>, 4> kLimeCells{
        std::pair{0, 2}, std::pair{2, 2}, std::pair{1, 5}, std::pair{2, 5}};
    for (const auto& [r, c] : kLimeCells) {
        expect(m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] >= th.lime_low &&
                   m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] <= th.lime_high,
               "LIME cell (" + std::to_string(r) + "," + std::to_string(c) + ") in band");
    }
    static constexpr std::array<std::pair<int, int>, 10> kOffCells{
        std::pair{0, 1}, std::pair{0, 3}, std::pair{0, 4}, std::pair{0, 5},
        std::pair{1, 0}, std::pair{1, 1}, std::pair{1, 2}, std::pair{1, 4},
        std::pair{2, 0}, std::pair{2, 3}};
    for (const auto& [r, c] : kOffCells) {
        expect(std::abs(m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]) <=
                   th.max_off_corr,
               "off-target cell (" + std::to_string(r) + "," + std::to_string(c) + ") small");
    }

    json artifact{{"command", "validate"},
                  {"config", config_echo(rc)},
                  {"points_requested", points},
                  {"rq1", dime::rq1_to_json(result)},
                  {"thresholds",
                   {{"min_uc_corr", th.min_uc_corr},
                    {"min_mi_corr", th.min_mi_corr},
                    {"max_off_corr", th.max_off_corr},
                    {"lime_low", th.lime_low},
                    {"lime_high", th.lime_high}}},
                  {"failures", failures},
                  {"passed", failures.empty()}};
    if (!rc.out.empty()) {
        write_json_file(rc.out, artifact);
    }
    std::cout << dime::render_rq1(result);
    if (!failures.empty()) {
        for (const auto& f : failures) {
            std::cout << "FAIL " << f << "\n";
        }
        return 1;
    }
    std::cout << "all thresholds passed\n";
    return 0;
}

int cmd_swaptest(const RunConfig& rc, int pair_count, int class_index) {
    const auto splits = dime::load_splits(rc.data);
    auto model = open_model(rc);
    dime::Rng rng(dime::derive_seed(rc.seed, "swaptest/selection"));
    const int test_size = static_cast<int>(splits.test.size());
    const auto base = rng.sample_without_replacement(test_size, rc.n_samples);
    const auto samples = sample_set_from_test(splits, base);

    std::vector<dime::SwapPair> pairs;
    pairs.reserve(static_cast<std::size_t>(pair_count));
    for (int i = 0; i < pair_count; ++i) {
        dime::SwapPair pair;
        pair.k = static_cast<int>(rng.below(static_cast<std::uint64_t>(rc.n_samples)));
        const auto donor = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(test_size)));
        const auto& d2 = splits.test[donor].d2;
        pair.replacement = dime::ModalityValue::dense({d2.begin(), d2.end()});
        pairs.push_back(std::move(pair));
    }
    const auto result = dime::swap_test(*model, samples, pairs, class_index, to_dime_config(rc));

    json artifact{{"command", "swaptest"},
                  {"config", config_echo(rc)},
                  {"pair_count", pair_count},
                  {"class", class_index},
                  {"result", dime::swap_to_json(result)}};
    if (!rc.out.empty()) {
        write_json_file(rc.out, artifact);
    }
    std::cout << "mean UC1 cosine distance: " << result.mean_uc1_distance << "\n"
              << "mean MI1 cosine distance: " << result.mean_mi1_distance << "\n"
              << "pairs used: " << result.pairs_used << ", excluded: " << result.excluded
              << "\n";
    return 0;
}

int cmd_bench(const RunConfig& rc, int point, int class_index) {
    const auto splits = dime::load_splits(rc.data);
    auto inner = open_model(rc);
    dime::CountingModel model(*inner);
    if (point < 0 || point >= static_cast<int>(splits.test.size())) {
        throw dime::InvalidArgumentError("--point outside the test split");
    }
    const auto indices =
        companion_indices(rc.seed, static_cast<int>(splits.test.size()), rc.n_samples, point);
    const auto samples = sample_set_from_test(splits, indices);
    const auto cfg = to_dime_config(rc);

    using Clock = std::chrono::steady_clock;
    model.reset_count();
    const auto t0 = Clock::now();
    const auto table = dime::LogitTable::build(model, samples);
    const auto report = dime::dime_explain(model, samples, table, 0, class_index, cfg);
    const auto cold_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    const auto cold_count = model.evaluation_count();

    model.reset_count();
    const auto t1 = Clock::now();
    const auto warm_report = dime::dime_explain(model, samples, table, 0, class_index, cfg);
    const auto warm_seconds = std::chrono::duration<double>(Clock::now() - t1).count();
    const auto warm_count = model.evaluation_count();
    (void)report;
    (void)warm_report;

    const auto n = static_cast<std::uint64_t>(rc.n_samples);
    const auto s = static_cast<std::uint64_t>(rc.lime_samples);
    const std::uint64_t expected_cold = n * n + 2 * s * n;
    const std::uint64_t expected_warm = 2 * s * n;

    json artifact{{"command", "bench"},
                  {"config", config_echo(rc)},
                  {"cold", {{"evaluations", cold_count}, {"expected", expected_cold}}},
                  {"warm", {{"evaluations", warm_count}, {"expected", expected_warm}}},
                  {"matches", cold_count == expected_cold && warm_count == expected_warm}};
    if (!rc.out.empty()) {
        write_json_file(rc.out, artifact);
    }
    std::cout << "cold: " << cold_count << " evaluations (expected " << expected_cold
              << "), " << cold_seconds << " s\n"
              << "warm: " << warm_count << " evaluations (expected " << expected_warm
              << "), " << warm_seconds << " s\n";
    return (cold_count == expected_cold && warm_count == expected_warm) ? 0 : 1;
}

void load_config_file(const std::string& path, RunConfig& rc) {
    std::ifstream in(path);
    if (!in) {
        throw dime::InvalidArgumentError("cannot open config file " + path);
    }
    json j;
    in >> j;
    rc.seed = j.value("seed", rc.seed);
    rc.n_samples = j.value("n_samples", rc.n_samples);
    rc.lime_samples = j.value("lime_samples", rc.lime_samples);
    rc.lambda = j.value("lambda", rc.lambda);
    rc.kernel_width = j.value("kernel_width", rc.kernel_width);
    rc.keep_prob = j.value("keep_prob", rc.keep_prob);
    rc.grid_rows = j.value("grid_rows", rc.grid_rows);
    rc.grid_cols = j.value("grid_cols", rc.grid_cols);
    rc.model = j.value("model", rc.model);
    rc.workers = j.value("workers", rc.workers);
    rc.data = j.value("data", rc.data);
    rc.out = j.value("out", rc.out);
}

void add_common_options(CLI::App* cmd, RunConfig& rc) {
    // accepted (and applied) before the real parse; registered so CLI11
    // tolerates the flag in subcommand position
    static std::string config_path;
    cmd->add_option("--config", config_path, "JSON config file with flag defaults");
    cmd->add_option("--seed", rc.seed, "root seed");
    cmd->add_option("--n-samples", rc.n_samples, "EMAP sample-set size N");
    cmd->add_option("--lime-samples", rc.lime_samples, "surrogate perturbations S");
    cmd->add_option("--lambda", rc.lambda, "ridge penalty");
    cmd->add_option("--kernel-width", rc.kernel_width, "proximity kernel width");
    cmd->add_option("--keep-prob", rc.keep_prob, "per-feature keep probability");
    cmd->add_option("--grid-rows", rc.grid_rows, "raster segmentation rows");
    cmd->add_option("--grid-cols", rc.grid_cols, "raster segmentation cols");
    cmd->add_option("--model", rc.model, "builtin | builtin:<file> | cmd:<command>");
    cmd->add_option("--workers", rc.workers, "parallel points (in-process models)");
    cmd->add_option("--data", rc.data, "dataset directory");
    cmd->add_option("--out", rc.out, "output path");
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig rc;
    // The config file provides defaults; flags override.
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        try {
            if (arg == "--config" && i + 1 < argc) {
                load_config_file(argv[i + 1], rc);
            } else if (arg.rfind("--config=", 0) == 0) {
                load_config_file(arg.substr(9), rc);
            }
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
    }

    CLI::App app{"disentangled local explanations for two-modality classifiers"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file with flag defaults");

    int n = 100000;
    auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
    gen->add_option("--config", config_path);
    gen->add_option("--seed", rc.seed);
    gen->add_option("--n", n, "points to retain");
    gen->add_option("--out", rc.out)->required();

    dime::MlpTrainOptions topts;
    double floor = 0.95;
    std::string out_model = "model.json";
    std::string out_metrics = "metrics.json";
    auto* train = app.add_subcommand("train", "train the reference MLP");
    train->add_option("--config", config_path);
    train->add_option("--data", rc.data)->required();
    train->add_option("--seed", topts.seed);
    train->add_option("--epochs", topts.epochs);
    train->add_option("--batch-size", topts.batch_size);
    train->add_option("--learning-rate", topts.learning_rate);
    train->add_option("--momentum", topts.momentum);
    train->add_option("--lr-decay", topts.lr_decay);
    train->add_option("--floor", floor, "minimum acceptable test accuracy");
    train->add_option("--out", out_model, "model file");
    train->add_option("--metrics", out_metrics, "metrics report file");

    int point = 0;
    int class_index = 1;
    auto* explain = app.add_subcommand("explain", "four disentangled explanations for a point");
    add_common_options(explain, rc);
    explain->add_option("--point", point, "test-split index")->required();
    explain->add_option("--class", class_index, "class logit to explain");

    int points = 200;
    ValidateThresholds th;
    auto* validate = app.add_subcommand("validate", "correlation study against ground truth");
    add_common_options(validate, rc);
    validate->add_option("--points", points, "test points to explain");
    validate->add_option("--min-uc-corr", th.min_uc_corr);
    validate->add_option("--min-mi-corr", th.min_mi_corr);
    validate->add_option("--max-off-corr", th.max_off_corr);
    validate->add_option("--lime-low", th.lime_low);
    validate->add_option("--lime-high", th.lime_high);

    int pair_count = 50;
    auto* swaptest = app.add_subcommand("swaptest", "explanation drift under modality-2 swaps");
    add_common_options(swaptest, rc);
    swaptest->add_option("--pairs", pair_count, "number of swap pairs");
    swaptest->add_option("--class", class_index, "class logit to explain");

    auto* bench = app.add_subcommand("bench", "evaluation counts for cold vs warm runs");
    add_common_options(bench, rc);
    bench->add_option("--point", point, "test-split index");
    bench->add_option("--class", class_index, "class logit to explain");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);  // --help
        }
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) {
            return cmd_gen_data(rc, n);
        }
        if (train->parsed()) {
            return cmd_train(rc, topts, floor, out_model, out_metrics);
        }
        if (explain->parsed()) {
            return cmd_explain(rc, point, class_index);
        }
        if (validate->parsed()) {
            return cmd_validate(rc, points, th);
        }
        if (swaptest->parsed()) {
            return cmd_swaptest(rc, pair_count, class_index);
        }
        if (bench->parsed()) {
            return cmd_bench(rc, point, class_index);
        }
    } catch (const dime::GatewayError& e) {
        std::cerr << "model error (batch index " << e.batch_index() << "): " << e.what()
                  << "\n";
        return 3;
    } catch (const dime::ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return 3;
    } catch (const dime::TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
