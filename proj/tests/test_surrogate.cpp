#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dime/error.hpp"
#include "dime/numerics.hpp"
#include "dime/rng.hpp"
#include "dime/surrogate.hpp"

#include <cmath>

using namespace dime;

namespace {

ModalityValue dense10() {
    return ModalityValue::dense({1, -2, 3, -4, 5, -6, 7, -8, 9, -10});
}

}  // namespace

TEST_CASE("segmentation per modality kind") {
    const auto fs_dense = segment(dense10());
    CHECK(fs_dense.feature_count == 10);
    CHECK(fs_dense.labels[0] == "dim:0");

    const auto fs_tok = segment(ModalityValue::tokens_from_text("what color is it"));
    CHECK(fs_tok.feature_count == 4);
    CHECK(fs_tok.labels[1] == "1:color");

    GridRaster g;
    g.rows = 4;
    g.cols = 4;
    g.cells.assign(16, 1.0);
    const auto fs_grid = segment(ModalityValue::grid(g), 2, 2);
    CHECK(fs_grid.feature_count == 4);

    CHECK_THROWS_AS(segment(ModalityValue::tokens({})), DegenerateInputError);
    CHECK_THROWS_AS(segment(dense10(), 2, 2), InvalidArgumentError);
    CHECK_THROWS_AS(segment(ModalityValue::grid(g), 0, 0), InvalidArgumentError);
    CHECK_THROWS_AS(segment(ModalityValue::grid(g), 8, 8), InvalidArgumentError);
}

TEST_CASE("mask realization per kind") {
    const auto v = ModalityValue::dense({1.0, 2.0});
    const auto fs = segment(v);
    const std::vector<std::uint8_t> keep_all{1, 1};
    CHECK(apply_mask(v, fs, keep_all) == v);
    const std::vector<std::uint8_t> drop_second{1, 0};
    CHECK(apply_mask(v, fs, drop_second).dense_values() == std::vector<double>{1.0, 0.0});

    const auto toks = ModalityValue::tokens_from_text("a b c");
    const auto fs_tok = segment(toks);
    const std::vector<std::uint8_t> middle{0, 1, 0};
    CHECK(apply_mask(toks, fs_tok, middle).token_values() ==
          std::vector<std::string>{"b"});
    const std::vector<std::uint8_t> none{0, 0, 0};
    CHECK(apply_mask(toks, fs_tok, none).token_values().empty());

    GridRaster g;
    g.rows = 4;
    g.cols = 4;
    g.cells.assign(16, 2.0);
    const auto vg = ModalityValue::grid(g);
    const auto fs_grid = segment(vg, 2, 2);
    const std::vector<std::uint8_t> top_left_only{1, 0, 0, 0};
    const auto masked = apply_mask(vg, fs_grid, top_left_only).grid_value();
    CHECK(masked.cells[0] == 2.0);   // kept block
    CHECK(masked.cells[5] == 2.0);
    CHECK(masked.cells[2] == 0.0);   // zeroed blocks
    CHECK(masked.cells[10] == 0.0);
    CHECK(masked.cells[15] == 0.0);
}

TEST_CASE("perturbation batches anchor the unperturbed point exactly once") {
    const auto v = dense10();
    const auto fs = segment(v);
    const auto batch = perturb(v, fs, 200, 99, 0.5, 0.25);
    CHECK(batch.sample_count == 200);
    CHECK(batch.feature_count == 10);

    int all_ones_rows = 0;
    for (int s = 0; s < batch.sample_count; ++s) {
        const auto mask = batch.mask(s);
        bool ones = true;
        for (auto m : mask) {
            ones = ones && m != 0;
        }
        all_ones_rows += ones ? 1 : 0;
        CHECK(batch.kernel_weights[static_cast<std::size_t>(s)] > 0.0);
        CHECK(batch.kernel_weights[static_cast<std::size_t>(s)] <= 1.0);
    }
    CHECK(all_ones_rows == 1);
    CHECK(batch.realized[0] == v);
    CHECK(batch.kernel_weights[0] == 1.0);

    // deterministic per seed
    const auto again = perturb(v, fs, 200, 99, 0.5, 0.25);
    CHECK(again.masks == batch.masks);
    CHECK(again.kernel_weights == batch.kernel_weights);

    CHECK_THROWS_AS(perturb(v, fs, 11, 1, 0.5, 0.25), InvalidArgumentError);
    CHECK_THROWS_AS(perturb(v, fs, 50, 1, 1.5, 0.25), InvalidArgumentError);
    CHECK_THROWS_AS(perturb(v, fs, 50, 1, 0.5, 0.0), InvalidArgumentError);
}

TEST_CASE("keep probability one degenerates to intercept-only fits") {
    const auto v = dense10();
    const auto fs = segment(v);
    const auto batch = perturb(v, fs, 30, 7, 1.0, 0.25);
    for (int s = 0; s < batch.sample_count; ++s) {
        for (auto m : batch.mask(s)) {
            CHECK(m == 1);
        }
    }
    std::vector<double> targets(30, 4.25);
    const auto e = fit(batch, targets, 1e-3, Explanation::Kind::FULL, 1, 0);
    CHECK(e.provenance.degenerate);
    for (double w : e.weights) {
        CHECK(w == 0.0);
    }
    CHECK(e.intercept == doctest::Approx(4.25));
    CHECK(e.r2 == doctest::Approx(1.0));
}

TEST_CASE("fit recovers an exactly linear target") {
    const auto v = dense10();
    const auto fs = segment(v);
    const auto batch = perturb(v, fs, 300, 17, 0.5, 0.25);
    Rng rng(18);
    std::vector<double> b(10);
    for (auto& x : b) {
        x = rng.normal();
    }
    const double a = 0.75;
    std::vector<double> targets(static_cast<std::size_t>(batch.sample_count));
    for (int s = 0; s < batch.sample_count; ++s) {
        double t = a;
        const auto mask = batch.mask(s);
        for (int f = 0; f < 10; ++f) {
            t += b[static_cast<std::size_t>(f)] * mask[static_cast<std::size_t>(f)];
        }
        targets[static_cast<std::size_t>(s)] = t;
    }
    const auto e = fit(batch, targets, 1e-6, Explanation::Kind::FULL, 1, 0);
    for (int f = 0; f < 10; ++f) {
        CHECK(e.weights[static_cast<std::size_t>(f)] ==
              doctest::Approx(b[static_cast<std::size_t>(f)]).epsilon(1e-6));
    }
    CHECK(e.r2 == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("constant targets give zero weights and the constant intercept") {
    const auto v = dense10();
    const auto fs = segment(v);
    const auto batch = perturb(v, fs, 100, 21, 0.5, 0.25);
    std::vector<double> targets(100, -3.5);
    const auto e = fit(batch, targets, 1e-3, Explanation::Kind::UC, 1, 0);
    for (double w : e.weights) {
        CHECK(w == doctest::Approx(0.0).epsilon(1e-12));
    }
    CHECK(e.intercept == doctest::Approx(-3.5).epsilon(1e-12));
}

TEST_CASE("fitting is linear in the targets") {
    const auto v = dense10();
    const auto fs = segment(v);
    const auto batch = perturb(v, fs, 150, 23, 0.5, 0.25);
    Rng rng(24);
    std::vector<double> t1(150), t2(150), sum(150), scaled(150);
    for (int s = 0; s < 150; ++s) {
        t1[static_cast<std::size_t>(s)] = rng.normal();
        t2[static_cast<std::size_t>(s)] = rng.normal();
        sum[static_cast<std::size_t>(s)] =
            t1[static_cast<std::size_t>(s)] + t2[static_cast<std::size_t>(s)];
        scaled[static_cast<std::size_t>(s)] = 2.5 * t1[static_cast<std::size_t>(s)];
    }
    const auto e1 = fit(batch, t1, 1e-3, Explanation::Kind::FULL, 1, 0);
    const auto e2 = fit(batch, t2, 1e-3, Explanation::Kind::FULL, 1, 0);
    const auto es = fit(batch, sum, 1e-3, Explanation::Kind::FULL, 1, 0);
    const auto ea = fit(batch, scaled, 1e-3, Explanation::Kind::FULL, 1, 0);
    for (int f = 0; f < 10; ++f) {
        const auto u = static_cast<std::size_t>(f);
        CHECK(es.weights[u] == doctest::Approx(e1.weights[u] + e2.weights[u]).epsilon(1e-9));
        CHECK(ea.weights[u] == doctest::Approx(2.5 * e1.weights[u]).epsilon(1e-9));
    }
    CHECK(es.intercept == doctest::Approx(e1.intercept + e2.intercept).epsilon(1e-9));
}

TEST_CASE("explain_modality composes perturb, evaluate, fit") {
    const auto v = dense10();
    const auto fs = segment(v);
    SurrogateConfig config;
    config.sample_count = 400;
    config.lambda = 1e-4;

    // constant function -> zero weights
    const auto zero = explain_modality([](const ModalityValue&) { return 1.0; }, v, fs,
                                       config, 31, Explanation::Kind::FULL, 1, 0);
    for (double w : zero.weights) {
        CHECK(w == doctest::Approx(0.0).epsilon(1e-12));
    }

    // linear readout of the surviving dense values -> recovers the readout
    Rng rng(32);
    std::vector<double> readout(10);
    for (auto& x : readout) {
        x = rng.normal();
    }
    const auto linear = explain_modality(
        [&readout](const ModalityValue& z) {
            const auto& values = z.dense_values();
            double t = 0.0;
            for (std::size_t i = 0; i < values.size(); ++i) {
                t += readout[i] * values[i];
            }
            return t;
        },
        v, fs, config, 33, Explanation::Kind::FULL, 1, 0);
    // target coefficient on mask f is readout[f] * v[f]
    std::vector<double> expected(10);
    const auto& values = v.dense_values();
    for (std::size_t i = 0; i < 10; ++i) {
        expected[i] = readout[i] * values[i];
    }
    CHECK(cosine_distance(linear.weights, expected) <= 1e-3);

    // bit-for-bit determinism
    const auto rerun = explain_modality(
        [&readout](const ModalityValue& z) {
            const auto& vals = z.dense_values();
            double t = 0.0;
            for (std::size_t i = 0; i < vals.size(); ++i) {
                t += readout[i] * vals[i];
            }
            return t;
        },
        v, fs, config, 33, Explanation::Kind::FULL, 1, 0);
    CHECK(rerun.weights == linear.weights);
    CHECK(rerun.intercept == linear.intercept);
    CHECK(rerun.r2 == linear.r2);
}

TEST_CASE("singular designs escalate lambda once") {
    // Hand-built batch whose two mask columns are identical: singular at
    // lambda = 0, solvable after escalation.
    PerturbationBatch batch;
    batch.sample_count = 6;
    batch.feature_count = 2;
    batch.seed = 1;
    batch.masks = {1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0};
    const auto v = ModalityValue::dense({1.0, 2.0});
    const auto fs = segment(v);
    for (int s = 0; s < 6; ++s) {
        batch.realized.push_back(apply_mask(v, fs, batch.mask(s)));
    }
    batch.kernel_weights.assign(6, 1.0);
    const std::vector<double> targets{2, 0, 2, 0, 2, 0};
    const auto e = fit(batch, targets, 0.0, Explanation::Kind::FULL, 1, 0);
    CHECK(e.provenance.lambda == doctest::Approx(1e-6));
    CHECK(e.weights[0] == doctest::Approx(e.weights[1]).epsilon(1e-9));
}

TEST_CASE("explanations serialize and parse") {
    const auto v = dense10();
    const auto fs = segment(v);
    SurrogateConfig config;
    config.sample_count = 50;
    auto e = explain_modality([](const ModalityValue& z) { return z.dense_values()[0]; }, v,
                              fs, config, 41, Explanation::Kind::MI, 2, 1);
    e.provenance.emap_samples = 16;
    nlohmann::json j = e;
    CHECK(j.at("kind") == "MI");
    CHECK(j.at("modality") == 2);
    CHECK(j.at("class") == 1);
    const auto back = j.get<Explanation>();
    CHECK(back.weights == e.weights);
    CHECK(back.intercept == e.intercept);
    CHECK(back.r2 == e.r2);
    CHECK(back.provenance.seed == e.provenance.seed);
    CHECK(back.provenance.emap_samples == 16);
}
