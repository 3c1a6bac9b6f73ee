#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dime/error.hpp"
#include "dime/numerics.hpp"
#include "dime/rng.hpp"

#include <cmath>
#include <optional>
#include <vector>

using namespace dime;

namespace {

// Literal pairwise-disagreement computation (no coincidence matrix):
// observed disagreement from ordered pairs inside each multiply-rated item,
// expected disagreement from ordered pairs across the pooled values.
std::optional<double> alpha_oracle(const RatingsMatrix& r) {
    std::vector<std::vector<int>> units;
    for (int item = 0; item < r.items(); ++item) {
        std::vector<int> vals;
        for (int a = 0; a < r.annotators(); ++a) {
            if (auto v = r.rating(a, item)) {
                vals.push_back(*v);
            }
        }
        if (vals.size() >= 2) {
            units.push_back(std::move(vals));
        }
    }
    std::size_t n = 0;
    for (const auto& u : units) {
        n += u.size();
    }
    if (n == 0) {
        return std::nullopt;
    }
    double observed = 0.0;
    std::vector<int> pooled;
    for (const auto& u : units) {
        for (std::size_t p = 0; p < u.size(); ++p) {
            for (std::size_t q = 0; q < u.size(); ++q) {
                if (p != q && u[p] != u[q]) {
                    observed += 1.0 / static_cast<double>(u.size() - 1);
                }
            }
        }
        pooled.insert(pooled.end(), u.begin(), u.end());
    }
    double expected = 0.0;
    for (std::size_t p = 0; p < pooled.size(); ++p) {
        for (std::size_t q = 0; q < pooled.size(); ++q) {
            if (p != q && pooled[p] != pooled[q]) {
                expected += 1.0;
            }
        }
    }
    const double d_obs = observed / static_cast<double>(n);
    const double d_exp = expected / static_cast<double>(n) / static_cast<double>(n - 1);
    if (observed == 0.0) {
        return 1.0;
    }
    return 1.0 - d_obs / d_exp;
}

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) {
        x = rng.normal();
    }
    return v;
}

}  // namespace

TEST_CASE("pearson on exact linear relations") {
    CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) ==
          doctest::Approx(-1.0).epsilon(1e-12));
    // cov = 4, var_a = var_b = 5 -> 0.8
    CHECK(pearson(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}) ==
          doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("pearson symmetry and affine invariance") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_vec(rng, 12);
        const auto b = random_vec(rng, 12);
        CHECK(pearson(a, b) == doctest::Approx(pearson(b, a)).epsilon(1e-14));
        std::vector<double> scaled(a.size());
        const double c = trial % 2 == 0 ? 2.5 : -0.75;
        for (std::size_t i = 0; i < a.size(); ++i) {
            scaled[i] = c * a[i] + 1.25;
        }
        CHECK(pearson(a, scaled) == doctest::Approx(c > 0 ? 1.0 : -1.0).epsilon(1e-10));
    }
}

TEST_CASE("pearson rejects degenerate inputs") {
    CHECK_THROWS_AS(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}),
                    DegenerateInputError);
    CHECK_THROWS_AS(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{5, 5, 5}),
                    DegenerateInputError);
    CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1}),
                    InvalidArgumentError);
    CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}),
                    InvalidArgumentError);
}

TEST_CASE("cosine distance basics") {
    CHECK(cosine_distance(std::vector<double>{1, 0}, std::vector<double>{1, 0}) ==
          doctest::Approx(0.0).epsilon(1e-15));
    CHECK(cosine_distance(std::vector<double>{1, 0}, std::vector<double>{0, 1}) ==
          doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_distance(std::vector<double>{1, 1}, std::vector<double>{1, 0}) ==
          doctest::Approx(1.0 - 1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(cosine_distance(std::vector<double>{0, 0}, std::vector<double>{1, 0}),
                    DegenerateInputError);
}

TEST_CASE("cosine distance is zero under positive scaling") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_vec(rng, 8);
        std::vector<double> scaled(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            scaled[i] = 3.75 * a[i];
        }
        CHECK(cosine_distance(a, scaled) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("topk_mean_abs") {
    CHECK(topk_mean_abs(std::vector<double>{3, -1, 2}, 2) == doctest::Approx(2.5));
    // full-vector case equals the plain mean of magnitudes
    const std::vector<double> w{0.5, -2.0, 1.5, 0.0};
    CHECK(topk_mean_abs(w, 4) == doctest::Approx((0.5 + 2.0 + 1.5 + 0.0) / 4.0));
    // sort-and-average oracle: |entries| sorted desc = 4, 2, 2, 0.1
    CHECK(topk_mean_abs(std::vector<double>{0.1, -4, 2, 2}, 3) ==
          doctest::Approx(8.0 / 3.0).epsilon(1e-14));
    CHECK_THROWS_AS(topk_mean_abs(w, 5), InvalidArgumentError);
    CHECK_THROWS_AS(topk_mean_abs(w, 0), InvalidArgumentError);
}

TEST_CASE("weighted ridge reproduces a consistent system at lambda 0") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const int s = 12, f = 4;
        Eigen::MatrixXd design(s, f);
        for (int i = 0; i < s; ++i) {
            for (int j = 0; j < f; ++j) {
                design(i, j) = rng.normal();
            }
        }
        Eigen::VectorXd beta(f);
        for (int j = 0; j < f; ++j) {
            beta(j) = rng.normal();
        }
        const double intercept = rng.normal();
        const Eigen::VectorXd targets = (design * beta).array() + intercept;
        Eigen::VectorXd weights(s);
        for (int i = 0; i < s; ++i) {
            weights(i) = 0.25 + 2.0 * rng.uniform();
        }
        const RidgeFit fit = weighted_ridge(design, targets, weights, 0.0);
        CHECK((fit.coefficients - beta).norm() <= 1e-10 * (1.0 + beta.norm()));
        CHECK(fit.intercept == doctest::Approx(intercept).epsilon(1e-10));
    }
}

TEST_CASE("weighted ridge shrinkage limit") {
    Rng rng(22);
    const int s = 20, f = 3;
    Eigen::MatrixXd design(s, f);
    Eigen::VectorXd targets(s);
    for (int i = 0; i < s; ++i) {
        for (int j = 0; j < f; ++j) {
            design(i, j) = rng.normal();
        }
        targets(i) = rng.normal();
    }
    const Eigen::VectorXd weights = Eigen::VectorXd::Ones(s);
    const RidgeFit loose = weighted_ridge(design, targets, weights, 0.0);
    const RidgeFit tight = weighted_ridge(design, targets, weights, 1e9);
    CHECK(tight.coefficients.norm() < 1e-3 * loose.coefficients.norm());
}

TEST_CASE("weighted ridge matches hand-evaluated normal equations") {
    // X = (0, 1, 2), y = (1, 3, 4), unit weights, lambda = 1:
    // centered x = (-1, 0, 1), centered y = (-5/3, 1/3, 4/3),
    // beta = 3 / (2 + 1) = 1, intercept = 8/3 - 1 = 5/3.
    Eigen::MatrixXd design(3, 1);
    design << 0, 1, 2;
    Eigen::VectorXd targets(3);
    targets << 1, 3, 4;
    const RidgeFit fit = weighted_ridge(design, targets, Eigen::VectorXd::Ones(3), 1.0);
    CHECK(fit.coefficients(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("weighted ridge flags singular systems at lambda 0") {
    Eigen::MatrixXd design(4, 2);
    design << 1, 1, 0, 0, 1, 1, 0, 0;  // identical columns
    Eigen::VectorXd targets(4);
    targets << 1, 0, 1, 0;
    const Eigen::VectorXd weights = Eigen::VectorXd::Ones(4);
    CHECK_THROWS_AS(weighted_ridge(design, targets, weights, 0.0), SingularSystemError);
    CHECK_NOTHROW(weighted_ridge(design, targets, weights, 1e-3));
    CHECK_THROWS_AS(weighted_ridge(design, targets, Eigen::VectorXd::Zero(4), 1.0),
                    InvalidArgumentError);
    CHECK_THROWS_AS(weighted_ridge(design, targets, weights, -1.0), InvalidArgumentError);
}

TEST_CASE("krippendorff alpha on the enumerated cases") {
    RatingsMatrix perfect(2, 4);
    for (int item = 0; item < 4; ++item) {
        const int cat = item < 2 ? 1 : 2;
        perfect.set(0, item, cat);
        perfect.set(1, item, cat);
    }
    CHECK(krippendorff_alpha_nominal(perfect) == doctest::Approx(1.0));

    // two annotators fully crossed on two items: alpha = -0.5
    RatingsMatrix crossed(2, 2);
    crossed.set(0, 0, 1);
    crossed.set(0, 1, 2);
    crossed.set(1, 0, 2);
    crossed.set(1, 1, 1);
    const auto oracle = alpha_oracle(crossed);
    REQUIRE(oracle.has_value());
    CHECK(krippendorff_alpha_nominal(crossed) == doctest::Approx(*oracle).epsilon(1e-12));
    CHECK(krippendorff_alpha_nominal(crossed) == doctest::Approx(-0.5).epsilon(1e-12));

    // three annotators, one missing cell
    RatingsMatrix missing(3, 3);
    missing.set(0, 0, 1);
    missing.set(1, 0, 1);
    missing.set(2, 0, 2);
    missing.set(0, 1, 2);
    missing.set(1, 1, 2);
    missing.set(0, 2, 1);
    missing.set(1, 2, 3);
    missing.set(2, 2, 3);
    const auto oracle2 = alpha_oracle(missing);
    REQUIRE(oracle2.has_value());
    CHECK(krippendorff_alpha_nominal(missing) == doctest::Approx(*oracle2).epsilon(1e-12));
}

TEST_CASE("krippendorff alpha needs pairable ratings") {
    RatingsMatrix lonely(2, 2);
    lonely.set(0, 0, 1);
    lonely.set(1, 1, 2);
    CHECK_FALSE(lonely.valid());
    CHECK_THROWS_AS(krippendorff_alpha_nominal(lonely), InsufficientDataError);
}

TEST_CASE("krippendorff alpha equals the pairwise oracle exhaustively") {
    // Every 2-annotator x 4-item and 3-annotator x 3-item matrix over
    // categories {1, 2, 3, missing}.
    auto sweep = [](int annotators, int items) {
        const int cells = annotators * items;
        long total = 1;
        for (int i = 0; i < cells; ++i) {
            total *= 4;
        }
        for (long code = 0; code < total; ++code) {
            RatingsMatrix m(annotators, items);
            long rest = code;
            for (int a = 0; a < annotators; ++a) {
                for (int i = 0; i < items; ++i) {
                    const int v = static_cast<int>(rest % 4);
                    rest /= 4;
                    if (v > 0) {
                        m.set(a, i, v);
                    }
                }
            }
            const auto expected = alpha_oracle(m);
            if (!expected.has_value()) {
                CHECK_THROWS_AS(krippendorff_alpha_nominal(m), InsufficientDataError);
                continue;
            }
            const double got = krippendorff_alpha_nominal(m);
            CHECK(got == doctest::Approx(*expected).epsilon(1e-12));
            CHECK(got <= 1.0 + 1e-12);
        }
    };
    sweep(2, 4);
    sweep(3, 3);

    // the 3x4 family is too large to sweep; sample it
    Rng rng(12345);
    for (int trial = 0; trial < 20000; ++trial) {
        RatingsMatrix m(3, 4);
        for (int a = 0; a < 3; ++a) {
            for (int i = 0; i < 4; ++i) {
                const int v = static_cast<int>(rng.below(4));
                if (v > 0) {
                    m.set(a, i, v);
                }
            }
        }
        const auto expected = alpha_oracle(m);
        if (!expected.has_value()) {
            CHECK_THROWS_AS(krippendorff_alpha_nominal(m), InsufficientDataError);
            continue;
        }
        CHECK(krippendorff_alpha_nominal(m) == doctest::Approx(*expected).epsilon(1e-12));
    }
}

TEST_CASE("rng streams are reproducible and well formed") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    Rng n(7);
    double mean = 0.0, sq = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        const double z = n.normal();
        mean += z;
        sq += z * z;
    }
    mean /= draws;
    const double var = sq / draws - mean * mean;
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.1);
    CHECK(n.position() == 2 * static_cast<std::uint64_t>(draws));

    Rng c(3);
    for (int i = 0; i < 100; ++i) {
        CHECK(c.below(7) < 7);
    }
    const auto picks = c.sample_without_replacement(10, 10);
    std::vector<bool> seen(10, false);
    for (int p : picks) {
        CHECK_FALSE(seen[static_cast<std::size_t>(p)]);
        seen[static_cast<std::size_t>(p)] = true;
    }

    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
    CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
}
