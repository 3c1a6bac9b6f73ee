#include "dime/numerics.hpp"

#include "dime/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace dime {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw InvalidArgumentError("vector lengths differ: " + std::to_string(a.size()) +
                                   " vs " + std::to_string(b.size()));
    }
}

}  // namespace

double pearson(std::span<const double> a, std::span<const double> b) {
    check_lengths(a, b);
    const std::size_t n = a.size();
    if (n < 2) {
        throw InvalidArgumentError("pearson needs at least 2 elements");
    }
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);

    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va == 0.0 || vb == 0.0) {
        throw DegenerateInputError("pearson undefined for a constant vector");
    }
    return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
    check_lengths(a, b);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw DegenerateInputError("cosine distance undefined for a zero vector");
    }
    return std::clamp(1.0 - dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 2.0);
}

double topk_mean_abs(std::span<const double> w, int k) {
    if (k < 1 || static_cast<std::size_t>(k) > w.size()) {
        throw InvalidArgumentError("topk_mean_abs: k out of range");
    }
    std::vector<double> mags(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        mags[i] = std::abs(w[i]);
    }
    std::nth_element(mags.begin(), mags.begin() + (k - 1), mags.end(),
                     std::greater<double>());
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        sum += mags[static_cast<std::size_t>(i)];
    }
    return sum / static_cast<double>(k);
}

RatingsMatrix::RatingsMatrix(int annotators, int items)
    : annotators_(annotators),
      items_(items),
      cells_(static_cast<std::size_t>(annotators) * static_cast<std::size_t>(items),
             kMissing) {
    if (annotators < 2) {
        throw InvalidArgumentError("RatingsMatrix needs at least 2 annotators");
    }
    if (items < 1) {
        throw InvalidArgumentError("RatingsMatrix needs at least 1 item");
    }
}

void RatingsMatrix::set(int annotator, int item, int category) {
    if (annotator < 0 || annotator >= annotators_ || item < 0 || item >= items_) {
        throw InvalidArgumentError("RatingsMatrix index out of range");
    }
    cells_[static_cast<std::size_t>(annotator) * static_cast<std::size_t>(items_) +
           static_cast<std::size_t>(item)] = category;
}

std::optional<int> RatingsMatrix::rating(int annotator, int item) const {
    const int v = cells_[static_cast<std::size_t>(annotator) *
                             static_cast<std::size_t>(items_) +
                         static_cast<std::size_t>(item)];
    if (v == kMissing) {
        return std::nullopt;
    }
    return v;
}

bool RatingsMatrix::valid() const {
    for (int i = 0; i < items_; ++i) {
        int rated = 0;
        for (int a = 0; a < annotators_; ++a) {
            if (rating(a, i).has_value()) {
                ++rated;
            }
        }
        if (rated >= 2) {
            return true;
        }
    }
    return false;
}

double krippendorff_alpha_nominal(const RatingsMatrix& ratings) {
    // Coincidence matrix: each item with m >= 2 ratings contributes every
    // ordered pair of its values with weight 1/(m-1).
    std::map<int, int> category_index;
    for (int a = 0; a < ratings.annotators(); ++a) {
        for (int i = 0; i < ratings.items(); ++i) {
            if (auto v = ratings.rating(a, i)) {
                category_index.emplace(*v, 0);
            }
        }
    }
    int next = 0;
    for (auto& [cat, idx] : category_index) {
        idx = next++;
    }
    const int ncat = next;

    std::vector<double> coincidence(static_cast<std::size_t>(ncat) *
                                        static_cast<std::size_t>(ncat),
                                    0.0);
    for (int i = 0; i < ratings.items(); ++i) {
        std::vector<int> values;
        for (int a = 0; a < ratings.annotators(); ++a) {
            if (auto v = ratings.rating(a, i)) {
                values.push_back(category_index.at(*v));
            }
        }
        const auto m = values.size();
        if (m < 2) {
            continue;
        }
        const double w = 1.0 / static_cast<double>(m - 1);
        for (std::size_t p = 0; p < m; ++p) {
            for (std::size_t q = 0; q < m; ++q) {
                if (p == q) {
                    continue;
                }
                coincidence[static_cast<std::size_t>(values[p]) *
                                static_cast<std::size_t>(ncat) +
                            static_cast<std::size_t>(values[q])] += w;
            }
        }
    }

    std::vector<double> totals(static_cast<std::size_t>(ncat), 0.0);
    double n = 0.0;
    for (int c = 0; c < ncat; ++c) {
        for (int k = 0; k < ncat; ++k) {
            totals[static_cast<std::size_t>(c)] +=
                coincidence[static_cast<std::size_t>(c) * static_cast<std::size_t>(ncat) +
                            static_cast<std::size_t>(k)];
        }
        n += totals[static_cast<std::size_t>(c)];
    }
    if (n <= 0.0) {
        throw InsufficientDataError("no item has two ratings");
    }

    double observed = 0.0;   // sum of off-diagonal coincidences
    double expected = 0.0;   // sum_{c != k} n_c n_k / (n - 1)
    for (int c = 0; c < ncat; ++c) {
        for (int k = 0; k < ncat; ++k) {
            if (c == k) {
                continue;
            }
            observed += coincidence[static_cast<std::size_t>(c) *
                                        static_cast<std::size_t>(ncat) +
                                    static_cast<std::size_t>(k)];
            expected += totals[static_cast<std::size_t>(c)] *
                        totals[static_cast<std::size_t>(k)];
        }
    }
    if (observed == 0.0) {
        return 1.0;  // perfect agreement, even when only one category appears
    }
    expected /= (n - 1.0);
    return 1.0 - observed / expected;
}

RidgeFit weighted_ridge(const Eigen::MatrixXd& design,
                        const Eigen::VectorXd& targets,
                        const Eigen::VectorXd& weights,
                        double lambda) {
    const Eigen::Index s = design.rows();
    const Eigen::Index f = design.cols();
    if (targets.size() != s || weights.size() != s) {
        throw InvalidArgumentError("weighted_ridge: shape mismatch");
    }
    if (lambda < 0.0) {
        throw InvalidArgumentError("weighted_ridge: negative lambda");
    }
    const double total = weights.sum();
    if (!(total > 0.0) || weights.minCoeff() < 0.0) {
        throw InvalidArgumentError("weighted_ridge: weights must be nonnegative, not all zero");
    }

    // Weighted centering keeps the intercept out of the penalty.
    const Eigen::VectorXd col_means = design.transpose() * weights / total;
    const double y_mean = weights.dot(targets) / total;
    const Eigen::MatrixXd xc = design.rowwise() - col_means.transpose();
    const Eigen::VectorXd yc = targets.array() - y_mean;

    Eigen::MatrixXd normal = xc.transpose() * weights.asDiagonal() * xc;
    normal.diagonal().array() += lambda;
    const Eigen::VectorXd rhs = xc.transpose() * (weights.array() * yc.array()).matrix();

    const Eigen::LLT<Eigen::MatrixXd> llt(normal);
    if (llt.info() != Eigen::Success) {
        throw SingularSystemError("normal equations not positive definite (lambda=" +
                                  std::to_string(lambda) + ", features=" +
                                  std::to_string(f) + ")");
    }
    RidgeFit fit;
    fit.coefficients = llt.solve(rhs);
    fit.intercept = y_mean - col_means.dot(fit.coefficients);
    return fit;
}

}  // namespace dime
