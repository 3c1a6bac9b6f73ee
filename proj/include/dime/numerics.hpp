#pragma once

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace dime {

// Pearson correlation of two equal-length vectors (length >= 2, neither
// constant). Throws DegenerateInputError on a constant input.
double pearson(std::span<const double> a, std::span<const double> b);

// 1 - cosine similarity, in [0, 2]. Throws DegenerateInputError on a zero
// vector.
double cosine_distance(std::span<const double> a, std::span<const double> b);

// Mean of the k largest absolute entries, 1 <= k <= w.size().
double topk_mean_abs(std::span<const double> w, int k);

// Annotator-by-item integer category codes with missing cells.
class RatingsMatrix {
public:
    static constexpr int kMissing = std::numeric_limits<int>::min();

    RatingsMatrix(int annotators, int items);

    void set(int annotator, int item, int category);
    std::optional<int> rating(int annotator, int item) const;

    int annotators() const noexcept { return annotators_; }
    int items() const noexcept { return items_; }

    // At least 2 annotators and at least one item rated twice.
    bool valid() const;

private:
    int annotators_ = 0;
    int items_ = 0;
    std::vector<int> cells_;
};

// Krippendorff's alpha at nominal measurement level, via the coincidence
// matrix. Throws InsufficientDataError when no item has two ratings.
double krippendorff_alpha_nominal(const RatingsMatrix& ratings);

struct RidgeFit {
    Eigen::VectorXd coefficients;
    double intercept = 0.0;
};

// Weighted ridge with an unpenalized intercept: minimizes
//   sum_s w_s (y_s - b0 - x_s . beta)^2 + lambda ||beta||^2.
// Solved by weighted centering plus an LLT factorization of the normal
// equations; throws SingularSystemError when they are not positive definite
// (only possible at lambda = 0).
RidgeFit weighted_ridge(const Eigen::MatrixXd& design,
                        const Eigen::VectorXd& targets,
                        const Eigen::VectorXd& weights,
                        double lambda);

}  // namespace dime
