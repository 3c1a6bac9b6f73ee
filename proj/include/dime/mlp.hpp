#pragma once

#include "dime/model.hpp"
#include "dime/synthetic.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace dime {

// 20 -> 100 -> 200 -> 10 -> 2 feedforward net with rectifier hidden units
// and identity output; the in-process reference model for the synthetic
// task. Read-only after construction/training, so shareable across threads.
class MlpModel final : public Model {
public:
    static constexpr std::array<int, 5> kLayerSizes{20, 100, 200, 10, 2};

    MlpModel();  // zero weights and biases
    static MlpModel random_init(std::uint64_t seed);

    int num_classes() const override { return kLayerSizes.back(); }

    // Each pair is evaluated independently (per-sample matrix-vector
    // products), so logits never depend on batch composition.
    std::vector<LogitVector> evaluate_batch(const std::vector<ModalityPair>& pairs) override;

    Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
    LogitVector forward_pair(std::span<const double> d1, std::span<const double> d2) const;

    void save(const std::filesystem::path& file) const;
    static MlpModel load(const std::filesystem::path& file);

    std::vector<Eigen::MatrixXd> weights;  // per layer, out x in
    std::vector<Eigen::VectorXd> biases;
};

struct MlpTrainOptions {
    std::uint64_t seed = 1;
    int epochs = 15;
    int batch_size = 128;
    double learning_rate = 0.05;
    double momentum = 0.9;
    double lr_decay = 0.85;  // per-epoch multiplier
};

struct MlpTrainReport {
    double train_accuracy = 0.0;
    double valid_accuracy = 0.0;
    double test_accuracy = 0.0;
    double final_loss = 0.0;
    int epochs = 0;
};

struct MlpTrainResult {
    MlpModel model;
    MlpTrainReport report;
};

// Mini-batch gradient descent with momentum on mean cross-entropy.
// Deterministic per seed; throws TrainingError if the loss goes non-finite.
MlpTrainResult mlp_train(const DatasetSplits& splits, const MlpTrainOptions& options);

struct MlpGradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

// Mean cross-entropy over a batch (inputs as columns). The gradient variant
// backpropagates into `grads`; both share one forward pass definition so
// finite-difference checks exercise the real code path.
double mlp_batch_loss(const MlpModel& m, const Eigen::MatrixXd& inputs,
                      std::span<const int> labels);
double mlp_batch_loss_and_gradients(const MlpModel& m, const Eigen::MatrixXd& inputs,
                                    std::span<const int> labels, MlpGradients& grads);

double mlp_accuracy(const MlpModel& m, const std::vector<SyntheticPoint>& points);

// Column-per-point concatenated (d1, d2) inputs.
Eigen::MatrixXd mlp_inputs(const std::vector<SyntheticPoint>& points);

}  // namespace dime
