#include "dime/mlp.hpp"

#include "dime/error.hpp"
#include "dime/rng.hpp"
#include "json.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

namespace dime {

namespace {

constexpr int kInputDim = MlpModel::kLayerSizes.front();

// Forward pass over a column batch, keeping pre-activations for backprop.
// activations[0] is the input; activations[l+1] the output of layer l.
void forward_cached(const MlpModel& m, const Eigen::MatrixXd& inputs,
                    std::vector<Eigen::MatrixXd>& activations) {
    const std::size_t layers = m.weights.size();
    activations.resize(layers + 1);
    activations[0] = inputs;
    for (std::size_t l = 0; l < layers; ++l) {
        Eigen::MatrixXd z = (m.weights[l] * activations[l]).colwise() + m.biases[l];
        activations[l + 1] = (l + 1 < layers) ? z.cwiseMax(0.0).eval() : std::move(z);
    }
}

// Softmax cross-entropy; fills `probs` with class probabilities per column.
double softmax_cross_entropy(const Eigen::MatrixXd& logits, std::span<const int> labels,
                             Eigen::MatrixXd& probs) {
    const Eigen::Index batch = logits.cols();
    probs = logits;
    double loss = 0.0;
    for (Eigen::Index b = 0; b < batch; ++b) {
        auto col = probs.col(b);
        const double peak = col.maxCoeff();
        col = (col.array() - peak).exp();
        const double total = col.sum();
        col /= total;
        loss -= std::log(probs(labels[static_cast<std::size_t>(b)], b));
    }
    return loss / static_cast<double>(batch);
}

}  // namespace

MlpModel::MlpModel() {
    for (std::size_t l = 0; l + 1 < kLayerSizes.size(); ++l) {
        weights.emplace_back(Eigen::MatrixXd::Zero(kLayerSizes[l + 1], kLayerSizes[l]));
        biases.emplace_back(Eigen::VectorXd::Zero(kLayerSizes[l + 1]));
    }
}

MlpModel MlpModel::random_init(std::uint64_t seed) {
    MlpModel m;
    Rng rng(seed);
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        const double scale = std::sqrt(2.0 / static_cast<double>(m.weights[l].cols()));
        auto& w = m.weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                w(r, c) = scale * rng.normal();
            }
        }
    }
    return m;
}

Eigen::VectorXd MlpModel::forward(const Eigen::VectorXd& input) const {
    if (input.size() != kInputDim) {
        throw InvalidArgumentError("MLP input must have dimension 20");
    }
    thread_local std::vector<Eigen::VectorXd> scratch;
    scratch.resize(weights.size());
    const Eigen::VectorXd* current = &input;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        auto& out = scratch[l];
        out.resize(weights[l].rows());
        out.noalias() = weights[l] * (*current);
        out += biases[l];
        if (l + 1 < weights.size()) {
            out = out.cwiseMax(0.0);
        }
        current = &out;
    }
    return *current;
}

LogitVector MlpModel::forward_pair(std::span<const double> d1,
                                   std::span<const double> d2) const {
    if (d1.size() + d2.size() != kInputDim) {
        throw InvalidArgumentError("MLP expects two 10-vectors");
    }
    Eigen::VectorXd x(kInputDim);
    for (std::size_t i = 0; i < d1.size(); ++i) {
        x(static_cast<Eigen::Index>(i)) = d1[i];
    }
    for (std::size_t i = 0; i < d2.size(); ++i) {
        x(static_cast<Eigen::Index>(d1.size() + i)) = d2[i];
    }
    const Eigen::VectorXd out = forward(x);
    return {out.data(), out.data() + out.size()};
}

std::vector<LogitVector> MlpModel::evaluate_batch(const std::vector<ModalityPair>& pairs) {
    std::vector<LogitVector> out;
    out.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        if (p.x1.kind() != ModalityValue::Kind::Dense ||
            p.x2.kind() != ModalityValue::Kind::Dense ||
            p.x1.feature_count() + p.x2.feature_count() != kInputDim) {
            throw GatewayError("MLP expects dense 10+10 inputs (pair " +
                                   std::to_string(i) + ")",
                               i);
        }
        out.push_back(forward_pair(p.x1.dense_values(), p.x2.dense_values()));
    }
    return out;
}

void MlpModel::save(const std::filesystem::path& file) const {
    nlohmann::json j;
    j["layers"] = kLayerSizes;
    auto& jw = j["weights"] = nlohmann::json::array();
    auto& jb = j["biases"] = nlohmann::json::array();
    for (std::size_t l = 0; l < weights.size(); ++l) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < weights[l].rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(weights[l].cols()));
            for (Eigen::Index c = 0; c < weights[l].cols(); ++c) {
                row[static_cast<std::size_t>(c)] = weights[l](r, c);
            }
            rows.push_back(row);
        }
        jw.push_back(std::move(rows));
        jb.push_back(std::vector<double>(biases[l].data(), biases[l].data() + biases[l].size()));
    }
    std::ofstream out(file);
    if (!out) {
        throw Error("cannot open " + file.string() + " for writing");
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw Error("write failed: " + file.string());
    }
}

MlpModel MlpModel::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw Error("cannot open " + file.string());
    }
    nlohmann::json j;
    in >> j;
    const auto layers = j.at("layers").get<std::vector<int>>();
    if (!std::equal(layers.begin(), layers.end(), kLayerSizes.begin(), kLayerSizes.end())) {
        throw Error("model file layer sizes do not match 20/100/200/10/2");
    }
    MlpModel m;
    const auto& jw = j.at("weights");
    const auto& jb = j.at("biases");
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        const auto rows = jw.at(l).get<std::vector<std::vector<double>>>();
        if (rows.size() != static_cast<std::size_t>(m.weights[l].rows())) {
            throw Error("model file weight shape mismatch");
        }
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != static_cast<std::size_t>(m.weights[l].cols())) {
                throw Error("model file weight shape mismatch");
            }
            for (std::size_t c = 0; c < rows[r].size(); ++c) {
                m.weights[l](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    rows[r][c];
            }
        }
        const auto bias = jb.at(l).get<std::vector<double>>();
        if (bias.size() != static_cast<std::size_t>(m.biases[l].size())) {
            throw Error("model file bias shape mismatch");
        }
        m.biases[l] = Eigen::Map<const Eigen::VectorXd>(bias.data(),
                                                        static_cast<Eigen::Index>(bias.size()));
    }
    return m;
}

Eigen::MatrixXd mlp_inputs(const std::vector<SyntheticPoint>& points) {
    Eigen::MatrixXd inputs(kInputDim, static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (int d = 0; d < kSyntheticDim; ++d) {
            inputs(d, static_cast<Eigen::Index>(i)) = points[i].d1[static_cast<std::size_t>(d)];
            inputs(kSyntheticDim + d, static_cast<Eigen::Index>(i)) =
                points[i].d2[static_cast<std::size_t>(d)];
        }
    }
    return inputs;
}

double mlp_batch_loss(const MlpModel& m, const Eigen::MatrixXd& inputs,
                      std::span<const int> labels) {
    std::vector<Eigen::MatrixXd> activations;
    forward_cached(m, inputs, activations);
    Eigen::MatrixXd probs;
    return softmax_cross_entropy(activations.back(), labels, probs);
}

double mlp_batch_loss_and_gradients(const MlpModel& m, const Eigen::MatrixXd& inputs,
                                    std::span<const int> labels, MlpGradients& grads) {
    const std::size_t layers = m.weights.size();
    std::vector<Eigen::MatrixXd> activations;
    forward_cached(m, inputs, activations);
    Eigen::MatrixXd probs;
    const double loss = softmax_cross_entropy(activations.back(), labels, probs);

    grads.weights.resize(layers);
    grads.biases.resize(layers);
    const Eigen::Index batch = inputs.cols();
    Eigen::MatrixXd delta = probs;
    for (Eigen::Index b = 0; b < batch; ++b) {
        delta(labels[static_cast<std::size_t>(b)], b) -= 1.0;
    }
    delta /= static_cast<double>(batch);
    for (std::size_t l = layers; l-- > 0;) {
        grads.weights[l].noalias() = delta * activations[l].transpose();
        grads.biases[l] = delta.rowwise().sum();
        if (l > 0) {
            // activations[l] is post-rectifier, positive exactly where the
            // unit was active.
            delta = (m.weights[l].transpose() * delta).cwiseProduct(
                (activations[l].array() > 0.0).cast<double>().matrix());
        }
    }
    return loss;
}

double mlp_accuracy(const MlpModel& m, const std::vector<SyntheticPoint>& points) {
    if (points.empty()) {
        return 0.0;
    }
    const Eigen::MatrixXd inputs = mlp_inputs(points);
    std::vector<Eigen::MatrixXd> activations;
    forward_cached(m, inputs, activations);
    const auto& logits = activations.back();
    std::size_t hits = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        Eigen::Index best = 0;
        logits.col(static_cast<Eigen::Index>(i)).maxCoeff(&best);
        hits += (static_cast<int>(best) == points[i].label) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(points.size());
}

MlpTrainResult mlp_train(const DatasetSplits& splits, const MlpTrainOptions& options) {
    if (splits.train.empty()) {
        throw InvalidArgumentError("mlp_train: empty training split");
    }
    if (options.epochs < 1 || options.batch_size < 1 || options.learning_rate <= 0.0) {
        throw InvalidArgumentError("mlp_train: bad hyperparameters");
    }

    const Eigen::MatrixXd inputs = mlp_inputs(splits.train);
    std::vector<int> labels(splits.train.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        labels[i] = splits.train[i].label;
    }

    MlpModel model = MlpModel::random_init(derive_seed(options.seed, "mlp/init"));
    Rng shuffle_rng(derive_seed(options.seed, "mlp/shuffle"));

    std::vector<Eigen::MatrixXd> vel_w;
    std::vector<Eigen::VectorXd> vel_b;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        vel_w.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
        vel_b.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
    }

    const std::size_t n = splits.train.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    MlpGradients grads;
    double lr = options.learning_rate;
    double epoch_loss = 0.0;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += options.batch_size) {
            const std::size_t size = std::min<std::size_t>(options.batch_size, n - start);
            Eigen::MatrixXd xb(kInputDim, static_cast<Eigen::Index>(size));
            std::vector<int> yb(size);
            for (std::size_t b = 0; b < size; ++b) {
                xb.col(static_cast<Eigen::Index>(b)) = inputs.col(order[start + b]);
                yb[b] = labels[static_cast<std::size_t>(order[start + b])];
            }
            const double loss = mlp_batch_loss_and_gradients(model, xb, yb, grads);
            if (!std::isfinite(loss)) {
                throw TrainingError("training diverged: non-finite loss at epoch " +
                                    std::to_string(epoch + 1) + ", batch " +
                                    std::to_string(batches));
            }
            for (std::size_t l = 0; l < model.weights.size(); ++l) {
                vel_w[l] = options.momentum * vel_w[l] - lr * grads.weights[l];
                vel_b[l] = options.momentum * vel_b[l] - lr * grads.biases[l];
                model.weights[l] += vel_w[l];
                model.biases[l] += vel_b[l];
            }
            epoch_loss += loss;
            ++batches;
        }
        epoch_loss /= static_cast<double>(batches);
        lr *= options.lr_decay;
    }

    MlpTrainResult result{std::move(model), {}};
    result.report.train_accuracy = mlp_accuracy(result.model, splits.train);
    result.report.valid_accuracy = mlp_accuracy(result.model, splits.valid);
    result.report.test_accuracy = mlp_accuracy(result.model, splits.test);
    result.report.final_loss = epoch_loss;
    result.report.epochs = options.epochs;
    return result;
}

}  // namespace dime
