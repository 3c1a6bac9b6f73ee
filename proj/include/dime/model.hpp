#pragma once

#include "dime/modality.hpp"

#include <atomic>
#include <cstdint>
#include <vector>

namespace dime {

// Pre-softmax class scores.
using LogitVector = std::vector<double>;

struct ModalityPair {
    ModalityValue x1;
    ModalityValue x2;

    bool operator==(const ModalityPair&) const = default;
};

// Black-box two-modality classifier handle. Implementations must be
// deterministic: the logits for a pair depend only on that pair, never on
// the surrounding batch. In-process models are read-only after construction
// and shareable across threads; external sessions allow one in-flight
// request at a time.
class Model {
public:
    virtual ~Model() = default;

    virtual int num_classes() const = 0;

    // Element i of the result is M applied to pairs[i]; order preserving.
    virtual std::vector<LogitVector> evaluate_batch(
        const std::vector<ModalityPair>& pairs) = 0;

    LogitVector evaluate(const ModalityValue& x1, const ModalityValue& x2) {
        return evaluate_batch({ModalityPair{x1, x2}}).front();
    }
};

// Pass-through wrapper counting per-pair evaluations; used by the cost
// benchmark and the evaluation-budget tests.
class CountingModel final : public Model {
public:
    explicit CountingModel(Model& inner) : inner_(inner) {}

    int num_classes() const override { return inner_.num_classes(); }

    std::vector<LogitVector> evaluate_batch(
        const std::vector<ModalityPair>& pairs) override {
        count_.fetch_add(pairs.size(), std::memory_order_relaxed);
        return inner_.evaluate_batch(pairs);
    }

    std::uint64_t evaluation_count() const noexcept {
        return count_.load(std::memory_order_relaxed);
    }

    void reset_count() noexcept { count_.store(0, std::memory_order_relaxed); }

private:
    Model& inner_;
    std::atomic<std::uint64_t> count_{0};
};

}  // namespace dime
