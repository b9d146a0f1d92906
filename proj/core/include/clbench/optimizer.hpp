#pragma once

#include <map>
#include <string>

#include "clbench/common.hpp"
#include "clbench/config.hpp"

namespace clbench {

/// Turns gradients into parameter updates. The caller applies the update,
/// which lets learners transform it first (null-space methods do).
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg);

    /// Learning rate for `epoch` under the decay schedule.
    [[nodiscard]] double learning_rate(std::int64_t epoch) const;
    void set_epoch(std::int64_t epoch) { epoch_ = epoch; }
    [[nodiscard]] double current_learning_rate() const { return learning_rate(epoch_); }

    /// Update (to be added to the parameter) for `grad`; per-parameter state
    /// is keyed by `name` and grows with the parameter, keeping old entries.
    [[nodiscard]] Matrix update(const std::string& name, const Matrix& grad);

    /// Drops momentum and moment estimates.
    void reset() { slots_.clear(); }

    [[nodiscard]] const OptimizerConfig& config() const noexcept { return cfg_; }

private:
    struct Slot {
        Matrix first;
        Matrix second;
        std::int64_t steps = 0;
    };

    OptimizerConfig cfg_;
    std::int64_t epoch_ = 0;
    std::map<std::string, Slot> slots_;
};

}  // namespace clbench
