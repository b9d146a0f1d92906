#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "clbench/common.hpp"
#include "clbench/model.hpp"

namespace clbench {

/// Diagonal Fisher and anchor for one flat parameter vector.
struct EwcState {
    Vector fisher;
    Vector anchor;
    double strength = 1.0;

    [[nodiscard]] bool consolidated() const noexcept { return anchor.size() > 0; }
};

/// strength * sum_i F_i (theta_i - anchor_i)^2; zero before the first consolidation.
[[nodiscard]] double ewc_penalty(const Vector& theta, const EwcState& state);
/// 2 * strength * F .* (theta - anchor).
[[nodiscard]] Vector ewc_penalty_gradient(const Vector& theta, const EwcState& state);

enum class FisherMode {
    sampled,    // y drawn from the model's predictive distribution
    exact,      // expectation over y under the predictive distribution
    empirical,  // y = the true label
};

[[nodiscard]] FisherMode parse_fisher_mode(const std::string& name);

/// Per-parameter mean squared score of log p(y|x) over up to `n_samples` rows
/// of `inputs`. Frozen parameters get all-zero entries. Leaves parameter
/// values untouched; gradients are overwritten.
[[nodiscard]] std::map<std::string, Matrix> estimate_fisher_diag(Model& model, const Matrix& inputs,
                                                                 std::span<const std::int64_t> labels,
                                                                 std::int64_t n_samples, FisherMode mode, Rng& rng);

}  // namespace clbench
