#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "clbench/common.hpp"

namespace clbench {

/// Scalar loss and its gradient with respect to the logits it was computed from.
struct LossGrad {
    double loss = 0.0;
    Matrix grad;
};

[[nodiscard]] Matrix softmax_rows(const Matrix& logits);
[[nodiscard]] Matrix log_softmax_rows(const Matrix& logits);

/// Mean cross-entropy over rows. When `allowed` is non-empty, columns with
/// allowed[c] == 0 are excluded from the softmax (logit treated as -inf)
/// and receive zero gradient.
[[nodiscard]] LossGrad cross_entropy(const Matrix& logits, std::span<const std::int64_t> labels,
                                     std::span<const std::uint8_t> allowed = {});

/// KL(softmax(old / tau) || softmax(new / tau)) * tau^2, averaged over rows.
/// Gradient is with respect to `new_logits`.
[[nodiscard]] LossGrad distill_loss(const Matrix& new_logits, const Matrix& old_logits, double tau);

/// l_new + beta * l_mem. An empty memory batch contributes l_mem = 0.
[[nodiscard]] double replay_loss(double loss_new, double loss_mem, double beta);

enum class SampleOrigin { stream, buffer };

/// ER-ACE: stream rows see only the current task's labels [task_begin, task_end)
/// plus labels present in the batch; buffer rows see every column.
[[nodiscard]] LossGrad erace_masked_loss(const Matrix& logits, std::span<const std::int64_t> labels,
                                         std::int64_t task_begin, std::int64_t task_end, SampleOrigin origin);

/// Argmax per row, lowest column on ties.
[[nodiscard]] std::vector<std::int64_t> argmax_rows(const Matrix& scores);

}  // namespace clbench
