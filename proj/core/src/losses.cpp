#include "clbench/losses.hpp"

#include <limits>

namespace clbench {

Matrix log_softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double peak = logits.row(r).maxCoeff();
        const double log_sum = std::log((logits.row(r).array() - peak).exp().sum()) + peak;
        out.row(r) = logits.row(r).array() - log_sum;
    }
    return out;
}

Matrix softmax_rows(const Matrix& logits) { return log_softmax_rows(logits).array().exp().matrix(); }

LossGrad cross_entropy(const Matrix& logits, std::span<const std::int64_t> labels, std::span<const std::uint8_t> allowed) {
    const auto n = logits.rows();
    if (static_cast<std::size_t>(n) != labels.size()) {
        throw ShapeError("cross_entropy: " + std::to_string(n) + " rows but " + std::to_string(labels.size()) +
                         " labels");
    }
    LossGrad out{0.0, Matrix::Zero(n, logits.cols())};
    if (n == 0) {
        return out;
    }
    const bool masked = !allowed.empty();
    if (masked && static_cast<Eigen::Index>(allowed.size()) != logits.cols()) {
        throw ShapeError("cross_entropy: mask width differs from logit width");
    }
    Matrix work = logits;
    if (masked) {
        bool any = false;
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            if (!allowed[static_cast<std::size_t>(c)]) {
                work.col(c).setConstant(-std::numeric_limits<double>::infinity());
            } else {
                any = true;
            }
        }
        if (!any) {
            throw Error("cross_entropy: empty class mask");
        }
    }
    const Matrix log_p = log_softmax_rows(work);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto y = labels[static_cast<std::size_t>(r)];
        if (y < 0 || y >= logits.cols() || (masked && !allowed[static_cast<std::size_t>(y)])) {
            throw Error("cross_entropy: label " + std::to_string(y) + " outside the admissible columns");
        }
        out.loss -= log_p(r, y);
        out.grad.row(r) = log_p.row(r).array().exp();
        out.grad(r, y) -= 1.0;
    }
    out.loss /= static_cast<double>(n);
    out.grad /= static_cast<double>(n);
    return out;
}

LossGrad distill_loss(const Matrix& new_logits, const Matrix& old_logits, double tau) {
    if (!(tau > 0.0)) {
        throw Error("distill_loss: temperature must be positive");
    }
    if (new_logits.rows() != old_logits.rows() || new_logits.cols() != old_logits.cols()) {
        throw ShapeError("distill_loss: logit shapes differ");
    }
    const auto n = new_logits.rows();
    LossGrad out{0.0, Matrix::Zero(n, new_logits.cols())};
    if (n == 0 || new_logits.cols() == 0) {
        return out;
    }
    const Matrix log_p_old = log_softmax_rows(old_logits / tau);
    const Matrix log_q_new = log_softmax_rows(new_logits / tau);
    const Matrix p_old = log_p_old.array().exp();
    const Matrix q_new = log_q_new.array().exp();
    out.loss = (p_old.array() * (log_p_old - log_q_new).array()).sum() * tau * tau / static_cast<double>(n);
    // d/dz_new of tau^2 * KL = tau * (q_new - p_old).
    out.grad = (q_new - p_old) * (tau / static_cast<double>(n));
    return out;
}

double replay_loss(double loss_new, double loss_mem, double beta) {
    if (beta < 0.0) {
        throw Error("replay_loss: beta must be non-negative");
    }
    return loss_new + beta * loss_mem;
}

LossGrad erace_masked_loss(const Matrix& logits, std::span<const std::int64_t> labels, std::int64_t task_begin,
                           std::int64_t task_end, SampleOrigin origin) {
    if (origin == SampleOrigin::buffer) {
        return cross_entropy(logits, labels);
    }
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(logits.cols()), 0);
    for (std::int64_t c = std::max<std::int64_t>(task_begin, 0); c < std::min<std::int64_t>(task_end, logits.cols());
         ++c) {
        mask[static_cast<std::size_t>(c)] = 1;
    }
    for (const auto y : labels) {
        if (y >= 0 && y < logits.cols()) {
            mask[static_cast<std::size_t>(y)] = 1;
        }
    }
    return cross_entropy(logits, labels, mask);
}

std::vector<std::int64_t> argmax_rows(const Matrix& scores) {
    std::vector<std::int64_t> out(static_cast<std::size_t>(scores.rows()), 0);
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < scores.cols(); ++c) {
            if (scores(r, c) > scores(r, best)) {
                best = c;
            }
        }
        out[static_cast<std::size_t>(r)] = best;
    }
    return out;
}

}  // namespace clbench
