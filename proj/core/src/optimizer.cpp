#include "clbench/optimizer.hpp"

#include <cmath>

namespace clbench {

namespace {

void grow(Matrix& m, const Matrix& like) {
    if (m.rows() == like.rows() && m.cols() == like.cols()) {
        return;
    }
    Matrix grown = Matrix::Zero(like.rows(), like.cols());
    const auto rows = std::min(m.rows(), like.rows());
    const auto cols = std::min(m.cols(), like.cols());
    grown.topLeftCorner(rows, cols) = m.topLeftCorner(rows, cols);
    m = std::move(grown);
}

}  // namespace

Optimizer::Optimizer(OptimizerConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.name != "sgd" && cfg_.name != "adam") {
        throw ConfigError("optimizer.name", "unknown optimizer '" + cfg_.name + "' (sgd, adam)");
    }
    if (cfg_.decay_schedule.name != "constant" && cfg_.decay_schedule.name != "step") {
        throw ConfigError("optimizer.decay_schedule.name",
                          "unknown schedule '" + cfg_.decay_schedule.name + "' (constant, step)");
    }
}

double Optimizer::learning_rate(std::int64_t epoch) const {
    if (cfg_.decay_schedule.name == "step") {
        const auto drops = epoch / std::max<std::int64_t>(cfg_.decay_schedule.step_size, 1);
        return cfg_.learning_rate * std::pow(cfg_.decay_schedule.gamma, static_cast<double>(drops));
    }
    return cfg_.learning_rate;
}

Matrix Optimizer::update(const std::string& name, const Matrix& grad) {
    const double lr = learning_rate(epoch_);
    auto& slot = slots_[name];
    if (cfg_.name == "adam") {
        constexpr double beta1 = 0.9;
        constexpr double beta2 = 0.999;
        constexpr double eps = 1e-8;
        if (slot.first.size() == 0) {
            slot.first = Matrix::Zero(grad.rows(), grad.cols());
            slot.second = Matrix::Zero(grad.rows(), grad.cols());
        }
        grow(slot.first, grad);
        grow(slot.second, grad);
        ++slot.steps;
        slot.first = beta1 * slot.first + (1.0 - beta1) * grad;
        slot.second = beta2 * slot.second + (1.0 - beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(slot.steps));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(slot.steps));
        return -lr * ((slot.first / c1).array() / ((slot.second / c2).array().sqrt() + eps)).matrix();
    }
    if (cfg_.momentum == 0.0) {
        return -lr * grad;
    }
    if (slot.first.size() == 0) {
        slot.first = Matrix::Zero(grad.rows(), grad.cols());
    }
    grow(slot.first, grad);
    slot.first = cfg_.momentum * slot.first + grad;
    return -lr * slot.first;
}

}  // namespace clbench
