#include "clbench/regularizers.hpp"

#include "clbench/losses.hpp"

namespace clbench {

namespace {

void check_shapes(const Vector& theta, const EwcState& state) {
    if (state.anchor.size() != theta.size() || state.fisher.size() != theta.size()) {
        throw ShapeError("ewc: parameter vector has " + std::to_string(theta.size()) + " entries, anchor has " +
                         std::to_string(state.anchor.size()) + " and Fisher " + std::to_string(state.fisher.size()));
    }
}

}  // namespace

double ewc_penalty(const Vector& theta, const EwcState& state) {
    if (!state.consolidated()) {
        return 0.0;
    }
    check_shapes(theta, state);
    return state.strength * (state.fisher.array() * (theta - state.anchor).array().square()).sum();
}

Vector ewc_penalty_gradient(const Vector& theta, const EwcState& state) {
    if (!state.consolidated()) {
        return Vector::Zero(theta.size());
    }
    check_shapes(theta, state);
    return 2.0 * state.strength * (state.fisher.array() * (theta - state.anchor).array()).matrix();
}

FisherMode parse_fisher_mode(const std::string& name) {
    if (name == "sampled") return FisherMode::sampled;
    if (name == "exact") return FisherMode::exact;
    if (name == "empirical") return FisherMode::empirical;
    throw ConfigError("method_params.fisher", "unknown Fisher estimator '" + name + "' (sampled, exact, empirical)");
}

std::map<std::string, Matrix> estimate_fisher_diag(Model& model, const Matrix& inputs,
                                                   std::span<const std::int64_t> labels, std::int64_t n_samples,
                                                   FisherMode mode, Rng& rng) {
    if (inputs.rows() == 0) {
        throw Error("estimate_fisher_diag: empty data");
    }
    if (n_samples < 1) {
        throw Error("estimate_fisher_diag: n_samples must be at least 1");
    }
    if (mode == FisherMode::empirical && static_cast<std::size_t>(inputs.rows()) != labels.size()) {
        throw ShapeError("estimate_fisher_diag: empirical mode needs one label per row");
    }
    std::map<std::string, Matrix> fisher;
    for (const auto* p : std::as_const(model).parameters()) {
        fisher[p->name] = Matrix::Zero(p->value.rows(), p->value.cols());
    }
    const auto n = std::min<std::int64_t>(n_samples, inputs.rows());

    const auto accumulate_score = [&](const Matrix& x, std::int64_t y, double weight) {
        model.zero_grad();
        const Matrix logits = model.forward(x);
        // Gradient of -log p(y|x); the sign vanishes when squared.
        Matrix grad = softmax_rows(logits);
        grad(0, y) -= 1.0;
        model.backward(grad);
        for (auto* p : model.parameters()) {
            if (p->trainable) {
                fisher[p->name].array() += weight * p->grad.array().square();
            }
        }
    };

    for (std::int64_t i = 0; i < n; ++i) {
        const Matrix x = inputs.row(i);
        switch (mode) {
            case FisherMode::empirical:
                accumulate_score(x, labels[static_cast<std::size_t>(i)], 1.0);
                break;
            case FisherMode::sampled: {
                const RowVector p = softmax_rows(model.logits(x)).row(0);
                const double u = uniform_unit(rng);
                double cumulative = 0.0;
                Eigen::Index y = p.size() - 1;
                for (Eigen::Index c = 0; c < p.size(); ++c) {
                    cumulative += p(c);
                    if (u < cumulative) {
                        y = c;
                        break;
                    }
                }
                accumulate_score(x, y, 1.0);
                break;
            }
            case FisherMode::exact: {
                const RowVector p = softmax_rows(model.logits(x)).row(0);
                for (Eigen::Index c = 0; c < p.size(); ++c) {
                    accumulate_score(x, c, p(c));
                }
                break;
            }
        }
    }
    for (auto& [name, values] : fisher) {
        values /= static_cast<double>(n);
    }
    model.zero_grad();
    return fisher;
}

}  // namespace clbench
