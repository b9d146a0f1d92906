#include "clbench/rebalancing.hpp"

#include <limits>

#include "clbench/losses.hpp"

namespace clbench {

namespace {

double corrected_loss(const Matrix& logits, std::span<const std::int64_t> labels, const BiasCorrection& state) {
    return cross_entropy(bic_apply(logits, state), labels).loss;
}

}  // namespace

Matrix bic_apply(const Matrix& logits, const BiasCorrection& state) {
    Matrix out = logits;
    const auto begin = std::max<std::int64_t>(state.new_begin, 0);
    const auto end = std::min<std::int64_t>(state.new_end, logits.cols());
    if (end > begin) {
        out.middleCols(begin, end - begin) = logits.middleCols(begin, end - begin).array() * state.alpha + state.beta;
    }
    return out;
}

BiasCorrection bic_fit(const Matrix& logits, std::span<const std::int64_t> labels, std::int64_t new_begin,
                       std::int64_t new_end) {
    if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
        throw ShapeError("bic_fit: logits and labels differ in count");
    }
    bool has_old = false;
    bool has_new = false;
    for (const auto y : labels) {
        (y >= new_begin && y < new_end ? has_new : has_old) = true;
    }
    if (!has_old || !has_new) {
        throw Error("bic_fit: validation split must contain both old and new classes");
    }
    BiasCorrection state{1.0, 0.0, new_begin, new_end};
    const auto n = static_cast<double>(logits.rows());
    for (int iteration = 0; iteration < 100; ++iteration) {
        const Matrix p = softmax_rows(bic_apply(logits, state));
        Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
        Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
        for (Eigen::Index r = 0; r < logits.rows(); ++r) {
            // d(corrected logit c)/d(alpha, beta) = (z_c, 1) for new labels, 0 otherwise.
            Eigen::Vector2d mean_j = Eigen::Vector2d::Zero();
            Eigen::Matrix2d second = Eigen::Matrix2d::Zero();
            for (std::int64_t c = new_begin; c < new_end; ++c) {
                const Eigen::Vector2d j(logits(r, c), 1.0);
                mean_j += p(r, c) * j;
                second += p(r, c) * j * j.transpose();
            }
            const auto y = labels[static_cast<std::size_t>(r)];
            Eigen::Vector2d j_y = Eigen::Vector2d::Zero();
            if (y >= new_begin && y < new_end) {
                j_y = Eigen::Vector2d(logits(r, y), 1.0);
            }
            gradient += mean_j - j_y;
            hessian += second - mean_j * mean_j.transpose();
        }
        gradient /= n;
        hessian /= n;
        hessian.diagonal().array() += 1e-9;
        const Eigen::Vector2d step = hessian.ldlt().solve(gradient);
        const double before = corrected_loss(logits, labels, state);
        double scale = 1.0;
        BiasCorrection candidate = state;
        while (scale > 1e-8) {
            candidate.alpha = state.alpha - scale * step(0);
            candidate.beta = state.beta - scale * step(1);
            if (corrected_loss(logits, labels, candidate) <= before) {
                break;
            }
            scale *= 0.5;
        }
        if (scale <= 1e-8) {
            break;
        }
        state = candidate;
        if (gradient.norm() < 1e-10) {
            break;
        }
    }
    return state;
}

double wa_gamma(const ClassifierHead& head, std::span<const std::int64_t> old_labels,
                std::span<const std::int64_t> new_labels) {
    if (old_labels.empty() || new_labels.empty()) {
        throw Error("wa_align: old and new class sets must be non-empty");
    }
    const auto mean_norm = [&](std::span<const std::int64_t> labels) {
        double sum = 0.0;
        for (const auto c : labels) {
            sum += head.weight.value.row(c).norm();
        }
        return sum / static_cast<double>(labels.size());
    };
    const double new_norm = mean_norm(new_labels);
    if (new_norm == 0.0) {
        throw Error("wa_align: new-class rows have zero mean norm");
    }
    return mean_norm(old_labels) / new_norm;
}

ClassifierHead wa_align(ClassifierHead head, std::span<const std::int64_t> old_labels,
                        std::span<const std::int64_t> new_labels) {
    const double gamma = wa_gamma(head, old_labels, new_labels);
    for (const auto c : new_labels) {
        head.weight.value.row(c) *= gamma;
        head.bias.value(0, c) *= gamma;
    }
    return head;
}

Matrix exemplar_class_means(const std::vector<Matrix>& features_by_class) {
    if (features_by_class.empty()) {
        return {};
    }
    Matrix means(static_cast<Eigen::Index>(features_by_class.size()), features_by_class.front().cols());
    for (std::size_t c = 0; c < features_by_class.size(); ++c) {
        if (features_by_class[c].rows() == 0) {
            throw Error("nearest-mean classifier: class " + std::to_string(c) + " has no exemplars");
        }
        means.row(static_cast<Eigen::Index>(c)) = features_by_class[c].colwise().mean();
    }
    return means;
}

Matrix nme_scores(const Matrix& features, const Matrix& class_means) {
    Matrix normalised_means = class_means;
    for (Eigen::Index c = 0; c < class_means.rows(); ++c) {
        const double norm = class_means.row(c).norm();
        if (norm > 0.0) {
            normalised_means.row(c) /= norm;
        }
    }
    Matrix scores(features.rows(), class_means.rows());
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
        RowVector f = features.row(r);
        const double norm = f.norm();
        if (norm > 0.0) {
            f /= norm;
        }
        for (Eigen::Index c = 0; c < class_means.rows(); ++c) {
            scores(r, c) = -(f - normalised_means.row(c)).norm();
        }
    }
    return scores;
}

std::int64_t icarl_classify_nme(const RowVector& feature, const Matrix& class_means) {
    if (class_means.rows() == 0) {
        throw Error("nearest-mean classifier: no class means");
    }
    return argmax_rows(nme_scores(Matrix(feature), class_means)).front();
}

}  // namespace clbench
