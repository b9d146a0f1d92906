#include "clbench/model.hpp"

#include <Eigen/Cholesky>

namespace clbench {

RandomProjectionHead::RandomProjectionHead(std::int64_t feature_dim, std::int64_t projection_dim, double ridge,
                                           std::uint64_t seed)
    : ridge_(ridge) {
    if (feature_dim <= 0 || projection_dim <= 0) {
        throw ConfigError("method_params.projection_dim", "random projection needs positive dimensions");
    }
    if (!(ridge > 0.0)) {
        throw ConfigError("method_params.ridge", "ridge coefficient must be positive");
    }
    Rng rng(derive_seed(seed, "random_projection"));
    projection_.name = "rp.projection";
    projection_.trainable = false;
    projection_.value.resize(projection_dim, feature_dim);
    for (Eigen::Index i = 0; i < projection_.value.size(); ++i) {
        projection_.value.data()[i] = standard_normal(rng);
    }
    gram_ = Matrix::Zero(projection_dim, projection_dim);
    class_sums_.resize(projection_dim, 0);
}

Matrix RandomProjectionHead::project(const Matrix& features) const {
    if (features.cols() != projection_.value.cols()) {
        throw ShapeError("random projection expects " + std::to_string(projection_.value.cols()) + " features, got " +
                         std::to_string(features.cols()));
    }
    return (features * projection_.value.transpose()).cwiseMax(0.0);
}

void RandomProjectionHead::fit(const Matrix& features, std::span<const std::int64_t> labels) {
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw ShapeError("random projection fit: feature rows and labels differ in count");
    }
    const Matrix h = project(features);
    gram_.noalias() += h.transpose() * h;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto label = labels[i];
        if (label < 0) {
            throw Error("random projection fit: negative label");
        }
        if (label >= class_sums_.cols()) {
            const auto old = class_sums_.cols();
            class_sums_.conservativeResize(Eigen::NoChange, label + 1);
            class_sums_.rightCols(label + 1 - old).setZero();
        }
        class_sums_.col(label) += h.row(static_cast<Eigen::Index>(i)).transpose();
    }
    fitted_ = true;
    decoder_valid_ = false;
}

Matrix RandomProjectionHead::scores(const Matrix& features) const {
    if (!fitted_) {
        throw Error("random projection head used before any fit");
    }
    if (!decoder_valid_) {
        Matrix regularised = gram_;
        regularised.diagonal().array() += ridge_;
        decoder_ = regularised.ldlt().solve(class_sums_);
        decoder_valid_ = true;
    }
    return project(features) * decoder_;
}

std::int64_t RandomProjectionHead::classify(const RowVector& feature) const {
    const Matrix s = scores(Matrix(feature));
    Eigen::Index best = 0;
    s.row(0).maxCoeff(&best);
    return best;
}

}  // namespace clbench
