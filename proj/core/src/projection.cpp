#include "clbench/projection.hpp"

#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace clbench {

Matrix gpm_update_subspace(const Matrix& basis, const Matrix& activations, double eps_th) {
    if (!activations.allFinite()) {
        throw Error("gpm_update_subspace: non-finite activations");
    }
    const auto width = activations.rows();
    if (basis.size() > 0 && basis.rows() != width) {
        throw ShapeError("gpm_update_subspace: basis rows differ from activation width");
    }
    const double total = activations.squaredNorm();
    if (total == 0.0 || basis.cols() >= width) {
        return basis;
    }
    Matrix residual = activations;
    double captured = 0.0;
    if (basis.cols() > 0) {
        residual -= basis * (basis.transpose() * activations);
        captured = (basis.transpose() * activations).squaredNorm();
    }
    if (captured >= eps_th * total || residual.squaredNorm() <= 1e-14 * total) {
        return basis;
    }
    Eigen::BDCSVD<Matrix> svd(residual, Eigen::ComputeThinU);
    const auto& sigma = svd.singularValues();
    const auto room = width - basis.cols();
    Eigen::Index keep = 0;
    while (keep < sigma.size() && keep < room && captured < eps_th * total) {
        captured += sigma(keep) * sigma(keep);
        ++keep;
    }
    if (keep == 0) {
        return basis;
    }
    // Second Gram-Schmidt pass against the old basis, then orthonormalise the block.
    Matrix fresh = svd.matrixU().leftCols(keep);
    if (basis.cols() > 0) {
        fresh -= basis * (basis.transpose() * fresh);
    }
    Eigen::HouseholderQR<Matrix> qr(fresh);
    const Matrix q = qr.householderQ() * Matrix::Identity(width, keep);
    Matrix out(width, basis.cols() + keep);
    if (basis.cols() > 0) {
        out.leftCols(basis.cols()) = basis;
    }
    out.rightCols(keep) = q;
    return out;
}

Matrix gpm_project_gradient(const Matrix& grad, const Matrix& basis) {
    if (basis.cols() == 0) {
        return grad;
    }
    if (basis.rows() != grad.rows()) {
        throw ShapeError("gpm_project_gradient: basis width " + std::to_string(basis.rows()) + " vs gradient rows " +
                         std::to_string(grad.rows()));
    }
    return grad - basis * (basis.transpose() * grad);
}

void CovarianceCache::add_rows(const Matrix& rows) {
    if (rows.rows() == 0) {
        return;
    }
    if (sum_.size() == 0) {
        sum_ = Matrix::Zero(rows.cols(), rows.cols());
    }
    if (rows.cols() != sum_.cols()) {
        throw ShapeError("CovarianceCache: row width changed");
    }
    sum_.noalias() += rows.transpose() * rows;
    count_ += rows.rows();
}

Matrix CovarianceCache::covariance() const {
    if (count_ == 0) {
        return Matrix::Zero(sum_.rows(), sum_.cols());
    }
    return sum_ / static_cast<double>(count_);
}

Matrix nscl_projector(const Matrix& covariance, double a) {
    const auto width = covariance.rows();
    if (covariance.cols() != width) {
        throw ShapeError("nscl_projector: covariance must be square");
    }
    if (width == 0 || covariance.isZero(0.0)) {
        return Matrix::Identity(width, width);
    }
    const Matrix symmetric = 0.5 * (covariance + covariance.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric);
    const auto& lambda = eig.eigenvalues();  // ascending
    const double lambda_max = std::max(lambda(width - 1), 0.0);
    const double floor = static_cast<double>(width) * std::numeric_limits<double>::epsilon() * lambda_max;
    const double threshold = a * std::max(lambda(0), floor);
    Eigen::Index k = 0;
    while (k < width && lambda(k) <= threshold) {
        ++k;
    }
    const Matrix u2 = eig.eigenvectors().leftCols(k);
    return u2 * u2.transpose();
}

Matrix nscl_project_gradient(const Matrix& grad, const Matrix& covariance, double a) {
    if (covariance.size() == 0) {
        return grad;
    }
    if (covariance.rows() != grad.rows()) {
        throw ShapeError("nscl_project_gradient: covariance width differs from gradient rows");
    }
    return nscl_projector(covariance, a) * grad;
}

Matrix adabop_projection_from_gram(const Matrix& gram, double lambda) {
    if (lambda < 0.0) {
        throw Error("adabop_projection: lambda must be non-negative");
    }
    if (!gram.allFinite()) {
        throw Error("adabop_projection: non-finite features");
    }
    const auto width = gram.rows();
    Matrix system = Matrix::Identity(width, width) + lambda * gram;
    system = 0.5 * (system + system.transpose());
    Matrix p = system.ldlt().solve(Matrix::Identity(width, width));
    return 0.5 * (p + p.transpose());
}

Matrix adabop_projection(const Matrix& features, double lambda) {
    if (!features.allFinite()) {
        throw Error("adabop_projection: non-finite features");
    }
    return adabop_projection_from_gram(features * features.transpose(), lambda);
}

std::vector<std::size_t> trgp_trust_region(const Matrix& grad, const std::vector<Matrix>& bases, double eps) {
    std::vector<std::size_t> selected;
    const double norm = grad.norm();
    if (norm == 0.0) {
        return selected;
    }
    for (std::size_t j = 0; j < bases.size(); ++j) {
        if (bases[j].cols() == 0) {
            continue;
        }
        const double ratio = (bases[j] * (bases[j].transpose() * grad)).norm() / norm;
        if (ratio >= eps) {
            selected.push_back(j);
        }
    }
    return selected;
}

Matrix trgp_effective_weight(const Matrix& weight, const std::vector<std::size_t>& selected,
                             const std::vector<Matrix>& bases, const std::vector<Matrix>& scales) {
    Matrix out = weight;
    for (const auto j : selected) {
        const auto& s = bases.at(j);
        const auto& q = scales.at(j);
        if (q.rows() != s.cols() || q.cols() != s.cols()) {
            throw ShapeError("trgp_effective_weight: scale for task " + std::to_string(j) + " is " +
                             std::to_string(q.rows()) + "x" + std::to_string(q.cols()) + ", basis has " +
                             std::to_string(s.cols()) + " columns");
        }
        // W S Q S^T - W S S^T = W S (Q - I) S^T; exact zero when Q = I.
        const Matrix shift = q - Matrix::Identity(q.rows(), q.cols());
        out += (weight * s) * shift * s.transpose();
    }
    return out;
}

}  // namespace clbench
