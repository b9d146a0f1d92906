#pragma once

#include <cstdint>
#include <vector>

#include "clbench/common.hpp"

namespace clbench {

// Conventions: a basis is (width x k) with orthonormal columns spanning part
// of a layer's input space. Gradients passed here are (width x m); every
// column is projected. Activations are (width x samples).

/// Extends `basis` with the fewest left singular vectors of the residual
/// (activations minus their component in span(basis)) such that the energy
/// captured by the extended basis is at least eps_th of the total.
/// Never exceeds `width` columns.
[[nodiscard]] Matrix gpm_update_subspace(const Matrix& basis, const Matrix& activations, double eps_th);

/// g - M M^T g. An empty basis returns g unchanged.
[[nodiscard]] Matrix gpm_project_gradient(const Matrix& grad, const Matrix& basis);

/// Running (1/n) sum x x^T over past-task layer inputs.
class CovarianceCache {
public:
    explicit CovarianceCache(std::int64_t width = 0) : sum_(Matrix::Zero(width, width)) {}

    /// `rows` holds one sample per row.
    void add_rows(const Matrix& rows);
    [[nodiscard]] Matrix covariance() const;
    [[nodiscard]] std::int64_t count() const noexcept { return count_; }
    [[nodiscard]] std::int64_t width() const noexcept { return sum_.rows(); }

private:
    Matrix sum_;
    std::int64_t count_ = 0;
};

/// U2 U2^T g where U2 collects the eigenvectors of `covariance` whose
/// eigenvalue is at most a * max(lambda_min, width * eps * lambda_max).
/// An all-zero or empty covariance returns g unchanged.
[[nodiscard]] Matrix nscl_project_gradient(const Matrix& grad, const Matrix& covariance, double a);

/// The null-space projector U2 U2^T itself (width x width).
[[nodiscard]] Matrix nscl_projector(const Matrix& covariance, double a);

/// (I + lambda X X^T)^{-1} for features X (width x samples).
[[nodiscard]] Matrix adabop_projection(const Matrix& features, double lambda);
/// Same projector from a precomputed X X^T.
[[nodiscard]] Matrix adabop_projection_from_gram(const Matrix& gram, double lambda);

/// Indices j with ||S_j S_j^T g|| / ||g|| >= eps. Empty for g = 0.
[[nodiscard]] std::vector<std::size_t> trgp_trust_region(const Matrix& grad, const std::vector<Matrix>& bases,
                                                          double eps);

/// Row convention: W is (rows x width), S_j is (width x k_j), Q_j is (k_j x k_j).
/// W + sum_{j in selected} (W S_j Q_j S_j^T - W S_j S_j^T).
[[nodiscard]] Matrix trgp_effective_weight(const Matrix& weight, const std::vector<std::size_t>& selected,
                                           const std::vector<Matrix>& bases, const std::vector<Matrix>& scales);

}  // namespace clbench
