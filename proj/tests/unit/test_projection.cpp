#include <gtest/gtest.h>

#include <Eigen/SVD>

#include "clbench/projection.hpp"
#include "test_support.hpp"

namespace clbench {
namespace {

Matrix orthonormal_columns(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    const Matrix a = testing::random_matrix(rows, cols, rng);
    return Eigen::HouseholderQR<Matrix>(a).householderQ() * Matrix::Identity(rows, cols);
}

TEST(GpmUpdateSubspace, RankOneActivations) {
    Matrix acts = Matrix::Zero(3, 5);
    acts.row(0) << 1, -2, 3, 0.5, 4;
    const Matrix m = gpm_update_subspace(Matrix(3, 0), acts, 0.5);
    ASSERT_EQ(m.cols(), 1);
    EXPECT_NEAR(std::abs(m(0, 0)), 1.0, 1e-12);
    EXPECT_NEAR(m.col(0).tail(2).norm(), 0.0, 1e-12);
}

TEST(GpmUpdateSubspace, ActivationsInsideSpanLeaveBasisUnchanged) {
    Rng rng(1);
    const Matrix basis = orthonormal_columns(6, 2, rng);
    const Matrix acts = basis * testing::random_matrix(2, 9, rng);
    EXPECT_EQ(gpm_update_subspace(basis, acts, 0.97), basis);
}

TEST(GpmUpdateSubspace, MinimalRankMatchesSvdOracle) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix acts = testing::random_matrix(8, 30, rng);
        const double eps = 0.5 + 0.49 * uniform_unit(rng);
        const Matrix m = gpm_update_subspace(Matrix(8, 0), acts, eps);

        const Eigen::JacobiSVD<Matrix> svd(acts);
        const Vector s2 = svd.singularValues().cwiseAbs2();
        double running = 0.0;
        Eigen::Index k = 0;
        while (running < eps * s2.sum()) running += s2(k++);
        EXPECT_EQ(m.cols(), k) << "eps " << eps;
        EXPECT_GE((m.transpose() * acts).squaredNorm(), eps * acts.squaredNorm() - 1e-9);
        EXPECT_LT((m.transpose() * m - Matrix::Identity(m.cols(), m.cols())).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(GpmUpdateSubspace, NeverExceedsWidthAndStaysOrthonormal) {
    Rng rng(3);
    Matrix basis(5, 0);
    for (int task = 0; task < 6; ++task) {
        basis = gpm_update_subspace(basis, testing::random_matrix(5, 12, rng), 0.999);
        ASSERT_LE(basis.cols(), 5);
        EXPECT_LT((basis.transpose() * basis - Matrix::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(GpmProjectGradient, AxisProjection) {
    Matrix m(2, 1);
    m << 1, 0;
    Matrix g(2, 1);
    g << 3, 4;
    const Matrix p = gpm_project_gradient(g, m);
    EXPECT_DOUBLE_EQ(p(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(p(1, 0), 4.0);
}

TEST(GpmProjectGradient, EmptyBasisIsIdentity) {
    Rng rng(4);
    const Matrix g = testing::random_matrix(4, 3, rng);
    EXPECT_EQ(gpm_project_gradient(g, Matrix(4, 0)), g);
}

TEST(GpmProjectGradient, OrthogonalityAndPythagoras) {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto width = static_cast<Eigen::Index>(2 + uniform_index(rng, 63));
        const auto k = static_cast<Eigen::Index>(1 + uniform_index(rng, static_cast<std::uint64_t>(width)));
        const Matrix m = orthonormal_columns(width, k, rng);
        const Matrix g = testing::random_matrix(width, 3, rng);
        const Matrix projected = gpm_project_gradient(g, m);
        EXPECT_LT((m.transpose() * projected).cwiseAbs().maxCoeff(), 1e-6);
        const double lhs = projected.squaredNorm() + (m * m.transpose() * g).squaredNorm();
        EXPECT_NEAR(lhs, g.squaredNorm(), 1e-8 * std::max(1.0, g.squaredNorm()));
    }
}

TEST(GpmProjectGradient, ShapeMismatchThrows) {
    EXPECT_THROW((void)gpm_project_gradient(Matrix::Zero(3, 1), Matrix::Zero(4, 1)), ShapeError);
}

TEST(NsclProjection, DiagonalNullSpace) {
    Matrix cov = Matrix::Zero(2, 2);
    cov(0, 0) = 1.0;
    Matrix g(2, 1);
    g << 3, 4;
    const Matrix p = nscl_project_gradient(g, cov, 10.0);
    EXPECT_NEAR(p(0, 0), 0.0, 1e-12);
    EXPECT_NEAR(p(1, 0), 4.0, 1e-12);
}

TEST(NsclProjection, ZeroCovarianceLeavesGradient) {
    Rng rng(6);
    const Matrix g = testing::random_matrix(3, 2, rng);
    EXPECT_EQ(nscl_project_gradient(g, Matrix::Zero(3, 3), 10.0), g);
}

TEST(NsclProjection, RankDeficientResidualIsSmall) {
    Rng rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const auto width = static_cast<Eigen::Index>(4 + uniform_index(rng, 20));
        const auto rank = static_cast<Eigen::Index>(1 + uniform_index(rng, static_cast<std::uint64_t>(width - 1)));
        const Matrix x = testing::random_matrix(40, rank, rng) * testing::random_matrix(rank, width, rng);
        CovarianceCache cache(width);
        cache.add_rows(x);
        const Matrix g = testing::random_matrix(width, 2, rng);
        const Matrix projected = nscl_project_gradient(g, cache.covariance(), 10.0);
        EXPECT_LT((x * projected).norm() / (x.norm() * g.norm()), 1e-6);
    }
}

TEST(AdabopProjection, ClosedFormsAndInverseIdentity) {
    Rng rng(8);
    const Matrix x = testing::random_matrix(6, 6, rng);
    EXPECT_LT((adabop_projection(x, 0.0) - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((adabop_projection(Matrix::Zero(6, 6), 3.0) - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-15);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix xs = testing::random_matrix(6, 6, rng);
        const double lambda = 0.01 + 5.0 * uniform_unit(rng);
        const Matrix p = adabop_projection(xs, lambda);
        const Matrix a = Matrix::Identity(6, 6) + lambda * xs * xs.transpose();
        EXPECT_LT((p * a - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_EQ(p, p.transpose());
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(p);
        EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
        EXPECT_LE(eig.eigenvalues().maxCoeff(), 1.0 + 1e-12);
    }
}

TEST(TrgpTrustRegion, ContainmentAndOrthogonality) {
    Matrix s0 = Matrix::Zero(3, 1);
    s0(0, 0) = 1.0;
    Matrix s1 = Matrix::Zero(3, 1);
    s1(1, 0) = 1.0;
    Matrix g = Matrix::Zero(3, 1);
    g(0, 0) = 2.0;
    EXPECT_EQ(trgp_trust_region(g, {s0, s1}, 1.0), std::vector<std::size_t>{0});
    EXPECT_TRUE(trgp_trust_region(Matrix::Zero(3, 1), {s0, s1}, 0.5).empty());
}

TEST(TrgpTrustRegion, MatchesDirectRatio) {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Matrix> bases;
        for (int j = 0; j < 4; ++j) bases.push_back(orthonormal_columns(7, 1 + static_cast<Eigen::Index>(uniform_index(rng, 3)), rng));
        const Matrix g = testing::random_matrix(7, 2, rng);
        const double eps = uniform_unit(rng);
        std::vector<std::size_t> expected;
        for (std::size_t j = 0; j < bases.size(); ++j) {
            const double ratio = (bases[j] * bases[j].transpose() * g).norm() / g.norm();
            if (ratio >= eps) expected.push_back(j);
        }
        EXPECT_EQ(trgp_trust_region(g, bases, eps), expected);
    }
}

TEST(TrgpEffectiveWeight, IdentityScalesAreExact) {
    Rng rng(10);
    const Matrix w = testing::random_matrix(4, 6, rng);
    const std::vector<Matrix> bases{orthonormal_columns(6, 2, rng), orthonormal_columns(6, 3, rng)};
    const std::vector<Matrix> scales{Matrix::Identity(2, 2), Matrix::Identity(3, 3)};
    EXPECT_EQ(trgp_effective_weight(w, {0, 1}, bases, scales), w);
    EXPECT_EQ(trgp_effective_weight(w, {}, bases, scales), w);
}

TEST(TrgpEffectiveWeight, OneDimensionalHandCase) {
    Matrix w(1, 2);
    w << 3, 4;
    Matrix s = Matrix::Zero(2, 1);
    s(0, 0) = 1.0;
    const Matrix q = Matrix::Constant(1, 1, 2.0);
    const Matrix out = trgp_effective_weight(w, {0}, {s}, {q});
    const Matrix brute = w + w * s * q * s.transpose() - w * s * s.transpose();
    EXPECT_DOUBLE_EQ(out(0, 0), 6.0);
    EXPECT_DOUBLE_EQ(out(0, 1), 4.0);
    EXPECT_LT((out - brute).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(TrgpEffectiveWeight, ScaleShapeMismatchThrows) {
    Matrix s = Matrix::Zero(2, 1);
    s(0, 0) = 1.0;
    EXPECT_THROW((void)trgp_effective_weight(Matrix::Ones(1, 2), {0}, {s}, {Matrix::Identity(2, 2)}), ShapeError);
}

}  // namespace
}  // namespace clbench
