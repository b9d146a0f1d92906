#include <gtest/gtest.h>

#include <cmath>

#include "clbench/losses.hpp"
#include "test_support.hpp"

namespace clbench {
namespace {

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
    Rng rng(1);
    const Matrix logits = testing::random_matrix(4, 5, rng);
    const std::vector<std::int64_t> labels{0, 3, 4, 1};
    const auto lg = cross_entropy(logits, labels);
    const auto f = [&](const Matrix& z) { return cross_entropy(z, labels).loss; };
    EXPECT_LT(testing::relative_error(lg.grad, testing::numeric_gradient(f, logits)), 1e-6);
}

TEST(CrossEntropy, UniformLogitsGiveLogC) {
    const Matrix logits = Matrix::Zero(3, 4);
    const std::vector<std::int64_t> labels{0, 1, 2};
    EXPECT_NEAR(cross_entropy(logits, labels).loss, std::log(4.0), 1e-12);
}

TEST(CrossEntropy, MaskedColumnsGetNoGradient) {
    Rng rng(2);
    const Matrix logits = testing::random_matrix(2, 4, rng);
    const std::vector<std::int64_t> labels{2, 3};
    const std::vector<std::uint8_t> allowed{0, 0, 1, 1};
    const auto lg = cross_entropy(logits, labels, allowed);
    EXPECT_EQ(lg.grad.leftCols(2).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_NEAR(lg.loss, cross_entropy(Matrix(logits.rightCols(2)), std::vector<std::int64_t>{0, 1}).loss, 1e-12);
}

TEST(CrossEntropy, LabelOutsideMaskThrows) {
    const Matrix logits = Matrix::Zero(1, 3);
    const std::vector<std::int64_t> labels{0};
    const std::vector<std::uint8_t> allowed{0, 1, 1};
    EXPECT_ANY_THROW((void)cross_entropy(logits, labels, allowed));
}

TEST(DistillLoss, ZeroForIdenticalLogits) {
    Rng rng(3);
    const Matrix z = testing::random_matrix(3, 4, rng);
    EXPECT_NEAR(distill_loss(z, z, 2.0).loss, 0.0, 1e-14);
    EXPECT_NEAR(distill_loss(Matrix::Zero(1, 2), Matrix::Zero(1, 2), 0.7).loss, 0.0, 1e-14);
}

TEST(DistillLoss, NonNegativeOnRandomPairs) {
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        const Matrix a = testing::random_matrix(2, 3, rng, 3.0);
        const Matrix b = testing::random_matrix(2, 3, rng, 3.0);
        EXPECT_GT(distill_loss(a, b, 2.0).loss, 0.0);
    }
}

TEST(DistillLoss, GradientMatchesFiniteDifferences) {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix old_logits = testing::random_matrix(3, 4, rng);
        const Matrix new_logits = testing::random_matrix(3, 4, rng);
        const double tau = 0.5 + uniform_unit(rng) * 3.0;
        const auto lg = distill_loss(new_logits, old_logits, tau);
        const auto f = [&](const Matrix& z) { return distill_loss(z, old_logits, tau).loss; };
        EXPECT_LT(testing::relative_error(lg.grad, testing::numeric_gradient(f, new_logits)), 1e-4);
    }
}

TEST(DistillLoss, NonPositiveTemperatureThrows) {
    EXPECT_ANY_THROW((void)distill_loss(Matrix::Zero(1, 2), Matrix::Zero(1, 2), 0.0));
}

TEST(ReplayLoss, DegenerateCases) {
    EXPECT_EQ(replay_loss(1.25, 7.0, 0.0), 1.25);
    EXPECT_EQ(replay_loss(1.25, 0.0, 1.0), 1.25);
    EXPECT_EQ(replay_loss(0.5, 0.5, 1.0), 1.0);
    EXPECT_ANY_THROW((void)replay_loss(1.0, 1.0, -0.1));
}

TEST(ReplayLoss, MonotoneInBeta) {
    double previous = replay_loss(0.3, 0.8, 0.0);
    for (double beta = 0.1; beta <= 3.0; beta += 0.1) {
        const double value = replay_loss(0.3, 0.8, beta);
        EXPECT_GE(value, previous);
        previous = value;
    }
}

TEST(EraceMaskedLoss, SingleTaskEqualsCrossEntropy) {
    Rng rng(6);
    const Matrix logits = testing::random_matrix(4, 3, rng);
    const std::vector<std::int64_t> labels{0, 2, 1, 1};
    EXPECT_NEAR(erace_masked_loss(logits, labels, 0, 3, SampleOrigin::stream).loss, cross_entropy(logits, labels).loss,
                1e-12);
}

TEST(EraceMaskedLoss, OldClassLogitIsMaskedForStreamRows) {
    Matrix logits(1, 4);
    logits << 1e6, 0.0, 0.3, -0.2;
    const std::vector<std::int64_t> labels{2};
    const double base = erace_masked_loss(logits, labels, 2, 4, SampleOrigin::stream).loss;
    logits(0, 0) = -5.0;
    EXPECT_EQ(erace_masked_loss(logits, labels, 2, 4, SampleOrigin::stream).loss, base);
    EXPECT_TRUE(std::isfinite(base));
}

TEST(EraceMaskedLoss, BufferRowsSeeEveryClass) {
    Rng rng(7);
    const Matrix logits = testing::random_matrix(2, 4, rng);
    const std::vector<std::int64_t> labels{0, 3};
    EXPECT_NEAR(erace_masked_loss(logits, labels, 2, 4, SampleOrigin::buffer).loss, cross_entropy(logits, labels).loss,
                1e-12);
}

TEST(ArgmaxRows, LowestColumnOnTies) {
    Matrix s(2, 3);
    s << 1, 1, 0, 0, 2, 2;
    EXPECT_EQ(argmax_rows(s), (std::vector<std::int64_t>{0, 1}));
}

}  // namespace
}  // namespace clbench
