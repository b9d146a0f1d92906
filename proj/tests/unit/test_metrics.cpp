#include <gtest/gtest.h>

#include <algorithm>

#include "clbench/metrics.hpp"
#include "test_support.hpp"

namespace clbench {
namespace {

AccuracyMatrix random_matrix(std::int64_t tasks, Rng& rng) {
    std::vector<std::vector<double>> rows;
    for (std::int64_t t = 0; t < tasks; ++t) {
        std::vector<double> row;
        for (std::int64_t j = 0; j <= t; ++j) row.push_back(uniform_unit(rng));
        rows.push_back(row);
    }
    return AccuracyMatrix::from_rows(rows);
}

TEST(Metrics, LastAccuracyArithmetic) {
    EXPECT_DOUBLE_EQ(last_accuracy(AccuracyMatrix::from_rows({{0.9}, {0.8, 0.7}})), 0.75);
    EXPECT_DOUBLE_EQ(last_accuracy(AccuracyMatrix::from_rows({{1.0}, {1.0, 1.0}})), 1.0);
    EXPECT_DOUBLE_EQ(last_accuracy(AccuracyMatrix::from_rows({{0.37}})), 0.37);
}

TEST(Metrics, AverageAccuracyArithmetic) {
    EXPECT_NEAR(average_accuracy(AccuracyMatrix::from_rows({{0.9}, {0.8, 0.7}})), 0.825, 1e-12);
    EXPECT_NEAR(average_accuracy(AccuracyMatrix::from_rows({{0.4}, {0.4, 0.4}, {0.4, 0.4, 0.4}})), 0.4, 1e-12);
    const auto single = AccuracyMatrix::from_rows({{0.61}});
    EXPECT_EQ(average_accuracy(single), last_accuracy(single));
}

TEST(Metrics, BackwardTransferAndForgetting) {
    const auto a = AccuracyMatrix::from_rows({{1.0}, {0.6, 1.0}});
    EXPECT_NEAR(backward_transfer(a), -0.4, 1e-12);
    EXPECT_NEAR(forgetting(a), 0.4, 1e-12);
    const auto flat = AccuracyMatrix::from_rows({{0.5}, {0.5, 0.7}, {0.5, 0.7, 0.2}});
    EXPECT_NEAR(backward_transfer(flat), 0.0, 1e-15);
    EXPECT_NEAR(forgetting(flat), 0.0, 1e-15);
    EXPECT_ANY_THROW((void)backward_transfer(AccuracyMatrix::from_rows({{0.5}})));
}

TEST(Metrics, ForgettingBoundsNegativeTransfer) {
    Rng rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto a = random_matrix(2 + static_cast<std::int64_t>(uniform_index(rng, 6)), rng);
        EXPECT_GE(forgetting(a), 0.0);
        EXPECT_GE(forgetting(a), std::max(0.0, -backward_transfer(a)) - 1e-12);
    }
}

TEST(Metrics, ScalingEntriesScalesAccuracies) {
    Rng rng(2);
    const auto a = random_matrix(4, rng);
    std::vector<std::vector<double>> scaled = a.rows();
    for (auto& row : scaled)
        for (auto& v : row) v *= 0.3;
    const auto b = AccuracyMatrix::from_rows(scaled);
    EXPECT_NEAR(last_accuracy(b), 0.3 * last_accuracy(a), 1e-12);
    EXPECT_NEAR(average_accuracy(b), 0.3 * average_accuracy(a), 1e-12);
}

TEST(AccuracyMatrix, RejectsInvalidEntries) {
    AccuracyMatrix a(2);
    EXPECT_ANY_THROW(a.set(0, 1, 0.5));
    EXPECT_ANY_THROW(a.set(1, 0, 1.5));
    EXPECT_ANY_THROW(a.set_row(1, {0.1}));
    EXPECT_ANY_THROW((void)AccuracyMatrix::from_rows({{0.1, 0.2}}));
}

TEST(AccuracyMatrix, CsvRoundTripIsExact) {
    Rng rng(3);
    const auto a = random_matrix(5, rng);
    EXPECT_EQ(AccuracyMatrix::from_csv(a.to_csv()), a);
    EXPECT_EQ(a.to_csv().find("nan"), std::string::npos);
}

TEST(MetricsSummary, SingleTaskHasNullTransfer) {
    const auto summary = summarize_metrics(AccuracyMatrix::from_rows({{0.8}}));
    const auto j = summary.to_json();
    EXPECT_TRUE(j.at("bwt").is_null());
    EXPECT_TRUE(j.at("forgetting").is_null());
    EXPECT_DOUBLE_EQ(j.at("last_acc").get<double>(), 0.8);
}

}  // namespace
}  // namespace clbench
