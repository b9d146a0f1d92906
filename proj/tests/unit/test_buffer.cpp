#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "clbench/buffer.hpp"
#include "test_support.hpp"

namespace clbench {
namespace {

std::vector<BufferEntry> entries_for(std::int64_t label, std::int64_t count, SampleRef first_ref, std::int64_t values = 4) {
    std::vector<BufferEntry> out;
    for (std::int64_t i = 0; i < count; ++i) {
        BufferEntry e;
        e.pixels.assign(static_cast<std::size_t>(values), static_cast<std::uint8_t>((first_ref + i) % 251));
        e.label = label;
        e.ref = first_ref + static_cast<SampleRef>(i);
        out.push_back(std::move(e));
    }
    return out;
}

FeatureFn pixel_features() {
    return [](const Matrix& x) { return x; };
}

/// Greedy mean matching written with plain loops, independent of the library.
std::vector<std::size_t> herding_oracle(const std::vector<std::vector<double>>& f, std::size_t m) {
    const std::size_t n = f.size();
    const std::size_t d = f.front().size();
    std::vector<double> mu(d, 0.0);
    for (const auto& row : f) {
        for (std::size_t k = 0; k < d; ++k) mu[k] += row[k] / static_cast<double>(n);
    }
    std::vector<double> sum(d, 0.0);
    std::vector<bool> used(n, false);
    std::vector<std::size_t> picks;
    for (std::size_t j = 1; j <= m; ++j) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            double dist2 = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = mu[k] - (sum[k] + f[i][k]) / static_cast<double>(j);
                dist2 += diff * diff;
            }
            if (dist2 < best * (1.0 - 1e-9)) {
                best = dist2;
                arg = i;
            }
        }
        used[arg] = true;
        picks.push_back(arg);
        for (std::size_t k = 0; k < d; ++k) sum[k] += f[arg][k];
    }
    return picks;
}

TEST(ExemplarBuffer, RejectsNonPositiveCapacity) {
    EXPECT_THROW(ExemplarBuffer(0, BufferStrategy::reservoir, 1), ConfigError);
}

TEST(ExemplarBuffer, BalancedQuotaTwoHundredOfTwoThousand) {
    ExemplarBuffer buffer(2000, BufferStrategy::balanced_random, 3);
    std::vector<BufferEntry> all;
    for (std::int64_t c = 0; c < 10; ++c) {
        auto e = entries_for(c, 250, c * 1000);
        all.insert(all.end(), e.begin(), e.end());
    }
    buffer.update(all);
    EXPECT_EQ(buffer.size(), 2000U);
    for (const auto& [label, count] : buffer.per_class_counts()) {
        EXPECT_EQ(count, 200) << "class " << label;
    }
}

TEST(ExemplarBuffer, UnderCapacityStoresEverything) {
    for (const auto strategy : {BufferStrategy::reservoir, BufferStrategy::balanced_random, BufferStrategy::herding}) {
        ExemplarBuffer buffer(10, strategy, 1);
        buffer.update(entries_for(0, 5, 0), pixel_features());
        EXPECT_EQ(buffer.size(), 5U) << to_string(strategy);
    }
}

TEST(ExemplarBuffer, CapacityHoldsUnderRandomOperationSequences) {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const auto capacity = static_cast<std::int64_t>(1 + uniform_index(rng, 40));
        const BufferStrategy strategy = static_cast<BufferStrategy>(uniform_index(rng, 3));
        ExemplarBuffer buffer(capacity, strategy, trial);
        std::int64_t next_label = 0;
        SampleRef next_ref = 0;
        for (int op = 0; op < 6; ++op) {
            std::vector<BufferEntry> batch;
            const auto classes = 1 + uniform_index(rng, 3);
            for (std::uint64_t c = 0; c < classes; ++c) {
                const auto n = static_cast<std::int64_t>(1 + uniform_index(rng, 30));
                auto e = entries_for(next_label++, n, next_ref);
                next_ref += n;
                batch.insert(batch.end(), e.begin(), e.end());
            }
            buffer.update(batch, pixel_features());
            ASSERT_LE(static_cast<std::int64_t>(buffer.size()), capacity);
            if (strategy != BufferStrategy::reservoir) {
                std::int64_t lo = std::numeric_limits<std::int64_t>::max();
                std::int64_t hi = 0;
                for (const auto& [label, count] : buffer.per_class_counts()) {
                    lo = std::min(lo, count);
                    hi = std::max(hi, count);
                }
                if (static_cast<std::int64_t>(buffer.size()) == capacity) {
                    EXPECT_LE(hi - lo, 1);
                }
            }
        }
    }
}

TEST(ExemplarBuffer, ReservoirRetentionIsUniform) {
    // 1000 streams of 100 samples into a 10-slot reservoir; every sample should
    // survive with probability 0.1. chi-square over 100 cells, df 99.
    constexpr int kTrials = 1000;
    constexpr std::int64_t kStream = 100;
    constexpr std::int64_t kCapacity = 10;
    std::vector<double> kept(kStream, 0.0);
    const auto samples = entries_for(0, kStream, 0);
    for (int t = 0; t < kTrials; ++t) {
        ExemplarBuffer buffer(kCapacity, BufferStrategy::reservoir, derive_seed(t, "reservoir-test"));
        for (const auto& s : samples) {
            buffer.update(std::span<const BufferEntry>(&s, 1));
        }
        for (const auto& e : buffer.entries()) {
            kept[static_cast<std::size_t>(e.ref)] += 1.0;
        }
    }
    const double expected = kTrials * static_cast<double>(kCapacity) / kStream;
    double chi2 = 0.0;
    for (const double k : kept) {
        chi2 += (k - expected) * (k - expected) / expected;
    }
    EXPECT_LT(chi2, 134.64);  // upper 1% point of chi-square with 99 degrees of freedom
}

TEST(ExemplarBuffer, BalancedEvictionKeepsHerdingPrefix) {
    ExemplarBuffer buffer(12, BufferStrategy::herding, 1);
    Rng rng(5);
    auto first = entries_for(0, 20, 0);
    for (auto& e : first) {
        for (auto& p : e.pixels) p = static_cast<std::uint8_t>(uniform_index(rng, 256));
    }
    buffer.update(first, pixel_features());
    std::vector<SampleRef> before;
    for (const auto* e : buffer.class_entries(0)) before.push_back(e->ref);
    ASSERT_EQ(before.size(), 12U);
    buffer.update(entries_for(1, 20, 100), pixel_features());
    std::vector<SampleRef> after;
    for (const auto* e : buffer.class_entries(0)) after.push_back(e->ref);
    ASSERT_EQ(after.size(), 6U);
    EXPECT_TRUE(std::equal(after.begin(), after.end(), before.begin()));
}

TEST(HerdingSelect, FirstPickIsNearestToMean) {
    Matrix f(3, 2);
    f << 0, 0, 2, 0, 1, 0;
    EXPECT_EQ(herding_select(f, 1), std::vector<std::size_t>{2});
}

TEST(HerdingSelect, FullSelectionIsAPermutation) {
    Rng rng(3);
    const Matrix f = testing::random_matrix(9, 4, rng);
    auto picks = herding_select(f, 9);
    std::sort(picks.begin(), picks.end());
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(picks[i], i);
}

TEST(HerdingSelect, MatchesGreedyOracleOnSmallInstances) {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = static_cast<std::size_t>(1 + uniform_index(rng, 6));
        const auto m = static_cast<std::size_t>(uniform_index(rng, std::min<std::size_t>(n, 3) + 1));
        const auto d = static_cast<Eigen::Index>(1 + uniform_index(rng, 4));
        const Matrix f = testing::random_matrix(static_cast<Eigen::Index>(n), d, rng);
        std::vector<std::vector<double>> rows(n, std::vector<double>(static_cast<std::size_t>(d)));
        for (std::size_t i = 0; i < n; ++i)
            for (Eigen::Index k = 0; k < d; ++k) rows[i][static_cast<std::size_t>(k)] = f(static_cast<Eigen::Index>(i), k);
        EXPECT_EQ(herding_select(f, static_cast<std::int64_t>(m)), herding_oracle(rows, m)) << "trial " << trial;
    }
}

TEST(HerdingSelect, DeterministicAndLowestIndexOnTies) {
    Matrix f(4, 1);
    f << 1, -1, 1, -1;
    const auto a = herding_select(f, 2);
    EXPECT_EQ(a, herding_select(f, 2));
    EXPECT_EQ(a.front(), 0U);
}

TEST(SampleBatch, DistinctWithoutReplacement) {
    ExemplarBuffer buffer(100, BufferStrategy::reservoir, 1);
    buffer.update(entries_for(0, 100, 0));
    const auto batch = sample_batch(buffer, 10, 9);
    const std::set<std::size_t> distinct(batch.indices.begin(), batch.indices.end());
    EXPECT_EQ(distinct.size(), 10U);
    EXPECT_EQ(batch.inputs.rows(), 10);
}

TEST(SampleBatch, EmptyBufferGivesEmptyBatch) {
    ExemplarBuffer buffer(5, BufferStrategy::reservoir, 1);
    EXPECT_TRUE(sample_batch(buffer, 4, 1).empty());
}

TEST(SampleBatch, FrequenciesAreUniform) {
    ExemplarBuffer buffer(10, BufferStrategy::reservoir, 1);
    buffer.update(entries_for(0, 10, 0));
    Rng rng(8);
    std::vector<double> counts(10, 0.0);
    constexpr int kDraws = 10000;
    for (int i = 0; i < kDraws; ++i) {
        counts[sample_batch(buffer, 1, rng).indices.front()] += 1.0;
    }
    const double sigma = std::sqrt(kDraws * 0.1 * 0.9);
    for (const double c : counts) {
        EXPECT_NEAR(c, kDraws * 0.1, 3.0 * sigma);
    }
}

TEST(ExemplarBuffer, ManifestCarriesImageValues) {
    ExemplarBuffer buffer(8, BufferStrategy::reservoir, 1);
    buffer.update(entries_for(2, 3, 0, 12));
    const auto m = buffer.manifest();
    EXPECT_EQ(m.at("size"), 3);
    EXPECT_EQ(m.at("capacity"), 8);
    EXPECT_EQ(m.at("image_values"), 36);
}

}  // namespace
}  // namespace clbench
