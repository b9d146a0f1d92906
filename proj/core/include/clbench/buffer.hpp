#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "clbench/common.hpp"
#include "clbench/config.hpp"
#include "clbench/datastream.hpp"

namespace clbench {

/// A stored exemplar. Pixels are copied so the buffer owns what it is charged for.
struct BufferEntry {
    std::vector<std::uint8_t> pixels;
    std::int64_t label = 0;
    std::int64_t task_index = 0;
    SampleRef ref = 0;
};

/// Maps input rows (pixels scaled to [0, 1]) to feature rows.
using FeatureFn = std::function<Matrix(const Matrix& inputs)>;

/// Builds buffer candidates for the given refs of `task`.
[[nodiscard]] std::vector<BufferEntry> make_entries(const SamplePool& pool, const TaskSpec& task,
                                                    std::span<const SampleRef> refs);

struct ReplayBatch {
    Matrix inputs;
    std::vector<std::int64_t> labels;
    std::vector<std::size_t> indices;

    [[nodiscard]] bool empty() const noexcept { return labels.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
};

class ExemplarBuffer {
public:
    /// Throws ConfigError when capacity is not positive.
    ExemplarBuffer(std::int64_t capacity, BufferStrategy strategy, std::uint64_t seed);

    [[nodiscard]] std::int64_t capacity() const noexcept { return capacity_; }
    [[nodiscard]] BufferStrategy strategy() const noexcept { return strategy_; }
    [[nodiscard]] std::int64_t seen_count() const noexcept { return seen_count_; }
    [[nodiscard]] const std::vector<BufferEntry>& entries() const noexcept { return entries_; }
    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }

    [[nodiscard]] std::map<std::int64_t, std::int64_t> per_class_counts() const;
    /// Entries of one class, in stored (selection) order.
    [[nodiscard]] std::vector<const BufferEntry*> class_entries(std::int64_t label) const;

    /// Reservoir: per-sample admission. Balanced strategies: shrink old classes to
    /// the new quota, then select exemplars for the classes in `samples`.
    void update(std::span<const BufferEntry> samples, const FeatureFn& feature_fn = {});

    /// Network inputs for stored entries.
    [[nodiscard]] Matrix inputs(std::span<const std::size_t> indices) const;

    /// {strategy, capacity, size, per_class_counts, image_values}.
    [[nodiscard]] nlohmann::json manifest() const;

private:
    void reservoir_update(std::span<const BufferEntry> samples);
    void balanced_update(std::span<const BufferEntry> samples, const FeatureFn& feature_fn);

    std::int64_t capacity_;
    BufferStrategy strategy_;
    Rng rng_;
    std::int64_t seen_count_ = 0;
    std::vector<BufferEntry> entries_;
};

void update_buffer(ExemplarBuffer& buffer, std::span<const BufferEntry> task_data, const FeatureFn& feature_fn = {});

/// Greedy mean matching: step j picks the unchosen i minimising
/// ||mu - (sum_chosen + f_i) / j||, lowest index on ties. Returns m indices in pick order.
[[nodiscard]] std::vector<std::size_t> herding_select(const Matrix& features, std::int64_t m);

/// k entries uniformly without replacement, or with replacement when k exceeds
/// the buffer size. Empty buffer gives an empty batch.
[[nodiscard]] ReplayBatch sample_batch(const ExemplarBuffer& buffer, std::int64_t k, std::uint64_t seed);
[[nodiscard]] ReplayBatch sample_batch(const ExemplarBuffer& buffer, std::int64_t k, Rng& rng);

}  // namespace clbench
