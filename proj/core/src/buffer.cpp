#include "clbench/buffer.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

namespace clbench {

std::vector<BufferEntry> make_entries(const SamplePool& pool, const TaskSpec& task, std::span<const SampleRef> refs) {
    std::vector<BufferEntry> entries;
    entries.reserve(refs.size());
    for (const auto ref : refs) {
        const auto pixels = pool.pixels(ref);
        entries.push_back({std::vector<std::uint8_t>(pixels.begin(), pixels.end()),
                           task.label_of(pool.global_class(ref)), task.index, ref});
    }
    return entries;
}

ExemplarBuffer::ExemplarBuffer(std::int64_t capacity, BufferStrategy strategy, std::uint64_t seed)
    : capacity_(capacity), strategy_(strategy), rng_(derive_seed(seed, "buffer")) {
    if (capacity <= 0) {
        throw ConfigError("buffer.capacity", "replay needs a positive buffer capacity, got " + std::to_string(capacity));
    }
}

std::map<std::int64_t, std::int64_t> ExemplarBuffer::per_class_counts() const {
    std::map<std::int64_t, std::int64_t> counts;
    for (const auto& entry : entries_) {
        ++counts[entry.label];
    }
    return counts;
}

std::vector<const BufferEntry*> ExemplarBuffer::class_entries(std::int64_t label) const {
    std::vector<const BufferEntry*> out;
    for (const auto& entry : entries_) {
        if (entry.label == label) {
            out.push_back(&entry);
        }
    }
    return out;
}

void ExemplarBuffer::update(std::span<const BufferEntry> samples, const FeatureFn& feature_fn) {
    if (strategy_ == BufferStrategy::reservoir) {
        reservoir_update(samples);
    } else {
        balanced_update(samples, feature_fn);
    }
}

void ExemplarBuffer::reservoir_update(std::span<const BufferEntry> samples) {
    for (const auto& sample : samples) {
        ++seen_count_;
        if (static_cast<std::int64_t>(entries_.size()) < capacity_) {
            entries_.push_back(sample);
            continue;
        }
        const auto slot = uniform_index(rng_, static_cast<std::uint64_t>(seen_count_));
        if (slot < static_cast<std::uint64_t>(capacity_)) {
            entries_[slot] = sample;
        }
    }
}

void ExemplarBuffer::balanced_update(std::span<const BufferEntry> samples, const FeatureFn& feature_fn) {
    if (strategy_ == BufferStrategy::herding && !feature_fn) {
        throw Error("herding selection needs a feature function");
    }
    seen_count_ += static_cast<std::int64_t>(samples.size());

    std::map<std::int64_t, std::vector<std::size_t>> incoming;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        incoming[samples[i].label].push_back(i);
    }
    std::set<std::int64_t> classes;
    for (const auto& entry : entries_) {
        classes.insert(entry.label);
    }
    for (const auto& [label, indices] : incoming) {
        classes.insert(label);
    }
    if (classes.empty()) {
        return;
    }
    const std::int64_t quota = capacity_ / static_cast<std::int64_t>(classes.size());

    // Shrink: keep each stored class's selection-order prefix; drop stored
    // copies of incoming classes, they are re-selected below.
    std::map<std::int64_t, std::int64_t> kept;
    std::vector<BufferEntry> retained;
    retained.reserve(entries_.size());
    for (auto& entry : entries_) {
        if (incoming.contains(entry.label)) {
            continue;
        }
        if (kept[entry.label]++ < quota) {
            retained.push_back(std::move(entry));
        }
    }
    entries_ = std::move(retained);

    for (const auto& [label, indices] : incoming) {
        const auto take = std::min<std::int64_t>(quota, static_cast<std::int64_t>(indices.size()));
        if (take <= 0) {
            continue;
        }
        std::vector<std::size_t> picks;
        if (strategy_ == BufferStrategy::herding) {
            Matrix inputs(static_cast<Eigen::Index>(indices.size()),
                          static_cast<Eigen::Index>(samples[indices.front()].pixels.size()));
            for (std::size_t r = 0; r < indices.size(); ++r) {
                inputs.row(static_cast<Eigen::Index>(r)) = pixels_to_input(samples[indices[r]].pixels);
            }
            picks = herding_select(feature_fn(inputs), take);
        } else {
            picks.resize(indices.size());
            std::iota(picks.begin(), picks.end(), std::size_t{0});
            shuffle_in_place(picks, rng_);
            picks.resize(static_cast<std::size_t>(take));
        }
        for (const auto pick : picks) {
            entries_.push_back(samples[indices[pick]]);
        }
    }
}

Matrix ExemplarBuffer::inputs(std::span<const std::size_t> indices) const {
    if (indices.empty()) {
        return {};
    }
    Matrix out(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(entries_.at(indices[0]).pixels.size()));
    for (std::size_t r = 0; r < indices.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = pixels_to_input(entries_.at(indices[r]).pixels);
    }
    return out;
}

nlohmann::json ExemplarBuffer::manifest() const {
    nlohmann::json counts = nlohmann::json::object();
    std::int64_t values = 0;
    for (const auto& [label, count] : per_class_counts()) {
        counts[std::to_string(label)] = count;
    }
    for (const auto& entry : entries_) {
        values += static_cast<std::int64_t>(entry.pixels.size());
    }
    return {{"strategy", to_string(strategy_)},
            {"capacity", capacity_},
            {"size", entries_.size()},
            {"per_class_counts", counts},
            {"image_values", values}};
}

void update_buffer(ExemplarBuffer& buffer, std::span<const BufferEntry> task_data, const FeatureFn& feature_fn) {
    buffer.update(task_data, feature_fn);
}

std::vector<std::size_t> herding_select(const Matrix& features, std::int64_t m) {
    const auto n = features.rows();
    if (n == 0) {
        throw Error("herding_select: empty feature set");
    }
    if (m < 0 || m > n) {
        throw Error("herding_select: m must be in [0, " + std::to_string(n) + "], got " + std::to_string(m));
    }
    if (!features.allFinite()) {
        throw Error("herding_select: non-finite features");
    }
    const RowVector mean = features.colwise().mean();
    RowVector running = RowVector::Zero(features.cols());
    std::vector<bool> chosen(static_cast<std::size_t>(n), false);
    std::vector<std::size_t> picks;
    picks.reserve(static_cast<std::size_t>(m));
    for (std::int64_t step = 1; step <= m; ++step) {
        double best = std::numeric_limits<double>::infinity();
        Eigen::Index best_index = -1;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (chosen[static_cast<std::size_t>(i)]) {
                continue;
            }
            const double distance = (mean - (running + features.row(i)) / static_cast<double>(step)).norm();
            // Candidates within rounding of the current best keep the lower index.
            if (distance < best * (1.0 - 1e-9)) {
                best = distance;
                best_index = i;
            }
        }
        chosen[static_cast<std::size_t>(best_index)] = true;
        running += features.row(best_index);
        picks.push_back(static_cast<std::size_t>(best_index));
    }
    return picks;
}

ReplayBatch sample_batch(const ExemplarBuffer& buffer, std::int64_t k, Rng& rng) {
    ReplayBatch batch;
    const auto n = buffer.size();
    if (n == 0 || k <= 0) {
        return batch;
    }
    if (static_cast<std::size_t>(k) > n) {
        for (std::int64_t i = 0; i < k; ++i) {
            batch.indices.push_back(static_cast<std::size_t>(uniform_index(rng, n)));
        }
    } else {
        // Partial Fisher-Yates over an index table.
        std::vector<std::size_t> table(n);
        std::iota(table.begin(), table.end(), std::size_t{0});
        for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
            const auto j = i + static_cast<std::size_t>(uniform_index(rng, n - i));
            std::swap(table[i], table[j]);
            batch.indices.push_back(table[i]);
        }
    }
    batch.inputs = buffer.inputs(batch.indices);
    for (const auto index : batch.indices) {
        batch.labels.push_back(buffer.entries()[index].label);
    }
    return batch;
}

ReplayBatch sample_batch(const ExemplarBuffer& buffer, std::int64_t k, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "replay"));
    return sample_batch(buffer, k, rng);
}

}  // namespace clbench
