#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clbench/common.hpp"
#include "clbench/config.hpp"
#include "clbench/images.hpp"

namespace clbench {

/// Index of a sample inside a SamplePool.
using SampleRef = std::uint32_t;

enum class Split { train, test };

/// Owns the pixel data of every sample used by an experiment. Samples are
/// referenced by index so task specs and buffers stay cheap to copy.
class SamplePool {
public:
    explicit SamplePool(ImageShape shape = {}) : shape_(shape) {}

    SampleRef add(std::span<const std::uint8_t> pixels, std::int64_t global_class, Split split);

    [[nodiscard]] const ImageShape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t size() const noexcept { return classes_.size(); }
    [[nodiscard]] std::span<const std::uint8_t> pixels(SampleRef ref) const;
    [[nodiscard]] std::int64_t global_class(SampleRef ref) const { return classes_.at(ref); }
    [[nodiscard]] Split split(SampleRef ref) const { return splits_.at(ref); }

    /// Network inputs, one row per sample, scaled to [0, 1].
    [[nodiscard]] Matrix inputs(std::span<const SampleRef> refs) const;

private:
    ImageShape shape_;
    std::vector<std::uint8_t> pixels_;
    std::vector<std::int64_t> classes_;
    std::vector<Split> splits_;
};

/// Scales raw 8-bit pixels into a network input row.
[[nodiscard]] RowVector pixels_to_input(std::span<const std::uint8_t> pixels);

struct CatalogEntry {
    std::int64_t global_class_id = 0;
    std::string source_dataset;
    std::string class_name;
    std::vector<SampleRef> train_refs;
    std::vector<SampleRef> test_refs;
};

struct ClassCatalog {
    std::vector<CatalogEntry> entries;
    /// Permutation of the catalog's global ids; identity unless reordered.
    std::vector<std::int64_t> class_order;

    [[nodiscard]] std::size_t class_count() const noexcept { return entries.size(); }
    [[nodiscard]] std::string source_dataset() const { return entries.empty() ? "" : entries.front().source_dataset; }
};

/// Moves every dataset into `pool` and returns one catalog per dataset with
/// global ids contiguous across catalogs in the given order. Shapes must
/// already agree (see harmonize_shapes).
[[nodiscard]] std::vector<ClassCatalog> build_catalogs(const std::vector<Dataset>& datasets, SamplePool& pool);

struct TaskSpec {
    std::int64_t index = 0;
    /// Global class ids of the task's label space, in learning order.
    std::vector<std::int64_t> class_ids;
    /// Learner-facing label of class_ids[0]; the task owns [label_begin, label_begin + class_ids.size()).
    std::int64_t label_begin = 0;
    std::vector<SampleRef> train_refs;
    std::vector<SampleRef> test_refs;

    [[nodiscard]] std::int64_t label_end() const noexcept {
        return label_begin + static_cast<std::int64_t>(class_ids.size());
    }
    /// Learner label of a global class id of this task; throws if absent.
    [[nodiscard]] std::int64_t label_of(std::int64_t global_class) const;
};

struct StreamMode {
    StreamKind kind = StreamKind::offline;
    std::int64_t epochs = 1;

    [[nodiscard]] static StreamMode online() { return {StreamKind::online, 1}; }
    [[nodiscard]] static StreamMode offline(std::int64_t epochs) { return {StreamKind::offline, epochs}; }
};

struct TaskSequence {
    std::vector<TaskSpec> tasks;
    Scenario scenario = Scenario::task_agnostic;
    StreamMode stream_mode;
    std::uint64_t seed = 0;

    [[nodiscard]] std::int64_t total_classes() const noexcept {
        return tasks.empty() ? 0 : tasks.back().label_end();
    }
    /// Audit form: task index -> sorted global class ids, plus run metadata.
    [[nodiscard]] nlohmann::json to_json() const;
    /// FNV-1a digest of the serialized form.
    [[nodiscard]] std::string digest() const;
};

[[nodiscard]] TaskSequence partition_traditional(const ClassCatalog& catalog, const ExperimentConfig& cfg);
[[nodiscard]] TaskSequence compose_cross_domain(const std::vector<ClassCatalog>& catalogs);
[[nodiscard]] TaskSequence compose_category_randomized(const std::vector<ClassCatalog>& catalogs,
                                                       const ExperimentConfig& cfg, std::uint64_t seed);

/// Dispatches on cfg.semantic_setting and applies scenario/stream/seed from cfg.
[[nodiscard]] TaskSequence compose_sequence(const std::vector<ClassCatalog>& catalogs, const ExperimentConfig& cfg);

struct StreamBatch {
    Matrix inputs;
    /// Learner labels (see TaskSpec::label_begin).
    std::vector<std::int64_t> labels;
    std::vector<SampleRef> refs;
    std::int64_t task_index = 0;
    std::int64_t batch_index = 0;
    std::int64_t epoch = 0;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
};

/// Single-consumer iteration over one task's training data. Online mode is one
/// shuffled pass; offline(E) is E passes reshuffled every epoch. The last batch
/// of a pass may be short.
class TaskStream {
public:
    TaskStream(const SamplePool& pool, const TaskSpec& task, StreamMode mode, std::int64_t batch_size,
               std::uint64_t seed);

    [[nodiscard]] std::optional<StreamBatch> next();
    [[nodiscard]] std::int64_t batches_per_epoch() const noexcept { return batches_per_epoch_; }
    [[nodiscard]] std::int64_t total_batches() const noexcept { return batches_per_epoch_ * mode_.epochs; }

private:
    void reshuffle();

    const SamplePool* pool_;
    const TaskSpec* task_;
    StreamMode mode_;
    std::int64_t batch_size_;
    Rng rng_;
    std::vector<SampleRef> order_;
    std::int64_t batches_per_epoch_ = 0;
    std::int64_t epoch_ = 0;
    std::size_t cursor_ = 0;
    std::int64_t emitted_ = 0;
};

/// Collects every batch of a TaskStream.
[[nodiscard]] std::vector<StreamBatch> iterate_stream(const SamplePool& pool, const TaskSpec& task, StreamMode mode,
                                                      std::int64_t batch_size, std::uint64_t seed);

/// Inputs and learner labels for `refs`, all of which belong to `task`.
[[nodiscard]] StreamBatch materialize(const SamplePool& pool, const TaskSpec& task, std::span<const SampleRef> refs);

}  // namespace clbench
