#include "clbench/datastream.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace clbench {

SampleRef SamplePool::add(std::span<const std::uint8_t> pixels, std::int64_t global_class, Split split) {
    if (static_cast<std::int64_t>(pixels.size()) != shape_.size()) {
        throw DataError("sample has " + std::to_string(pixels.size()) + " values, pool expects " +
                        std::to_string(shape_.size()));
    }
    pixels_.insert(pixels_.end(), pixels.begin(), pixels.end());
    classes_.push_back(global_class);
    splits_.push_back(split);
    return static_cast<SampleRef>(classes_.size() - 1);
}

std::span<const std::uint8_t> SamplePool::pixels(SampleRef ref) const {
    if (ref >= classes_.size()) {
        throw DataError("sample ref " + std::to_string(ref) + " out of range");
    }
    const auto stride = static_cast<std::size_t>(shape_.size());
    return {pixels_.data() + static_cast<std::size_t>(ref) * stride, stride};
}

RowVector pixels_to_input(std::span<const std::uint8_t> pixels) {
    RowVector row(static_cast<Eigen::Index>(pixels.size()));
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        row[static_cast<Eigen::Index>(i)] = static_cast<double>(pixels[i]) / 255.0;
    }
    return row;
}

Matrix SamplePool::inputs(std::span<const SampleRef> refs) const {
    Matrix out(static_cast<Eigen::Index>(refs.size()), static_cast<Eigen::Index>(shape_.size()));
    for (std::size_t r = 0; r < refs.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = pixels_to_input(pixels(refs[r]));
    }
    return out;
}

std::vector<ClassCatalog> build_catalogs(const std::vector<Dataset>& datasets, SamplePool& pool) {
    std::vector<ClassCatalog> catalogs;
    std::int64_t next_global = 0;
    for (const auto& dataset : datasets) {
        if (!(dataset.shape == pool.shape())) {
            throw DataError("dataset '" + dataset.name + "' shape differs from the pool; harmonize first");
        }
        ClassCatalog catalog;
        const std::int64_t offset = next_global;
        for (std::size_t c = 0; c < dataset.class_names.size(); ++c) {
            CatalogEntry entry;
            entry.global_class_id = offset + static_cast<std::int64_t>(c);
            entry.source_dataset = dataset.name;
            entry.class_name = dataset.class_names[c];
            catalog.entries.push_back(std::move(entry));
            catalog.class_order.push_back(offset + static_cast<std::int64_t>(c));
        }
        for (const auto& sample : dataset.train) {
            const SampleRef ref = pool.add(sample.pixels, offset + sample.local_class, Split::train);
            catalog.entries.at(static_cast<std::size_t>(sample.local_class)).train_refs.push_back(ref);
        }
        for (const auto& sample : dataset.test) {
            const SampleRef ref = pool.add(sample.pixels, offset + sample.local_class, Split::test);
            catalog.entries.at(static_cast<std::size_t>(sample.local_class)).test_refs.push_back(ref);
        }
        for (const auto& entry : catalog.entries) {
            if (entry.train_refs.empty() || entry.test_refs.empty()) {
                throw DataError("class '" + entry.class_name + "' of '" + dataset.name +
                                "' needs at least one train and one test sample");
            }
        }
        next_global += static_cast<std::int64_t>(dataset.class_names.size());
        catalogs.push_back(std::move(catalog));
    }
    return catalogs;
}

std::int64_t TaskSpec::label_of(std::int64_t global_class) const {
    const auto it = std::find(class_ids.begin(), class_ids.end(), global_class);
    if (it == class_ids.end()) {
        throw DataError("class " + std::to_string(global_class) + " is not part of task " + std::to_string(index));
    }
    return label_begin + static_cast<std::int64_t>(it - class_ids.begin());
}

nlohmann::json TaskSequence::to_json() const {
    nlohmann::json tasks_json = nlohmann::json::object();
    for (const auto& task : tasks) {
        auto ids = task.class_ids;
        std::sort(ids.begin(), ids.end());
        tasks_json[std::to_string(task.index)] = ids;
    }
    return {{"scenario", to_string(scenario)},
            {"stream", to_string(stream_mode.kind)},
            {"epochs", stream_mode.epochs},
            {"seed", seed},
            {"task_count", tasks.size()},
            {"tasks", tasks_json}};
}

std::string TaskSequence::digest() const {
    // Includes the learning order, which the sorted audit form hides.
    nlohmann::json full = to_json();
    nlohmann::json order = nlohmann::json::array();
    for (const auto& task : tasks) {
        order.push_back(task.class_ids);
    }
    full["order"] = order;
    std::ostringstream hex;
    hex << std::hex;
    hex.width(16);
    hex.fill('0');
    hex << fnv1a(full.dump());
    return hex.str();
}

namespace {

std::map<std::int64_t, const CatalogEntry*> index_entries(const std::vector<ClassCatalog>& catalogs) {
    std::map<std::int64_t, const CatalogEntry*> index;
    for (const auto& catalog : catalogs) {
        for (const auto& entry : catalog.entries) {
            if (!index.emplace(entry.global_class_id, &entry).second) {
                throw DataError("global class id " + std::to_string(entry.global_class_id) +
                                " appears in more than one catalog");
            }
        }
    }
    return index;
}

TaskSpec make_task(std::int64_t index, std::vector<std::int64_t> class_ids, std::int64_t label_begin,
                   const std::map<std::int64_t, const CatalogEntry*>& entries) {
    TaskSpec task;
    task.index = index;
    task.label_begin = label_begin;
    for (const auto id : class_ids) {
        const CatalogEntry* entry = entries.at(id);
        task.train_refs.insert(task.train_refs.end(), entry->train_refs.begin(), entry->train_refs.end());
        task.test_refs.insert(task.test_refs.end(), entry->test_refs.begin(), entry->test_refs.end());
    }
    task.class_ids = std::move(class_ids);
    return task;
}

/// Slices `order` into init/inc blocks.
std::vector<TaskSpec> slice_blocks(const std::vector<std::int64_t>& order, const ExperimentConfig& cfg,
                                   const std::map<std::int64_t, const CatalogEntry*>& entries) {
    const std::int64_t demand = cfg.class_demand();
    if (demand > static_cast<std::int64_t>(order.size())) {
        throw ConfigError("task_num", "class partition needs " + std::to_string(demand) + " classes but only " +
                                          std::to_string(order.size()) + " are available");
    }
    std::vector<TaskSpec> tasks;
    std::int64_t cursor = 0;
    for (std::int64_t t = 0; t < cfg.task_num; ++t) {
        const std::int64_t size = (t == 0 && cfg.init_cls_num > 0) ? cfg.init_cls_num : cfg.inc_cls_num;
        std::vector<std::int64_t> ids(order.begin() + cursor, order.begin() + cursor + size);
        tasks.push_back(make_task(t, std::move(ids), cursor, entries));
        cursor += size;
    }
    return tasks;
}

std::vector<std::int64_t> seeded_permutation(std::vector<std::int64_t> ids, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "class_order"));
    shuffle_in_place(ids, rng);
    return ids;
}

}  // namespace

TaskSequence partition_traditional(const ClassCatalog& catalog, const ExperimentConfig& cfg) {
    std::set<std::string> sources;
    for (const auto& entry : catalog.entries) {
        sources.insert(entry.source_dataset);
    }
    if (sources.size() > 1) {
        throw DataError("traditional setting partitions a single dataset, catalog mixes " +
                        std::to_string(sources.size()));
    }
    std::map<std::int64_t, const CatalogEntry*> entries;
    for (const auto& entry : catalog.entries) {
        entries.emplace(entry.global_class_id, &entry);
    }
    std::vector<std::int64_t> ids = catalog.class_order;
    std::sort(ids.begin(), ids.end());
    TaskSequence sequence;
    sequence.tasks = slice_blocks(seeded_permutation(std::move(ids), cfg.seed), cfg, entries);
    sequence.scenario = cfg.scenario;
    sequence.stream_mode = cfg.online() ? StreamMode::online() : StreamMode::offline(cfg.epochs);
    sequence.seed = cfg.seed;
    return sequence;
}

TaskSequence compose_cross_domain(const std::vector<ClassCatalog>& catalogs) {
    if (catalogs.empty()) {
        throw DataError("cross-domain composition needs at least one catalog");
    }
    if (catalogs.size() == 1) {
        std::clog << "warning: cross-domain sequence built from a single dataset has only one task\n";
    }
    const auto entries = index_entries(catalogs);
    TaskSequence sequence;
    std::int64_t label = 0;
    for (std::size_t i = 0; i < catalogs.size(); ++i) {
        std::vector<std::int64_t> ids = catalogs[i].class_order;
        if (ids.empty()) {
            for (const auto& entry : catalogs[i].entries) {
                ids.push_back(entry.global_class_id);
            }
        }
        const auto size = static_cast<std::int64_t>(ids.size());
        sequence.tasks.push_back(make_task(static_cast<std::int64_t>(i), std::move(ids), label, entries));
        label += size;
    }
    return sequence;
}

TaskSequence compose_category_randomized(const std::vector<ClassCatalog>& catalogs, const ExperimentConfig& cfg,
                                         std::uint64_t seed) {
    const auto entries = index_entries(catalogs);
    std::vector<std::int64_t> pooled;
    for (const auto& [id, entry] : entries) {
        pooled.push_back(id);
    }
    TaskSequence sequence;
    sequence.tasks = slice_blocks(seeded_permutation(std::move(pooled), seed), cfg, entries);
    sequence.seed = seed;
    return sequence;
}

TaskSequence compose_sequence(const std::vector<ClassCatalog>& catalogs, const ExperimentConfig& cfg) {
    TaskSequence sequence;
    switch (cfg.semantic_setting) {
        case SemanticSetting::traditional:
            if (catalogs.size() != 1) {
                throw DataError("traditional setting partitions a single dataset, got " +
                                std::to_string(catalogs.size()));
            }
            sequence = partition_traditional(catalogs.front(), cfg);
            break;
        case SemanticSetting::cross_domain:
            sequence = compose_cross_domain(catalogs);
            break;
        case SemanticSetting::category_randomized:
            sequence = compose_category_randomized(catalogs, cfg, cfg.seed);
            break;
    }
    sequence.scenario = cfg.scenario;
    sequence.stream_mode = cfg.online() ? StreamMode::online() : StreamMode::offline(cfg.epochs);
    sequence.seed = cfg.seed;
    return sequence;
}

TaskStream::TaskStream(const SamplePool& pool, const TaskSpec& task, StreamMode mode, std::int64_t batch_size,
                       std::uint64_t seed)
    : pool_(&pool), task_(&task), mode_(mode), batch_size_(batch_size), rng_(derive_seed(seed, "stream")) {
    if (batch_size <= 0) {
        throw ConfigError("batch_size", "must be positive, got " + std::to_string(batch_size));
    }
    if (task.train_refs.empty()) {
        throw DataError("task " + std::to_string(task.index) + " has no training samples");
    }
    if (mode_.kind == StreamKind::online) {
        mode_.epochs = 1;
    }
    if (mode_.epochs <= 0) {
        throw ConfigError("epochs", "must be positive");
    }
    const auto n = static_cast<std::int64_t>(task.train_refs.size());
    batches_per_epoch_ = (n + batch_size - 1) / batch_size;
    reshuffle();
}

void TaskStream::reshuffle() {
    order_ = task_->train_refs;
    shuffle_in_place(order_, rng_);
    cursor_ = 0;
}

std::optional<StreamBatch> TaskStream::next() {
    if (cursor_ >= order_.size()) {
        if (epoch_ + 1 >= mode_.epochs) {
            return std::nullopt;
        }
        ++epoch_;
        reshuffle();
    }
    const std::size_t end = std::min(order_.size(), cursor_ + static_cast<std::size_t>(batch_size_));
    const std::span<const SampleRef> refs(order_.data() + cursor_, end - cursor_);
    StreamBatch batch = materialize(*pool_, *task_, refs);
    batch.batch_index = emitted_++;
    batch.epoch = epoch_;
    cursor_ = end;
    return batch;
}

std::vector<StreamBatch> iterate_stream(const SamplePool& pool, const TaskSpec& task, StreamMode mode,
                                        std::int64_t batch_size, std::uint64_t seed) {
    TaskStream stream(pool, task, mode, batch_size, seed);
    std::vector<StreamBatch> batches;
    while (auto batch = stream.next()) {
        batches.push_back(std::move(*batch));
    }
    return batches;
}

StreamBatch materialize(const SamplePool& pool, const TaskSpec& task, std::span<const SampleRef> refs) {
    StreamBatch batch;
    batch.inputs = pool.inputs(refs);
    batch.refs.assign(refs.begin(), refs.end());
    batch.task_index = task.index;
    batch.labels.reserve(refs.size());
    for (const auto ref : refs) {
        batch.labels.push_back(task.label_of(pool.global_class(ref)));
    }
    return batch;
}

}  // namespace clbench
