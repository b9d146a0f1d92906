#include "clbench/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "clbench/images.hpp"
#include "clbench/learners.hpp"
#include "clbench/losses.hpp"

#ifndef CLBENCH_VERSION
#define CLBENCH_VERSION "0.0.0"
#endif

namespace clbench {

std::string framework_version() { return CLBENCH_VERSION; }

std::unique_ptr<ExperimentData> prepare_experiment(const ExperimentConfig& cfg) {
    std::vector<Dataset> datasets;
    CatalogSummary summary;
    for (const auto& name : cfg.dataset_names) {
        datasets.push_back(resolve_dataset(name, cfg));
        summary[name] = static_cast<std::int64_t>(datasets.back().class_names.size());
    }
    validate_config(cfg, summary);
    harmonize_shapes(datasets);
    auto data = std::make_unique<ExperimentData>();
    data->input_shape = datasets.front().shape;
    data->pool = SamplePool(data->input_shape);
    data->catalogs = build_catalogs(datasets, data->pool);
    data->sequence = compose_sequence(data->catalogs, cfg);
    return data;
}

// ---------------------------------------------------------------- RunRecord

nlohmann::json RunRecord::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : matrix.rows()) {
        rows.push_back(row);
    }
    return {{"config", config_to_tree(config)},
            {"sequence_digest", sequence_digest},
            {"sequence", sequence},
            {"task_count", matrix.tasks()},
            {"matrix", rows},
            {"metrics", metrics ? metrics->to_json() : nlohmann::json()},
            {"ledger", ledger.to_json()},
            {"task_seconds", task_seconds},
            {"seed", seed},
            {"version", version},
            {"complete", complete},
            {"failure", failure}};
}

RunRecord RunRecord::from_json(const nlohmann::json& j) {
    RunRecord r;
    r.config = config_from_tree(j.at("config"));
    r.sequence_digest = j.at("sequence_digest").get<std::string>();
    r.sequence = j.at("sequence");
    r.matrix = AccuracyMatrix(j.at("task_count").get<std::int64_t>());
    const auto& rows = j.at("matrix");
    for (std::size_t t = 0; t < rows.size(); ++t) {
        r.matrix.set_row(static_cast<std::int64_t>(t), rows[t].get<std::vector<double>>());
    }
    if (!j.at("metrics").is_null()) {
        r.metrics = summarize_metrics(r.matrix);
    }
    r.ledger = StorageLedger::from_json(j.at("ledger"));
    r.task_seconds = j.at("task_seconds").get<std::vector<double>>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.version = j.at("version").get<std::string>();
    r.complete = j.at("complete").get<bool>();
    r.failure = j.at("failure").get<std::string>();
    return r;
}

// ---------------------------------------------------------------- evaluation

std::vector<double> evaluate_tasks(const Learner& learner, const ExperimentData& data, std::int64_t upto,
                                   Scenario scenario) {
    constexpr std::size_t kChunk = 512;
    std::vector<double> row;
    for (std::int64_t j = 0; j <= upto; ++j) {
        const auto& task = data.sequence.tasks.at(static_cast<std::size_t>(j));
        std::int64_t correct = 0;
        for (std::size_t start = 0; start < task.test_refs.size(); start += kChunk) {
            const auto count = std::min(kChunk, task.test_refs.size() - start);
            const std::span<const SampleRef> refs(task.test_refs.data() + start, count);
            Matrix scores = learner.inference(data.pool.inputs(refs));
            std::int64_t offset = 0;
            if (scenario == Scenario::task_aware) {
                offset = task.label_begin;
                scores = Matrix(scores.middleCols(task.label_begin, task.label_end() - task.label_begin));
            }
            const auto predicted = argmax_rows(scores);
            for (std::size_t i = 0; i < count; ++i) {
                correct += predicted[i] + offset == task.label_of(data.pool.global_class(refs[i])) ? 1 : 0;
            }
        }
        row.push_back(static_cast<double>(correct) / static_cast<double>(task.test_refs.size()));
    }
    return row;
}

// ---------------------------------------------------------------- run_experiment

namespace {

class EventLog {
public:
    EventLog(const std::optional<std::filesystem::path>& path, std::function<void(const nlohmann::json&)> sink)
        : sink_(std::move(sink)) {
        if (path) {
            file_.open(*path, std::ios::trunc);
            if (!file_) {
                throw DataError("cannot write " + path->string());
            }
        }
    }

    void emit(const nlohmann::json& event) {
        if (file_.is_open()) {
            file_ << event.dump() << '\n';
        }
        if (sink_) {
            sink_(event);
        }
    }

private:
    std::ofstream file_;
    std::function<void(const nlohmann::json&)> sink_;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << text;
}

void save_record_files(const RunRecord& record, const std::filesystem::path& dir) {
    write_text(dir / "matrix.csv", record.matrix.to_csv());
    write_text(dir / "metrics.json", (record.metrics ? record.metrics->to_json() : nlohmann::json()).dump(2) + "\n");
    write_text(dir / "ledger.json", record.ledger.to_json().dump(2) + "\n");
    write_text(dir / "record.json", record.to_json().dump(2) + "\n");
}

StorageLedger build_ledger(const Learner& learner) {
    const auto* buffer = learner.buffer();
    const auto descriptors = learner.state_descriptors();
    return ledger_from_run(buffer ? buffer->manifest() : nlohmann::json(), learner.parameter_census(), descriptors);
}

}  // namespace

RunRecord run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
    const std::filesystem::path out_dir = cfg.output_dir;
    if (options.write_outputs) {
        std::filesystem::create_directories(out_dir);
    }
    EventLog log(options.write_outputs ? std::optional(out_dir / "events.log") : std::nullopt, options.on_event);

    // Initialization stage.
    log.emit({{"event", "stage"}, {"stage", "initialization"}});
    if (options.write_outputs) {
        write_config(cfg, out_dir / "config.resolved.yaml");
    }
    const auto data = prepare_experiment(cfg);
    if (options.write_outputs) {
        write_text(out_dir / "sequence.json", data->sequence.to_json().dump(2) + "\n");
    }
    const auto learner = make_learner({&data->pool, data->input_shape, cfg});
    learner->enable_trace(options.trace_hooks);

    RunRecord record;
    record.config = cfg;
    record.sequence = data->sequence.to_json();
    record.sequence_digest = data->sequence.digest();
    record.matrix = AccuracyMatrix(static_cast<std::int64_t>(data->sequence.tasks.size()));
    record.seed = cfg.seed;
    record.version = framework_version();

    try {
        for (const auto& task : data->sequence.tasks) {
            // Training stage.
            log.emit({{"event", "stage"}, {"stage", "training"}, {"task", task.index}});
            const auto started = std::chrono::steady_clock::now();
            learner->before_task(task);
            log.emit({{"event", "hook"}, {"hook", "before_task"}, {"task", task.index}});
            TaskStream stream(data->pool, task, data->sequence.stream_mode, cfg.batch_size,
                              derive_seed(cfg.seed ^ static_cast<std::uint64_t>(task.index), "stream"));
            while (auto batch = stream.next()) {
                const auto result = learner->observe(*batch);
                if (options.log_batches) {
                    log.emit({{"task", task.index},
                              {"batch", batch->batch_index},
                              {"loss", result.loss},
                              {"acc", result.accuracy}});
                }
            }
            learner->after_task(task);
            log.emit({{"event", "hook"}, {"hook", "after_task"}, {"task", task.index}});
            record.task_seconds.push_back(
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());

            // Evaluation stage.
            const auto row = evaluate_tasks(*learner, *data, task.index, data->sequence.scenario);
            record.matrix.set_row(task.index, row);
            log.emit({{"event", "stage"}, {"stage", "evaluation"}, {"task", task.index}, {"row", row}});
        }
        record.ledger = build_ledger(*learner);
        record.metrics = summarize_metrics(record.matrix);
        record.complete = true;
    } catch (const std::exception& e) {
        record.failure = e.what();
        record.complete = false;
        try {
            record.ledger = build_ledger(*learner);
        } catch (const std::exception&) {
        }
        log.emit({{"event", "failure"}, {"message", record.failure}});
        if (options.write_outputs) {
            save_record_files(record, out_dir);
        }
        throw TrainingFailure("training failed: " + record.failure, record);
    }

    // Saving stage.
    log.emit({{"event", "stage"}, {"stage", "saving"}});
    if (options.write_outputs) {
        save_record_files(record, out_dir);
        save_checkpoint(learner->checkpoint_arrays(), learner->parameter_census(), out_dir / "checkpoint");
        if (const auto* buffer = learner->buffer()) {
            write_text(out_dir / "buffer.json", buffer->manifest().dump(2) + "\n");
        }
    }
    if (options.inspect) {
        options.inspect(*learner, *data);
    }
    if (options.trace_hooks) {
        nlohmann::json trace = learner->trace();
        log.emit({{"event", "trace"}, {"hooks", trace}});
    }
    return record;
}

// ---------------------------------------------------------------- statistics

double mean_of(const std::vector<double>& values) {
    if (values.empty()) {
        return std::nan("");
    }
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_std(const std::vector<double>& values) {
    if (values.size() < 2) {
        return 0.0;
    }
    const double mean = mean_of(values);
    double sum = 0.0;
    for (const double v : values) {
        sum += (v - mean) * (v - mean);
    }
    return std::sqrt(sum / static_cast<double>(values.size() - 1));
}

double median_of(std::vector<double> values) {
    if (values.empty()) {
        return std::nan("");
    }
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// ---------------------------------------------------------------- suite

double SuiteRow::last_mean() const { return mean_of(last_acc); }
double SuiteRow::last_std() const { return sample_std(last_acc); }
double SuiteRow::avg_mean() const { return mean_of(avg_acc); }
double SuiteRow::avg_std() const { return sample_std(avg_acc); }

std::string SuiteTable::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "label,method,runs,last_mean,last_std,avg_mean,avg_std,failures\n";
    for (const auto& row : rows) {
        out << row.label << ',' << row.method << ',' << row.last_acc.size() << ',' << row.last_mean() << ','
            << row.last_std() << ',' << row.avg_mean() << ',' << row.avg_std() << ',' << row.failures.size() << '\n';
    }
    return out.str();
}

std::string SuiteTable::to_markdown() const {
    std::string out = "| Config | Method | Runs | Last Acc. (%) | Avg Acc. (%) |\n|---|---|---|---|---|\n";
    char cell[96];
    for (const auto& row : rows) {
        out += "| " + row.label + " | " + row.method + " | " + std::to_string(row.last_acc.size()) + " | ";
        if (row.last_acc.empty()) {
            out += "failed | failed |\n";
            continue;
        }
        std::snprintf(cell, sizeof cell, "%.2f ± %.2f | %.2f ± %.2f |\n", 100.0 * row.last_mean(),
                      100.0 * row.last_std(), 100.0 * row.avg_mean(), 100.0 * row.avg_std());
        out += cell;
    }
    return out;
}

SuiteTable run_suite(const std::vector<SuiteEntry>& entries, const std::vector<std::uint64_t>& seeds,
                     const std::optional<std::filesystem::path>& suite_dir, const RunOptions& options) {
    if (entries.empty() || seeds.empty()) {
        throw ConfigError("", "a suite needs at least one config and one seed");
    }
    SuiteTable table;
    for (const auto& entry : entries) {
        SuiteRow row;
        row.label = entry.label;
        row.method = entry.config.method;
        for (const auto seed : seeds) {
            ExperimentConfig cfg = entry.config;
            cfg.seed = seed;
            cfg.output_dir = (std::filesystem::path(entry.config.output_dir) / ("seed_" + std::to_string(seed))).string();
            try {
                const auto record = run_experiment(cfg, options);
                row.seeds.push_back(seed);
                row.last_acc.push_back(record.metrics->last_acc);
                row.avg_acc.push_back(record.metrics->avg_acc);
            } catch (const std::exception& e) {
                row.failures.push_back("seed " + std::to_string(seed) + ": " + e.what());
                std::clog << "suite: " << entry.label << " seed " << seed << " failed: " << e.what() << '\n';
            }
        }
        table.rows.push_back(std::move(row));
    }
    if (suite_dir) {
        std::filesystem::create_directories(*suite_dir);
        write_text(*suite_dir / "suite.csv", table.to_csv());
        write_text(*suite_dir / "suite.md", table.to_markdown());
    }
    return table;
}

// ---------------------------------------------------------------- sweep

PricingRules pricing_rules(const ExperimentConfig& cfg, const ExperimentData& data) {
    PricingRules rules;
    rules.image_values = data.input_shape.size();
    rules.classes = data.sequence.total_classes();
    Model model(Backbone::build(parse_arch(cfg.backbone.arch), data.input_shape, cfg.backbone, cfg.seed), cfg.seed);
    if (rules.classes > 0) {
        model.expand_head(rules.classes);
    }
    rules.model_params = model.parameter_count();
    rules.feature_dim = model.backbone.feature_dim();
    rules.layer_widths = model.backbone.affine_input_dims();
    return rules;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out.precision(17);
    out << "method,target_mb,knob,achieved_units,last_acc,avg_acc\n";
    for (const auto& row : rows) {
        out << row.method << ',';
        if (row.target_mb) {
            out << *row.target_mb;
        }
        out << ',' << row.knob << ',' << row.achieved_units << ',' << row.last_acc << ',' << row.avg_acc << '\n';
    }
    return out.str();
}

std::vector<SweepRow> sweep_memory(const std::string& method, const std::vector<double>& targets_mb,
                                   const ExperimentConfig& base_cfg, const std::vector<std::uint64_t>& seeds,
                                   const RunOptions& options) {
    ExperimentConfig base = base_cfg;
    base.method = method;
    base.buffer.budget_bytes.reset();
    const auto data = prepare_experiment(base);
    const auto rules = pricing_rules(base, *data);

    std::vector<SweepPoint> points;
    for (const double target : targets_mb) {
        try {
            const auto planned = plan_sweep(method, std::span<const double>(&target, 1), rules);
            if (planned.front().fixed) {
                points = planned;
                break;
            }
            points.push_back(planned.front());
        } catch (const InfeasibleBudget& e) {
            std::clog << "sweep: skipping target " << target << " MB: " << e.what() << '\n';
        }
    }
    if (points.empty()) {
        throw InfeasibleBudget("sweep for '" + method + "': no feasible budget target");
    }

    const std::vector<std::uint64_t> run_seeds = seeds.empty() ? std::vector<std::uint64_t>{base.seed} : seeds;
    std::vector<SweepRow> rows;
    for (const auto& point : points) {
        SweepRow row;
        row.method = method;
        row.target_mb = point.target_mb;
        row.knob = point.fixed ? "fixed" : std::to_string(point.knob);
        row.achieved_units = point.achieved_units;
        ConfigTree tree = config_to_tree(base);
        for (const auto& assignment : point.overrides()) {
            apply_set_override(tree, assignment);
        }
        std::vector<double> avg;
        for (const auto seed : run_seeds) {
            ExperimentConfig cfg = config_from_tree(tree);
            cfg.seed = seed;
            char name[96];
            if (point.fixed) {
                std::snprintf(name, sizeof name, "sweep/fixed_seed%llu", static_cast<unsigned long long>(seed));
            } else {
                std::snprintf(name, sizeof name, "sweep/%gMB_seed%llu", *point.target_mb,
                              static_cast<unsigned long long>(seed));
            }
            cfg.output_dir = (std::filesystem::path(base.output_dir) / name).string();
            const auto record = run_experiment(cfg, options);
            row.seed_last_acc.push_back(record.metrics->last_acc);
            avg.push_back(record.metrics->avg_acc);
            if (point.fixed && row.seed_last_acc.size() == 1) {
                row.achieved_units = compute_budget(record.ledger).total_units;
            }
        }
        row.last_acc = median_of(row.seed_last_acc);
        row.avg_acc = median_of(avg);
        rows.push_back(std::move(row));
    }
    if (options.write_outputs) {
        std::filesystem::create_directories(base.output_dir);
        write_text(std::filesystem::path(base.output_dir) / "sweep.csv", sweep_csv(rows));
    }
    return rows;
}

}  // namespace clbench
