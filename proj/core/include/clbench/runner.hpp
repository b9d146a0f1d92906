#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clbench/config.hpp"
#include "clbench/datastream.hpp"
#include "clbench/learner.hpp"
#include "clbench/memorybudget.hpp"
#include "clbench/metrics.hpp"

namespace clbench {

[[nodiscard]] std::string framework_version();

/// Everything the initialization stage derives from a config.
struct ExperimentData {
    SamplePool pool;
    std::vector<ClassCatalog> catalogs;
    TaskSequence sequence;
    ImageShape input_shape;
};

/// Loads and harmonises datasets, validates the partition and composes the sequence.
[[nodiscard]] std::unique_ptr<ExperimentData> prepare_experiment(const ExperimentConfig& cfg);

struct RunRecord {
    ExperimentConfig config;
    std::string sequence_digest;
    nlohmann::json sequence;
    AccuracyMatrix matrix;
    /// Present when the run completed.
    std::optional<MetricsSummary> metrics;
    StorageLedger ledger;
    std::vector<double> task_seconds;
    std::uint64_t seed = 0;
    std::string version;
    bool complete = false;
    std::string failure;

    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static RunRecord from_json(const nlohmann::json& j);
};

struct RunOptions {
    /// Write config.resolved.yaml, matrix.csv, metrics.json, ledger.json,
    /// events.log, record.json and checkpoint/ under cfg.output_dir.
    bool write_outputs = true;
    bool trace_hooks = false;
    /// Per-batch {task, batch, loss, acc} lines in events.log.
    bool log_batches = true;
    /// Receives every event line, whether or not outputs are written.
    std::function<void(const nlohmann::json&)> on_event;
    /// Receives the learner after training, before it is destroyed.
    std::function<void(const Learner&, const ExperimentData&)> inspect;
};

/// Raised when training fails after initialization; carries the partial
/// record (complete = false), which has already been saved when outputs are on.
class TrainingFailure : public Error {
public:
    TrainingFailure(const std::string& what, RunRecord partial) : Error(what), partial_(std::move(partial)) {}
    [[nodiscard]] const RunRecord& partial() const noexcept { return partial_; }

private:
    RunRecord partial_;
};

/// Initialization, training (before_task, observe per batch, after_task),
/// evaluation after every task, saving. Config and data errors propagate
/// unchanged; anything thrown during training becomes TrainingFailure.
[[nodiscard]] RunRecord run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

/// Accuracy on each task's test set for tasks [0, upto], with task-aware
/// logit masking when `scenario` is task_aware.
[[nodiscard]] std::vector<double> evaluate_tasks(const Learner& learner, const ExperimentData& data,
                                                 std::int64_t upto, Scenario scenario);

struct SuiteEntry {
    std::string label;
    ExperimentConfig config;
};

struct SuiteRow {
    std::string label;
    std::string method;
    std::vector<std::uint64_t> seeds;
    std::vector<double> last_acc;  // per successful seed
    std::vector<double> avg_acc;
    std::vector<std::string> failures;

    [[nodiscard]] double last_mean() const;
    [[nodiscard]] double last_std() const;
    [[nodiscard]] double avg_mean() const;
    [[nodiscard]] double avg_std() const;
};

struct SuiteTable {
    std::vector<SuiteRow> rows;

    /// label, method, runs, last_mean, last_std, avg_mean, avg_std, failures.
    [[nodiscard]] std::string to_csv() const;
    /// Percent "mean ± std" table, one row per config.
    [[nodiscard]] std::string to_markdown() const;
};

/// Sample mean and sample standard deviation (n - 1); std is 0 for n < 2.
[[nodiscard]] double mean_of(const std::vector<double>& values);
[[nodiscard]] double sample_std(const std::vector<double>& values);
[[nodiscard]] double median_of(std::vector<double> values);

/// Runs every entry under every seed into <output_dir>/seed_<s>. Failures are
/// recorded and the suite continues. Writes suite.csv and suite.md to
/// `suite_dir` when given.
[[nodiscard]] SuiteTable run_suite(const std::vector<SuiteEntry>& entries, const std::vector<std::uint64_t>& seeds,
                                   const std::optional<std::filesystem::path>& suite_dir = std::nullopt,
                                   const RunOptions& options = {});

struct SweepRow {
    std::string method;
    std::optional<double> target_mb;
    std::string knob;  // knob value, or "fixed"
    std::int64_t achieved_units = 0;
    double last_acc = 0.0;  // median over seeds
    double avg_acc = 0.0;
    std::vector<double> seed_last_acc;
};

/// Prices `method` on base_cfg's data, runs one experiment per feasible
/// target and seed, and writes sweep.csv under base_cfg.output_dir. Fixed
/// methods give one row whose achieved_units is the run's own ledger.
/// Throws InfeasibleBudget when no target is feasible.
[[nodiscard]] std::vector<SweepRow> sweep_memory(const std::string& method, const std::vector<double>& targets_mb,
                                                 const ExperimentConfig& base_cfg,
                                                 const std::vector<std::uint64_t>& seeds = {},
                                                 const RunOptions& options = {});

[[nodiscard]] std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Pricing inputs for plan_sweep derived from the experiment's data and backbone.
[[nodiscard]] PricingRules pricing_rules(const ExperimentConfig& cfg, const ExperimentData& data);

}  // namespace clbench
