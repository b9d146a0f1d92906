#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "clbench/runner.hpp"
#include "test_support.hpp"

namespace clbench {
namespace {

RunOptions quiet_options() {
    RunOptions options;
    options.write_outputs = false;
    options.log_batches = false;
    return options;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::stringstream text;
    text << in.rdbuf();
    return text.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("clbench_runner_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

TEST(RunExperiment, TwoTaskToyRunShape) {
    const auto record = run_experiment(testing::tiny_config("er"), quiet_options());
    EXPECT_TRUE(record.complete);
    EXPECT_EQ(record.matrix.rows().size(), 2U);
    EXPECT_EQ(record.matrix.rows()[0].size() + record.matrix.rows()[1].size(), 3U);
    EXPECT_FALSE(record.ledger.entries.empty());
    EXPECT_GT(compute_budget(record.ledger).total_units, 0);
    EXPECT_EQ(record.task_seconds.size(), 2U);
}

TEST(RunExperiment, RerunIsBitwiseIdentical) {
    for (const std::string method : {"finetune", "icarl", "gpm"}) {
        const auto cfg = testing::tiny_config(method);
        EXPECT_EQ(run_experiment(cfg, quiet_options()).matrix, run_experiment(cfg, quiet_options()).matrix) << method;
    }
}

TEST(RunExperiment, TaskAwareNeverBelowTaskAgnostic) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto cfg = testing::tiny_config("finetune", 3);
        cfg.seed = seed;
        auto options = quiet_options();
        options.inspect = [&](const Learner& learner, const ExperimentData& data) {
            const auto last = static_cast<std::int64_t>(data.sequence.tasks.size()) - 1;
            const auto aware = evaluate_tasks(learner, data, last, Scenario::task_aware);
            const auto agnostic = evaluate_tasks(learner, data, last, Scenario::task_agnostic);
            for (std::size_t j = 0; j < aware.size(); ++j) {
                EXPECT_GE(aware[j], agnostic[j]) << "seed " << seed << " task " << j;
            }
        };
        (void)run_experiment(cfg, options);
    }
}

TEST(RunExperiment, WritesOutputsThatReconstructTheRecord) {
    auto cfg = testing::tiny_config("er");
    cfg.output_dir = fresh_dir("outputs").string();
    RunOptions options;
    options.log_batches = true;
    const auto record = run_experiment(cfg, options);
    const std::filesystem::path dir = cfg.output_dir;
    for (const char* name : {"config.resolved.yaml", "matrix.csv", "metrics.json", "ledger.json", "events.log",
                             "record.json", "sequence.json"}) {
        EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
    }
    EXPECT_TRUE(std::filesystem::exists(dir / "checkpoint" / "arrays.bin"));
    EXPECT_EQ(load_config(dir / "config.resolved.yaml"), cfg);
    EXPECT_EQ(AccuracyMatrix::from_csv(slurp(dir / "matrix.csv")), record.matrix);

    const auto back = RunRecord::from_json(nlohmann::json::parse(slurp(dir / "record.json")));
    EXPECT_EQ(back.matrix, record.matrix);
    EXPECT_EQ(back.config, cfg);
    EXPECT_EQ(back.metrics->to_json(), record.metrics->to_json());
    EXPECT_EQ(compute_budget(back.ledger).total_units, compute_budget(record.ledger).total_units);
    EXPECT_EQ(prepare_experiment(back.config)->sequence.digest(), back.sequence_digest);
}

TEST(RunExperiment, EventLogFollowsStageOrder) {
    auto cfg = testing::tiny_config("finetune", 3);
    cfg.output_dir = fresh_dir("events").string();
    RunOptions options;
    options.log_batches = false;
    (void)run_experiment(cfg, options);
    std::vector<std::string> stages;
    std::istringstream lines(slurp(std::filesystem::path(cfg.output_dir) / "events.log"));
    for (std::string line; std::getline(lines, line);) {
        const auto event = nlohmann::json::parse(line);
        if (event.value("event", "") == "stage") stages.push_back(event.at("stage").get<std::string>());
    }
    const std::vector<std::string> expected{"initialization", "training", "evaluation", "training", "evaluation",
                                            "training",       "evaluation", "saving"};
    EXPECT_EQ(stages, expected);
}

TEST(RunExperiment, ConfigProblemsSurfaceBeforeTraining) {
    auto cfg = testing::tiny_config("finetune");
    cfg.task_num = 50;
    EXPECT_THROW((void)run_experiment(cfg, quiet_options()), ConfigError);
    auto stub = testing::tiny_config("l2p");
    EXPECT_THROW((void)run_experiment(stub, quiet_options()), UnsupportedMethod);
}

TEST(RunSuite, StatisticsMatchPersistedRecords) {
    auto cfg = testing::tiny_config("finetune");
    cfg.output_dir = fresh_dir("suite").string();
    const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    const auto suite_dir = std::filesystem::path(cfg.output_dir) / "summary";
    const auto table = run_suite({{"toy", cfg}}, seeds, suite_dir, quiet_options());
    ASSERT_EQ(table.rows.size(), 1U);
    const auto& row = table.rows.front();
    ASSERT_EQ(row.last_acc.size(), 5U);

    RunOptions writing;
    writing.log_batches = false;
    (void)run_suite({{"toy", cfg}}, seeds, suite_dir, writing);
    std::vector<double> persisted;
    for (const auto s : seeds) {
        const auto dir = std::filesystem::path(cfg.output_dir) / ("seed_" + std::to_string(s));
        persisted.push_back(last_accuracy(AccuracyMatrix::from_csv(slurp(dir / "matrix.csv"))));
    }
    double mean = 0.0;
    for (const double v : persisted) mean += v / 5.0;
    double ss = 0.0;
    for (const double v : persisted) ss += (v - mean) * (v - mean);
    EXPECT_NEAR(row.last_mean(), mean, 1e-12);
    EXPECT_NEAR(row.last_std(), std::sqrt(ss / 4.0), 1e-12);
    EXPECT_TRUE(std::filesystem::exists(suite_dir / "suite.csv"));
    EXPECT_TRUE(std::filesystem::exists(suite_dir / "suite.md"));
}

TEST(RunSuite, IdenticalRunsHaveZeroSpread) {
    const auto table = run_suite({{"toy", testing::tiny_config("finetune")}}, {4, 4, 4}, std::nullopt, quiet_options());
    EXPECT_EQ(table.rows.front().last_std(), 0.0);
}

TEST(RunSuite, FailuresAreIsolated) {
    const auto table = run_suite({{"stub", testing::tiny_config("l2p")}, {"ok", testing::tiny_config("finetune")}},
                                 {1, 2}, std::nullopt, quiet_options());
    ASSERT_EQ(table.rows.size(), 2U);
    EXPECT_EQ(table.rows[0].failures.size(), 2U);
    EXPECT_TRUE(table.rows[0].last_acc.empty());
    EXPECT_EQ(table.rows[1].last_acc.size(), 2U);
    EXPECT_NE(table.to_markdown().find("failed"), std::string::npos);
}

TEST(SweepMemory, ReplayRowsFitTheirTargets) {
    auto cfg = testing::tiny_config("er");
    cfg.output_dir = fresh_dir("sweep").string();
    // 8x8 grayscale images cost 64 units each.
    const std::vector<double> targets{0.00064, 0.00128, 0.0032};
    const auto rows = sweep_memory("er", targets, cfg, {}, quiet_options());
    ASSERT_EQ(rows.size(), 3U);
    EXPECT_EQ(rows[0].knob, "10");
    EXPECT_EQ(rows[1].knob, "20");
    EXPECT_EQ(rows[2].knob, "50");
    for (const auto& r : rows) {
        EXPECT_LE(r.achieved_units, static_cast<std::int64_t>(*r.target_mb * 1e6 + 1e-6));
    }
}

TEST(SweepMemory, EwcEmitsOneFixedRow) {
    auto cfg = testing::tiny_config("ewc");
    const std::vector<double> targets{1.0, 2.0};
    const auto rows = sweep_memory("ewc", targets, cfg, {}, quiet_options());
    ASSERT_EQ(rows.size(), 1U);
    EXPECT_EQ(rows.front().knob, "fixed");
    EXPECT_GT(rows.front().achieved_units, 0);
}

TEST(SweepMemory, AllTargetsInfeasibleThrows) {
    auto cfg = testing::tiny_config("er");
    const std::vector<double> targets{0.00001};
    EXPECT_THROW((void)sweep_memory("er", targets, cfg, {}, quiet_options()), InfeasibleBudget);
}

TEST(Statistics, SampleStdAndMedian) {
    EXPECT_DOUBLE_EQ(sample_std({1.0}), 0.0);
    EXPECT_NEAR(sample_std({1.0, 2.0, 3.0, 4.0}), std::sqrt(5.0 / 3.0), 1e-15);
    EXPECT_DOUBLE_EQ(median_of({3.0, 1.0, 2.0}), 2.0);
    EXPECT_DOUBLE_EQ(median_of({4.0, 1.0, 2.0, 3.0}), 2.5);
}

}  // namespace
}  // namespace clbench
