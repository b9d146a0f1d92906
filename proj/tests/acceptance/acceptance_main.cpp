// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Exit status is non-zero when any criterion fails. `--only N` runs one.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "clbench/buffer.hpp"
#include "clbench/datastream.hpp"
#include "clbench/images.hpp"
#include "clbench/learners.hpp"
#include "clbench/losses.hpp"
#include "clbench/memorybudget.hpp"
#include "clbench/metrics.hpp"
#include "clbench/projection.hpp"
#include "clbench/regularizers.hpp"
#include "clbench/runner.hpp"
#include "test_support.hpp"

namespace clbench {
namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buffer[256];
    std::snprintf(buffer, sizeof buffer, pattern, a, b, c, d);
    return buffer;
}

RunOptions quiet_options() {
    RunOptions options;
    options.write_outputs = false;
    options.log_batches = false;
    return options;
}

// ---------------------------------------------------------------- 1

Outcome reference_table() {
    const std::map<std::string, std::int64_t> expected{
        {"icarl", 9926048}, {"gpm", 50172928}, {"moe_adapter4cl", 16417168}};
    Outcome out{true, ""};
    for (const auto& [method, units] : expected) {
        const auto got = compute_budget(reference_ledger(method)).total_units;
        out.pass = out.pass && got == units;
        out.detail += method + "=" + std::to_string(got) + " ";
    }
    return out;
}

// ---------------------------------------------------------------- 2

Outcome metrics_arithmetic() {
    struct Case {
        std::vector<std::vector<double>> rows;
        double last;
        double avg;
    };
    const std::vector<Case> cases{
        {{{0.9}, {0.8, 0.7}}, 0.75, 0.825},
        {{{1.0}, {0.6, 1.0}}, 0.8, 0.9},
        {{{0.5}}, 0.5, 0.5},
        {{{0.9}, {0.6, 0.8}, {0.3, 0.6, 0.9}}, 0.6, (0.9 + 0.7 + 0.6) / 3.0},
        {{{0.25}, {0.25, 0.25}, {0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}}, 0.25, 0.25},
    };
    double worst = 0.0;
    for (const auto& c : cases) {
        const auto a = AccuracyMatrix::from_rows(c.rows);
        worst = std::max({worst, std::abs(last_accuracy(a) - c.last), std::abs(average_accuracy(a) - c.avg)});
    }
    return {worst <= 1e-12, fmt("max abs error %.3g over %g matrices", worst, static_cast<double>(cases.size()))};
}

// ---------------------------------------------------------------- 3

Outcome projection_invariants() {
    Rng rng(derive_seed(3, "acceptance"));
    double worst_orth = 0.0;
    double worst_pyth = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto width = static_cast<Eigen::Index>(2 + uniform_index(rng, 63));
        const auto samples = static_cast<Eigen::Index>(1 + uniform_index(rng, 80));
        const Matrix acts = testing::random_matrix(width, samples, rng);
        const Matrix basis = gpm_update_subspace(Matrix(width, 0), acts, 0.5 + 0.49 * uniform_unit(rng));
        const Matrix g = testing::random_matrix(width, 1 + static_cast<Eigen::Index>(uniform_index(rng, 8)), rng);
        const Matrix projected = gpm_project_gradient(g, basis);
        worst_orth = std::max(worst_orth, (basis.transpose() * projected).cwiseAbs().maxCoeff());
        const double identity = projected.squaredNorm() + (basis * basis.transpose() * g).squaredNorm() - g.squaredNorm();
        worst_pyth = std::max(worst_pyth, std::abs(identity) / std::max(1.0, g.squaredNorm()));
    }
    double worst_null = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto width = static_cast<Eigen::Index>(3 + uniform_index(rng, 62));
        const auto rank = static_cast<Eigen::Index>(1 + uniform_index(rng, static_cast<std::uint64_t>(width - 1)));
        const Matrix x = testing::random_matrix(2 * width, rank, rng) * testing::random_matrix(rank, width, rng);
        CovarianceCache cache(width);
        cache.add_rows(x);
        const Matrix g = testing::random_matrix(width, 3, rng);
        const Matrix projected = nscl_project_gradient(g, cache.covariance(), 10.0);
        worst_null = std::max(worst_null, (x * projected).norm() / (x.norm() * g.norm()));
    }
    double worst_inverse = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix xs = testing::random_matrix(6, 6, rng);
        const double lambda = 0.01 + 10.0 * uniform_unit(rng);
        const Matrix p = adabop_projection(xs, lambda);
        const Matrix a = Matrix::Identity(6, 6) + lambda * xs * xs.transpose();
        worst_inverse = std::max(worst_inverse, (p * a - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff());
    }
    const bool pass = worst_orth < 1e-6 && worst_pyth <= 1e-8 && worst_null < 1e-6 && worst_inverse <= 1e-8;
    return {pass, fmt("|M^T g'| %.2g, pythagoras %.2g, nscl residual %.2g, adabop %.2g", worst_orth, worst_pyth,
                      worst_null, worst_inverse)};
}

// ---------------------------------------------------------------- 4

Outcome regularizer_gradients() {
    Rng rng(derive_seed(4, "acceptance"));
    double worst_ewc = 0.0;
    double worst_kd = 0.0;
    double at_anchor = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto n = static_cast<Eigen::Index>(1 + uniform_index(rng, 20));
        EwcState state;
        state.fisher = testing::random_matrix(n, 1, rng).cwiseAbs().col(0);
        state.anchor = testing::random_matrix(n, 1, rng).col(0);
        state.strength = 0.1 + 100.0 * uniform_unit(rng);
        const Vector theta = testing::random_matrix(n, 1, rng).col(0);
        const auto penalty = [&](const Matrix& t) { return ewc_penalty(t.col(0), state); };
        worst_ewc = std::max(worst_ewc, testing::relative_error(Matrix(ewc_penalty_gradient(theta, state)),
                                                                testing::numeric_gradient(penalty, Matrix(theta))));
        at_anchor = std::max(at_anchor, std::abs(ewc_penalty(state.anchor, state)));

        const auto rows = static_cast<Eigen::Index>(1 + uniform_index(rng, 4));
        const auto classes = static_cast<Eigen::Index>(2 + uniform_index(rng, 6));
        const Matrix old_logits = testing::random_matrix(rows, classes, rng, 2.0);
        const Matrix new_logits = testing::random_matrix(rows, classes, rng, 2.0);
        const double tau = 0.5 + 3.5 * uniform_unit(rng);
        const auto kd = [&](const Matrix& z) { return distill_loss(z, old_logits, tau).loss; };
        worst_kd = std::max(worst_kd, testing::relative_error(distill_loss(new_logits, old_logits, tau).grad,
                                                              testing::numeric_gradient(kd, new_logits)));
    }
    const bool pass = worst_ewc < 1e-4 && worst_kd < 1e-4 && at_anchor == 0.0;
    return {pass, fmt("ewc rel err %.2g, distill rel err %.2g, penalty at anchor %g", worst_ewc, worst_kd, at_anchor)};
}

// ---------------------------------------------------------------- 5

std::vector<std::size_t> greedy_oracle(const Matrix& f, std::size_t m) {
    const auto n = static_cast<std::size_t>(f.rows());
    const RowVector mu = f.colwise().mean();
    RowVector sum = RowVector::Zero(f.cols());
    std::vector<bool> used(n, false);
    std::vector<std::size_t> picks;
    for (std::size_t j = 1; j <= m; ++j) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            const double d = (mu - (sum + f.row(static_cast<Eigen::Index>(i))) / static_cast<double>(j)).squaredNorm();
            if (d < best * (1.0 - 1e-9)) {
                best = d;
                arg = i;
            }
        }
        used[arg] = true;
        picks.push_back(arg);
        sum += f.row(static_cast<Eigen::Index>(arg));
    }
    return picks;
}

Outcome herding_equivalence() {
    Rng rng(derive_seed(5, "acceptance"));
    int instances = 0;
    int mismatches = 0;
    for (int set = 0; set < 200; ++set) {
        const auto n = static_cast<Eigen::Index>(1 + uniform_index(rng, 6));
        const Matrix f = testing::random_matrix(n, 1 + static_cast<Eigen::Index>(uniform_index(rng, 5)), rng);
        for (std::int64_t m = 0; m <= std::min<std::int64_t>(3, n); ++m) {
            ++instances;
            mismatches += herding_select(f, m) == greedy_oracle(f, static_cast<std::size_t>(m)) ? 0 : 1;
        }
    }
    return {mismatches == 0, std::to_string(instances) + " instances, " + std::to_string(mismatches) + " mismatches"};
}

// ---------------------------------------------------------------- 6

Outcome stream_protocol() {
    SyntheticConfig one;
    one.classes = 10;
    one.train_per_class = 100;
    one.test_per_class = 1;
    one.height = 2;
    one.width = 2;
    std::vector<Dataset> single{make_synthetic_dataset("synth:stream", one)};
    SamplePool pool(single.front().shape);
    const auto catalogs = build_catalogs(single, pool);
    TaskSpec task;
    for (const auto& e : catalogs.front().entries) {
        task.class_ids.push_back(e.global_class_id);
        task.train_refs.insert(task.train_refs.end(), e.train_refs.begin(), e.train_refs.end());
    }
    const auto batches = iterate_stream(pool, task, StreamMode::online(), 10, 1);
    std::map<SampleRef, int> counts;
    for (const auto& b : batches)
        for (const auto r : b.refs) ++counts[r];
    bool once = counts.size() == 1000;
    for (const auto& [ref, n] : counts) once = once && n == 1;
    const bool online_ok = task.train_refs.size() == 1000 && batches.size() == 100 && once;

    SyntheticConfig small = one;
    small.train_per_class = 2;
    std::vector<Dataset> domains;
    for (int i = 0; i < 5; ++i) domains.push_back(make_synthetic_dataset("synth:domain" + std::to_string(i), small));
    SamplePool pool5(domains.front().shape);
    const auto catalogs5 = build_catalogs(domains, pool5);
    ExperimentConfig cfg;
    cfg.semantic_setting = SemanticSetting::category_randomized;
    cfg.inc_cls_num = 10;
    cfg.task_num = 5;
    bool randomized_ok = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto seq = compose_category_randomized(catalogs5, cfg, seed);
        std::set<std::int64_t> seen;
        std::size_t total = 0;
        for (const auto& t : seq.tasks) {
            seen.insert(t.class_ids.begin(), t.class_ids.end());
            total += t.class_ids.size();
        }
        const bool deterministic =
            seq.to_json().dump() == compose_category_randomized(catalogs5, cfg, seed).to_json().dump();
        randomized_ok = randomized_ok && seq.tasks.size() == 5 && seen.size() == 50 && total == 50 && deterministic;
    }
    return {online_ok && randomized_ok,
            std::to_string(batches.size()) + " batches over " + std::to_string(counts.size()) +
                " distinct samples; category-randomized cover " + (randomized_ok ? "ok" : "broken")};
}

// ---------------------------------------------------------------- 7

ExperimentConfig desk_stream(const std::string& method, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.method = method;
    cfg.dataset_names = {"synth:desk"};
    cfg.synthetic.classes = 10;
    cfg.synthetic.train_per_class = 500;
    cfg.synthetic.test_per_class = 100;
    cfg.synthetic.height = 8;
    cfg.synthetic.width = 8;
    cfg.synthetic.channels = 1;
    cfg.init_cls_num = 0;
    cfg.inc_cls_num = 2;
    cfg.task_num = 5;
    cfg.stream = StreamKind::online;
    cfg.epochs = 1;
    cfg.batch_size = 10;
    cfg.backbone.arch = "mlp2";
    cfg.backbone.hidden = {100, 100};
    cfg.optimizer.learning_rate = 0.05;
    cfg.seed = seed;
    if (method == "er") cfg.buffer.capacity = 500;
    return cfg;
}

double median_last(const std::string& method, const std::function<void(ExperimentConfig&)>& adjust = {}) {
    std::vector<double> values;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto cfg = desk_stream(method, seed);
        if (adjust) adjust(cfg);
        values.push_back(run_experiment(cfg, quiet_options()).metrics->last_acc);
    }
    return median_of(values);
}

Outcome online_direction() {
    const double er = median_last("er");
    const double finetune = median_last("finetune");
    const double ranpac = median_last("ranpac");
    // EWC gets its best strength from a grid so the comparison is against a tuned baseline.
    double ewc = -1.0;
    double best_lambda = 0.0;
    for (const double lambda : {1.0, 10.0, 100.0, 1000.0}) {
        const double v = median_last("ewc", [&](ExperimentConfig& cfg) {
            cfg.method_params.set("lambda", std::to_string(lambda));
        });
        if (v > ewc) {
            ewc = v;
            best_lambda = lambda;
        }
    }
    const bool pass = er - ewc >= 0.05 && er - finetune >= 0.05 && ranpac - finetune >= 0.05;
    return {pass, fmt("median last acc er %.3f, ewc %.3f, finetune %.3f, ranpac %.3f", er, ewc, finetune, ranpac) +
                      fmt(" (ewc lambda %g)", best_lambda)};
}

// ---------------------------------------------------------------- 8

Outcome sweep_direction() {
    ExperimentConfig cfg;
    cfg.dataset_names = {"synth:sweep"};
    cfg.synthetic.classes = 10;
    // 5000 training images per class keeps the 2/6/20 MB buffers at the same
    // share of the stream as on a 32x32x3 ten-class benchmark.
    cfg.synthetic.train_per_class = 5000;
    cfg.synthetic.test_per_class = 200;
    cfg.synthetic.height = 32;
    cfg.synthetic.width = 32;
    cfg.synthetic.channels = 3;
    cfg.synthetic.modes_per_class = 16;
    cfg.synthetic.separation = 1.0;
    cfg.synthetic.noise = 1.5;
    cfg.init_cls_num = 0;
    cfg.inc_cls_num = 2;
    cfg.task_num = 5;
    cfg.stream = StreamKind::online;
    cfg.batch_size = 10;
    cfg.backbone.hidden = {100, 100};
    // Plain SGD diverges at 0.05 on 3072-value inputs.
    cfg.optimizer.learning_rate = 0.01;
    cfg.buffer.capacity = 1;
    cfg.output_dir = "acceptance_sweep";
    const std::vector<double> targets{2.0, 6.0, 20.0};
    const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    const auto rows = sweep_memory("er", targets, cfg, seeds, quiet_options());
    bool pass = rows.size() == 3;
    std::string detail;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        detail += rows[i].knob + fmt(":%.3f ", rows[i].last_acc);
        if (i > 0) {
            pass = pass && std::stoll(rows[i].knob) >= std::stoll(rows[i - 1].knob) &&
                   rows[i].last_acc >= rows[i - 1].last_acc;
        }
    }
    return {pass, "capacity:median last acc " + detail};
}

// ---------------------------------------------------------------- 9

Outcome lifecycle_contract() {
    bool traces_ok = true;
    std::string bad;
    for (const auto& method : implemented_methods()) {
        auto cfg = testing::tiny_config(method, 3);
        auto options = quiet_options();
        options.trace_hooks = true;
        std::vector<std::string> trace;
        std::vector<std::string> expected;
        options.inspect = [&](const Learner& learner, const ExperimentData& data) {
            trace = learner.trace();
            for (const auto& task : data.sequence.tasks) {
                TaskStream stream(data.pool, task, data.sequence.stream_mode, cfg.batch_size, 0);
                expected.emplace_back("before_task");
                expected.insert(expected.end(), static_cast<std::size_t>(stream.total_batches()), "observe");
                expected.emplace_back("after_task");
            }
        };
        const auto first = run_experiment(cfg, options);
        const auto again = run_experiment(first.config, quiet_options());
        if (trace != expected || !(first.matrix == again.matrix)) {
            traces_ok = false;
            bad += method + " ";
        }
    }
    return {traces_ok, traces_ok ? std::to_string(implemented_methods().size()) + " methods traced and replayed bitwise"
                                 : "mismatch: " + bad};
}

}  // namespace
}  // namespace clbench

int main(int argc, char** argv) {
    using namespace clbench;
    struct Criterion {
        int id;
        const char* name;
        double budget_seconds;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "reference storage table", 1.0, reference_table},
        {2, "metrics arithmetic", 1.0, metrics_arithmetic},
        {3, "projection invariants", 10.0, projection_invariants},
        {4, "regularizer gradients", 30.0, regularizer_gradients},
        {5, "herding oracle equivalence", 5.0, herding_equivalence},
        {6, "stream protocol", 1.0, stream_protocol},
        {7, "online desk-scale direction", 600.0, online_direction},
        {8, "memory sweep monotonicity", 900.0, sweep_direction},
        {9, "lifecycle contract", 120.0, lifecycle_contract},
    };
    int only = 0;
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0) only = std::atoi(argv[i + 1]);
    }
    int failures = 0;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool within_time = seconds <= c.budget_seconds;
        const bool pass = outcome.pass && within_time;
        failures += pass ? 0 : 1;
        std::printf("%s criterion %d (%s): %s [%.2fs of %.0fs]%s\n", pass ? "PASS" : "FAIL", c.id, c.name,
                    outcome.detail.c_str(), seconds, c.budget_seconds, within_time ? "" : " over time budget");
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
