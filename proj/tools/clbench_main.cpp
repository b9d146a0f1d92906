#include <glob.h>

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clbench/config.hpp"
#include "clbench/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitTraining = 3;
constexpr int kExitInfeasible = 4;

std::vector<std::string> expand_glob(const std::string& pattern) {
    glob_t result{};
    const int status = ::glob(pattern.c_str(), 0, nullptr, &result);
    std::vector<std::string> paths;
    if (status == 0) {
        for (std::size_t i = 0; i < result.gl_pathc; ++i) {
            paths.emplace_back(result.gl_pathv[i]);
        }
    }
    ::globfree(&result);
    if (paths.empty()) {
        throw clbench::ConfigError("configs", "no config files match '" + pattern + "'");
    }
    return paths;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& key) {
    std::vector<T> values;
    std::stringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ',')) {
        std::istringstream parse(item);
        T value{};
        if (!(parse >> value) || !parse.eof()) {
            throw clbench::ConfigError(key, "cannot parse '" + item + "'");
        }
        values.push_back(value);
    }
    if (values.empty()) {
        throw clbench::ConfigError(key, "empty list");
    }
    return values;
}

void print_metrics(const clbench::RunRecord& record) {
    std::cout << record.matrix.to_csv();
    if (record.metrics) {
        std::cout << record.metrics->to_json().dump() << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Class-incremental continual learning benchmark"};
    app.require_subcommand(1);
    app.set_version_flag("--version", clbench::framework_version());

    std::string config_path;
    std::vector<std::string> overrides;
    bool quiet = false;

    auto* run = app.add_subcommand("run", "Run one experiment");
    run->add_option("--config", config_path, "YAML config file")->required()->check(CLI::ExistingFile);
    run->add_option("--set", overrides, "Leaf override key=value, applied last");
    run->add_flag("--quiet", quiet, "Do not echo per-batch events");

    std::string configs_glob;
    std::string seeds_text = "1,2,3,4,5";
    std::string suite_dir = "runs/suite";
    auto* suite = app.add_subcommand("suite", "Run several configs over several seeds");
    suite->add_option("--configs", configs_glob, "Glob of YAML config files")->required();
    suite->add_option("--seeds", seeds_text, "Comma separated seeds");
    suite->add_option("--set", overrides, "Leaf override applied to every config");
    suite->add_option("--out", suite_dir, "Directory for suite.csv and suite.md");

    std::string method;
    std::string targets_text;
    std::string sweep_seeds;
    auto* sweep = app.add_subcommand("sweep", "Accuracy over memory budget targets");
    sweep->add_option("--method", method, "Method id")->required();
    sweep->add_option("--targets", targets_text, "Comma separated budgets in MB")->required();
    sweep->add_option("--config", config_path, "Base YAML config")->required()->check(CLI::ExistingFile);
    sweep->add_option("--seeds", sweep_seeds, "Comma separated seeds (default: config seed)");
    sweep->add_option("--set", overrides, "Leaf override key=value, applied last");

    auto* compose = app.add_subcommand("compose", "Print the task sequence JSON");
    compose->add_option("--config", config_path, "YAML config file")->required()->check(CLI::ExistingFile);
    compose->add_option("--set", overrides, "Leaf override key=value, applied last");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const auto cfg = clbench::load_config(config_path, std::nullopt, overrides);
            clbench::RunOptions options;
            if (!quiet) {
                options.on_event = [](const nlohmann::json& event) {
                    if (event.contains("event")) {
                        std::clog << event.dump() << '\n';
                    }
                };
            }
            const auto record = clbench::run_experiment(cfg, options);
            print_metrics(record);
            return kExitOk;
        }
        if (suite->parsed()) {
            std::vector<clbench::SuiteEntry> entries;
            for (const auto& path : expand_glob(configs_glob)) {
                entries.push_back({std::filesystem::path(path).stem().string(),
                                   clbench::load_config(path, std::nullopt, overrides)});
            }
            const auto seeds = parse_list<std::uint64_t>(seeds_text, "seeds");
            clbench::RunOptions options;
            options.log_batches = false;
            const auto table = clbench::run_suite(entries, seeds, std::filesystem::path(suite_dir), options);
            std::cout << table.to_markdown();
            bool any_success = false;
            for (const auto& row : table.rows) {
                any_success = any_success || !row.last_acc.empty();
            }
            return any_success ? kExitOk : kExitTraining;
        }
        if (sweep->parsed()) {
            const auto cfg = clbench::load_config(config_path, std::nullopt, overrides);
            const auto targets = parse_list<double>(targets_text, "targets");
            std::vector<std::uint64_t> seeds;
            if (!sweep_seeds.empty()) {
                seeds = parse_list<std::uint64_t>(sweep_seeds, "seeds");
            }
            clbench::RunOptions options;
            options.log_batches = false;
            const auto rows = clbench::sweep_memory(method, targets, cfg, seeds, options);
            std::cout << clbench::sweep_csv(rows);
            return kExitOk;
        }
        if (compose->parsed()) {
            const auto cfg = clbench::load_config(config_path, std::nullopt, overrides);
            const auto data = clbench::prepare_experiment(cfg);
            std::cout << data->sequence.to_json().dump(2) << '\n';
            return kExitOk;
        }
    } catch (const clbench::TrainingFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitTraining;
    } catch (const clbench::InfeasibleBudget& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const clbench::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const clbench::UnsupportedMethod& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const clbench::DataError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const clbench::ShapeError& e) {
        // Outside training a shape error can only come from the configured geometry.
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitTraining;
    }
    return kExitOk;
}
