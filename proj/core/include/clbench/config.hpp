#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clbench/common.hpp"

namespace clbench {

enum class SemanticSetting { traditional, cross_domain, category_randomized };
enum class Scenario { task_aware, task_agnostic };
enum class StreamKind { offline, online };
enum class BufferStrategy { reservoir, balanced_random, herding };

[[nodiscard]] std::string to_string(SemanticSetting value);
[[nodiscard]] std::string to_string(Scenario value);
[[nodiscard]] std::string to_string(StreamKind value);
[[nodiscard]] std::string to_string(BufferStrategy value);

/// Method-specific knobs. Values keep their YAML scalar text; accessors parse on demand.
class MethodParams {
public:
    MethodParams() = default;
    explicit MethodParams(std::map<std::string, std::string> values) : values_(std::move(values)) {}

    [[nodiscard]] double get_double(const std::string& key, double fallback) const;
    [[nodiscard]] std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const;
    [[nodiscard]] bool contains(const std::string& key) const { return values_.contains(key); }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    [[nodiscard]] const std::map<std::string, std::string>& values() const noexcept { return values_; }

    bool operator==(const MethodParams&) const = default;

private:
    std::map<std::string, std::string> values_;
};

struct BufferConfig {
    /// Unset means the method's own convention (reservoir for ER, herding for iCaRL, ...).
    std::optional<BufferStrategy> strategy;
    std::int64_t capacity = 0;
    /// When set, capacity is derived from the image size at run time.
    std::optional<std::int64_t> budget_bytes;

    bool operator==(const BufferConfig&) const = default;
};

struct DecaySchedule {
    std::string name = "constant";  // constant | step
    std::int64_t step_size = 1;
    double gamma = 0.1;

    bool operator==(const DecaySchedule&) const = default;
};

struct OptimizerConfig {
    std::string name = "sgd";  // sgd | adam
    double learning_rate = 0.1;
    double momentum = 0.0;
    double weight_decay = 0.0;
    DecaySchedule decay_schedule;

    bool operator==(const OptimizerConfig&) const = default;
};

struct BackboneConfig {
    std::string arch = "mlp2";  // mlp2 | smallconv
    std::vector<std::int64_t> hidden = {100, 100};
    std::int64_t feature_dim = 100;

    bool operator==(const BackboneConfig&) const = default;
};

/// Parameters of the built-in synthetic image generator used by `synth:` datasets.
struct SyntheticConfig {
    std::int64_t classes = 10;
    std::int64_t train_per_class = 100;
    std::int64_t test_per_class = 50;
    std::int64_t height = 8;
    std::int64_t width = 8;
    std::int64_t channels = 1;
    std::int64_t latent_dim = 16;
    std::int64_t modes_per_class = 1;
    double separation = 3.0;
    double mode_spread = 1.0;
    double noise = 1.0;

    bool operator==(const SyntheticConfig&) const = default;
};

struct ExperimentConfig {
    std::vector<std::string> dataset_names = {"synth:blobs"};
    std::string data_root = "data";
    SyntheticConfig synthetic;
    SemanticSetting semantic_setting = SemanticSetting::traditional;
    std::int64_t init_cls_num = 0;
    std::int64_t inc_cls_num = 2;
    std::int64_t task_num = 5;
    Scenario scenario = Scenario::task_agnostic;
    StreamKind stream = StreamKind::offline;
    std::int64_t epochs = 1;
    std::int64_t batch_size = 10;
    std::string method = "finetune";
    MethodParams method_params;
    BufferConfig buffer;
    OptimizerConfig optimizer;
    BackboneConfig backbone;
    std::uint64_t seed = 0;
    std::string output_dir = "runs/default";

    [[nodiscard]] bool online() const noexcept { return stream == StreamKind::online; }
    /// Classes requested by the init/inc/task partition.
    [[nodiscard]] std::int64_t class_demand() const noexcept;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Key-value tree used for layered loading and merging. JSON's data model is
/// a superset of what the YAML files use.
using ConfigTree = nlohmann::json;

/// Built-in defaults layer.
[[nodiscard]] ConfigTree default_config_tree();

[[nodiscard]] ConfigTree read_config_tree(const std::filesystem::path& path);
[[nodiscard]] ConfigTree parse_config_tree(const std::string& yaml_text);
[[nodiscard]] std::string emit_config_tree(const ConfigTree& tree);

/// Deep merge, override wins at leaves, lists replace wholesale. Throws
/// ConfigError naming the path when one side is a map and the other is not.
[[nodiscard]] ConfigTree merge_configs(const ConfigTree& base, const ConfigTree& override_tree);

/// Applies a `--set a.b.c=value` override. The value is parsed as a YAML scalar.
void apply_set_override(ConfigTree& tree, const std::string& assignment);

[[nodiscard]] ExperimentConfig config_from_tree(const ConfigTree& tree);
[[nodiscard]] ConfigTree config_to_tree(const ExperimentConfig& cfg);

/// Loads `path` over the built-in defaults (or over `defaults_path` when given).
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path,
                                           const std::optional<std::filesystem::path>& defaults_path = std::nullopt,
                                           const std::vector<std::string>& set_overrides = {});

void write_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

/// Number of classes available per dataset name.
using CatalogSummary = std::map<std::string, std::int64_t>;

/// Checks the class partition against the available classes and the
/// online/epochs pairing. Returns `cfg` unchanged.
const ExperimentConfig& validate_config(const ExperimentConfig& cfg, const CatalogSummary& catalog_summary);

}  // namespace clbench
