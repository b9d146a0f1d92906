#include "clbench/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace clbench {
namespace {

std::string join_path(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
}

ConfigTree scalar_from_yaml(const YAML::Node& node) {
    const std::string& text = node.Scalar();
    // Quoted scalars carry the non-specific "!" tag and stay strings.
    if (node.Tag() == "!") {
        return text;
    }
    if (text.empty() || text == "~" || text == "null" || text == "Null" || text == "NULL") {
        return nullptr;
    }
    if (text == "true" || text == "True" || text == "TRUE") {
        return true;
    }
    if (text == "false" || text == "False" || text == "FALSE") {
        return false;
    }
    {
        std::istringstream in(text);
        long long as_int = 0;
        if ((in >> as_int) && in.eof()) {
            return as_int;
        }
    }
    {
        std::istringstream in(text);
        unsigned long long as_uint = 0;
        if (text.front() != '-' && (in >> as_uint) && in.eof()) {
            return as_uint;
        }
    }
    {
        std::istringstream in(text);
        double as_double = 0.0;
        if ((in >> as_double) && in.eof()) {
            return as_double;
        }
    }
    return text;
}

ConfigTree tree_from_yaml(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined:
            return nullptr;
        case YAML::NodeType::Scalar:
            return scalar_from_yaml(node);
        case YAML::NodeType::Sequence: {
            ConfigTree out = ConfigTree::array();
            for (const auto& item : node) {
                out.push_back(tree_from_yaml(item));
            }
            return out;
        }
        case YAML::NodeType::Map: {
            ConfigTree out = ConfigTree::object();
            for (const auto& kv : node) {
                out[kv.first.as<std::string>()] = tree_from_yaml(kv.second);
            }
            return out;
        }
    }
    return nullptr;
}

void emit_tree(YAML::Emitter& out, const ConfigTree& tree) {
    if (tree.is_object()) {
        out << YAML::BeginMap;
        for (const auto& [key, value] : tree.items()) {
            out << YAML::Key << key << YAML::Value;
            emit_tree(out, value);
        }
        out << YAML::EndMap;
    } else if (tree.is_array()) {
        out << YAML::BeginSeq;
        for (const auto& item : tree) {
            emit_tree(out, item);
        }
        out << YAML::EndSeq;
    } else if (tree.is_null()) {
        out << YAML::Null;
    } else if (tree.is_boolean()) {
        out << tree.get<bool>();
    } else if (tree.is_number_unsigned()) {
        out << tree.get<std::uint64_t>();
    } else if (tree.is_number_integer()) {
        out << tree.get<std::int64_t>();
    } else if (tree.is_number_float()) {
        // Shortest text that round-trips the double.
        std::ostringstream text;
        text.precision(17);
        text << tree.get<double>();
        std::string repr = text.str();
        for (int precision = 1; precision <= 17; ++precision) {
            std::ostringstream probe;
            probe.precision(precision);
            probe << tree.get<double>();
            if (std::stod(probe.str()) == tree.get<double>()) {
                repr = probe.str();
                break;
            }
        }
        if (repr.find_first_of(".eEn") == std::string::npos) {
            repr += ".0";
        }
        out << repr;
    } else {
        const auto text = tree.get<std::string>();
        // Keep strings that would re-parse as numbers/bools as strings.
        const ConfigTree reparsed = scalar_from_yaml(YAML::Load(text.empty() ? "''" : text));
        if (!reparsed.is_string() || text.empty()) {
            out << YAML::DoubleQuoted << text;
        } else {
            out << text;
        }
    }
}

[[noreturn]] void type_error(const std::string& path, const std::string& expected) {
    throw ConfigError(path, "expected " + expected);
}

std::int64_t read_int(const ConfigTree& node, const std::string& path) {
    if (node.is_number_integer()) {
        return node.get<std::int64_t>();
    }
    type_error(path, "an integer");
}

std::uint64_t read_uint(const ConfigTree& node, const std::string& path) {
    if (node.is_number_unsigned()) {
        return node.get<std::uint64_t>();
    }
    if (node.is_number_integer() && node.get<std::int64_t>() >= 0) {
        return static_cast<std::uint64_t>(node.get<std::int64_t>());
    }
    type_error(path, "a non-negative integer");
}

double read_double(const ConfigTree& node, const std::string& path) {
    if (node.is_number()) {
        return node.get<double>();
    }
    type_error(path, "a number");
}

std::string read_string(const ConfigTree& node, const std::string& path) {
    if (node.is_string()) {
        return node.get<std::string>();
    }
    type_error(path, "a string");
}

void require_object(const ConfigTree& node, const std::string& path) {
    if (!node.is_object()) {
        type_error(path, "a mapping");
    }
}

void reject_unknown(const ConfigTree& node, const std::string& path, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : node.items()) {
        if (!allowed.contains(key)) {
            throw ConfigError(join_path(path, key), "unknown key");
        }
    }
}

void require_positive(std::int64_t value, const std::string& path) {
    if (value <= 0) {
        throw ConfigError(path, "must be positive, got " + std::to_string(value));
    }
}

void require_non_negative(std::int64_t value, const std::string& path) {
    if (value < 0) {
        throw ConfigError(path, "must be non-negative, got " + std::to_string(value));
    }
}

template <typename Enum>
Enum read_enum(const ConfigTree& node, const std::string& path,
               const std::vector<std::pair<std::string, Enum>>& choices) {
    const std::string text = read_string(node, path);
    std::string accepted;
    for (const auto& [name, value] : choices) {
        if (text == name) {
            return value;
        }
        accepted += (accepted.empty() ? "" : ", ") + name;
    }
    throw ConfigError(path, "unknown value '" + text + "' (accepted: " + accepted + ")");
}

const std::vector<std::pair<std::string, SemanticSetting>> kSemanticChoices = {
    {"traditional", SemanticSetting::traditional},
    {"cross_domain", SemanticSetting::cross_domain},
    {"category_randomized", SemanticSetting::category_randomized}};
const std::vector<std::pair<std::string, Scenario>> kScenarioChoices = {
    {"task_aware", Scenario::task_aware}, {"task_agnostic", Scenario::task_agnostic}};
const std::vector<std::pair<std::string, StreamKind>> kStreamChoices = {
    {"offline", StreamKind::offline}, {"online", StreamKind::online}};
const std::vector<std::pair<std::string, BufferStrategy>> kStrategyChoices = {
    {"reservoir", BufferStrategy::reservoir},
    {"balanced_random", BufferStrategy::balanced_random},
    {"herding", BufferStrategy::herding}};

template <typename Enum>
std::string enum_name(Enum value, const std::vector<std::pair<std::string, Enum>>& choices) {
    for (const auto& [name, candidate] : choices) {
        if (candidate == value) {
            return name;
        }
    }
    return "?";
}

std::string scalar_text(const ConfigTree& node, const std::string& path) {
    if (node.is_string()) {
        return node.get<std::string>();
    }
    if (node.is_boolean()) {
        return node.get<bool>() ? "true" : "false";
    }
    if (node.is_number()) {
        return node.dump();
    }
    type_error(path, "a scalar");
}

ConfigTree param_value_to_tree(const std::string& text) {
    return scalar_from_yaml(YAML::Load(text));
}

void merge_into(ConfigTree& target, const ConfigTree& overlay, const std::string& path) {
    for (const auto& [key, value] : overlay.items()) {
        const std::string child = join_path(path, key);
        if (!target.contains(key)) {
            target[key] = value;
            continue;
        }
        ConfigTree& existing = target[key];
        const bool existing_map = existing.is_object();
        const bool incoming_map = value.is_object();
        if (existing_map && incoming_map) {
            merge_into(existing, value, child);
        } else if (existing_map != incoming_map && !existing.is_null() && !value.is_null()) {
            throw ConfigError(child, "type conflict between mapping and non-mapping values");
        } else {
            existing = value;
        }
    }
}

}  // namespace

std::string to_string(SemanticSetting value) { return enum_name(value, kSemanticChoices); }
std::string to_string(Scenario value) { return enum_name(value, kScenarioChoices); }
std::string to_string(StreamKind value) { return enum_name(value, kStreamChoices); }
std::string to_string(BufferStrategy value) { return enum_name(value, kStrategyChoices); }

double MethodParams::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    try {
        std::size_t used = 0;
        const double value = std::stod(it->second, &used);
        if (used == it->second.size()) {
            return value;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError("method_params." + key, "expected a number, got '" + it->second + "'");
}

std::int64_t MethodParams::get_int(const std::string& key, std::int64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    try {
        std::size_t used = 0;
        const long long value = std::stoll(it->second, &used);
        if (used == it->second.size()) {
            return value;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError("method_params." + key, "expected an integer, got '" + it->second + "'");
}

std::string MethodParams::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::int64_t ExperimentConfig::class_demand() const noexcept {
    return init_cls_num > 0 ? init_cls_num + inc_cls_num * (task_num - 1) : inc_cls_num * task_num;
}

ConfigTree default_config_tree() { return config_to_tree(ExperimentConfig{}); }

ConfigTree parse_config_tree(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError("", std::string("parse failure: ") + e.what());
    }
    ConfigTree tree = tree_from_yaml(root);
    if (tree.is_null()) {
        return ConfigTree::object();
    }
    if (!tree.is_object()) {
        throw ConfigError("", "top level must be a mapping");
    }
    return tree;
}

ConfigTree read_config_tree(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("", "cannot open config file '" + path.string() + "'");
    }
    std::stringstream text;
    text << in.rdbuf();
    try {
        return parse_config_tree(text.str());
    } catch (const ConfigError& e) {
        throw ConfigError(e.key_path(), path.string() + ": " + e.what());
    }
}

std::string emit_config_tree(const ConfigTree& tree) {
    YAML::Emitter out;
    emit_tree(out, tree);
    return std::string(out.c_str()) + "\n";
}

ConfigTree merge_configs(const ConfigTree& base, const ConfigTree& override_tree) {
    if (!base.is_object() || !override_tree.is_object()) {
        if (base.is_object() != override_tree.is_object() && !base.is_null() && !override_tree.is_null()) {
            throw ConfigError("", "type conflict between mapping and non-mapping values");
        }
        return override_tree;
    }
    ConfigTree result = base;
    merge_into(result, override_tree, "");
    return result;
}

void apply_set_override(ConfigTree& tree, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("", "override must look like key.path=value, got '" + assignment + "'");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string value_text = assignment.substr(eq + 1);
    ConfigTree value;
    try {
        value = tree_from_yaml(YAML::Load(value_text.empty() ? "''" : value_text));
    } catch (const YAML::Exception& e) {
        throw ConfigError(path, std::string("cannot parse override value: ") + e.what());
    }

    ConfigTree overlay = ConfigTree::object();
    ConfigTree* cursor = &overlay;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) {
            throw ConfigError(path, "empty key segment");
        }
        if (dot == std::string::npos) {
            (*cursor)[key] = value;
            break;
        }
        cursor = &(*cursor)[key];
        *cursor = ConfigTree::object();
        start = dot + 1;
    }
    tree = merge_configs(tree, overlay);
}

ExperimentConfig config_from_tree(const ConfigTree& tree) {
    require_object(tree, "");
    reject_unknown(tree, "",
                   {"dataset_names", "data_root", "synthetic", "semantic_setting", "init_cls_num", "inc_cls_num",
                    "task_num", "scenario", "stream", "epochs", "batch_size", "method", "method_params", "buffer",
                    "optimizer", "backbone", "seed", "output_dir"});

    ExperimentConfig cfg;
    const auto has = [&](const char* key) { return tree.contains(key) && !tree.at(key).is_null(); };

    if (has("dataset_names")) {
        const auto& node = tree.at("dataset_names");
        cfg.dataset_names.clear();
        if (node.is_string()) {
            cfg.dataset_names.push_back(node.get<std::string>());
        } else if (node.is_array()) {
            for (std::size_t i = 0; i < node.size(); ++i) {
                cfg.dataset_names.push_back(read_string(node[i], "dataset_names[" + std::to_string(i) + "]"));
            }
        } else {
            type_error("dataset_names", "a list of identifiers");
        }
        if (cfg.dataset_names.empty()) {
            throw ConfigError("dataset_names", "at least one dataset is required");
        }
    }
    if (has("data_root")) cfg.data_root = read_string(tree.at("data_root"), "data_root");
    if (has("synthetic")) {
        const auto& node = tree.at("synthetic");
        require_object(node, "synthetic");
        reject_unknown(node, "synthetic",
                       {"classes", "train_per_class", "test_per_class", "height", "width", "channels", "latent_dim",
                        "modes_per_class", "separation", "mode_spread", "noise"});
        auto& syn = cfg.synthetic;
        const auto int_field = [&](const char* key, std::int64_t& field) {
            if (node.contains(key) && !node.at(key).is_null()) {
                field = read_int(node.at(key), std::string("synthetic.") + key);
                require_positive(field, std::string("synthetic.") + key);
            }
        };
        const auto real_field = [&](const char* key, double& field) {
            if (node.contains(key) && !node.at(key).is_null()) {
                field = read_double(node.at(key), std::string("synthetic.") + key);
                if (field < 0.0) throw ConfigError(std::string("synthetic.") + key, "must be non-negative");
            }
        };
        int_field("classes", syn.classes);
        int_field("train_per_class", syn.train_per_class);
        int_field("test_per_class", syn.test_per_class);
        int_field("height", syn.height);
        int_field("width", syn.width);
        int_field("channels", syn.channels);
        int_field("latent_dim", syn.latent_dim);
        int_field("modes_per_class", syn.modes_per_class);
        real_field("separation", syn.separation);
        real_field("mode_spread", syn.mode_spread);
        real_field("noise", syn.noise);
    }
    if (has("semantic_setting")) {
        cfg.semantic_setting = read_enum(tree.at("semantic_setting"), "semantic_setting", kSemanticChoices);
    }
    if (has("init_cls_num")) cfg.init_cls_num = read_int(tree.at("init_cls_num"), "init_cls_num");
    if (has("inc_cls_num")) cfg.inc_cls_num = read_int(tree.at("inc_cls_num"), "inc_cls_num");
    if (has("task_num")) cfg.task_num = read_int(tree.at("task_num"), "task_num");
    if (has("scenario")) cfg.scenario = read_enum(tree.at("scenario"), "scenario", kScenarioChoices);
    if (has("stream")) cfg.stream = read_enum(tree.at("stream"), "stream", kStreamChoices);
    if (has("epochs")) cfg.epochs = read_int(tree.at("epochs"), "epochs");
    if (has("batch_size")) cfg.batch_size = read_int(tree.at("batch_size"), "batch_size");
    if (has("method")) cfg.method = read_string(tree.at("method"), "method");
    if (has("method_params")) {
        const auto& node = tree.at("method_params");
        require_object(node, "method_params");
        std::map<std::string, std::string> values;
        for (const auto& [key, value] : node.items()) {
            if (!value.is_null()) {
                values[key] = scalar_text(value, "method_params." + key);
            }
        }
        cfg.method_params = MethodParams(std::move(values));
    }
    if (has("buffer")) {
        const auto& node = tree.at("buffer");
        require_object(node, "buffer");
        reject_unknown(node, "buffer", {"strategy", "capacity", "budget_bytes"});
        if (node.contains("strategy") && !node.at("strategy").is_null()) {
            cfg.buffer.strategy = read_enum(node.at("strategy"), "buffer.strategy", kStrategyChoices);
        }
        if (node.contains("capacity") && !node.at("capacity").is_null()) {
            cfg.buffer.capacity = read_int(node.at("capacity"), "buffer.capacity");
            require_non_negative(cfg.buffer.capacity, "buffer.capacity");
        }
        if (node.contains("budget_bytes") && !node.at("budget_bytes").is_null()) {
            cfg.buffer.budget_bytes = read_int(node.at("budget_bytes"), "buffer.budget_bytes");
            require_non_negative(*cfg.buffer.budget_bytes, "buffer.budget_bytes");
        }
    }
    if (has("optimizer")) {
        const auto& node = tree.at("optimizer");
        require_object(node, "optimizer");
        reject_unknown(node, "optimizer", {"name", "learning_rate", "momentum", "weight_decay", "decay_schedule"});
        auto& opt = cfg.optimizer;
        if (node.contains("name") && !node.at("name").is_null()) {
            opt.name = read_string(node.at("name"), "optimizer.name");
            if (opt.name != "sgd" && opt.name != "adam") {
                throw ConfigError("optimizer.name", "unknown optimizer '" + opt.name + "' (accepted: sgd, adam)");
            }
        }
        if (node.contains("learning_rate") && !node.at("learning_rate").is_null()) {
            opt.learning_rate = read_double(node.at("learning_rate"), "optimizer.learning_rate");
            if (!(opt.learning_rate > 0.0)) throw ConfigError("optimizer.learning_rate", "must be positive");
        }
        if (node.contains("momentum") && !node.at("momentum").is_null()) {
            opt.momentum = read_double(node.at("momentum"), "optimizer.momentum");
            if (opt.momentum < 0.0 || opt.momentum >= 1.0) throw ConfigError("optimizer.momentum", "must be in [0, 1)");
        }
        if (node.contains("weight_decay") && !node.at("weight_decay").is_null()) {
            opt.weight_decay = read_double(node.at("weight_decay"), "optimizer.weight_decay");
            if (opt.weight_decay < 0.0) throw ConfigError("optimizer.weight_decay", "must be non-negative");
        }
        if (node.contains("decay_schedule") && !node.at("decay_schedule").is_null()) {
            const auto& sched = node.at("decay_schedule");
            if (sched.is_string()) {
                opt.decay_schedule.name = sched.get<std::string>();
            } else {
                require_object(sched, "optimizer.decay_schedule");
                reject_unknown(sched, "optimizer.decay_schedule", {"name", "step_size", "gamma"});
                if (sched.contains("name")) opt.decay_schedule.name = read_string(sched.at("name"), "optimizer.decay_schedule.name");
                if (sched.contains("step_size")) {
                    opt.decay_schedule.step_size = read_int(sched.at("step_size"), "optimizer.decay_schedule.step_size");
                    require_positive(opt.decay_schedule.step_size, "optimizer.decay_schedule.step_size");
                }
                if (sched.contains("gamma")) opt.decay_schedule.gamma = read_double(sched.at("gamma"), "optimizer.decay_schedule.gamma");
            }
            if (opt.decay_schedule.name != "constant" && opt.decay_schedule.name != "step") {
                throw ConfigError("optimizer.decay_schedule.name",
                                  "unknown schedule '" + opt.decay_schedule.name + "' (accepted: constant, step)");
            }
        }
    }
    if (has("backbone")) {
        const auto& node = tree.at("backbone");
        require_object(node, "backbone");
        reject_unknown(node, "backbone", {"arch", "hidden", "feature_dim"});
        if (node.contains("arch") && !node.at("arch").is_null()) cfg.backbone.arch = read_string(node.at("arch"), "backbone.arch");
        if (node.contains("hidden") && !node.at("hidden").is_null()) {
            const auto& hidden = node.at("hidden");
            if (!hidden.is_array()) type_error("backbone.hidden", "a list of integers");
            cfg.backbone.hidden.clear();
            for (std::size_t i = 0; i < hidden.size(); ++i) {
                const std::string path = "backbone.hidden[" + std::to_string(i) + "]";
                cfg.backbone.hidden.push_back(read_int(hidden[i], path));
                require_positive(cfg.backbone.hidden.back(), path);
            }
        }
        if (node.contains("feature_dim") && !node.at("feature_dim").is_null()) {
            cfg.backbone.feature_dim = read_int(node.at("feature_dim"), "backbone.feature_dim");
            require_positive(cfg.backbone.feature_dim, "backbone.feature_dim");
        }
    }
    if (has("seed")) cfg.seed = read_uint(tree.at("seed"), "seed");
    if (has("output_dir")) cfg.output_dir = read_string(tree.at("output_dir"), "output_dir");

    require_non_negative(cfg.init_cls_num, "init_cls_num");
    require_positive(cfg.inc_cls_num, "inc_cls_num");
    require_positive(cfg.task_num, "task_num");
    require_positive(cfg.epochs, "epochs");
    require_positive(cfg.batch_size, "batch_size");
    if (cfg.online() && cfg.epochs != 1) {
        throw ConfigError("epochs", "online streams are single-pass; epochs must be 1, got " + std::to_string(cfg.epochs));
    }
    return cfg;
}

ConfigTree config_to_tree(const ExperimentConfig& cfg) {
    ConfigTree tree = ConfigTree::object();
    tree["dataset_names"] = cfg.dataset_names;
    tree["data_root"] = cfg.data_root;
    const auto& syn = cfg.synthetic;
    tree["synthetic"] = {{"classes", syn.classes},
                         {"train_per_class", syn.train_per_class},
                         {"test_per_class", syn.test_per_class},
                         {"height", syn.height},
                         {"width", syn.width},
                         {"channels", syn.channels},
                         {"latent_dim", syn.latent_dim},
                         {"modes_per_class", syn.modes_per_class},
                         {"separation", syn.separation},
                         {"mode_spread", syn.mode_spread},
                         {"noise", syn.noise}};
    tree["semantic_setting"] = to_string(cfg.semantic_setting);
    tree["init_cls_num"] = cfg.init_cls_num;
    tree["inc_cls_num"] = cfg.inc_cls_num;
    tree["task_num"] = cfg.task_num;
    tree["scenario"] = to_string(cfg.scenario);
    tree["stream"] = to_string(cfg.stream);
    tree["epochs"] = cfg.epochs;
    tree["batch_size"] = cfg.batch_size;
    tree["method"] = cfg.method;
    ConfigTree params = ConfigTree::object();
    for (const auto& [key, value] : cfg.method_params.values()) {
        params[key] = param_value_to_tree(value);
    }
    tree["method_params"] = params;
    tree["buffer"] = {{"strategy", cfg.buffer.strategy ? ConfigTree(to_string(*cfg.buffer.strategy)) : ConfigTree()},
                      {"capacity", cfg.buffer.capacity},
                      {"budget_bytes", cfg.buffer.budget_bytes ? ConfigTree(*cfg.buffer.budget_bytes) : ConfigTree()}};
    const auto& opt = cfg.optimizer;
    tree["optimizer"] = {{"name", opt.name},
                         {"learning_rate", opt.learning_rate},
                         {"momentum", opt.momentum},
                         {"weight_decay", opt.weight_decay},
                         {"decay_schedule",
                          {{"name", opt.decay_schedule.name},
                           {"step_size", opt.decay_schedule.step_size},
                           {"gamma", opt.decay_schedule.gamma}}}};
    tree["backbone"] = {{"arch", cfg.backbone.arch}, {"hidden", cfg.backbone.hidden}, {"feature_dim", cfg.backbone.feature_dim}};
    tree["seed"] = cfg.seed;
    tree["output_dir"] = cfg.output_dir;
    return tree;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::optional<std::filesystem::path>& defaults_path,
                             const std::vector<std::string>& set_overrides) {
    if (!std::filesystem::exists(path)) {
        throw ConfigError("", "config file not found: '" + path.string() + "'");
    }
    ConfigTree tree = defaults_path ? merge_configs(default_config_tree(), read_config_tree(*defaults_path))
                                    : default_config_tree();
    tree = merge_configs(tree, read_config_tree(path));
    for (const auto& assignment : set_overrides) {
        apply_set_override(tree, assignment);
    }
    return config_from_tree(tree);
}

void write_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("", "cannot write config file '" + path.string() + "'");
    }
    out << emit_config_tree(config_to_tree(cfg));
}

const ExperimentConfig& validate_config(const ExperimentConfig& cfg, const CatalogSummary& catalog_summary) {
    if (cfg.online() && cfg.epochs > 1) {
        throw ConfigError("epochs", "online streams are single-pass; epochs must be 1");
    }
    std::int64_t available = 0;
    for (const auto& name : cfg.dataset_names) {
        const auto it = catalog_summary.find(name);
        if (it == catalog_summary.end()) {
            throw ConfigError("dataset_names", "no catalog entry for dataset '" + name + "'");
        }
        available += it->second;
    }
    const std::int64_t demand = cfg.class_demand();
    switch (cfg.semantic_setting) {
        case SemanticSetting::traditional:
            if (cfg.dataset_names.size() != 1) {
                throw ConfigError("dataset_names", "traditional setting partitions a single dataset");
            }
            [[fallthrough]];
        case SemanticSetting::category_randomized:
            if (demand > available) {
                throw ConfigError("task_num", "class partition needs " + std::to_string(demand) + " classes but only " +
                                                  std::to_string(available) + " are available");
            }
            break;
        case SemanticSetting::cross_domain:
            if (cfg.task_num != static_cast<std::int64_t>(cfg.dataset_names.size())) {
                throw ConfigError("task_num", "cross-domain sequences have one task per dataset (" +
                                                  std::to_string(cfg.dataset_names.size()) + ")");
            }
            break;
    }
    return cfg;
}

}  // namespace clbench
