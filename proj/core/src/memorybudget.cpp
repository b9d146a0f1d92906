#include "clbench/memorybudget.hpp"

#include <cmath>
#include <cstdio>

namespace clbench {

std::string to_string(StorageKind kind) {
    switch (kind) {
        case StorageKind::image: return "image";
        case StorageKind::feature: return "feature";
        case StorageKind::model: return "model";
        case StorageKind::parameter: return "parameter";
        case StorageKind::prompt: return "prompt";
    }
    return "unknown";
}

StorageKind parse_storage_kind(const std::string& name) {
    if (name == "image") return StorageKind::image;
    if (name == "feature") return StorageKind::feature;
    if (name == "model") return StorageKind::model;
    if (name == "parameter") return StorageKind::parameter;
    if (name == "prompt") return StorageKind::prompt;
    throw Error("unknown storage kind '" + name + "'");
}

void StorageLedger::add(StorageKind kind, std::int64_t count, std::int64_t unit_cost, std::string label) {
    if (count < 0) {
        throw Error("storage entry '" + label + "' has negative count " + std::to_string(count));
    }
    entries.push_back({kind, count, unit_cost, std::move(label)});
}

StorageLedger StorageLedger::merged(const StorageLedger& other) const {
    StorageLedger out = *this;
    out.entries.insert(out.entries.end(), other.entries.begin(), other.entries.end());
    out.frozen_param_units += other.frozen_param_units;
    out.declared_total_units.reset();
    return out;
}

nlohmann::json StorageLedger::to_json() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& e : entries) {
        list.push_back({{"kind", clbench::to_string(e.kind)}, {"count", e.count}, {"unit_cost", e.unit_cost},
                        {"label", e.label}});
    }
    nlohmann::json out = {{"entries", list},
                          {"frozen_param_units", frozen_param_units},
                          {"total_units", compute_budget(*this).total_units}};
    if (declared_total_units) {
        out["declared_total_units"] = *declared_total_units;
    }
    return out;
}

StorageLedger StorageLedger::from_json(const nlohmann::json& j) {
    StorageLedger out;
    for (const auto& e : j.at("entries")) {
        out.add(parse_storage_kind(e.at("kind").get<std::string>()), e.at("count").get<std::int64_t>(),
                e.at("unit_cost").get<std::int64_t>(), e.value("label", std::string{}));
    }
    out.frozen_param_units = j.value("frozen_param_units", std::int64_t{0});
    if (j.contains("declared_total_units")) {
        out.declared_total_units = j.at("declared_total_units").get<std::int64_t>();
    }
    return out;
}

std::string Budget::display() const {
    char text[64];
    std::snprintf(text, sizeof text, "%.2f M", total_mb);
    return text;
}

Budget compute_budget(const StorageLedger& ledger, bool include_frozen) {
    std::int64_t total = 0;
    for (const auto& e : ledger.entries) {
        if (e.count < 0) {
            throw Error("storage entry '" + e.label + "' has negative count " + std::to_string(e.count));
        }
        total += e.units();
    }
    if (include_frozen) {
        total += ledger.frozen_param_units;
    }
    return {total, static_cast<double>(total) / 1e6};
}

StorageLedger ledger_from_run(const nlohmann::json& buffer_manifest, const ParameterCensus& census_info,
                              std::span<const StateDescriptor> descriptors, const LedgerOptions& options) {
    StorageLedger ledger;
    if (!buffer_manifest.is_null()) {
        ledger.add(StorageKind::image, buffer_manifest.at("image_values").get<std::int64_t>(), kImageUnitCost,
                   "buffer");
    }
    for (const auto& d : descriptors) {
        StorageKind kind;
        if (d.kind == "snapshot") {
            kind = StorageKind::model;
        } else if (d.kind == "basis" || d.kind == "statistic") {
            kind = StorageKind::feature;
        } else if (d.kind == "head" || d.kind == "bias_correction") {
            kind = StorageKind::parameter;
        } else if (d.kind == "prompt") {
            kind = StorageKind::prompt;
        } else {
            throw Error("unknown state descriptor kind '" + d.kind + "' for '" + d.name + "'");
        }
        ledger.add(kind, d.elements, kNumericUnitCost, d.name);
    }
    for (const auto& component : census_info.components) {
        if (component.name == "encoder") {
            ledger.frozen_param_units += component.frozen * kNumericUnitCost;
        }
    }
    if (options.include_trainable_params) {
        ledger.add(StorageKind::parameter, census_info.trainable(), kNumericUnitCost, "trainable_params");
    }
    return ledger;
}

std::vector<std::string> reference_ledger_methods() { return {"icarl", "gpm", "l2p", "moe_adapter4cl"}; }

StorageLedger reference_ledger(const std::string& method) {
    StorageLedger ledger;
    if (method == "icarl") {
        ledger.add(StorageKind::image, 2000 * 32 * 32 * 3, kImageUnitCost, "exemplars");
        ledger.add(StorageKind::model, 472'756, kNumericUnitCost, "previous_model");
        ledger.add(StorageKind::parameter, 472'756, kNumericUnitCost, "trainable_params");
    } else if (method == "gpm") {
        const std::int64_t widths[] = {48, 576, 512, 1024, 2048};
        std::int64_t features = 0;
        for (const auto w : widths) {
            features += w * w;
        }
        ledger.add(StorageKind::feature, features, kNumericUnitCost, "bases");
        ledger.add(StorageKind::parameter, 6'704'128, kNumericUnitCost, "trainable_params");
    } else if (method == "l2p") {
        ledger.add(StorageKind::prompt, 46'080, kNumericUnitCost, "prompts");
        ledger.frozen_param_units = 491'920;
        ledger.declared_total_units = 491'920;
    } else if (method == "moe_adapter4cl") {
        ledger.add(StorageKind::parameter, 4'104'292, kNumericUnitCost, "adapters");
        ledger.frozen_param_units = 16'417'168;
    } else {
        throw Error("no reference ledger for '" + method + "'");
    }
    return ledger;
}

namespace {

enum class Knob { none, buffer_capacity, basis_cap, projection_dim };

Knob knob_of(const std::string& method) {
    if (method == "er" || method == "erace" || method == "icarl" || method == "bic" || method == "wa") {
        return Knob::buffer_capacity;
    }
    if (method == "gpm") return Knob::basis_cap;
    if (method == "ranpac") return Knob::projection_dim;
    return Knob::none;
}

std::string knob_key(Knob knob) {
    switch (knob) {
        case Knob::buffer_capacity: return "buffer.capacity";
        case Knob::basis_cap: return "method_params.basis_cap";
        case Knob::projection_dim: return "method_params.projection_dim";
        case Knob::none: break;
    }
    return {};
}

std::int64_t knob_limit(Knob knob, const PricingRules& rules) {
    if (knob == Knob::basis_cap) {
        std::int64_t widest = 0;
        for (const auto w : rules.layer_widths) widest = std::max(widest, w);
        return widest;
    }
    if (knob == Knob::projection_dim) {
        return std::int64_t{1} << 20;
    }
    return std::int64_t{1} << 40;
}

}  // namespace

std::optional<std::int64_t> priced_units(const std::string& method, std::int64_t knob, const PricingRules& rules) {
    switch (knob_of(method)) {
        case Knob::buffer_capacity: {
            std::int64_t units = knob * rules.image_values * kImageUnitCost;
            if (method == "icarl" || method == "bic" || method == "wa") {
                units += rules.model_params * kNumericUnitCost;  // previous-model snapshot
            }
            return units;
        }
        case Knob::basis_cap: {
            std::int64_t elements = 0;
            for (const auto w : rules.layer_widths) {
                elements += std::min(knob, w) * w;
            }
            return elements * kNumericUnitCost;
        }
        case Knob::projection_dim:
            return kNumericUnitCost * (knob * rules.feature_dim + knob * knob + knob * rules.classes);
        case Knob::none:
            break;
    }
    return std::nullopt;
}

std::vector<std::string> SweepPoint::overrides() const {
    if (fixed) {
        return {};
    }
    return {knob_key + "=" + std::to_string(knob)};
}

std::vector<SweepPoint> plan_sweep(const std::string& method, std::span<const double> targets_mb,
                                   const PricingRules& rules) {
    const Knob knob = knob_of(method);
    if (knob == Knob::none) {
        SweepPoint point;
        point.fixed = true;
        return {point};
    }
    std::vector<SweepPoint> out;
    for (const double target_mb : targets_mb) {
        if (!(target_mb > 0.0) || !std::isfinite(target_mb)) {
            throw InfeasibleBudget("budget target must be a positive number of MB");
        }
        const auto target_units = static_cast<std::int64_t>(std::floor(target_mb * 1e6 + 1e-6));
        const auto cost = [&](std::int64_t k) { return *priced_units(method, k, rules); };
        if (cost(1) > target_units) {
            throw InfeasibleBudget(method + ": " + std::to_string(target_mb) + " MB is below the minimum footprint of " +
                                   std::to_string(cost(1)) + " units");
        }
        // Largest k with cost(k) <= target; cost is non-decreasing in k.
        std::int64_t lo = 1;
        std::int64_t hi = knob_limit(knob, rules);
        if (cost(hi) <= target_units) {
            lo = hi;
        }
        while (lo < hi) {
            const std::int64_t mid = lo + (hi - lo + 1) / 2;
            if (cost(mid) <= target_units) {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        SweepPoint point;
        point.target_mb = target_mb;
        point.knob_key = knob_key(knob);
        point.knob = lo;
        point.achieved_units = cost(lo);
        out.push_back(point);
    }
    return out;
}

}  // namespace clbench
