#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clbench/config.hpp"
#include "clbench/learner.hpp"
#include "clbench/model.hpp"

namespace clbench {

enum class StorageKind { image, feature, model, parameter, prompt };

[[nodiscard]] std::string to_string(StorageKind kind);
[[nodiscard]] StorageKind parse_storage_kind(const std::string& name);

/// Units per stored item: one per image channel value, four per numeric element.
inline constexpr std::int64_t kImageUnitCost = 1;
inline constexpr std::int64_t kNumericUnitCost = 4;

struct StorageEntry {
    StorageKind kind = StorageKind::image;
    std::int64_t count = 0;
    std::int64_t unit_cost = kNumericUnitCost;
    std::string label;

    [[nodiscard]] std::int64_t units() const noexcept { return count * unit_cost; }
};

struct StorageLedger {
    std::vector<StorageEntry> entries;
    /// Frozen backbone storage; tracked, never part of the additional total.
    std::int64_t frozen_param_units = 0;
    /// A total stated by an external source that the entries do not explain.
    std::optional<std::int64_t> declared_total_units;

    void add(StorageKind kind, std::int64_t count, std::int64_t unit_cost, std::string label = {});
    /// Entry-wise concatenation; frozen units add up.
    [[nodiscard]] StorageLedger merged(const StorageLedger& other) const;

    /// {entries: [{kind, count, unit_cost, label}], frozen_param_units, total_units[, declared_total_units]}.
    [[nodiscard]] nlohmann::json to_json() const;
    [[nodiscard]] static StorageLedger from_json(const nlohmann::json& j);
};

struct Budget {
    std::int64_t total_units = 0;
    double total_mb = 0.0;

    /// Two-decimal decimal megabytes, e.g. "9.93 M".
    [[nodiscard]] std::string display() const;
};

/// Exact integer sum of count * unit_cost; MB = units / 10^6. With
/// `include_frozen` the frozen backbone is added for total-footprint reports.
[[nodiscard]] Budget compute_budget(const StorageLedger& ledger, bool include_frozen = false);

struct LedgerOptions {
    /// Adds a parameter entry for the trainable encoder and head.
    bool include_trainable_params = false;
};

/// Buffer manifest -> image entry; descriptor kinds map as snapshot -> model,
/// basis and statistic -> feature, head and bias_correction -> parameter,
/// prompt -> prompt. Frozen units are taken from the "encoder" census
/// component. `buffer_manifest` may be null.
[[nodiscard]] StorageLedger ledger_from_run(const nlohmann::json& buffer_manifest, const ParameterCensus& census_info,
                                            std::span<const StateDescriptor> descriptors,
                                            const LedgerOptions& options = {});

/// Component ledgers of the published accounting table: "icarl", "gpm", "l2p", "moe_adapter4cl".
[[nodiscard]] StorageLedger reference_ledger(const std::string& method);
[[nodiscard]] std::vector<std::string> reference_ledger_methods();

/// What plan_sweep needs to price a method's storage.
struct PricingRules {
    std::int64_t image_values = 0;      // channel values per stored image
    std::int64_t model_params = 0;      // parameters of encoder plus final head
    std::int64_t feature_dim = 0;
    std::int64_t classes = 0;
    std::vector<std::int64_t> layer_widths;  // encoder affine input widths
};

struct SweepPoint {
    /// Unset for fixed points.
    std::optional<double> target_mb;
    bool fixed = false;
    /// Dotted config key of the knob, e.g. "buffer.capacity"; empty when fixed.
    std::string knob_key;
    std::int64_t knob = 0;
    std::int64_t achieved_units = 0;

    /// Config overrides realising this point (dotted key -> value).
    [[nodiscard]] std::vector<std::string> overrides() const;
};

/// Methods with a storage knob get the largest knob whose priced storage fits
/// each target (infeasible targets throw InfeasibleBudget). Methods without
/// one get a single fixed point.
[[nodiscard]] std::vector<SweepPoint> plan_sweep(const std::string& method, std::span<const double> targets_mb,
                                                 const PricingRules& rules);

/// Additional storage units of `method` at knob value `knob`; nullopt for fixed methods.
[[nodiscard]] std::optional<std::int64_t> priced_units(const std::string& method, std::int64_t knob,
                                                       const PricingRules& rules);

}  // namespace clbench
