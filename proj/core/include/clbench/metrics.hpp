#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace clbench {

/// Lower-triangular A[t][j]: accuracy on task j after learning task t, j <= t.
class AccuracyMatrix {
public:
    AccuracyMatrix() = default;
    explicit AccuracyMatrix(std::int64_t tasks);
    /// Builds from rows; row t must have t + 1 entries in [0, 1].
    [[nodiscard]] static AccuracyMatrix from_rows(const std::vector<std::vector<double>>& rows);

    void set(std::int64_t t, std::int64_t j, double accuracy);
    void set_row(std::int64_t t, const std::vector<double>& row);
    [[nodiscard]] double at(std::int64_t t, std::int64_t j) const;
    [[nodiscard]] bool row_complete(std::int64_t t) const;
    [[nodiscard]] bool complete() const;
    [[nodiscard]] std::int64_t tasks() const noexcept { return static_cast<std::int64_t>(rows_.size()); }
    /// Filled rows only, in order; stops at the first incomplete row.
    [[nodiscard]] std::vector<std::vector<double>> rows() const;

    /// One line per completed row, comma separated, full precision.
    [[nodiscard]] std::string to_csv() const;
    [[nodiscard]] static AccuracyMatrix from_csv(const std::string& text);

    bool operator==(const AccuracyMatrix&) const = default;

private:
    std::vector<std::vector<std::optional<double>>> rows_;
};

/// Mean of the final row.
[[nodiscard]] double last_accuracy(const AccuracyMatrix& a);
/// Mean over t of the mean of row t.
[[nodiscard]] double average_accuracy(const AccuracyMatrix& a);
/// (1/(T-1)) sum_{j<T-1} (A[T-1][j] - A[j][j]).
[[nodiscard]] double backward_transfer(const AccuracyMatrix& a);
/// (1/(T-1)) sum_{j<T-1} (max_{t>=j} A[t][j] - A[T-1][j]).
[[nodiscard]] double forgetting(const AccuracyMatrix& a);

struct MetricsSummary {
    double last_acc = 0.0;
    double avg_acc = 0.0;
    /// Unset for single-task runs.
    std::optional<double> bwt;
    std::optional<double> forgetting;

    /// {last_acc, avg_acc, bwt, forgetting}; undefined metrics are null.
    [[nodiscard]] nlohmann::json to_json() const;
};

[[nodiscard]] MetricsSummary summarize_metrics(const AccuracyMatrix& a);

}  // namespace clbench
