#include "clbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "clbench/common.hpp"

namespace clbench {

AccuracyMatrix::AccuracyMatrix(std::int64_t tasks) {
    if (tasks < 0) {
        throw Error("accuracy matrix needs a non-negative task count");
    }
    for (std::int64_t t = 0; t < tasks; ++t) {
        rows_.emplace_back(static_cast<std::size_t>(t + 1));
    }
}

AccuracyMatrix AccuracyMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
    AccuracyMatrix a(static_cast<std::int64_t>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) {
        a.set_row(static_cast<std::int64_t>(t), rows[t]);
    }
    return a;
}

void AccuracyMatrix::set(std::int64_t t, std::int64_t j, double accuracy) {
    if (t < 0 || t >= tasks() || j < 0 || j > t) {
        throw Error("accuracy matrix index (" + std::to_string(t) + ", " + std::to_string(j) +
                    ") outside the lower triangle");
    }
    if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
        throw Error("accuracy " + std::to_string(accuracy) + " outside [0, 1]");
    }
    rows_[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] = accuracy;
}

void AccuracyMatrix::set_row(std::int64_t t, const std::vector<double>& row) {
    if (static_cast<std::int64_t>(row.size()) != t + 1) {
        throw Error("row " + std::to_string(t) + " needs " + std::to_string(t + 1) + " entries, got " +
                    std::to_string(row.size()));
    }
    for (std::size_t j = 0; j < row.size(); ++j) {
        set(t, static_cast<std::int64_t>(j), row[j]);
    }
}

double AccuracyMatrix::at(std::int64_t t, std::int64_t j) const {
    if (t < 0 || t >= tasks() || j < 0 || j > t) {
        throw Error("accuracy matrix index (" + std::to_string(t) + ", " + std::to_string(j) +
                    ") outside the lower triangle");
    }
    const auto& v = rows_[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
    if (!v) {
        throw Error("accuracy A[" + std::to_string(t) + "][" + std::to_string(j) + "] not recorded");
    }
    return *v;
}

bool AccuracyMatrix::row_complete(std::int64_t t) const {
    if (t < 0 || t >= tasks()) {
        return false;
    }
    const auto& row = rows_[static_cast<std::size_t>(t)];
    return std::all_of(row.begin(), row.end(), [](const auto& v) { return v.has_value(); });
}

bool AccuracyMatrix::complete() const {
    for (std::int64_t t = 0; t < tasks(); ++t) {
        if (!row_complete(t)) return false;
    }
    return tasks() > 0;
}

std::vector<std::vector<double>> AccuracyMatrix::rows() const {
    std::vector<std::vector<double>> out;
    for (std::int64_t t = 0; t < tasks() && row_complete(t); ++t) {
        std::vector<double> row;
        for (const auto& v : rows_[static_cast<std::size_t>(t)]) row.push_back(*v);
        out.push_back(std::move(row));
    }
    return out;
}

std::string AccuracyMatrix::to_csv() const {
    std::string out;
    char buf[32];
    for (const auto& row : rows()) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", row[j]);
            out += (j ? "," : "");
            out += buf;
        }
        out += '\n';
    }
    return out;
}

AccuracyMatrix AccuracyMatrix::from_csv(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) {
            row.push_back(std::stod(cell));
        }
        rows.push_back(std::move(row));
    }
    return from_rows(rows);
}

namespace {

double row_mean(const AccuracyMatrix& a, std::int64_t t) {
    if (!a.row_complete(t)) {
        throw Error("accuracy matrix row " + std::to_string(t) + " is incomplete");
    }
    double sum = 0.0;
    for (std::int64_t j = 0; j <= t; ++j) sum += a.at(t, j);
    return sum / static_cast<double>(t + 1);
}

void require_transfer_defined(const AccuracyMatrix& a) {
    if (a.tasks() < 2) {
        throw Error("backward transfer and forgetting are undefined for fewer than two tasks");
    }
    for (std::int64_t t = 0; t < a.tasks(); ++t) {
        if (!a.row_complete(t)) throw Error("accuracy matrix row " + std::to_string(t) + " is incomplete");
    }
}

}  // namespace

double last_accuracy(const AccuracyMatrix& a) {
    if (a.tasks() == 0) {
        throw Error("last accuracy of an empty matrix");
    }
    return row_mean(a, a.tasks() - 1);
}

double average_accuracy(const AccuracyMatrix& a) {
    if (a.tasks() == 0) {
        throw Error("average accuracy of an empty matrix");
    }
    double sum = 0.0;
    for (std::int64_t t = 0; t < a.tasks(); ++t) sum += row_mean(a, t);
    return sum / static_cast<double>(a.tasks());
}

double backward_transfer(const AccuracyMatrix& a) {
    require_transfer_defined(a);
    const auto last = a.tasks() - 1;
    double sum = 0.0;
    for (std::int64_t j = 0; j < last; ++j) sum += a.at(last, j) - a.at(j, j);
    return sum / static_cast<double>(last);
}

double forgetting(const AccuracyMatrix& a) {
    require_transfer_defined(a);
    const auto last = a.tasks() - 1;
    double sum = 0.0;
    for (std::int64_t j = 0; j < last; ++j) {
        double best = a.at(j, j);
        for (std::int64_t t = j + 1; t <= last; ++t) best = std::max(best, a.at(t, j));
        sum += best - a.at(last, j);
    }
    return sum / static_cast<double>(last);
}

nlohmann::json MetricsSummary::to_json() const {
    return {{"last_acc", last_acc},
            {"avg_acc", avg_acc},
            {"bwt", bwt ? nlohmann::json(*bwt) : nlohmann::json()},
            {"forgetting", forgetting ? nlohmann::json(*forgetting) : nlohmann::json()}};
}

MetricsSummary summarize_metrics(const AccuracyMatrix& a) {
    MetricsSummary out;
    out.last_acc = last_accuracy(a);
    out.avg_acc = average_accuracy(a);
    if (a.tasks() >= 2) {
        out.bwt = backward_transfer(a);
        out.forgetting = clbench::forgetting(a);
    }
    return out;
}

}  // namespace clbench
