#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "symconv/optim.hpp"

namespace symconv {

constexpr int kReportSchemaVersion = 1;

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_error = 0.0;  // percent
    double val_error = 0.0;    // percent
    bool operator==(const EpochRecord&) const = default;
};

// One training run, machine-readable. JSON round-trips exactly; the metrics
// CSV carries the same per-epoch rows for spreadsheets.
struct RunReport {
    int schema_version = kReportSchemaVersion;
    std::string run_id;
    std::string command;
    std::string arch;
    std::string filter_config;
    std::string dataset;
    std::size_t subset = 0;  // 0 = full split
    SgdConfig config;
    std::uint64_t seed = 0;
    std::vector<EpochRecord> history;
    double final_train_loss = 0.0;
    double final_train_error = 0.0;
    double final_val_error = 0.0;
    long long params_free = 0;
    long long params_standard = 0;
    double param_ratio = 0.0;
    long long multiplies_naive = 0;
    long long multiplies_fast = 0;
    double multiply_ratio = 0.0;
    double wall_seconds = 0.0;

    std::string to_json() const;
    static RunReport from_json(const std::string& text);
    bool operator==(const RunReport&) const = default;
};

void write_metrics_csv(const std::string& path, const RunReport& report);

struct BenchRow {
    std::string layer;
    std::string class_mix;
    long long naive_multiplies = 0;
    long long fast_multiplies = 0;
    double ratio = 0.0;
    double max_abs_deviation = 0.0;
};

std::string bench_csv(const std::vector<BenchRow>& rows);

struct ParamRow {
    std::string layer;
    std::string class_mix;
    long long free_weights = 0;
    long long standard_weights = 0;
    double ratio = 0.0;
};

std::string param_csv(const std::vector<ParamRow>& rows);

// Percentages are printed truncated (not rounded) to two decimals, so exact
// thirds appear as 66.66 / 33.33.
std::string format_percent(double fraction);

}  // namespace symconv
