#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gfad/bench.hpp"

namespace gfad::cli {

inline constexpr const char* kCsvHeader =
    "detector,N,L,M,P,q,trials,seed,threshold,error_rate,miss_rate,false_alarm_rate,avg_sweeps,avg_runtime_ms";

struct SweepConfig {
    SweepParameter parameter = SweepParameter::L;
    std::vector<SweepValue> values;
    std::vector<DetectorKind> detectors;  // optional extra axis; empty uses the spec's detector
};

struct RunConfig {
    ExperimentSpec spec;
    std::optional<SweepConfig> sweep;
    std::optional<std::string> csv_path;  // stdout when absent
    std::optional<std::string> svg_path;
    std::size_t threads = 0;
};

/// Parses a run configuration. Unknown keys, wrong types and invalid values
/// raise ConfigError whose message starts with "line N:".
RunConfig parse_run_config(const std::string& text);

std::string format_number(double v);
std::string format_csv_row(const MetricRow& row);
void write_csv(std::ostream& os, const std::vector<MetricRow>& rows);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index, throwing ConfigError when absent.
    std::size_t column(const std::string& name) const;
};

/// Reads a comma-separated table with a header line. Throws ConfigError on
/// ragged rows or an empty file.
CsvTable read_csv(std::istream& is);

/// Log-y line plot of error_rate against x_column, one polyline per detector.
/// Zero rates are drawn at 1/(2 N trials); the floor is stated in the title.
std::string render_svg(const CsvTable& table, const std::string& x_column);

int cmd_run(const std::string& config_path, std::size_t threads, std::ostream& out, std::ostream& err);
int cmd_plot(const std::string& csv_path, const std::string& x_column, const std::string& svg_path,
             std::ostream& err);

struct SelftestCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Names of the selftest checks, in execution order.
std::vector<std::string> selftest_check_names();

/// Runs the fast invariant suite. fault names one check whose computed value is
/// perturbed so that it must fail.
std::vector<SelftestCheck> run_selftest(const std::optional<std::string>& fault = std::nullopt);
int cmd_selftest(const std::optional<std::string>& fault, std::ostream& out, std::ostream& err);

} // namespace gfad::cli
