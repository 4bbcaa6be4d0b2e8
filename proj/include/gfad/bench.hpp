#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gfad/detect.hpp"
#include "gfad/prior.hpp"
#include "gfad/signal.hpp"

namespace gfad {

struct ExperimentSpec {
    SystemConfig system;
    PriorModel prior = PriorModel::iid(0.05);  // generates activities; MAP kinds also detect with it
    DetectorConfig detector;
    std::size_t trials = 200;
    std::uint64_t seed = 1;
    std::optional<double> threshold;     // nullopt: calibrate per cell
    std::size_t calibration_trials = 0;  // 0: same as trials
    bool shared_pilots = false;          // one pilot draw for every trial of the cell
    std::uint64_t cell = 0;              // folded into every stream key

    void validate() const;
};

/// One trial's inputs as a detector sees them, plus the truth for stubs.
struct TrialData {
    const SystemConfig* system = nullptr;
    const PilotSet* pilots = nullptr;
    const SampleCovariance* sigma_hat = nullptr;
    const std::vector<std::uint8_t>* truth = nullptr;
    std::uint64_t order_seed = 0;  // key of the trial's coordinate-order stream
};

struct TrialOutcome {
    std::vector<double> soft;
    std::size_t sweeps = 0;
    double runtime_ms = 0.0;
    std::size_t tie_events = 0;
};

/// Replaces run_detector in tests. Throwing ConditioningError marks the trial failed.
using DetectorFn = std::function<TrialOutcome(const TrialData&)>;

struct MetricRow {
    std::string detector;
    std::size_t n_devices = 0, n_subcarriers = 0, n_antennas = 0, n_taps = 0;
    double q = 0.0;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    double threshold = 0.0;
    double error_rate = 0.0;
    double miss_rate = 0.0;         // misses / device-trials
    double false_alarm_rate = 0.0;  // false alarms / device-trials
    double avg_sweeps = 0.0;
    double avg_runtime_ms = 0.0;

    std::size_t errors = 0;
    std::size_t misses = 0;
    std::size_t false_alarms = 0;
    std::size_t device_trials = 0;
    std::size_t active_count = 0;
    std::size_t failed_trials = 0;
    std::size_t tie_events = 0;
};

/// Equality of everything except avg_runtime_ms (wall clock).
bool same_metrics(const MetricRow& a, const MetricRow& b);

struct RunOptions {
    std::size_t threads = 0;  // 0: hardware concurrency; GF_THREADS always wins
};

/// Worker count: GF_THREADS overrides the request; the result is at least 1.
std::size_t resolve_threads(std::size_t requested);

/// Evaluation trials (phase 0) with threshold calibration on independent
/// streams (phase 1) unless spec.threshold is set.
MetricRow run_experiment(const ExperimentSpec& spec, const RunOptions& opts = {});
MetricRow run_experiment(const ExperimentSpec& spec, const DetectorFn& detector, const RunOptions& opts = {});

/// Smallest theta on the grid {0, 0.01, ..., 1} minimizing the total Hamming error.
double best_threshold(const std::vector<std::vector<double>>& softs,
                      const std::vector<std::vector<std::uint8_t>>& truths);

double calibrate_threshold(const ExperimentSpec& spec, const RunOptions& opts = {});
double calibrate_threshold(const ExperimentSpec& spec, const DetectorFn& detector, const RunOptions& opts = {});

enum class SweepParameter { P, L, M, Q, GroupSize, Detector };

SweepParameter parse_sweep_parameter(const std::string& name);
std::string sweep_parameter_name(SweepParameter p);

using SweepValue = std::variant<double, DetectorKind>;

/// Applies one sweep value to a copy of the spec. group_size rebuilds the
/// prior as contiguous groups of that size (N must be divisible).
ExperimentSpec apply_sweep_value(const ExperimentSpec& spec, SweepParameter parameter, const SweepValue& value,
                                 double group_epsilon = 1e-3);

/// One row per (value, detector). Cells for the same value share a seed
/// stream, so detectors are compared on identical realizations. An empty
/// detector list means the spec's own detector.
std::vector<MetricRow> sweep(const ExperimentSpec& spec, SweepParameter parameter,
                             const std::vector<SweepValue>& values, const std::vector<DetectorKind>& detectors = {},
                             const RunOptions& opts = {});

} // namespace gfad
