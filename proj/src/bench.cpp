#include "gfad/bench.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "gfad/error.hpp"
#include "gfad/rng.hpp"

namespace gfad {

namespace {

constexpr std::uint64_t kSharedTrial = ~std::uint64_t{0};

enum Phase : std::uint64_t { kEvaluate = 0, kCalibrate = 1 };

std::uint64_t stream_key(const ExperimentSpec& spec, std::uint64_t phase, std::uint64_t trial, StreamPurpose p) {
    return derive_key(spec.seed, {spec.cell, phase, trial, static_cast<std::uint64_t>(p)});
}

struct TrialResult {
    std::vector<std::uint8_t> truth;
    TrialOutcome outcome;
    bool failed = false;
};

TrialResult run_trial(const ExperimentSpec& spec, const DetectorFn& detector, std::uint64_t phase,
                      std::uint64_t trial, const PilotSet* shared) {
    const SystemConfig& cfg = spec.system;
    PilotSet own;
    if (shared == nullptr) {
        CounterRng pilot_rng(stream_key(spec, phase, trial, StreamPurpose::Pilot));
        own = generate_pilots(cfg, pilot_rng);
    }
    const PilotSet& pilots = shared != nullptr ? *shared : own;

    CounterRng act_rng(stream_key(spec, phase, trial, StreamPurpose::Activity));
    CounterRng chan_rng(stream_key(spec, phase, trial, StreamPurpose::Channel));
    CounterRng noise_rng(stream_key(spec, phase, trial, StreamPurpose::Noise));

    TrialResult res;
    ChannelRealization real = draw_realization(cfg, draw_activities(spec.prior, cfg.n_devices, act_rng), chan_rng);
    const CMatrix R = synthesize_received(cfg, pilots, real, noise_rng);
    const SampleCovariance sigma_hat = sample_covariance(R);
    res.truth = real.alpha;

    TrialData data{&cfg, &pilots, &sigma_hat, &res.truth,
                   stream_key(spec, phase, trial, StreamPurpose::CoordinateOrder)};
    try {
        res.outcome = detector(data);
        if (res.outcome.soft.size() != cfg.n_devices)
            throw DimensionError("detector returned " + std::to_string(res.outcome.soft.size()) +
                                 " activities for N = " + std::to_string(cfg.n_devices));
    } catch (const ConditioningError&) {
        res.failed = true;
    }
    return res;
}

std::vector<TrialResult> run_trials(const ExperimentSpec& spec, const DetectorFn& detector, std::uint64_t phase,
                                    std::size_t count, std::size_t threads) {
    std::optional<PilotSet> shared;
    if (spec.shared_pilots) {
        CounterRng rng(stream_key(spec, phase, kSharedTrial, StreamPurpose::Pilot));
        shared = generate_pilots(spec.system, rng);
    }
    const PilotSet* shared_ptr = shared ? &*shared : nullptr;

    std::vector<TrialResult> results(count);
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= count) return;
            try {
                results[t] = run_trial(spec, detector, phase, t, shared_ptr);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    const std::size_t n_workers = std::min(std::max<std::size_t>(threads, 1), std::max<std::size_t>(count, 1));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

DetectorFn default_detector(const ExperimentSpec& spec) {
    return [&spec](const TrialData& d) {
        DetectorConfig det = spec.detector;
        det.order_seed = d.order_seed;
        const PriorModel* prior = is_map(det.kind) ? &spec.prior : nullptr;
        const DetectionOutput out = run_detector(*d.sigma_hat, *d.pilots, *d.system, det, prior);
        return TrialOutcome{out.soft, out.sweeps, out.wall_ms, out.tie_events};
    };
}

std::size_t count_errors(std::span<const double> soft, std::span<const std::uint8_t> truth, double theta) {
    std::size_t e = 0;
    for (std::size_t k = 0; k < soft.size(); ++k) e += ((soft[k] > theta) != (truth[k] != 0)) ? 1 : 0;
    return e;
}

void check_failures(const ExperimentSpec& spec, const std::vector<TrialResult>& results) {
    std::size_t failed = 0;
    for (const auto& r : results) failed += r.failed ? 1 : 0;
    if (static_cast<double>(failed) > 0.01 * static_cast<double>(results.size()))
        throw ExperimentError(std::to_string(failed) + " of " + std::to_string(results.size()) + " trials of " +
                              std::string(detector_name(spec.detector.kind)) + " failed to converge numerically");
}

double calibrate_from(const ExperimentSpec& spec, const DetectorFn& detector, std::size_t threads) {
    const std::size_t count = spec.calibration_trials == 0 ? spec.trials : spec.calibration_trials;
    const auto results = run_trials(spec, detector, kCalibrate, count, threads);
    check_failures(spec, results);
    std::vector<std::vector<double>> softs;
    std::vector<std::vector<std::uint8_t>> truths;
    for (const auto& r : results) {
        if (r.failed) continue;
        softs.push_back(r.outcome.soft);
        truths.push_back(r.truth);
    }
    return best_threshold(softs, truths);
}

std::size_t as_count(double v, const char* what) {
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e9)
        throw ConfigError(std::string("sweep: ") + what + " must be a positive integer");
    return static_cast<std::size_t>(v);
}

} // namespace

void ExperimentSpec::validate() const {
    system.validate();
    detector.validate();
    prior.check_devices(system.n_devices);
    if (is_map(detector.kind) && prior.is_iid() && !(prior.q() > 0.0 && prior.q() < 1.0))
        throw ConfigError("experiment: MAP detection needs q strictly inside (0, 1)");
    if (trials == 0) throw ConfigError("experiment: trials must be at least 1");
    if (threshold && !(*threshold >= 0.0 && *threshold <= 1.0))
        throw ConfigError("experiment: threshold must lie in [0, 1]");
}

bool same_metrics(const MetricRow& a, const MetricRow& b) {
    auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    return a.detector == b.detector && a.n_devices == b.n_devices && a.n_subcarriers == b.n_subcarriers &&
           a.n_antennas == b.n_antennas && a.n_taps == b.n_taps && same(a.q, b.q) && a.trials == b.trials &&
           a.seed == b.seed && a.threshold == b.threshold && a.error_rate == b.error_rate &&
           a.miss_rate == b.miss_rate && a.false_alarm_rate == b.false_alarm_rate && a.avg_sweeps == b.avg_sweeps &&
           a.errors == b.errors && a.misses == b.misses && a.false_alarms == b.false_alarms &&
           a.device_trials == b.device_trials && a.active_count == b.active_count &&
           a.failed_trials == b.failed_trials && a.tie_events == b.tie_events;
}

std::size_t resolve_threads(std::size_t requested) {
    if (const char* env = std::getenv("GF_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    if (requested > 0) return requested;
    return std::max(1U, std::thread::hardware_concurrency());
}

double best_threshold(const std::vector<std::vector<double>>& softs,
                      const std::vector<std::vector<std::uint8_t>>& truths) {
    if (softs.size() != truths.size()) throw DimensionError("best_threshold: softs and truths differ in length");
    double best_theta = 0.0;
    std::size_t best_err = std::numeric_limits<std::size_t>::max();
    for (int k = 0; k <= 100; ++k) {
        const double theta = k / 100.0;
        std::size_t err = 0;
        for (std::size_t t = 0; t < softs.size(); ++t) {
            if (softs[t].size() != truths[t].size()) throw DimensionError("best_threshold: length mismatch");
            err += count_errors(softs[t], truths[t], theta);
        }
        if (err < best_err) {
            best_err = err;
            best_theta = theta;
        }
    }
    return best_theta;
}

double calibrate_threshold(const ExperimentSpec& spec, const RunOptions& opts) {
    spec.validate();
    return calibrate_from(spec, default_detector(spec), resolve_threads(opts.threads));
}

double calibrate_threshold(const ExperimentSpec& spec, const DetectorFn& detector, const RunOptions& opts) {
    spec.validate();
    return calibrate_from(spec, detector, resolve_threads(opts.threads));
}

MetricRow run_experiment(const ExperimentSpec& spec, const RunOptions& opts) {
    spec.validate();
    return run_experiment(spec, default_detector(spec), opts);
}

MetricRow run_experiment(const ExperimentSpec& spec, const DetectorFn& detector, const RunOptions& opts) {
    spec.validate();
    const std::size_t threads = resolve_threads(opts.threads);
    const double theta = spec.threshold ? *spec.threshold : calibrate_from(spec, detector, threads);
    const auto results = run_trials(spec, detector, kEvaluate, spec.trials, threads);
    check_failures(spec, results);

    MetricRow row;
    row.detector = std::string(detector_name(spec.detector.kind));
    row.n_devices = spec.system.n_devices;
    row.n_subcarriers = spec.system.n_subcarriers;
    row.n_antennas = spec.system.n_antennas;
    row.n_taps = spec.system.n_taps;
    row.q = spec.prior.q();
    row.trials = spec.trials;
    row.seed = spec.seed;
    row.threshold = theta;

    double sweeps = 0.0, runtime = 0.0;
    std::size_t ok = 0;
    for (const auto& r : results) {
        if (r.failed) {
            ++row.failed_trials;
            continue;
        }
        ++ok;
        sweeps += static_cast<double>(r.outcome.sweeps);
        runtime += r.outcome.runtime_ms;
        row.tie_events += r.outcome.tie_events;
        for (std::size_t n = 0; n < r.truth.size(); ++n) {
            const bool active = r.truth[n] != 0;
            const bool declared = r.outcome.soft[n] > theta;
            row.active_count += active ? 1 : 0;
            if (active && !declared) ++row.misses;
            if (!active && declared) ++row.false_alarms;
        }
    }
    row.errors = row.misses + row.false_alarms;
    row.device_trials = ok * spec.system.n_devices;
    if (row.device_trials > 0) {
        const double dt = static_cast<double>(row.device_trials);
        row.error_rate = static_cast<double>(row.errors) / dt;
        row.miss_rate = static_cast<double>(row.misses) / dt;
        row.false_alarm_rate = static_cast<double>(row.false_alarms) / dt;
        row.avg_sweeps = sweeps / static_cast<double>(ok);
        row.avg_runtime_ms = runtime / static_cast<double>(ok);
    }
    return row;
}

SweepParameter parse_sweep_parameter(const std::string& name) {
    if (name == "P") return SweepParameter::P;
    if (name == "L") return SweepParameter::L;
    if (name == "M") return SweepParameter::M;
    if (name == "q") return SweepParameter::Q;
    if (name == "group_size") return SweepParameter::GroupSize;
    if (name == "detector") return SweepParameter::Detector;
    throw ConfigError("unknown sweep parameter '" + name + "' (expected P, L, M, q, group_size or detector)");
}

std::string sweep_parameter_name(SweepParameter p) {
    switch (p) {
        case SweepParameter::P: return "P";
        case SweepParameter::L: return "L";
        case SweepParameter::M: return "M";
        case SweepParameter::Q: return "q";
        case SweepParameter::GroupSize: return "group_size";
        case SweepParameter::Detector: return "detector";
    }
    return "?";
}

ExperimentSpec apply_sweep_value(const ExperimentSpec& spec, SweepParameter parameter, const SweepValue& value,
                                 double group_epsilon) {
    ExperimentSpec out = spec;
    if (parameter == SweepParameter::Detector) {
        const auto* kind = std::get_if<DetectorKind>(&value);
        if (kind == nullptr) throw ConfigError("sweep: detector values must be detector names");
        out.detector.kind = *kind;
        return out;
    }
    const auto* num = std::get_if<double>(&value);
    if (num == nullptr) throw ConfigError("sweep: " + sweep_parameter_name(parameter) + " values must be numbers");
    switch (parameter) {
        case SweepParameter::P: out.system.n_taps = as_count(*num, "P"); break;
        case SweepParameter::L: out.system.n_subcarriers = as_count(*num, "L"); break;
        case SweepParameter::M: out.system.n_antennas = as_count(*num, "M"); break;
        case SweepParameter::Q: {
            const auto& v = spec.prior.variant();
            if (std::holds_alternative<IidPrior>(v)) {
                out.prior = PriorModel::iid(*num);
            } else if (const auto* g = std::get_if<GroupPrior>(&v)) {
                out.prior = PriorModel::group(g->groups, *num, g->epsilon);
            } else {
                throw ConfigError("sweep: q cannot be swept for a general MVB prior");
            }
            break;
        }
        case SweepParameter::GroupSize: {
            const std::size_t s = as_count(*num, "group_size");
            const std::size_t N = spec.system.n_devices;
            if (N % s != 0)
                throw ConfigError("sweep: group_size " + std::to_string(s) + " does not divide N = " +
                                  std::to_string(N));
            const auto* g = std::get_if<GroupPrior>(&spec.prior.variant());
            const double eps = g != nullptr ? g->epsilon : group_epsilon;
            const double q = spec.prior.q();
            if (std::isnan(q)) throw ConfigError("sweep: group_size needs an iid or group prior");
            out.prior = PriorModel::group_uniform(N, N / s, q, eps);
            break;
        }
        case SweepParameter::Detector: break;
    }
    out.system.validate();
    return out;
}

std::vector<MetricRow> sweep(const ExperimentSpec& spec, SweepParameter parameter,
                             const std::vector<SweepValue>& values, const std::vector<DetectorKind>& detectors,
                             const RunOptions& opts) {
    if (values.empty()) throw ConfigError("sweep: no values");
    std::vector<MetricRow> rows;
    for (std::size_t vi = 0; vi < values.size(); ++vi) {
        ExperimentSpec cell = apply_sweep_value(spec, parameter, values[vi]);
        const std::uint64_t value_index = parameter == SweepParameter::Detector ? 0 : vi;
        cell.cell = derive_key(spec.cell, {static_cast<std::uint64_t>(parameter) + 1, value_index});
        if (parameter == SweepParameter::Detector || detectors.empty()) {
            rows.push_back(run_experiment(cell, opts));
            continue;
        }
        for (DetectorKind k : detectors) {
            ExperimentSpec d = cell;
            d.detector.kind = k;
            rows.push_back(run_experiment(d, opts));
        }
    }
    return rows;
}

} // namespace gfad
