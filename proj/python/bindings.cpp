#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "gfad/bench.hpp"
#include "gfad/cli.hpp"
#include "gfad/detect.hpp"
#include "gfad/prior.hpp"
#include "gfad/signal.hpp"

namespace py = pybind11;
using namespace gfad;

namespace {

py::dict row_to_dict(const MetricRow& r) {
    py::dict d;
    d["detector"] = r.detector;
    d["N"] = r.n_devices;
    d["L"] = r.n_subcarriers;
    d["M"] = r.n_antennas;
    d["P"] = r.n_taps;
    d["q"] = r.q;
    d["trials"] = r.trials;
    d["seed"] = r.seed;
    d["threshold"] = r.threshold;
    d["error_rate"] = r.error_rate;
    d["miss_rate"] = r.miss_rate;
    d["false_alarm_rate"] = r.false_alarm_rate;
    d["avg_sweeps"] = r.avg_sweeps;
    d["avg_runtime_ms"] = r.avg_runtime_ms;
    d["errors"] = r.errors;
    d["failed_trials"] = r.failed_trials;
    return d;
}

struct Instance {
    SystemConfig system;
    PilotSet pilots;
    SampleCovariance sigma_hat;
    std::vector<std::uint8_t> alpha;
};

Instance make_instance(const SystemConfig& cfg, const PriorModel& prior, std::uint64_t seed) {
    cfg.validate();
    Instance in;
    in.system = cfg;
    CounterRng pilot_rng(derive_key(seed, {0}));
    CounterRng activity_rng(derive_key(seed, {1}));
    CounterRng channel_rng(derive_key(seed, {2}));
    CounterRng noise_rng(derive_key(seed, {3}));
    in.pilots = generate_pilots(cfg, pilot_rng);
    in.alpha = draw_activities(prior, cfg.n_devices, activity_rng);
    const auto real = draw_realization(cfg, in.alpha, channel_rng);
    in.sigma_hat = sample_covariance(synthesize_received(cfg, in.pilots, real, noise_rng));
    return in;
}

py::dict detect(const Instance& in, const std::string& kind, double rho, bool rho_continuation, double rho_max,
                std::size_t max_sweeps, double tol, const PriorModel* prior) {
    DetectorConfig det;
    det.kind = parse_detector(kind);
    det.rho = rho;
    det.rho_continuation = rho_continuation;
    det.rho_max = rho_max;
    det.max_sweeps = max_sweeps;
    det.tol = tol;
    DetectionOutput out;
    {
        py::gil_scoped_release release;
        out = det.kind == DetectorKind::BlMlFlat ? baseline_flat_ml(in.sigma_hat, in.pilots, in.system, det)
                                                 : run_detector(in.sigma_hat, in.pilots, in.system, det, prior);
    }
    py::dict d;
    d["soft"] = out.soft;
    d["raw"] = out.raw;
    d["objective_trace"] = out.objective_trace;
    d["sweeps"] = out.sweeps;
    d["converged"] = out.converged;
    d["inverse_drift"] = out.inverse_drift;
    d["penalty_residual"] = out.penalty_residual;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Statistical device activity detection for OFDM grant-free access";

    py::class_<SystemConfig>(m, "SystemConfig")
        .def(py::init([](std::size_t N, std::size_t L, std::size_t M, std::size_t P, double noise_var,
                         std::vector<double> gains) {
                 SystemConfig c;
                 c.n_devices = N;
                 c.n_subcarriers = L;
                 c.n_antennas = M;
                 c.n_taps = P;
                 c.noise_var = noise_var;
                 c.gains = std::move(gains);
                 c.validate();
                 return c;
             }),
             py::arg("N") = 100, py::arg("L") = 24, py::arg("M") = 32, py::arg("P") = 2, py::arg("noise_var") = 0.1,
             py::arg("gains") = std::vector<double>{})
        .def_readonly("N", &SystemConfig::n_devices)
        .def_readonly("L", &SystemConfig::n_subcarriers)
        .def_readonly("M", &SystemConfig::n_antennas)
        .def_readonly("P", &SystemConfig::n_taps)
        .def_readonly("noise_var", &SystemConfig::noise_var);

    py::class_<PriorModel>(m, "PriorModel")
        .def_static("iid", &PriorModel::iid, py::arg("q"))
        .def_static("group", &PriorModel::group, py::arg("partition"), py::arg("q"), py::arg("epsilon") = 1e-3)
        .def_static("group_uniform", &PriorModel::group_uniform, py::arg("n_devices"), py::arg("k_groups"),
                    py::arg("q"), py::arg("epsilon") = 1e-3)
        .def("log_pmf_unnormalized",
             [](const PriorModel& p, const std::vector<double>& a) { return log_pmf_unnormalized(p, a); })
        .def("log_normalizer", [](const PriorModel& p, std::size_t n) { return log_normalizer(p, n); });

    py::class_<Instance>(m, "Instance")
        .def_readonly("system", &Instance::system)
        .def_property_readonly("alpha", [](const Instance& in) { return std::vector<int>(in.alpha.begin(), in.alpha.end()); })
        .def_property_readonly("sigma_hat", [](const Instance& in) { return in.sigma_hat.sigma_hat; })
        .def_property_readonly("pilots", [](const Instance& in) { return in.pilots.freq; });

    m.def("make_instance", &make_instance, py::arg("system"), py::arg("prior"), py::arg("seed"),
          "Draws pilots, activities, channels and noise and forms the sample covariance.");

    m.def("detect", &detect, py::arg("instance"), py::arg("kind") = "ml-act", py::arg("rho") = 10.0,
          py::arg("rho_continuation") = false, py::arg("rho_max") = 1e3, py::arg("max_sweeps") = 50,
          py::arg("tol") = 1e-6, py::arg("prior") = nullptr);

    m.def("threshold", [](const std::vector<double>& soft, double theta) {
        const auto b = threshold(soft, theta);
        return std::vector<int>(b.begin(), b.end());
    });

    m.def("dft_matrix", &dft_matrix, py::arg("L"));

    m.def(
        "run_config",
        [](const std::string& text, std::size_t threads) {
            const cli::RunConfig rc = cli::parse_run_config(text);
            RunOptions opts;
            opts.threads = threads;
            std::vector<MetricRow> rows;
            {
                py::gil_scoped_release release;
                if (rc.sweep)
                    rows = sweep(rc.spec, rc.sweep->parameter, rc.sweep->values, rc.sweep->detectors, opts);
                else
                    rows.push_back(run_experiment(rc.spec, opts));
            }
            py::list out;
            for (const auto& r : rows) out.append(row_to_dict(r));
            return out;
        },
        py::arg("config_json"), py::arg("threads") = 0,
        "Runs a JSON experiment configuration and returns one dict per result row.");

    m.def("selftest", [] {
        py::list out;
        for (const auto& c : cli::run_selftest()) out.append(py::make_tuple(c.name, c.passed, c.detail));
        return out;
    });

    m.attr("CSV_HEADER") = cli::kCsvHeader;
}
