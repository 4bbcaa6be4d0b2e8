#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>

#include "gfad/cli.hpp"
#include "gfad/detect.hpp"
#include "gfad/rng.hpp"

namespace gfad::cli {

namespace {

struct Instance {
    SystemConfig cfg;
    PilotSet pilots;
    SampleCovariance sigma_hat;
};

Instance random_instance(CounterRng& rng, std::size_t taps) {
    Instance in;
    in.cfg.n_devices = 6;
    in.cfg.n_subcarriers = 8;
    in.cfg.n_antennas = 16;
    in.cfg.n_taps = taps;
    in.cfg.gains.resize(in.cfg.n_devices);
    for (double& g : in.cfg.gains) g = 0.5 + rng.uniform();
    in.pilots = generate_pilots(in.cfg, rng);
    std::vector<std::uint8_t> alpha(in.cfg.n_devices);
    for (auto& a : alpha) a = rng.uniform() < 0.4 ? 1 : 0;
    const auto real = draw_realization(in.cfg, alpha, rng);
    in.sigma_hat = sample_covariance(synthesize_received(in.cfg, in.pilots, real, rng));
    return in;
}

std::vector<double> random_soft(CounterRng& rng, std::size_t n) {
    std::vector<double> x(n);
    for (double& v : x) v = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
    return x;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

using Check = std::function<double()>;  // returns the measured error; passes when <= tolerance

struct CheckDef {
    std::string name;
    double tolerance;
    Check run;
};

double check_dft() {
    const CMatrix F = dft_matrix(8);
    return max_abs_diff(F * F.adjoint(), CMatrix::Identity(8, 8));
}

double check_woodbury() {
    CounterRng rng(derive_key(11, {1}));
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        CMatrix A(6, 6), S(6, 2);
        for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = rng.complex_normal();
        for (Eigen::Index i = 0; i < S.size(); ++i) S.data()[i] = rng.complex_normal();
        const CMatrix sigma = A * A.adjoint() + CMatrix::Identity(6, 6);
        const double c = rng.uniform() * 2.0;
        const CMatrix direct = (sigma + c * S * S.adjoint()).inverse();
        worst = std::max(worst, max_abs_diff(woodbury_downdate(sigma.inverse(), S, c), direct));
    }
    return worst;
}

double check_squared_factor() {
    CounterRng rng(derive_key(11, {2}));
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        std::vector<double> v(1 + t % 6);
        for (double& x : v) x = rng.uniform() * 3.0;
        const double d = rng.uniform() * 2.0 - 1.0;
        double prod = 1.0;
        for (double x : v) prod *= (1.0 + x * d) * (1.0 + x * d);
        worst = std::max(worst, rel_err(squared_factor_coeffs(v)(d), prod));
    }
    return worst;
}

double check_roots() {
    CounterRng rng(derive_key(11, {3}));
    double worst = 0.0;
    for (int deg = 1; deg <= 8; ++deg) {
        std::vector<double> roots;
        RealPolynomial p({1.0});
        for (int k = 0; k < deg; ++k) {
            const double r = -1.0 + 2.0 * (k + rng.uniform() * 0.8) / deg;
            roots.push_back(r);
            p = p * RealPolynomial({-r, 1.0});
        }
        const auto found = real_roots_in_interval(p, -1.0, 1.0);
        if (found.size() != roots.size()) return 1.0;
        for (std::size_t k = 0; k < roots.size(); ++k) worst = std::max(worst, std::abs(found[k] - roots[k]));
    }
    return worst;
}

double check_model_equivalence() {
    CounterRng rng(derive_key(11, {4}));
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
        SystemConfig cfg;
        cfg.n_devices = 8;
        cfg.n_subcarriers = 12;
        cfg.n_antennas = 6;
        cfg.n_taps = 1 + t % 4;
        const PilotSet pilots = generate_pilots(cfg, rng);
        std::vector<std::uint8_t> alpha(cfg.n_devices);
        for (auto& a : alpha) a = rng.uniform() < 0.5 ? 1 : 0;
        const auto real = draw_realization(cfg, alpha, rng);
        const CMatrix noise = draw_noise(cfg.n_subcarriers, cfg.n_antennas, cfg.noise_var, rng);
        worst = std::max(worst, max_abs_diff(received_actual(cfg, pilots, real, noise),
                                             received_virtual(cfg, pilots, real, noise)));
        std::vector<double> a(alpha.begin(), alpha.end());
        std::vector<double> b(real.beta.begin(), real.beta.end());
        worst = std::max(worst, max_abs_diff(covariance_actual(cfg, pilots, a), covariance_virtual(cfg, pilots, b)));
    }
    return worst;
}

// Derivative numerator over its denominator against a central difference.
double check_derivative(bool virtual_kind, bool map) {
    CounterRng rng(derive_key(11, {5, virtual_kind ? 1u : 0u, map ? 1u : 0u}));
    const PriorModel prior = PriorModel::group_uniform(6, 3, 0.2, 1e-3);
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
        const Instance in = random_instance(rng, 1 + t % 4);
        const DetectorKind kind = virtual_kind ? (map ? DetectorKind::MapVirtPen : DetectorKind::MlVirtPen)
                                               : (map ? DetectorKind::MapAct : DetectorKind::MlAct);
        DetectorState st(in.sigma_hat, in.pilots, in.cfg, kind, map ? &prior : nullptr);
        st.set_activities(random_soft(rng, st.n_units()));
        const std::size_t u = static_cast<std::size_t>(rng.uniform() * static_cast<double>(st.n_units()));
        const double x = st.activities()[u];
        for (int k = 0; k < 5; ++k) {
            const double d = -x + (0.05 + 0.9 * rng.uniform());
            const double h = 1e-6;
            double analytic = 0.0, fd = 0.0;
            if (virtual_kind) {
                const VirtualCoordinate c = virtual_coordinate(st, u, 1.0);
                const double den = (1.0 + c.gamma * d) * (1.0 + c.gamma * d);
                analytic = virtual_derivative_numerator(c)(d) / den;
                fd = (virtual_coordinate_objective(c, d + h) - virtual_coordinate_objective(c, d - h)) / (2 * h);
            } else {
                const CoordinateQuadratic q = coordinate_quadratic(st, u);
                const double s = st.prior_slope(u);
                double den = 1.0;
                for (Eigen::Index p = 0; p < q.v.size(); ++p) den *= (1.0 + q.v[p] * d) * (1.0 + q.v[p] * d);
                analytic = actual_derivative_numerator(q, s)(d) / den;
                fd = (actual_coordinate_objective(q, d + h, s) - actual_coordinate_objective(q, d - h, s)) / (2 * h);
            }
            worst = std::max(worst, rel_err(analytic, fd));
        }
    }
    return worst;
}

double check_grid(DetectorKind kind) {
    CounterRng rng(derive_key(11, {6, static_cast<std::uint64_t>(kind)}));
    const PriorModel prior = PriorModel::iid(0.1);
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
        const Instance in = random_instance(rng, 1 + t % 4);
        DetectorState st(in.sigma_hat, in.pilots, in.cfg, kind, is_map(kind) ? &prior : nullptr);
        st.set_activities(random_soft(rng, st.n_units()));
        const std::size_t u = static_cast<std::size_t>(rng.uniform() * static_cast<double>(st.n_units()));
        const double x = st.activities()[u];
        std::function<double(double)> f;
        CoordinateStep step;
        if (is_virtual(kind)) {
            const double rho = is_penalty(kind) ? 1.0 : 0.0;
            const VirtualCoordinate c = virtual_coordinate(st, u, rho);
            f = [c](double d) { return virtual_coordinate_objective(c, d); };
            switch (kind) {
                case DetectorKind::MlVirtPen: step = coord_update_ml_virtual_penalty(st, u, rho); break;
                case DetectorKind::MapVirtPen: step = coord_update_map_virtual_penalty(st, u, rho); break;
                case DetectorKind::MlVirtRel: step = coord_update_ml_virtual_relaxed(st, u); break;
                default: step = coord_update_map_virtual_relaxed(st, u); break;
            }
            if (kind == DetectorKind::MlVirtPen || kind == DetectorKind::MlVirtRel) {
                VirtualCoordinate ml = c;
                ml.prior_slope = 0.0;
                f = [ml](double d) { return virtual_coordinate_objective(ml, d); };
            }
        } else {
            const CoordinateQuadratic q = coordinate_quadratic(st, u);
            const double s = is_map(kind) ? st.prior_slope(u) : 0.0;
            f = [q, s](double d) { return actual_coordinate_objective(q, d, s); };
            step = is_map(kind) ? coord_update_map_actual(st, u) : coord_update_ml_actual(st, u);
        }
        double grid_min = f(0.0);
        for (int k = 0; k <= 2000; ++k) grid_min = std::min(grid_min, f(-x + k / 2000.0));
        worst = std::max(worst, f(step.d) - grid_min);
    }
    return std::max(worst, 0.0);
}

double check_descent_and_drift() {
    CounterRng rng(derive_key(11, {7}));
    const PriorModel prior = PriorModel::iid(0.2);
    double worst = 0.0;
    for (DetectorKind kind : kAllDetectors) {
        const Instance in = random_instance(rng, 2);
        DetectorConfig det;
        det.kind = kind;
        det.rho = 1.0;
        const auto out = run_detector(in.sigma_hat, in.pilots, in.cfg, det, is_map(kind) ? &prior : nullptr);
        for (std::size_t k = 1; k < out.objective_trace.size(); ++k)
            worst = std::max(worst, out.objective_trace[k] - out.objective_trace[k - 1] - 1e-9);
        worst = std::max(worst, out.inverse_drift - 1e-8);
    }
    return std::max(worst, 0.0);
}

double check_prior_normalization() {
    CounterRng rng(derive_key(11, {8}));
    std::vector<MvbTerm> terms;
    for (std::size_t a = 0; a < 6; ++a) {
        terms.push_back({{a}, rng.normal()});
        for (std::size_t b = a + 1; b < 6; ++b)
            if (rng.uniform() < 0.5) terms.push_back({{a, b}, rng.normal()});
    }
    const PriorModel prior = PriorModel::mvb(6, terms);
    const double log_z = log_normalizer(prior, 6);
    double total = 0.0;
    std::vector<double> alpha(6);
    for (unsigned mask = 0; mask < 64; ++mask) {
        for (std::size_t j = 0; j < 6; ++j) alpha[j] = (mask >> j) & 1U ? 1.0 : 0.0;
        total += std::exp(log_pmf_unnormalized(prior, alpha) - log_z);
    }
    return std::abs(total - 1.0);
}

std::vector<CheckDef> checks() {
    return {
        {"dft-unitary", 1e-12, check_dft},
        {"woodbury-direct-inverse", 1e-9, check_woodbury},
        {"squared-factor-expansion", 1e-10, check_squared_factor},
        {"real-roots-constructed", 1e-8, check_roots},
        {"model-equivalence", 1e-12, check_model_equivalence},
        {"derivative-ml-actual", 1e-6, [] { return check_derivative(false, false); }},
        {"derivative-ml-virtual-penalty", 1e-6, [] { return check_derivative(true, false); }},
        {"derivative-map-actual", 1e-6, [] { return check_derivative(false, true); }},
        {"derivative-map-virtual-penalty", 1e-6, [] { return check_derivative(true, true); }},
        {"grid-ml-actual", 1e-8, [] { return check_grid(DetectorKind::MlAct); }},
        {"grid-ml-virtual-penalty", 1e-8, [] { return check_grid(DetectorKind::MlVirtPen); }},
        {"grid-ml-virtual-relaxed", 1e-8, [] { return check_grid(DetectorKind::MlVirtRel); }},
        {"grid-map-actual", 1e-8, [] { return check_grid(DetectorKind::MapAct); }},
        {"grid-map-virtual-penalty", 1e-8, [] { return check_grid(DetectorKind::MapVirtPen); }},
        {"grid-map-virtual-relaxed", 1e-8, [] { return check_grid(DetectorKind::MapVirtRel); }},
        {"descent-and-drift", 0.0, check_descent_and_drift},
        {"prior-normalization", 1e-12, check_prior_normalization},
    };
}

} // namespace

std::vector<std::string> selftest_check_names() {
    std::vector<std::string> names;
    for (const auto& c : checks()) names.push_back(c.name);
    return names;
}

std::vector<SelftestCheck> run_selftest(const std::optional<std::string>& fault) {
    std::vector<SelftestCheck> out;
    for (const auto& c : checks()) {
        SelftestCheck r;
        r.name = c.name;
        double err = 0.0;
        try {
            err = c.run();
        } catch (const std::exception& e) {
            r.detail = std::string("threw: ") + e.what();
            out.push_back(r);
            continue;
        }
        if (fault && *fault == c.name) err += 1.0;
        r.passed = std::isfinite(err) && err <= c.tolerance;
        std::ostringstream os;
        os << "error " << err << " (tolerance " << c.tolerance << ")";
        r.detail = os.str();
        out.push_back(r);
    }
    return out;
}

int cmd_selftest(const std::optional<std::string>& fault, std::ostream& out, std::ostream& err) {
    if (fault) {
        const auto names = selftest_check_names();
        if (std::find(names.begin(), names.end(), *fault) == names.end()) {
            err << "unknown check '" << *fault << "'; known checks:";
            for (const auto& n : names) err << ' ' << n;
            err << '\n';
            return 2;
        }
    }
    bool all = true;
    for (const auto& r : run_selftest(fault)) {
        out << (r.passed ? "PASS " : "FAIL ") << r.name << "  " << r.detail << '\n';
        all = all && r.passed;
    }
    return all ? 0 : 1;
}

} // namespace gfad::cli
