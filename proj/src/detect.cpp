#include "gfad/detect.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "gfad/rng.hpp"

namespace gfad {

namespace {

constexpr double kTieTol = 1e-12;
// Moves shorter than this are round-off around a stationary point and are skipped.
constexpr double kMinStep = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct KindInfo {
    DetectorKind kind;
    std::string_view name;
};

constexpr std::array<KindInfo, 7> kKindNames{{
    {DetectorKind::MlAct, "ml-act"},
    {DetectorKind::MlVirtPen, "ml-virt-pen"},
    {DetectorKind::MlVirtRel, "ml-virt-rel"},
    {DetectorKind::MapAct, "map-act"},
    {DetectorKind::MapVirtPen, "map-virt-pen"},
    {DetectorKind::MapVirtRel, "map-virt-rel"},
    {DetectorKind::BlMlFlat, "bl-ml-flat"},
}};

double trace_product(const CMatrix& a, const CMatrix& b) {
    // tr(A B) = sum_ij A_ij B_ji
    return (a.transpose().cwiseProduct(b)).sum().real();
}

template <class F>
CoordinateStep select_candidate(F&& f, const std::vector<double>& candidates) {
    std::vector<double> vals(candidates.size());
    double min_val = kInf;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        vals[k] = f(candidates[k]);
        if (std::isfinite(vals[k])) min_val = std::min(min_val, vals[k]);
    }
    if (!std::isfinite(min_val)) return CoordinateStep{};
    // Near-equal minimizers resolve to the smallest move.
    CoordinateStep best;
    bool found = false;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        if (!(vals[k] <= min_val + kTieTol)) continue;
        if (!found || std::abs(candidates[k]) < std::abs(best.d)) {
            best.d = candidates[k];
            best.delta = vals[k];
            found = true;
        }
    }
    // The current point is the fallback when no candidate improves on it.
    if (best.delta > 0.0 || std::abs(best.d) < kMinStep) return CoordinateStep{};
    for (std::size_t k = 0; k < candidates.size(); ++k)
        if (vals[k] <= min_val + kTieTol && std::abs(candidates[k] - best.d) > 1e-10) best.tie = true;
    return best;
}

std::vector<double> root_candidates(const RealPolynomial& poly, double lo, double hi) {
    std::vector<double> c;
    try {
        c = real_roots_in_interval(poly, lo, hi);
    } catch (const DegeneratePolynomialError&) {
        // Flat objective: every point is stationary, staying put included.
        c.push_back(0.0);
    }
    c.push_back(lo);
    c.push_back(hi);
    return c;
}

} // namespace

std::string_view detector_name(DetectorKind kind) {
    for (const auto& k : kKindNames)
        if (k.kind == kind) return k.name;
    return "unknown";
}

DetectorKind parse_detector(std::string_view name) {
    for (const auto& k : kKindNames)
        if (k.name == name) return k.kind;
    throw ConfigError("unknown detector kind '" + std::string(name) + "'");
}

bool is_map(DetectorKind k) {
    return k == DetectorKind::MapAct || k == DetectorKind::MapVirtPen || k == DetectorKind::MapVirtRel;
}

bool is_penalty(DetectorKind k) {
    return k == DetectorKind::MlVirtPen || k == DetectorKind::MapVirtPen;
}

bool is_virtual(DetectorKind k) {
    return k == DetectorKind::MlVirtPen || k == DetectorKind::MlVirtRel || k == DetectorKind::MapVirtPen ||
           k == DetectorKind::MapVirtRel;
}

void DetectorConfig::validate() const {
    if (!(rho >= 0.0) || !std::isfinite(rho)) throw ConfigError("detector: rho must be a finite value >= 0");
    if (is_penalty(kind) && !(rho > 0.0)) throw ConfigError("detector: penalty kinds need rho > 0");
    if (rho_continuation && !(rho_max >= rho)) throw ConfigError("detector: rho_max must be >= rho");
    if (max_sweeps == 0) throw ConfigError("detector: max_sweeps must be at least 1");
    if (!(tol >= 0.0)) throw ConfigError("detector: tol must be >= 0");
    if (refresh_interval == 0) throw ConfigError("detector: refresh_interval must be at least 1");
}

CoordinateQuadratic make_coordinate_quadratic(const CMatrix& gamma, const CMatrix& gamma_hat) {
    if (gamma.rows() != gamma.cols() || gamma_hat.rows() != gamma.rows() || gamma_hat.cols() != gamma.cols())
        throw DimensionError("coordinate quadratic: gamma and gamma_hat must be square and equal in size");
    EigenPair e = eig_hermitian(gamma);
    CoordinateQuadratic q;
    q.v = e.values.cwiseMax(0.0);
    q.u = (e.vectors.adjoint() * hermitian_part(gamma_hat) * e.vectors).diagonal().real().cwiseMax(0.0);
    q.U = std::move(e.vectors);
    return q;
}

double actual_coordinate_objective(const CoordinateQuadratic& q, double d, double prior_slope) {
    double acc = -d * prior_slope;
    for (Eigen::Index p = 0; p < q.v.size(); ++p) {
        const double den = 1.0 + q.v[p] * d;
        if (!(den > 0.0)) return kInf;
        acc += std::log1p(q.v[p] * d) - d * q.u[p] / den;
    }
    return acc;
}

RealPolynomial actual_derivative_numerator(const CoordinateQuadratic& q, double prior_slope) {
    const std::span<const double> v(q.v.data(), static_cast<std::size_t>(q.v.size()));
    RealPolynomial out(std::vector<double>(1, 0.0));
    for (std::size_t p = 0; p < v.size(); ++p) {
        RealPolynomial lead({v[p] - q.u[static_cast<Eigen::Index>(p)], v[p] * v[p]});
        out += lead * squared_factor_coeffs(v, p);
    }
    if (prior_slope != 0.0) out += squared_factor_coeffs(v) * (-prior_slope);
    return out;
}

double virtual_coordinate_objective(const VirtualCoordinate& c, double d) {
    const double den = 1.0 + c.gamma * d;
    if (!(den > 0.0)) return kInf;
    const double x = d / static_cast<double>(c.taps);
    return std::log1p(c.gamma * d) - d * c.gamma_hat / den + c.rho * x * (1.0 - 2.0 * c.tap_mean - x) -
           d * c.prior_slope;
}

RealPolynomial virtual_derivative_numerator(const VirtualCoordinate& c) {
    const double P = static_cast<double>(c.taps);
    const double g = c.gamma;
    const double a = c.rho / P * (1.0 - 2.0 * c.tap_mean);
    const double b = 2.0 * c.rho / (P * P);
    const double s = c.prior_slope;
    const double A = -b * g * g;
    const double B = a * g * g - 2.0 * b * g - s * g * g;
    const double C = g * g + 2.0 * a * g - b - 2.0 * s * g;
    const double D = g - c.gamma_hat + a - s;
    return RealPolynomial({D, C, B, A});
}

double penalty_eta(std::span<const double> beta, std::size_t taps) {
    double acc = 0.0;
    for (double m : collapse_virtual(beta, taps)) acc += m * (1.0 - m);
    return acc;
}

CoordinateStep solve_actual_coordinate(const CoordinateQuadratic& q, double lo, double hi, double prior_slope) {
    if (lo > hi) throw DimensionError("coordinate update: empty interval");
    const RealPolynomial poly = actual_derivative_numerator(q, prior_slope);
    return select_candidate([&](double d) { return actual_coordinate_objective(q, d, prior_slope); },
                            root_candidates(poly, lo, hi));
}

CoordinateStep solve_virtual_penalty(const VirtualCoordinate& c) {
    const double lo = -c.beta, hi = 1.0 - c.beta;
    return select_candidate([&](double d) { return virtual_coordinate_objective(c, d); },
                            root_candidates(virtual_derivative_numerator(c), lo, hi));
}

CoordinateStep solve_virtual_relaxed_ml(const VirtualCoordinate& c) {
    VirtualCoordinate plain = c;
    plain.rho = 0.0;
    plain.prior_slope = 0.0;
    if (!(c.gamma > 0.0)) return CoordinateStep{};
    const double d = std::clamp((c.gamma_hat - c.gamma) / (c.gamma * c.gamma), -c.beta, 1.0 - c.beta);
    if (std::abs(d) < kMinStep) return CoordinateStep{};
    return CoordinateStep{d, virtual_coordinate_objective(plain, d), false};
}

CoordinateStep solve_virtual_relaxed_map(const VirtualCoordinate& c) {
    VirtualCoordinate plain = c;
    plain.rho = 0.0;
    if (!(c.gamma > 0.0)) return CoordinateStep{};
    const double lo = -c.beta, hi = 1.0 - c.beta;
    const double C = c.prior_slope;
    const double g = c.gamma;
    const double delta = 1.0 - 4.0 * C * c.gamma_hat / (g * g);
    auto stable_root = [&] { return 2.0 * c.gamma_hat / (g * g * (1.0 + std::sqrt(delta))) - 1.0 / g; };
    double d = 0.0;
    if (C <= 0.0) {
        d = std::clamp(stable_root(), lo, hi);
    } else if (delta > 0.0) {
        const double s = std::clamp(stable_root(), lo, hi);
        d = virtual_coordinate_objective(plain, hi) < virtual_coordinate_objective(plain, s) ? hi : s;
    } else {
        d = hi;
    }
    if (std::abs(d) < kMinStep) return CoordinateStep{};
    return CoordinateStep{d, virtual_coordinate_objective(plain, d), false};
}

// ---------------------------------------------------------------------------

DetectorState::DetectorState(const SampleCovariance& sigma_hat, const PilotSet& pilots, const SystemConfig& cfg,
                             DetectorKind kind, const PriorModel* prior)
    : sigma_hat_(&sigma_hat.sigma_hat),
      prior_(prior),
      kind_(kind),
      taps_(cfg.n_taps),
      m_(sigma_hat.n_antennas),
      noise_var_(cfg.noise_var) {
    cfg.validate();
    const auto L = static_cast<Eigen::Index>(cfg.n_subcarriers);
    if (pilots.n_devices() != cfg.n_devices || pilots.n_taps() != cfg.n_taps || pilots.stacked.rows() != L)
        throw DimensionError("detector: pilots do not match the system configuration");
    if (sigma_hat.sigma_hat.rows() != L || sigma_hat.sigma_hat.cols() != L)
        throw DimensionError("detector: sample covariance must be L x L");
    if (m_ == 0) throw DimensionError("detector: sample covariance needs M >= 1");
    if (is_map(kind)) {
        if (prior == nullptr) throw ConfigError("detector: MAP kinds require a prior");
        prior->check_devices(cfg.n_devices);
        if (prior->is_iid() && !(prior->q() > 0.0 && prior->q() < 1.0))
            throw ConfigError("detector: MAP detection needs q strictly inside (0, 1)");
    } else {
        prior_ = nullptr;
    }

    if (is_virtual(kind)) {
        const std::size_t NP = cfg.n_devices * cfg.n_taps;
        blocks_.reserve(NP);
        for (std::size_t i = 0; i < NP; ++i) {
            blocks_.emplace_back(pilots.stacked.col(static_cast<Eigen::Index>(i)));
            gains_.push_back(cfg.virtual_gain(i));
        }
    } else if (kind == DetectorKind::BlMlFlat) {
        taps_ = 1;
        for (std::size_t n = 0; n < cfg.n_devices; ++n) {
            blocks_.emplace_back(pilots.blocks[n].col(0));
            gains_.push_back(cfg.gain(n));
        }
    } else {
        blocks_ = pilots.blocks;
        for (std::size_t n = 0; n < cfg.n_devices; ++n) gains_.push_back(cfg.gain(n));
    }
    x_.assign(blocks_.size(), 0.0);
    sigma_inv_ = CMatrix::Identity(L, L) / noise_var_;
}

CMatrix DetectorState::implied_covariance() const {
    const auto L = sigma_hat_->rows();
    CMatrix sigma = noise_var_ * CMatrix::Identity(L, L);
    for (std::size_t u = 0; u < x_.size(); ++u) {
        if (x_[u] == 0.0) continue;
        sigma.noalias() += (x_[u] * gains_[u]) * blocks_[u] * blocks_[u].adjoint();
    }
    return hermitian_part(sigma);
}

void DetectorState::apply(std::size_t u, double d) {
    const double next = std::clamp(x_[u] + d, 0.0, 1.0);
    const double step = next - x_[u];
    x_[u] = next;
    ++updates_;
    if (step == 0.0) return;
    const CMatrix w = sigma_inv_ * blocks_[u];
    const CMatrix gamma = blocks_[u].adjoint() * w;
    try {
        sigma_inv_ = woodbury_downdate_precomputed(sigma_inv_, w, gamma, step * gains_[u]);
    } catch (const SingularUpdateError&) {
        refresh();
    }
}

void DetectorState::refresh() {
    sigma_inv_ = factor_hpd(implied_covariance()).inverse;
}

void DetectorState::set_activities(std::vector<double> x) {
    if (x.size() != x_.size()) throw DimensionError("detector: activity length mismatch");
    for (double a : x)
        if (!(a >= 0.0 && a <= 1.0)) throw DimensionError("detector: activities must lie in [0, 1]");
    x_ = std::move(x);
    refresh();
}

double DetectorState::inverse_drift() const {
    return max_abs_diff(sigma_inv_, factor_hpd(implied_covariance()).inverse);
}

std::vector<double> DetectorState::collapsed() const {
    if (is_virtual(kind_)) return collapse_virtual(x_, taps_);
    return x_;
}

double DetectorState::prior_slope(std::size_t u) const {
    if (prior_ == nullptr) return 0.0;
    const double m = static_cast<double>(m_);
    if (is_virtual(kind_)) return epsilon_virtual(*prior_, u, x_, taps_) / m;
    return epsilon_actual(*prior_, u, x_) / m;
}

double DetectorState::objective(double rho) const {
    const HpdFactor f = factor_hpd(implied_covariance());
    double val = f.log_det + trace_product(f.inverse, *sigma_hat_);
    if (prior_ != nullptr) val -= log_pmf_unnormalized(*prior_, collapsed()) / static_cast<double>(m_);
    if (is_penalty(kind_)) val += rho * penalty_eta(x_, taps_);
    return val;
}

CoordinateQuadratic coordinate_quadratic(const DetectorState& state, std::size_t n) {
    if (n >= state.n_units()) throw DimensionError("coordinate update: index out of range");
    const CMatrix& blk = state.unit_block(n);
    const double g = state.unit_gain(n);
    const CMatrix w = state.sigma_inv() * blk;
    const CMatrix gamma = g * (blk.adjoint() * w);
    const CMatrix gamma_hat = g * (w.adjoint() * (state.sigma_hat() * w));
    return make_coordinate_quadratic(hermitian_part(gamma), gamma_hat);
}

VirtualCoordinate virtual_coordinate(const DetectorState& state, std::size_t i, double rho) {
    if (i >= state.n_units()) throw DimensionError("coordinate update: index out of range");
    const CMatrix& blk = state.unit_block(i);
    if (blk.cols() != 1) throw DimensionError("coordinate update: virtual update needs rank-one units");
    const double g = state.unit_gain(i);
    const CVector w = state.sigma_inv() * blk.col(0);
    VirtualCoordinate c;
    c.gamma = g * blk.col(0).dot(w).real();
    c.gamma_hat = std::max(0.0, g * w.dot(state.sigma_hat() * w).real());
    const auto& x = state.activities();
    c.beta = x[i];
    c.taps = state.taps();
    const std::size_t first = (i / c.taps) * c.taps;
    double s = 0.0;
    for (std::size_t p = 0; p < c.taps; ++p) s += x[first + p];
    c.tap_mean = s / static_cast<double>(c.taps);
    c.rho = rho;
    c.prior_slope = state.prior_slope(i);
    return c;
}

CoordinateStep coord_update_ml_actual(const DetectorState& state, std::size_t n) {
    const CoordinateQuadratic q = coordinate_quadratic(state, n);
    const double a = state.activities()[n];
    return solve_actual_coordinate(q, -a, 1.0 - a);
}

CoordinateStep coord_update_map_actual(const DetectorState& state, std::size_t n) {
    const CoordinateQuadratic q = coordinate_quadratic(state, n);
    const double a = state.activities()[n];
    return solve_actual_coordinate(q, -a, 1.0 - a, state.prior_slope(n));
}

CoordinateStep coord_update_ml_virtual_penalty(const DetectorState& state, std::size_t i, double rho) {
    VirtualCoordinate c = virtual_coordinate(state, i, rho);
    c.prior_slope = 0.0;
    return solve_virtual_penalty(c);
}

CoordinateStep coord_update_map_virtual_penalty(const DetectorState& state, std::size_t i, double rho) {
    return solve_virtual_penalty(virtual_coordinate(state, i, rho));
}

CoordinateStep coord_update_ml_virtual_relaxed(const DetectorState& state, std::size_t i) {
    return solve_virtual_relaxed_ml(virtual_coordinate(state, i, 0.0));
}

CoordinateStep coord_update_map_virtual_relaxed(const DetectorState& state, std::size_t i) {
    return solve_virtual_relaxed_map(virtual_coordinate(state, i, 0.0));
}

// ---------------------------------------------------------------------------

double ml_objective(const SampleCovariance& sigma_hat, const PilotSet& pilots, const SystemConfig& cfg,
                    std::span<const double> activities, ObjectiveMode mode) {
    const CMatrix sigma = mode == ObjectiveMode::Actual ? covariance_actual(cfg, pilots, activities)
                                                        : covariance_virtual(cfg, pilots, activities);
    if (sigma.rows() != sigma_hat.sigma_hat.rows()) throw DimensionError("objective: dimension mismatch");
    const HpdFactor f = factor_hpd(sigma);
    return f.log_det + trace_product(f.inverse, sigma_hat.sigma_hat);
}

double map_objective(const SampleCovariance& sigma_hat, const PilotSet& pilots, const SystemConfig& cfg,
                     std::span<const double> activities, ObjectiveMode mode, const PriorModel& prior) {
    const double ml = ml_objective(sigma_hat, pilots, cfg, activities, mode);
    const std::vector<double> alpha = mode == ObjectiveMode::Actual
                                          ? std::vector<double>(activities.begin(), activities.end())
                                          : collapse_virtual(activities, cfg.n_taps);
    return ml - log_pmf_unnormalized(prior, alpha) / static_cast<double>(sigma_hat.n_antennas);
}

DetectionOutput run_detector(const SampleCovariance& sigma_hat, const PilotSet& pilots, const SystemConfig& cfg,
                             const DetectorConfig& det, const PriorModel* prior) {
    det.validate();
    const auto t0 = std::chrono::steady_clock::now();
    DetectorState st(sigma_hat, pilots, cfg, det.kind, prior);
    DetectionOutput out;
    double rho = is_penalty(det.kind) ? det.rho : 0.0;

    auto step_at = [&](std::size_t u) {
        switch (det.kind) {
            case DetectorKind::MlAct: return coord_update_ml_actual(st, u);
            case DetectorKind::MapAct: return coord_update_map_actual(st, u);
            case DetectorKind::MlVirtPen: return coord_update_ml_virtual_penalty(st, u, rho);
            case DetectorKind::MapVirtPen: return coord_update_map_virtual_penalty(st, u, rho);
            case DetectorKind::MlVirtRel:
            case DetectorKind::BlMlFlat: return coord_update_ml_virtual_relaxed(st, u);
            case DetectorKind::MapVirtRel: return coord_update_map_virtual_relaxed(st, u);
        }
        return CoordinateStep{};
    };

    std::vector<std::size_t> order(st.n_units());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t since_refresh = 0;
    try {
        double obj = st.objective(rho);
        out.objective_trace.push_back(obj);
        for (std::size_t sweep = 1; sweep <= det.max_sweeps; ++sweep) {
            if (det.order == CoordinateOrder::RandomPerSweep) {
                std::iota(order.begin(), order.end(), std::size_t{0});
                CounterRng rng(derive_key(det.order_seed, {static_cast<std::uint64_t>(StreamPurpose::CoordinateOrder),
                                                           static_cast<std::uint64_t>(sweep)}));
                std::shuffle(order.begin(), order.end(), rng);
            }
            double running = obj;
            for (std::size_t u : order) {
                const CoordinateStep s = step_at(u);
                if (s.tie) ++out.tie_events;
                if (s.d == 0.0) continue;
                st.apply(u, s.d);
                running += s.delta;
                if (det.record_steps) out.step_trace.push_back(running);
                if (++since_refresh >= det.refresh_interval) {
                    st.refresh();
                    since_refresh = 0;
                }
            }
            const double next = st.objective(rho);
            out.objective_trace.push_back(next);
            out.sweeps = sweep;
            const double decrease = obj - next;
            obj = next;
            if (det.rho_continuation && is_penalty(det.kind) && rho < det.rho_max) {
                rho = std::min(2.0 * rho, det.rho_max);
                obj = st.objective(rho);
                continue;
            }
            if (decrease < det.tol * (1.0 + std::abs(next))) {
                out.converged = true;
                break;
            }
        }
        out.inverse_drift = st.inverse_drift();
    } catch (const DetectorFailure&) {
        throw;
    } catch (const ConditioningError& e) {
        throw DetectorFailure(std::string("detector ") + std::string(detector_name(det.kind)) + ": " + e.what(),
                              st.activities(), out.sweeps);
    }

    out.raw = st.activities();
    out.soft = st.collapsed();
    for (double& a : out.soft) a = std::clamp(a, 0.0, 1.0);
    out.penalty_residual = is_virtual(det.kind) ? penalty_eta(out.raw, st.taps()) : 0.0;
    out.updates = st.updates();
    out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

DetectionOutput baseline_flat_ml(const SampleCovariance& sigma_hat, const PilotSet& pilots, const SystemConfig& cfg,
                                 DetectorConfig det) {
    det.kind = DetectorKind::BlMlFlat;
    return run_detector(sigma_hat, pilots, cfg, det, nullptr);
}

std::vector<double> collapse_virtual(std::span<const double> beta, std::size_t taps) {
    if (taps == 0 || beta.size() % taps != 0)
        throw DimensionError("collapse_virtual: length " + std::to_string(beta.size()) +
                             " is not a multiple of P = " + std::to_string(taps));
    std::vector<double> alpha(beta.size() / taps, 0.0);
    for (std::size_t n = 0; n < alpha.size(); ++n) {
        double s = 0.0;
        for (std::size_t p = 0; p < taps; ++p) s += beta[n * taps + p];
        alpha[n] = s / static_cast<double>(taps);
    }
    return alpha;
}

std::vector<std::uint8_t> threshold(std::span<const double> soft, double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
    std::vector<std::uint8_t> out(soft.size());
    for (std::size_t k = 0; k < soft.size(); ++k) out[k] = soft[k] > theta ? 1 : 0;
    return out;
}

} // namespace gfad
