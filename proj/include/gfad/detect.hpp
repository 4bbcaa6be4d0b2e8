#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gfad/error.hpp"
#include "gfad/numeric.hpp"
#include "gfad/prior.hpp"
#include "gfad/signal.hpp"

namespace gfad {

enum class DetectorKind {
    MlAct,
    MlVirtPen,
    MlVirtRel,
    MapAct,
    MapVirtPen,
    MapVirtRel,
    BlMlFlat,
};

inline constexpr std::array<DetectorKind, 7> kAllDetectors{
    DetectorKind::MlAct,  DetectorKind::MlVirtPen,  DetectorKind::MlVirtRel, DetectorKind::MapAct,
    DetectorKind::MapVirtPen, DetectorKind::MapVirtRel, DetectorKind::BlMlFlat,
};

/// "ml-act", "ml-virt-pen", ..., "bl-ml-flat".
std::string_view detector_name(DetectorKind kind);
/// Inverse of detector_name. Throws ConfigError on an unknown name.
DetectorKind parse_detector(std::string_view name);

bool is_map(DetectorKind kind);
bool is_penalty(DetectorKind kind);
/// True for the kinds that optimize over NP virtual-device activities.
bool is_virtual(DetectorKind kind);

enum class CoordinateOrder { Natural, RandomPerSweep };

struct DetectorConfig {
    DetectorKind kind = DetectorKind::MlAct;
    double rho = 10.0;              // penalty parameter for *-pen kinds
    bool rho_continuation = false;  // rho <- min(2 rho, rho_max) after every sweep
    double rho_max = 1e3;
    std::size_t max_sweeps = 50;
    double tol = 1e-6;  // stop when a sweep lowers the objective by < tol (1 + |objective|)
    std::size_t refresh_interval = 100;
    CoordinateOrder order = CoordinateOrder::Natural;
    std::uint64_t order_seed = 0;
    bool record_steps = false;

    void validate() const;
};

/// Per-device quantities of the actual-device update, gain absorbed:
/// v = eig(g S^H Sigma^-1 S), u = diag(U^H (g S^H Sigma^-1 Sigma_hat Sigma^-1 S) U).
struct CoordinateQuadratic {
    RVector v;
    RVector u;
    CMatrix U;
};

/// Builds v, u and U from the per-device Gram matrices gamma = g S^H Sigma^-1 S and
/// gamma_hat = g S^H Sigma^-1 Sigma_hat Sigma^-1 S.
CoordinateQuadratic make_coordinate_quadratic(const CMatrix& gamma, const CMatrix& gamma_hat);

/// f(alpha + d e_n) - f(alpha) for the actual-device objective:
///   sum_p log(1 + v_p d) - d u_p / (1 + v_p d) - d prior_slope
/// where prior_slope = eps_n / M for MAP and 0 for ML.
double actual_coordinate_objective(const CoordinateQuadratic& q, double d, double prior_slope = 0.0);

/// Numerator of the derivative of actual_coordinate_objective over prod_p (1 + v_p d)^2:
///   sum_p (v_p + v_p^2 d - u_p) prod_{q != p} (1 + v_q d)^2 - prior_slope prod_p (1 + v_p d)^2.
RealPolynomial actual_derivative_numerator(const CoordinateQuadratic& q, double prior_slope = 0.0);

/// Scalar quantities of one virtual-device coordinate.
struct VirtualCoordinate {
    double gamma = 0.0;      // delta_i S_i^H Sigma^-1 S_i
    double gamma_hat = 0.0;  // delta_i S_i^H Sigma^-1 Sigma_hat Sigma^-1 S_i
    double beta = 0.0;       // current beta_i
    double tap_mean = 0.0;   // mean of the P taps of device ceil(i / P), including beta_i
    std::size_t taps = 1;    // P
    double rho = 0.0;        // 0 disables the penalty term
    double prior_slope = 0.0;  // eps_bar_i / M for MAP, 0 for ML
};

/// log(1 + gamma d) - d gamma_hat / (1 + gamma d) + rho x (1 - 2 m - x) - d prior_slope, x = d / P.
double virtual_coordinate_objective(const VirtualCoordinate& c, double d);

/// Derivative numerator over (1 + gamma d)^2; a cubic in d (quadratic when rho = 0).
RealPolynomial virtual_derivative_numerator(const VirtualCoordinate& c);

/// Penalty function eta(beta) = sum_n m_n (1 - m_n), m_n the tap mean of device n.
double penalty_eta(std::span<const double> beta, std::size_t taps);

/// Result of one coordinate minimization.
struct CoordinateStep {
    double d = 0.0;
    double delta = 0.0;  // change of the per-coordinate objective, <= 0
    bool tie = false;    // another candidate came within 1e-12 of the minimum
};

/// Minimizes actual_coordinate_objective over [lo, hi] using the real roots of the
/// derivative numerator and both endpoints; the current point d = 0 is kept when no
/// candidate improves on it.
CoordinateStep solve_actual_coordinate(const CoordinateQuadratic& q, double lo, double hi,
                                       double prior_slope = 0.0);
/// Cubic-root update of the penalized virtual coordinate over [-beta, 1 - beta].
CoordinateStep solve_virtual_penalty(const VirtualCoordinate& c);
/// Clipped closed form clip((gamma_hat - gamma) / gamma^2, -beta, 1 - beta).
CoordinateStep solve_virtual_relaxed_ml(const VirtualCoordinate& c);
/// Three-branch closed form of the MAP relaxed update with C = prior_slope.
CoordinateStep solve_virtual_relaxed_map(const VirtualCoordinate& c);

/// Detector working state: activities of the optimization units (devices or
/// virtual devices) and the maintained inverse covariance.
class DetectorState {
public:
    /// prior is required for MAP kinds and ignored otherwise. The referenced
    /// covariance, pilots, config and prior must outlive the state.
    DetectorState(const SampleCovariance& sigma_hat, const PilotSet& pilots, const SystemConfig& cfg,
                  DetectorKind kind, const PriorModel* prior = nullptr);

    DetectorKind kind() const { return kind_; }
    std::size_t n_units() const { return x_.size(); }
    std::size_t taps() const { return taps_; }
    std::size_t n_antennas() const { return m_; }
    const std::vector<double>& activities() const { return x_; }
    const CMatrix& sigma_inv() const { return sigma_inv_; }
    const CMatrix& sigma_hat() const { return *sigma_hat_; }
    const CMatrix& unit_block(std::size_t u) const { return blocks_[u]; }
    double unit_gain(std::size_t u) const { return gains_[u]; }
    const PriorModel* prior() const { return prior_; }

    /// sigma^2 I + sum_u x_u g_u B_u B_u^H.
    CMatrix implied_covariance() const;

    /// x_u += d with a Woodbury update of the inverse, falling back to a full
    /// re-inversion when the rank update is unusable.
    void apply(std::size_t u, double d);
    /// Recomputes the inverse from the implied covariance.
    void refresh();
    /// Replaces all activities and refreshes.
    void set_activities(std::vector<double> x);
    /// Max-norm gap between the maintained and the directly computed inverse.
    double inverse_drift() const;

    /// Per-device prior derivative eps / M (actual kinds) or eps_bar / M (virtual kinds).
    double prior_slope(std::size_t u) const;
    /// Activities collapsed to one value per actual device.
    std::vector<double> collapsed() const;

    /// Dense objective of the kind: log|Sigma| + tr(Sigma^-1 Sigma_hat), minus the
    /// prior exponent over M for MAP kinds, plus rho eta for penalty kinds.
    double objective(double rho) const;

    std::size_t updates() const { return updates_; }

private:
    const CMatrix* sigma_hat_;
    const PriorModel* prior_;
    DetectorKind kind_;
    std::size_t taps_;
    std::size_t m_;
    double noise_var_;
    std::vector<CMatrix> blocks_;
    std::vector<double> gains_;
    std::vector<double> x_;
    CMatrix sigma_inv_;
    std::size_t updates_ = 0;
};

/// Coordinate quantities read off the current state.
CoordinateQuadratic coordinate_quadratic(const DetectorState& state, std::size_t n);
VirtualCoordinate virtual_coordinate(const DetectorState& state, std::size_t i, double rho);

CoordinateStep coord_update_ml_actual(const DetectorState& state, std::size_t n);
CoordinateStep coord_update_ml_virtual_penalty(const DetectorState& state, std::size_t i, double rho);
CoordinateStep coord_update_ml_virtual_relaxed(const DetectorState& state, std::size_t i);
CoordinateStep coord_update_map_actual(const DetectorState& state, std::size_t n);
CoordinateStep coord_update_map_virtual_penalty(const DetectorState& state, std::size_t i, double rho);
CoordinateStep coord_update_map_virtual_relaxed(const DetectorState& state, std::size_t i);

enum class ObjectiveMode { Actual, Virtual };

/// f(alpha) or f(beta) by dense Cholesky factorization.
double ml_objective(const SampleCovariance& sigma_hat, const PilotSet& pilots, const SystemConfig& cfg,
                    std::span<const double> activities, ObjectiveMode mode);
/// ML objective minus (1/M) times the prior exponent (evaluated at tap means in virtual mode).
double map_objective(const SampleCovariance& sigma_hat, const PilotSet& pilots, const SystemConfig& cfg,
                     std::span<const double> activities, ObjectiveMode mode, const PriorModel& prior);

struct DetectionOutput {
    std::vector<double> soft;              // length N
    std::vector<double> raw;               // optimization variables (N or NP)
    std::vector<double> objective_trace;   // dense objective at start and after each sweep
    std::vector<double> step_trace;        // per accepted step, when record_steps is set
    std::size_t sweeps = 0;
    std::size_t updates = 0;
    double wall_ms = 0.0;
    double inverse_drift = 0.0;     // maintained vs direct inverse at the end of the run
    double penalty_residual = 0.0;  // eta of the raw activities (0 for actual kinds)
    std::size_t tie_events = 0;
    bool converged = false;
};

/// Raised when a covariance stops being positive definite during a run.
class DetectorFailure : public ConditioningError {
public:
    DetectorFailure(const std::string& what, std::vector<double> last_activities, std::size_t sweeps)
        : ConditioningError(what), last_activities(std::move(last_activities)), sweeps(sweeps) {}
    std::vector<double> last_activities;
    std::size_t sweeps;
};

DetectionOutput run_detector(const SampleCovariance& sigma_hat, const PilotSet& pilots, const SystemConfig& cfg,
                             const DetectorConfig& det, const PriorModel* prior = nullptr);

/// Flat-fading ML baseline: relaxed rank-one coordinate descent on the first
/// column of each S_n, as if P = 1.
DetectionOutput baseline_flat_ml(const SampleCovariance& sigma_hat, const PilotSet& pilots,
                                 const SystemConfig& cfg, DetectorConfig det = {});

/// Per-device tap mean. Throws DimensionError unless the length is a multiple of P.
std::vector<double> collapse_virtual(std::span<const double> beta, std::size_t taps);

/// 1 where soft > theta.
std::vector<std::uint8_t> threshold(std::span<const double> soft, double theta);

} // namespace gfad
