#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

namespace gfad {

/// Maximum device count for which a general MVB prior is accepted. Exact
/// sampling and normalization enumerate all 2^N activity patterns.
inline constexpr std::size_t kMaxMvbDevices = 16;

struct IidPrior {
    double q = 0.05;
};

/// Devices partitioned into groups that share one activity state. Detection
/// uses the MVB approximation from group_coefficients(); generation draws one
/// Bernoulli(q) per group.
struct GroupPrior {
    std::vector<std::vector<std::size_t>> groups;
    double q = 0.05;
    double epsilon = 1e-3;
    std::size_t n_devices = 0;
    std::vector<std::size_t> group_of;  // device -> group index
};

struct MvbTerm {
    std::vector<std::size_t> omega;  // nonempty subset of device indices
    double c = 0.0;
};

/// General multivariate Bernoulli prior, exponent sum_omega c_omega prod_{n in omega} alpha_n.
struct MvbPrior {
    std::size_t n_devices = 0;
    std::vector<MvbTerm> terms;
};

/// Activity prior. Immutable after construction; every factory validates.
class PriorModel {
public:
    using Variant = std::variant<IidPrior, GroupPrior, MvbPrior>;

    static PriorModel iid(double q);
    static PriorModel group(std::vector<std::vector<std::size_t>> partition, double q, double epsilon);
    /// K near-equal contiguous groups over N devices.
    static PriorModel group_uniform(std::size_t n_devices, std::size_t k_groups, double q, double epsilon);
    static PriorModel mvb(std::size_t n_devices, std::vector<MvbTerm> terms);

    const Variant& variant() const { return v_; }
    bool is_iid() const { return std::holds_alternative<IidPrior>(v_); }
    /// Marginal-activity parameter q (iid and group); NaN for general MVB.
    double q() const;
    /// Device count the prior is defined over, or 0 for iid (any N).
    std::size_t n_devices() const;
    /// Throws ConfigError unless the prior is usable for N devices.
    void check_devices(std::size_t n) const;

private:
    explicit PriorModel(Variant v) : v_(std::move(v)) {}
    Variant v_;
};

/// Near-equal contiguous partition of {0..N-1} into K groups.
std::vector<std::vector<std::size_t>> contiguous_partition(std::size_t n_devices, std::size_t k_groups);

/// MVB coefficients approximating the group-activity model. For omega inside a
/// group N_k with K0 = log((1-q)/(N eps)):
///   |omega| <  |N_k|        -> (-1)^|omega| K0
///   |omega| == |N_k|, odd   -> log(q/(1-q))
///   |omega| == |N_k|, even  -> log(q/(1-q)) + 2 K0
/// Subsets spanning several groups have zero coefficient and are not stored.
MvbPrior group_coefficients(const std::vector<std::vector<std::size_t>>& partition, double q,
                            double epsilon);

/// Exponent of the prior p.m.f. without the normalizer. For iid priors this is
/// the normalized log p.m.f. log(q/(1-q)) sum alpha + N log(1-q). Accepts soft
/// activities (the exponent is multilinear).
double log_pmf_unnormalized(const PriorModel& prior, std::span<const double> alpha);

/// Partial derivative of the exponent with respect to alpha_n.
double epsilon_actual(const PriorModel& prior, std::size_t n, std::span<const double> alpha);

/// Partial derivative with respect to beta_i of the exponent evaluated at the
/// tap-averaged activities (sum_p beta_{nP+p}) / P.
double epsilon_virtual(const PriorModel& prior, std::size_t i, std::span<const double> beta,
                       std::size_t taps);

/// log sum_alpha exp(exponent(alpha)) by enumeration. Throws CapabilityError
/// when N exceeds kMaxMvbDevices.
double log_normalizer(const PriorModel& prior, std::size_t n_devices);

/// Elementary symmetric polynomials e_0..e_k of the values.
std::vector<double> elementary_symmetric(std::span<const double> values);

} // namespace gfad
