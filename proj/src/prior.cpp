#include "gfad/prior.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "gfad/error.hpp"

namespace gfad {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_q(double q) {
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("prior: q must lie strictly inside (0, 1), got " + std::to_string(q));
}

double log_odds(double q) {
    return std::log(q / (1.0 - q));
}

// c_omega for |omega| = t inside a group of size s, over N devices in total.
double group_coefficient(std::size_t t, std::size_t s, double q, double eps, std::size_t n_total) {
    const double k0 = std::log((1.0 - q) / (static_cast<double>(n_total) * eps));
    if (t < s) return (t % 2 == 0) ? k0 : -k0;
    if (s % 2 == 1) return log_odds(q);
    return log_odds(q) + 2.0 * k0;
}

std::vector<double> gather(std::span<const double> alpha, const std::vector<std::size_t>& idx,
                           std::size_t skip = std::numeric_limits<std::size_t>::max()) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (std::size_t j : idx)
        if (j != skip) out.push_back(alpha[j]);
    return out;
}

void require_length(const PriorModel& prior, std::size_t n) {
    const std::size_t want = prior.n_devices();
    if (want != 0 && want != n)
        throw DimensionError("prior defined over " + std::to_string(want) + " devices, got " + std::to_string(n));
}

} // namespace

std::vector<double> elementary_symmetric(std::span<const double> values) {
    std::vector<double> e{1.0};
    for (double x : values) {
        e.push_back(0.0);
        for (std::size_t k = e.size() - 1; k >= 1; --k) e[k] += x * e[k - 1];
    }
    return e;
}

std::vector<std::vector<std::size_t>> contiguous_partition(std::size_t n_devices, std::size_t k_groups) {
    if (k_groups == 0 || k_groups > n_devices)
        throw ConfigError("group prior: need 1 <= k_groups <= N");
    std::vector<std::vector<std::size_t>> groups(k_groups);
    for (std::size_t n = 0; n < n_devices; ++n) groups[n * k_groups / n_devices].push_back(n);
    return groups;
}

PriorModel PriorModel::iid(double q) {
    // q = 0 and q = 1 are allowed for generation; MAP detection rejects them.
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("prior: q must lie in [0, 1], got " + std::to_string(q));
    return PriorModel(IidPrior{q});
}

PriorModel PriorModel::group(std::vector<std::vector<std::size_t>> partition, double q, double epsilon) {
    check_q(q);
    if (!(epsilon > 0.0)) throw ConfigError("group prior: epsilon must be positive");
    std::size_t n = 0;
    for (const auto& g : partition) {
        if (g.empty()) throw ConfigError("group prior: empty group");
        n += g.size();
    }
    std::vector<std::size_t> group_of(n, std::numeric_limits<std::size_t>::max());
    for (std::size_t k = 0; k < partition.size(); ++k) {
        for (std::size_t j : partition[k]) {
            if (j >= n || group_of[j] != std::numeric_limits<std::size_t>::max())
                throw ConfigError("group prior: groups must partition {0..N-1} disjointly");
            group_of[j] = k;
        }
    }
    return PriorModel(GroupPrior{std::move(partition), q, epsilon, n, std::move(group_of)});
}

PriorModel PriorModel::group_uniform(std::size_t n_devices, std::size_t k_groups, double q, double epsilon) {
    return group(contiguous_partition(n_devices, k_groups), q, epsilon);
}

PriorModel PriorModel::mvb(std::size_t n_devices, std::vector<MvbTerm> terms) {
    if (n_devices == 0) throw ConfigError("mvb prior: N must be positive");
    if (n_devices > kMaxMvbDevices)
        throw CapabilityError("mvb prior: general MVB is limited to N <= " + std::to_string(kMaxMvbDevices));
    for (auto& t : terms) {
        if (t.omega.empty()) throw ConfigError("mvb prior: omega must be nonempty");
        std::sort(t.omega.begin(), t.omega.end());
        if (std::adjacent_find(t.omega.begin(), t.omega.end()) != t.omega.end())
            throw ConfigError("mvb prior: repeated device in omega");
        if (t.omega.back() >= n_devices) throw ConfigError("mvb prior: device index out of range");
        if (!std::isfinite(t.c)) throw ConfigError("mvb prior: coefficient must be finite");
    }
    return PriorModel(MvbPrior{n_devices, std::move(terms)});
}

double PriorModel::q() const {
    return std::visit(overloaded{[](const IidPrior& p) { return p.q; },
                                 [](const GroupPrior& p) { return p.q; },
                                 [](const MvbPrior&) { return std::numeric_limits<double>::quiet_NaN(); }},
                      v_);
}

std::size_t PriorModel::n_devices() const {
    return std::visit(overloaded{[](const IidPrior&) -> std::size_t { return 0; },
                                 [](const GroupPrior& p) { return p.n_devices; },
                                 [](const MvbPrior& p) { return p.n_devices; }},
                      v_);
}

void PriorModel::check_devices(std::size_t n) const {
    const std::size_t want = n_devices();
    if (want != 0 && want != n)
        throw ConfigError("prior is defined over " + std::to_string(want) + " devices but the system has " +
                          std::to_string(n));
}

MvbPrior group_coefficients(const std::vector<std::vector<std::size_t>>& partition, double q, double epsilon) {
    const PriorModel checked = PriorModel::group(partition, q, epsilon);
    const auto& gp = std::get<GroupPrior>(checked.variant());
    MvbPrior out{gp.n_devices, {}};
    for (const auto& g : gp.groups) {
        const std::size_t s = g.size();
        if (s > 24) throw CapabilityError("group_coefficients: group too large to enumerate subsets");
        for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << s); ++mask) {
            MvbTerm term;
            for (std::size_t b = 0; b < s; ++b)
                if (mask & (std::uint64_t{1} << b)) term.omega.push_back(g[b]);
            term.c = group_coefficient(term.omega.size(), s, q, epsilon, gp.n_devices);
            out.terms.push_back(std::move(term));
        }
    }
    return out;
}

double log_pmf_unnormalized(const PriorModel& prior, std::span<const double> alpha) {
    require_length(prior, alpha.size());
    return std::visit(
        overloaded{
            [&](const IidPrior& p) {
                double s = 0.0;
                for (double a : alpha) s += a;
                return log_odds(p.q) * s + static_cast<double>(alpha.size()) * std::log(1.0 - p.q);
            },
            [&](const GroupPrior& p) {
                double acc = 0.0;
                for (const auto& g : p.groups) {
                    const auto e = elementary_symmetric(gather(alpha, g));
                    for (std::size_t t = 1; t <= g.size(); ++t)
                        acc += group_coefficient(t, g.size(), p.q, p.epsilon, p.n_devices) * e[t];
                }
                return acc;
            },
            [&](const MvbPrior& p) {
                double acc = 0.0;
                for (const auto& t : p.terms) {
                    double prod = t.c;
                    for (std::size_t j : t.omega) prod *= alpha[j];
                    acc += prod;
                }
                return acc;
            }},
        prior.variant());
}

double epsilon_actual(const PriorModel& prior, std::size_t n, std::span<const double> alpha) {
    require_length(prior, alpha.size());
    if (n >= alpha.size()) throw DimensionError("epsilon_actual: device index out of range");
    return std::visit(
        overloaded{[&](const IidPrior& p) { return log_odds(p.q); },
                   [&](const GroupPrior& p) {
                       const auto& g = p.groups[p.group_of[n]];
                       const auto e = elementary_symmetric(gather(alpha, g, n));
                       double acc = 0.0;
                       for (std::size_t t = 0; t < g.size(); ++t)
                           acc += group_coefficient(t + 1, g.size(), p.q, p.epsilon, p.n_devices) * e[t];
                       return acc;
                   },
                   [&](const MvbPrior& p) {
                       double acc = 0.0;
                       for (const auto& t : p.terms) {
                           if (!std::binary_search(t.omega.begin(), t.omega.end(), n)) continue;
                           double prod = t.c;
                           for (std::size_t j : t.omega)
                               if (j != n) prod *= alpha[j];
                           acc += prod;
                       }
                       return acc;
                   }},
        prior.variant());
}

double epsilon_virtual(const PriorModel& prior, std::size_t i, std::span<const double> beta, std::size_t taps) {
    if (taps == 0 || beta.size() % taps != 0)
        throw DimensionError("epsilon_virtual: length must be a multiple of the tap count");
    if (i >= beta.size()) throw DimensionError("epsilon_virtual: index out of range");
    if (prior.is_iid()) return log_odds(prior.q()) / static_cast<double>(taps);
    const std::size_t n_dev = beta.size() / taps;
    std::vector<double> alpha(n_dev, 0.0);
    for (std::size_t n = 0; n < n_dev; ++n) {
        double s = 0.0;
        for (std::size_t p = 0; p < taps; ++p) s += beta[n * taps + p];
        alpha[n] = s / static_cast<double>(taps);
    }
    return epsilon_actual(prior, i / taps, alpha) / static_cast<double>(taps);
}

double log_normalizer(const PriorModel& prior, std::size_t n_devices) {
    require_length(prior, n_devices);
    if (prior.is_iid()) return 0.0;
    if (n_devices > kMaxMvbDevices)
        throw CapabilityError("log_normalizer: enumeration limited to N <= " + std::to_string(kMaxMvbDevices));
    std::vector<double> alpha(n_devices, 0.0);
    std::vector<double> exps;
    exps.reserve(std::size_t{1} << n_devices);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n_devices); ++mask) {
        for (std::size_t j = 0; j < n_devices; ++j) alpha[j] = (mask >> j) & 1U ? 1.0 : 0.0;
        exps.push_back(log_pmf_unnormalized(prior, alpha));
    }
    const double mx = *std::max_element(exps.begin(), exps.end());
    double s = 0.0;
    for (double e : exps) s += std::exp(e - mx);
    return mx + std::log(s);
}

} // namespace gfad
