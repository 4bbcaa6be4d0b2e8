#include "gfad/signal.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "gfad/error.hpp"

namespace gfad {

void SystemConfig::validate() const {
    if (n_devices == 0 || n_subcarriers == 0 || n_antennas == 0 || n_taps == 0)
        throw ConfigError("system: N, L, M and P must all be at least 1");
    if (n_taps >= n_subcarriers) throw ConfigError("system: need P < L");
    if (!(noise_var > 0.0) || !std::isfinite(noise_var)) throw ConfigError("system: noise variance must be positive");
    if (!gains.empty()) {
        if (gains.size() != n_devices) throw ConfigError("system: gains must have one entry per device");
        for (double g : gains)
            if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("system: gains must be positive");
    }
}

CMatrix effective_pilot(const CVector& freq_pilot, std::size_t taps) {
    const auto L = static_cast<std::size_t>(freq_pilot.size());
    if (taps == 0 || taps >= L) throw DimensionError("effective_pilot: need 1 <= P < L");
    const CMatrix F = dft_matrix(L);
    const CMatrix full = F.adjoint() * freq_pilot.asDiagonal() * F.leftCols(static_cast<Eigen::Index>(taps));
    return full;
}

PilotSet pilots_from_frequency(const CMatrix& freq, std::size_t taps) {
    const auto L = static_cast<std::size_t>(freq.rows());
    if (taps == 0 || taps >= L) throw DimensionError("pilots: need 1 <= P < L");
    const CMatrix F = dft_matrix(L);
    const CMatrix Fh = F.adjoint();
    const auto P = static_cast<Eigen::Index>(taps);
    PilotSet out;
    out.freq = freq;
    out.stacked.resize(freq.rows(), freq.cols() * P);
    out.blocks.reserve(static_cast<std::size_t>(freq.cols()));
    for (Eigen::Index n = 0; n < freq.cols(); ++n) {
        CMatrix blk = Fh * freq.col(n).asDiagonal() * F.leftCols(P);
        out.stacked.middleCols(n * P, P) = blk;
        out.blocks.push_back(std::move(blk));
    }
    return out;
}

PilotSet generate_pilots(const SystemConfig& cfg, CounterRng& rng) {
    cfg.validate();
    const auto L = static_cast<Eigen::Index>(cfg.n_subcarriers);
    const auto N = static_cast<Eigen::Index>(cfg.n_devices);
    CMatrix freq(L, N);
    for (Eigen::Index n = 0; n < N; ++n) {
        for (Eigen::Index l = 0; l < L; ++l) freq(l, n) = rng.complex_normal();
        freq.col(n) *= std::sqrt(static_cast<double>(L)) / freq.col(n).norm();
    }
    return pilots_from_frequency(freq, cfg.n_taps);
}

PilotSet generate_pilots(const SystemConfig& cfg, std::uint64_t seed) {
    CounterRng rng(derive_key(seed, {static_cast<std::uint64_t>(StreamPurpose::Pilot)}));
    return generate_pilots(cfg, rng);
}

std::vector<std::uint8_t> draw_activities(const PriorModel& prior, std::size_t n_devices, CounterRng& rng) {
    prior.check_devices(n_devices);
    std::vector<std::uint8_t> alpha(n_devices, 0);
    if (const auto* p = std::get_if<IidPrior>(&prior.variant())) {
        for (auto& a : alpha) a = rng.uniform() < p->q ? 1 : 0;
        return alpha;
    }
    if (const auto* p = std::get_if<GroupPrior>(&prior.variant())) {
        for (const auto& g : p->groups) {
            const std::uint8_t on = rng.uniform() < p->q ? 1 : 0;
            for (std::size_t j : g) alpha[j] = on;
        }
        return alpha;
    }
    if (n_devices > kMaxMvbDevices)
        throw CapabilityError("draw_activities: general MVB sampling limited to N <= " +
                              std::to_string(kMaxMvbDevices));
    const double log_z = log_normalizer(prior, n_devices);
    const double u = rng.uniform();
    std::vector<double> soft(n_devices, 0.0);
    double cum = 0.0;
    const std::uint64_t states = std::uint64_t{1} << n_devices;
    for (std::uint64_t mask = 0; mask < states; ++mask) {
        for (std::size_t j = 0; j < n_devices; ++j) soft[j] = (mask >> j) & 1U ? 1.0 : 0.0;
        cum += std::exp(log_pmf_unnormalized(prior, soft) - log_z);
        if (u < cum || mask + 1 == states) {
            for (std::size_t j = 0; j < n_devices; ++j) alpha[j] = static_cast<std::uint8_t>((mask >> j) & 1U);
            break;
        }
    }
    return alpha;
}

std::vector<std::uint8_t> replicate_activities(std::span<const std::uint8_t> alpha, std::size_t taps) {
    std::vector<std::uint8_t> beta;
    beta.reserve(alpha.size() * taps);
    for (std::uint8_t a : alpha)
        for (std::size_t p = 0; p < taps; ++p) beta.push_back(a);
    return beta;
}

ChannelRealization draw_realization(const SystemConfig& cfg, std::vector<std::uint8_t> alpha, CounterRng& rng) {
    if (alpha.size() != cfg.n_devices) throw DimensionError("draw_realization: activity length must equal N");
    ChannelRealization out;
    out.beta = replicate_activities(alpha, cfg.n_taps);
    out.alpha = std::move(alpha);
    const auto M = static_cast<Eigen::Index>(cfg.n_antennas);
    const auto P = static_cast<Eigen::Index>(cfg.n_taps);
    out.taps.reserve(cfg.n_devices);
    for (std::size_t n = 0; n < cfg.n_devices; ++n) {
        CMatrix h(M, P);
        for (Eigen::Index m = 0; m < M; ++m)
            for (Eigen::Index p = 0; p < P; ++p) h(m, p) = rng.complex_normal();
        out.taps.push_back(std::move(h));
    }
    return out;
}

CMatrix draw_noise(std::size_t rows, std::size_t cols, double noise_var, CounterRng& rng) {
    const double s = std::sqrt(noise_var);
    CMatrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index c = 0; c < out.cols(); ++c)
        for (Eigen::Index r = 0; r < out.rows(); ++r) out(r, c) = s * rng.complex_normal();
    return out;
}

namespace {
void check_shapes(const SystemConfig& cfg, const PilotSet& pilots, const ChannelRealization& real,
                  const CMatrix& noise) {
    if (pilots.n_devices() != cfg.n_devices || pilots.n_taps() != cfg.n_taps ||
        static_cast<std::size_t>(pilots.stacked.rows()) != cfg.n_subcarriers)
        throw DimensionError("received signal: pilots do not match the system configuration");
    if (real.alpha.size() != cfg.n_devices || real.taps.size() != cfg.n_devices)
        throw DimensionError("received signal: realization does not match N");
    if (static_cast<std::size_t>(noise.rows()) != cfg.n_subcarriers ||
        static_cast<std::size_t>(noise.cols()) != cfg.n_antennas)
        throw DimensionError("received signal: noise must be L x M");
}
} // namespace

CMatrix received_actual(const SystemConfig& cfg, const PilotSet& pilots, const ChannelRealization& real,
                        const CMatrix& noise) {
    check_shapes(cfg, pilots, real, noise);
    CMatrix R = noise;
    for (std::size_t n = 0; n < cfg.n_devices; ++n) {
        if (!real.alpha[n]) continue;
        // S_n h_{n,m} for all m at once: (L x P) (P x M).
        R.noalias() += std::sqrt(cfg.gain(n)) * pilots.blocks[n] * real.taps[n].transpose();
    }
    return R;
}

CMatrix received_virtual(const SystemConfig& cfg, const PilotSet& pilots, const ChannelRealization& real,
                         const CMatrix& noise) {
    check_shapes(cfg, pilots, real, noise);
    const std::size_t NP = cfg.n_devices * cfg.n_taps;
    const auto M = static_cast<Eigen::Index>(cfg.n_antennas);
    CMatrix H(static_cast<Eigen::Index>(NP), M);  // column m is h_m
    for (std::size_t n = 0; n < cfg.n_devices; ++n)
        for (std::size_t p = 0; p < cfg.n_taps; ++p)
            H.row(static_cast<Eigen::Index>(n * cfg.n_taps + p)) = real.taps[n].col(static_cast<Eigen::Index>(p)).transpose();
    RVector bg(static_cast<Eigen::Index>(NP));
    for (std::size_t i = 0; i < NP; ++i)
        bg[static_cast<Eigen::Index>(i)] = static_cast<double>(real.beta[i]) * std::sqrt(cfg.virtual_gain(i));
    CMatrix R = pilots.stacked * (bg.cast<cdouble>().asDiagonal() * H);
    R += noise;
    return R;
}

CMatrix synthesize_received(const SystemConfig& cfg, const PilotSet& pilots, const ChannelRealization& real,
                            CounterRng& rng) {
    return received_actual(cfg, pilots, real, draw_noise(cfg.n_subcarriers, cfg.n_antennas, cfg.noise_var, rng));
}

SampleCovariance sample_covariance(const CMatrix& received) {
    if (received.cols() < 1) throw DimensionError("sample_covariance: need at least one column");
    CMatrix s = received * received.adjoint() / static_cast<double>(received.cols());
    return SampleCovariance{hermitian_part(s), static_cast<std::size_t>(received.cols())};
}

CMatrix covariance_actual(const SystemConfig& cfg, const PilotSet& pilots, std::span<const double> alpha) {
    if (alpha.size() != pilots.n_devices()) throw DimensionError("covariance_actual: activity length mismatch");
    const auto L = pilots.stacked.rows();
    CMatrix sigma = cfg.noise_var * CMatrix::Identity(L, L);
    for (std::size_t n = 0; n < alpha.size(); ++n) {
        if (alpha[n] == 0.0) continue;
        sigma.noalias() += (alpha[n] * cfg.gain(n)) * pilots.blocks[n] * pilots.blocks[n].adjoint();
    }
    return hermitian_part(sigma);
}

CMatrix covariance_virtual(const SystemConfig& cfg, const PilotSet& pilots, std::span<const double> beta) {
    if (beta.size() != static_cast<std::size_t>(pilots.stacked.cols()))
        throw DimensionError("covariance_virtual: activity length mismatch");
    const auto L = pilots.stacked.rows();
    RVector w(static_cast<Eigen::Index>(beta.size()));
    for (std::size_t i = 0; i < beta.size(); ++i) w[static_cast<Eigen::Index>(i)] = beta[i] * cfg.virtual_gain(i);
    CMatrix sigma = pilots.stacked * w.cast<cdouble>().asDiagonal() * pilots.stacked.adjoint();
    sigma += cfg.noise_var * CMatrix::Identity(L, L);
    return hermitian_part(sigma);
}

void write_pilots(std::ostream& os, const CMatrix& freq) {
    os << "# n l re im\n";
    os << std::setprecision(17);
    for (Eigen::Index n = 0; n < freq.cols(); ++n)
        for (Eigen::Index l = 0; l < freq.rows(); ++l)
            os << n << ' ' << l << ' ' << freq(l, n).real() << ' ' << freq(l, n).imag() << '\n';
}

CMatrix read_pilots(std::istream& is) {
    struct Entry {
        std::size_t n, l;
        double re, im;
    };
    std::vector<Entry> entries;
    std::string line;
    std::size_t line_no = 0, max_n = 0, max_l = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        Entry e{};
        long long n = -1, l = -1;
        if (!(ls >> n >> l >> e.re >> e.im) || n < 0 || l < 0)
            throw ConfigError("pilot file line " + std::to_string(line_no) + ": expected `n l re im`");
        std::string extra;
        if (ls >> extra) throw ConfigError("pilot file line " + std::to_string(line_no) + ": trailing data");
        e.n = static_cast<std::size_t>(n);
        e.l = static_cast<std::size_t>(l);
        max_n = std::max(max_n, e.n);
        max_l = std::max(max_l, e.l);
        entries.push_back(e);
    }
    if (entries.empty()) throw ConfigError("pilot file: no entries");
    const std::size_t N = max_n + 1, L = max_l + 1;
    if (entries.size() != N * L) throw ConfigError("pilot file: expected " + std::to_string(N * L) + " entries");
    CMatrix freq(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(N));
    std::vector<std::uint8_t> seen(N * L, 0);
    for (const auto& e : entries) {
        auto& flag = seen[e.n * L + e.l];
        if (flag) throw ConfigError("pilot file: duplicate entry for device " + std::to_string(e.n));
        flag = 1;
        freq(static_cast<Eigen::Index>(e.l), static_cast<Eigen::Index>(e.n)) = {e.re, e.im};
    }
    return freq;
}

} // namespace gfad
