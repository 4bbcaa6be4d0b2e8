#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "gfad/numeric.hpp"
#include "gfad/prior.hpp"
#include "gfad/rng.hpp"

namespace gfad {

/// System dimensions and powers. All quantities linear (not dB).
struct SystemConfig {
    std::size_t n_devices = 100;     // N
    std::size_t n_subcarriers = 24;  // L
    std::size_t n_antennas = 32;     // M
    std::size_t n_taps = 2;          // P
    double noise_var = 0.1;          // sigma^2
    std::vector<double> gains;       // g_n; empty means all ones

    /// Throws ConfigError unless N, L, M, P >= 1, P < L, sigma^2 > 0 and every g_n > 0.
    void validate() const;
    double gain(std::size_t n) const { return gains.empty() ? 1.0 : gains[n]; }
    /// Large-scale gain of virtual device i, i.e. g of device i / P.
    double virtual_gain(std::size_t i) const { return gain(i / n_taps); }
};

/// Frequency-domain pilots and their effective time-domain pilot blocks.
struct PilotSet {
    CMatrix freq;                 // L x N, column n is s~_n
    std::vector<CMatrix> blocks;  // S_n = (F^H diag(s~_n) F)_{:, 0:P}, each L x P
    CMatrix stacked;              // S = [S_1, ..., S_N], L x NP

    std::size_t n_devices() const { return blocks.size(); }
    std::size_t n_taps() const { return blocks.empty() ? 0 : static_cast<std::size_t>(blocks.front().cols()); }
};

struct ChannelRealization {
    std::vector<std::uint8_t> alpha;  // length N
    std::vector<CMatrix> taps;        // per device, M x P; row m holds h_{n,m}
    std::vector<std::uint8_t> beta;   // length NP, beta_{nP+p} = alpha_n
};

struct SampleCovariance {
    CMatrix sigma_hat;       // (1/M) R R^H
    std::size_t n_antennas;  // M
};

/// S_n = (F^H diag(s~) F) restricted to its first P columns. Throws
/// DimensionError when P >= L.
CMatrix effective_pilot(const CVector& freq_pilot, std::size_t taps);

/// Builds blocks and the stacked matrix from given frequency-domain pilots.
PilotSet pilots_from_frequency(const CMatrix& freq, std::size_t taps);

/// i.i.d. CN(0, 1) pilots, each column rescaled to norm sqrt(L). Deterministic in the seed.
PilotSet generate_pilots(const SystemConfig& cfg, std::uint64_t seed);
PilotSet generate_pilots(const SystemConfig& cfg, CounterRng& rng);

/// Activity draw: iid -> Bernoulli(q) per device; group -> one Bernoulli(q)
/// per group copied to its members; general MVB -> exact sampling by
/// enumeration (N <= 16, CapabilityError otherwise).
std::vector<std::uint8_t> draw_activities(const PriorModel& prior, std::size_t n_devices, CounterRng& rng);

/// Rayleigh taps h_{n,m,p} ~ CN(0,1) for every device (active or not).
ChannelRealization draw_realization(const SystemConfig& cfg, std::vector<std::uint8_t> alpha, CounterRng& rng);

/// beta_{nP+p} = alpha_n.
std::vector<std::uint8_t> replicate_activities(std::span<const std::uint8_t> alpha, std::size_t taps);

/// L x M matrix of i.i.d. CN(0, sigma^2) entries.
CMatrix draw_noise(std::size_t rows, std::size_t cols, double noise_var, CounterRng& rng);

/// Column m = sum_n alpha_n sqrt(g_n) S_n h_{n,m} + noise_m.
CMatrix received_actual(const SystemConfig& cfg, const PilotSet& pilots, const ChannelRealization& real,
                        const CMatrix& noise);

/// Column m = S B G^{1/2} h_m + noise_m, with h_m stacking h_{n,m} over devices.
CMatrix received_virtual(const SystemConfig& cfg, const PilotSet& pilots, const ChannelRealization& real,
                         const CMatrix& noise);

/// received_actual with freshly drawn CN(0, sigma^2 I) noise.
CMatrix synthesize_received(const SystemConfig& cfg, const PilotSet& pilots, const ChannelRealization& real,
                            CounterRng& rng);

SampleCovariance sample_covariance(const CMatrix& received);

/// sum_n alpha_n g_n S_n S_n^H + sigma^2 I.
CMatrix covariance_actual(const SystemConfig& cfg, const PilotSet& pilots, std::span<const double> alpha);

/// S B G S^H + sigma^2 I.
CMatrix covariance_virtual(const SystemConfig& cfg, const PilotSet& pilots, std::span<const double> beta);

/// Text pilot format: one line per entry, `n l re im` with 0-based n and l,
/// values printed with 17 significant digits. Lines starting with '#' are comments.
void write_pilots(std::ostream& os, const CMatrix& freq);
CMatrix read_pilots(std::istream& is);

} // namespace gfad
