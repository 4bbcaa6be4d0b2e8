#include <doctest.h>

#include <sstream>

#include "gfad/error.hpp"
#include "gfad/signal.hpp"
#include "support/oracles.hpp"

using namespace gfad;

namespace {

SystemConfig small_cfg(std::size_t N = 6, std::size_t L = 8, std::size_t M = 4, std::size_t P = 2) {
    SystemConfig c;
    c.n_devices = N;
    c.n_subcarriers = L;
    c.n_antennas = M;
    c.n_taps = P;
    return c;
}

} // namespace

TEST_CASE("SystemConfig validation") {
    CHECK_NOTHROW(small_cfg().validate());
    auto c = small_cfg();
    c.n_taps = c.n_subcarriers;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_cfg();
    c.n_devices = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_cfg();
    c.noise_var = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_cfg();
    c.gains = {1, 1, 1, 1, 1, -1};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.gains = {1, 1};
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("generate_pilots normalizes and is deterministic") {
    for (std::uint64_t seed : {1u, 2u, 99u}) {
        const auto cfg = small_cfg(10, 12, 4, 3);
        const PilotSet a = generate_pilots(cfg, seed);
        const PilotSet b = generate_pilots(cfg, seed);
        for (Eigen::Index n = 0; n < a.freq.cols(); ++n)
            CHECK(std::abs(a.freq.col(n).norm() - std::sqrt(12.0)) < 1e-10);
        CHECK(a.freq == b.freq);
        CHECK(a.stacked == b.stacked);
        CHECK(a.stacked.cols() == 30);
        for (std::size_t n = 0; n < 10; ++n) CHECK(a.stacked.middleCols(3 * n, 3) == a.blocks[n]);
    }
    CHECK(generate_pilots(small_cfg(), 1).freq != generate_pilots(small_cfg(), 2).freq);
}

TEST_CASE("effective_pilot examples") {
    CVector s(2);
    s << 1.0, -1.0;
    const CMatrix S = effective_pilot(s, 1);
    CHECK(std::abs(S(0, 0)) < 1e-15);
    CHECK(std::abs(S(1, 0) - cdouble(1.0, 0.0)) < 1e-15);

    const CMatrix I = effective_pilot(CVector::Ones(8), 3);
    CHECK(max_abs_diff(I, CMatrix::Identity(8, 8).leftCols(3)) < 1e-15);

    CHECK_THROWS_AS(effective_pilot(CVector::Ones(4), 4), DimensionError);
}

TEST_CASE("effective_pilot equals the direct product and its first column identity") {
    CounterRng rng(derive_key(200, {1}));
    for (std::size_t L : {4u, 9u, 16u}) {
        const CVector s = oracle::random_matrix(rng, L, 1).col(0);
        const CMatrix F = oracle::naive_dft(L);
        const CMatrix full = F.adjoint() * s.asDiagonal() * F;
        const CMatrix S = effective_pilot(s, 3);
        CHECK(max_abs_diff(S, full.leftCols(3)) < 1e-13);
        const CMatrix first = F.adjoint() * s / std::sqrt(static_cast<double>(L));
        CHECK(max_abs_diff(S.col(0), first) < 1e-13);
    }
}

TEST_CASE("all-ones pilots give identity blocks") {
    const auto cfg = small_cfg(3, 8, 2, 2);
    const PilotSet p = pilots_from_frequency(CMatrix::Ones(8, 3), 2);
    for (const auto& b : p.blocks) CHECK(max_abs_diff(b, CMatrix::Identity(8, 2)) < 1e-15);
    (void)cfg;
}

TEST_CASE("draw_activities examples") {
    CounterRng rng(derive_key(200, {2}));
    const auto z = draw_activities(PriorModel::iid(0.0), 50, rng);
    for (auto a : z) CHECK(a == 0);

    const auto group = PriorModel::group_uniform(20, 4, 0.4, 1e-3);
    for (int t = 0; t < 200; ++t) {
        const auto a = draw_activities(group, 20, rng);
        for (std::size_t k = 0; k < 4; ++k)
            for (std::size_t j = 1; j < 5; ++j) CHECK(a[5 * k + j] == a[5 * k]);
    }

    std::size_t active = 0;
    for (int t = 0; t < 100; ++t)
        for (auto a : draw_activities(PriorModel::iid(0.07), 100, rng)) active += a;
    CHECK(std::abs(active / 1e4 - 0.07) < 0.008);
}

TEST_CASE("draw_activities samples a general MVB prior by enumeration") {
    // Empirical state frequencies against the enumerated p.m.f.
    const PriorModel prior = PriorModel::mvb(3, {{{0}, std::log(3.0)}, {{0, 1}, 1.0}, {{2}, -1.0}});
    const auto& terms = std::get<MvbPrior>(prior.variant());
    const auto probs = oracle::enumerate_probs([&](const std::vector<double>& a) { return oracle::mvb_exponent(terms, a); }, 3);
    CounterRng rng(derive_key(200, {3}));
    std::vector<double> freq(8, 0.0);
    const int n = 40000;
    for (int t = 0; t < n; ++t) {
        const auto a = draw_activities(prior, 3, rng);
        freq[a[0] + 2 * a[1] + 4 * a[2]] += 1.0 / n;
    }
    for (int m = 0; m < 8; ++m) CHECK(std::abs(freq[m] - probs[m]) < 4.0 * std::sqrt(probs[m] / n) + 1e-3);

    std::vector<MvbTerm> big;
    for (std::size_t j = 0; j < 17; ++j) big.push_back({{j}, 0.1});
    CHECK_THROWS_AS(draw_activities(PriorModel::mvb(17, big), 17, rng), CapabilityError);
}

TEST_CASE("replicate_activities") {
    const std::vector<std::uint8_t> a{1, 0, 1};
    const auto b = replicate_activities(a, 2);
    CHECK(b == std::vector<std::uint8_t>{1, 1, 0, 0, 1, 1});
}

TEST_CASE("received signal examples") {
    CounterRng rng(derive_key(200, {4}));
    auto cfg = small_cfg();
    const PilotSet pilots = generate_pilots(cfg, rng);
    const std::vector<std::uint8_t> none(cfg.n_devices, 0);
    const auto real = draw_realization(cfg, none, rng);
    const CMatrix zero_noise = CMatrix::Zero(cfg.n_subcarriers, cfg.n_antennas);
    CHECK(received_actual(cfg, pilots, real, zero_noise).isZero(0.0));

    const CMatrix noise = draw_noise(64, 64, 0.1, rng);
    CHECK(std::abs(noise.squaredNorm() / (64.0 * 64.0) - 0.1) < 0.01);
}

TEST_CASE("actual and virtual received signals coincide on 100 instances") {
    CounterRng rng(derive_key(200, {5}));
    for (int t = 0; t < 100; ++t) {
        auto cfg = small_cfg(3 + t % 8, 6 + t % 10, 1 + t % 5, 1 + t % 5);
        cfg.gains.resize(cfg.n_devices);
        for (double& g : cfg.gains) g = 0.2 + 2.0 * rng.uniform();
        const PilotSet pilots = generate_pilots(cfg, rng);
        std::vector<std::uint8_t> alpha(cfg.n_devices);
        for (auto& a : alpha) a = rng.uniform() < 0.5;
        const auto real = draw_realization(cfg, alpha, rng);
        CHECK(real.beta == replicate_activities(alpha, cfg.n_taps));
        const CMatrix noise = draw_noise(cfg.n_subcarriers, cfg.n_antennas, cfg.noise_var, rng);
        const CMatrix ra = received_actual(cfg, pilots, real, noise);
        CHECK(max_abs_diff(ra, received_virtual(cfg, pilots, real, noise)) < 1e-12);

        // Independent column formula r_m = sum_n alpha_n sqrt(g_n) S_n h_{n,m} + n_m.
        CMatrix ref = noise;
        for (std::size_t n = 0; n < cfg.n_devices; ++n)
            if (alpha[n])
                for (std::size_t m = 0; m < cfg.n_antennas; ++m)
                    ref.col(m) += std::sqrt(cfg.gains[n]) * pilots.blocks[n] * real.taps[n].row(m).transpose();
        CHECK(max_abs_diff(ra, ref) < 1e-12);
    }
}

TEST_CASE("covariances in both parametrizations agree") {
    CounterRng rng(derive_key(200, {6}));
    for (int t = 0; t < 20; ++t) {
        auto cfg = small_cfg(5, 10, 3, 1 + t % 4);
        cfg.gains = {0.5, 1.0, 1.5, 2.0, 0.7};
        const PilotSet pilots = generate_pilots(cfg, rng);
        const auto alpha = oracle::random_soft(rng, 5);
        std::vector<double> beta;
        for (double a : alpha)
            for (std::size_t p = 0; p < cfg.n_taps; ++p) beta.push_back(a);
        const CMatrix ca = covariance_actual(cfg, pilots, alpha);
        CHECK(max_abs_diff(ca, covariance_virtual(cfg, pilots, beta)) < 1e-12);
        CHECK(max_abs_diff(ca, oracle::covariance(cfg, pilots, alpha)) < 1e-12);
    }
}

TEST_CASE("sample_covariance examples") {
    CounterRng rng(derive_key(200, {7}));
    const CMatrix r = oracle::random_matrix(rng, 5, 1);
    CHECK(max_abs_diff(sample_covariance(r).sigma_hat, r * r.adjoint()) < 1e-14);
    CHECK(sample_covariance(CMatrix::Zero(4, 3)).sigma_hat.isZero(0.0));

    const CMatrix R = oracle::random_matrix(rng, 6, 9);
    const SampleCovariance sc = sample_covariance(R);
    CHECK(sc.n_antennas == 9);
    CHECK(max_abs_diff(sc.sigma_hat, sc.sigma_hat.adjoint()) < 1e-15);
    CHECK(std::abs(sc.sigma_hat.trace().real() - R.squaredNorm() / 9.0) < 1e-12);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(sc.sigma_hat);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);

    const CMatrix noise = draw_noise(4, 10000, 0.1, rng);
    CHECK(max_abs_diff(sample_covariance(noise).sigma_hat, 0.1 * CMatrix::Identity(4, 4)) < 0.05);
}

TEST_CASE("sample covariance concentrates on the population covariance") {
    CounterRng rng(derive_key(200, {8}));
    auto cfg = small_cfg(4, 6, 100000, 2);
    const PilotSet pilots = generate_pilots(cfg, rng);
    const std::vector<std::uint8_t> alpha{1, 0, 1, 1};
    const auto real = draw_realization(cfg, alpha, rng);
    const CMatrix sh = sample_covariance(synthesize_received(cfg, pilots, real, rng)).sigma_hat;
    const CMatrix pop = covariance_actual(cfg, pilots, std::vector<double>{1, 0, 1, 1});
    CHECK(max_abs_diff(sh, pop) < 0.05 * pop.cwiseAbs().maxCoeff());
}

TEST_CASE("P = 1 blocks have rank one outer products") {
    CounterRng rng(derive_key(200, {9}));
    const PilotSet p1 = generate_pilots(small_cfg(3, 8, 2, 1), rng);
    for (const auto& b : p1.blocks) {
        CHECK(b.cols() == 1);
        Eigen::SelfAdjointEigenSolver<CMatrix> es(b * b.adjoint());
        CHECK(es.eigenvalues()(6) < 1e-10);
    }
    const PilotSet p2 = generate_pilots(small_cfg(3, 8, 2, 2), rng);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(p2.blocks[0] * p2.blocks[0].adjoint());
    CHECK(es.eigenvalues()(6) > 1e-6);
}

TEST_CASE("pilot text round trip and malformed input") {
    CounterRng rng(derive_key(200, {10}));
    const CMatrix freq = oracle::random_matrix(rng, 5, 3);
    std::stringstream ss;
    write_pilots(ss, freq);
    const CMatrix back = read_pilots(ss);
    CHECK(back == freq);

    std::istringstream bad("0 0 1.0\n");
    CHECK_THROWS_AS(read_pilots(bad), ConfigError);
    std::istringstream missing("0 0 1 0\n1 1 1 0\n");
    CHECK_THROWS_AS(read_pilots(missing), ConfigError);
    std::istringstream dup("0 0 1 0\n0 0 1 0\n");
    CHECK_THROWS_AS(read_pilots(dup), ConfigError);
}
