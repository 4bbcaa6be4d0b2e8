#include <doctest.h>

#include "gfad/error.hpp"
#include "gfad/prior.hpp"
#include "support/oracles.hpp"

using namespace gfad;

namespace {

// Coefficient of omega within a group of size s, written out from the three cases.
double group_coeff_oracle(std::size_t w, std::size_t s, double q, double eps, std::size_t N) {
    const double k0 = std::log((1.0 - q) / (static_cast<double>(N) * eps));
    if (w < s) return (w % 2 == 0 ? 1.0 : -1.0) * k0;
    if (s % 2 == 1) return std::log(q / (1.0 - q));
    return std::log(q / (1.0 - q)) + 2.0 * k0;
}

double group_exponent_oracle(const std::vector<std::vector<std::size_t>>& groups, double q, double eps,
                             const std::vector<double>& alpha) {
    std::size_t N = 0;
    for (const auto& g : groups) N += g.size();
    double acc = 0.0;
    for (const auto& g : groups) {
        for (unsigned mask = 1; mask < (1U << g.size()); ++mask) {
            double prod = 1.0;
            std::size_t w = 0;
            for (std::size_t b = 0; b < g.size(); ++b)
                if (mask & (1U << b)) {
                    prod *= alpha[g[b]];
                    ++w;
                }
            acc += group_coeff_oracle(w, g.size(), q, eps, N) * prod;
        }
    }
    return acc;
}

PriorModel random_mvb(CounterRng& rng, std::size_t N) {
    std::vector<MvbTerm> terms;
    for (std::size_t a = 0; a < N; ++a) {
        terms.push_back({{a}, rng.normal()});
        for (std::size_t b = a + 1; b < N; ++b) {
            if (rng.uniform() < 0.4) terms.push_back({{a, b}, rng.normal()});
            for (std::size_t c = b + 1; c < N; ++c)
                if (rng.uniform() < 0.05) terms.push_back({{a, b, c}, rng.normal()});
        }
    }
    return PriorModel::mvb(N, terms);
}

} // namespace

TEST_CASE("group_coefficients three-case formula") {
    const double q = 0.3, eps = 1e-3;
    const MvbPrior two = group_coefficients({{0, 1}}, q, eps);
    for (const auto& t : two.terms) {
        if (t.omega.size() == 1) CHECK(t.c == doctest::Approx(-std::log((1 - q) / (2 * eps))).epsilon(1e-14));
    }
    const MvbPrior three = group_coefficients({{0, 1, 2}}, q, eps);
    CHECK(three.terms.size() == 7);
    for (const auto& t : three.terms) {
        CHECK(t.c == doctest::Approx(group_coeff_oracle(t.omega.size(), 3, q, eps, 3)).epsilon(1e-14));
        if (t.omega.size() == 3) CHECK(t.c == doctest::Approx(std::log(q / (1 - q))).epsilon(1e-14));
    }
    // No cross-group terms.
    const MvbPrior split = group_coefficients({{0, 1}, {2, 3, 4}}, q, eps);
    CHECK(split.terms.size() == 3 + 7);
    for (const auto& t : split.terms) {
        const bool first = t.omega.front() <= 1;
        for (std::size_t j : t.omega) CHECK((j <= 1) == first);
    }
}

TEST_CASE("two-device group prior concentrates on consistent states") {
    const double q = 0.3, eps = 1e-3;
    const PriorModel prior = PriorModel::group({{0, 1}}, q, eps);
    const auto p = oracle::enumerate_probs([&](const std::vector<double>& a) { return log_pmf_unnormalized(prior, a); }, 2);
    // state index = a0 + 2 a1
    CHECK(std::abs(p[3] / (p[3] + p[0]) - q) < 0.01 * q);
    CHECK(p[1] + p[2] < 0.01);
}

TEST_CASE("group prior exponent equals the written-out coefficient sum") {
    CounterRng rng(derive_key(300, {1}));
    const std::vector<std::vector<std::size_t>> groups{{0, 3}, {1, 2, 4}, {5}, {6, 7, 8, 9}};
    const PriorModel prior = PriorModel::group(groups, 0.2, 1e-3);
    const MvbPrior mvb = group_coefficients(groups, 0.2, 1e-3);
    for (int t = 0; t < 50; ++t) {
        const auto a = oracle::random_soft(rng, 10);
        const double want = group_exponent_oracle(groups, 0.2, 1e-3, a);
        CHECK(log_pmf_unnormalized(prior, a) == doctest::Approx(want).epsilon(1e-12));
        CHECK(oracle::mvb_exponent(mvb, a) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("group prior marginal activity by enumeration") {
    // Every inconsistent state of a group has weight N eps / (1 - q) relative to the
    // empty state, so P[group on] = q / (1 + (2^s - 2) N eps) exactly.
    for (double q : {0.05, 0.1, 0.3}) {
        for (const auto& groups : std::vector<std::vector<std::vector<std::size_t>>>{
                 {{0, 1}}, {{0, 1}, {2, 3}}, {{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}}, {{0, 1}, {2, 3, 4}, {5, 6, 7, 8, 9}}}) {
            std::size_t N = 0;
            for (const auto& g : groups) N += g.size();
            const double eps = 1e-3;
            const PriorModel prior = PriorModel::group(groups, q, eps);
            const auto p = oracle::enumerate_probs(
                [&](const std::vector<double>& a) { return log_pmf_unnormalized(prior, a); }, N);
            for (const auto& g : groups) {
                double all_on = 0.0, inconsistent = 0.0;
                for (unsigned m = 0; m < p.size(); ++m) {
                    std::size_t on = 0;
                    for (std::size_t j : g) on += (m >> j) & 1U;
                    if (on == g.size()) all_on += p[m];
                    else if (on > 0) inconsistent += p[m];
                }
                const double leak = static_cast<double>((1U << g.size()) - 2) * static_cast<double>(N) * eps;
                CHECK(all_on == doctest::Approx(q / (1.0 + leak)).epsilon(1e-10));
                if (leak < 0.01) {
                    CHECK(std::abs(all_on - q) < 0.01 * q);
                    CHECK(inconsistent < 10 * eps);
                }
            }
        }
    }
}

TEST_CASE("log_pmf_unnormalized examples") {
    const PriorModel iid = PriorModel::iid(0.1);
    const std::vector<double> zero(7, 0.0);
    CHECK(log_pmf_unnormalized(iid, zero) == doctest::Approx(7 * std::log(0.9)).epsilon(1e-14));
    std::vector<double> one = zero;
    one[2] = 1.0;
    CHECK(log_pmf_unnormalized(iid, one) == doctest::Approx(std::log(0.1) + 6 * std::log(0.9)).epsilon(1e-14));

    const PriorModel m3 = PriorModel::mvb(3, {{{0}, 0.3}, {{1, 2}, -1.1}, {{0, 1, 2}, 0.7}});
    const auto p = oracle::enumerate_probs([&](const std::vector<double>& a) { return log_pmf_unnormalized(m3, a); }, 3);
    double total = 0.0;
    for (double v : p) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    const double z = log_normalizer(m3, 3);
    for (unsigned m = 0; m < 8; ++m)
        CHECK(std::exp(log_pmf_unnormalized(m3, oracle::bits(m, 3)) - z) == doctest::Approx(p[m]).epsilon(1e-12));
}

TEST_CASE("exact MVB normalization for N up to 10") {
    CounterRng rng(derive_key(300, {2}));
    for (std::size_t N = 1; N <= 10; ++N) {
        for (const PriorModel& prior : {random_mvb(rng, N), PriorModel::group_uniform(N, (N + 1) / 2, 0.1, 1e-3),
                                        PriorModel::iid(0.2)}) {
            const double z = log_normalizer(prior, N);
            double total = 0.0;
            for (unsigned m = 0; m < (1U << N); ++m) total += std::exp(log_pmf_unnormalized(prior, oracle::bits(m, N)) - z);
            CHECK(std::abs(total - 1.0) < 1e-12);
        }
    }
    CHECK(log_normalizer(PriorModel::iid(0.2), 12) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("epsilon_actual examples") {
    CounterRng rng(derive_key(300, {3}));
    const PriorModel iid = PriorModel::iid(0.07);
    for (int t = 0; t < 10; ++t) {
        const auto a = oracle::random_soft(rng, 5);
        CHECK(epsilon_actual(iid, t % 5, a) == doctest::Approx(std::log(0.07 / 0.93)).epsilon(1e-14));
    }
    const double A = 0.8, B = -1.7;
    const PriorModel two = PriorModel::mvb(2, {{{0}, A}, {{0, 1}, B}});
    for (double a2 : {0.0, 0.25, 1.0}) {
        const std::vector<double> a{0.6, a2};
        CHECK(epsilon_actual(two, 0, a) == doctest::Approx(A + B * a2).epsilon(1e-14));
    }
}

TEST_CASE("epsilon_actual equals the exponent difference on every binary vector") {
    CounterRng rng(derive_key(300, {4}));
    for (const PriorModel& prior : {random_mvb(rng, 7), PriorModel::group({{0, 1, 2}, {3, 4}, {5, 6}}, 0.1, 1e-3),
                                    PriorModel::iid(0.3)}) {
        for (unsigned m = 0; m < 128; ++m) {
            for (std::size_t n = 0; n < 7; ++n) {
                auto hi = oracle::bits(m, 7), lo = hi;
                hi[n] = 1.0;
                lo[n] = 0.0;
                const double diff = log_pmf_unnormalized(prior, hi) - log_pmf_unnormalized(prior, lo);
                CHECK(std::abs(epsilon_actual(prior, n, oracle::bits(m, 7)) - diff) <= 1e-12 * std::max(1.0, std::abs(diff)));
            }
        }
    }
}

TEST_CASE("epsilon_virtual examples and finite differences") {
    CounterRng rng(derive_key(300, {5}));
    const std::size_t P = 3;
    const auto beta = oracle::random_soft(rng, 6 * P);
    CHECK(epsilon_virtual(PriorModel::iid(0.1), 4, beta, P) == doctest::Approx(std::log(0.1 / 0.9) / 3).epsilon(1e-14));
    CHECK(epsilon_virtual(PriorModel::iid(0.5), 4, beta, P) == 0.0);

    for (const PriorModel& prior : {random_mvb(rng, 6), PriorModel::group({{0, 1}, {2, 3, 4, 5}}, 0.2, 1e-3)}) {
        for (int t = 0; t < 20; ++t) {
            const auto b = oracle::random_soft(rng, 6 * P, 0.0);
            const std::size_t i = t % (6 * P);
            auto exponent = [&](double x) {
                auto bb = b;
                bb[i] = x;
                std::vector<double> a(6, 0.0);
                for (std::size_t k = 0; k < bb.size(); ++k) a[k / P] += bb[k] / P;
                return log_pmf_unnormalized(prior, a);
            };
            const double fd = oracle::central_diff(exponent, b[i]);
            CHECK(std::abs(epsilon_virtual(prior, i, b, P) - fd) < 1e-8 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("epsilon_virtual at consistent taps is epsilon_actual over P") {
    CounterRng rng(derive_key(300, {6}));
    const PriorModel prior = random_mvb(rng, 5);
    for (std::size_t P : {1u, 2u, 4u}) {
        const auto a = oracle::random_soft(rng, 5);
        std::vector<double> b;
        for (double x : a)
            for (std::size_t p = 0; p < P; ++p) b.push_back(x);
        for (std::size_t i = 0; i < b.size(); ++i)
            CHECK(P * epsilon_virtual(prior, i, b, P) == doctest::Approx(epsilon_actual(prior, i / P, a)).epsilon(1e-12));
    }
}

TEST_CASE("elementary_symmetric matches subset enumeration") {
    CounterRng rng(derive_key(300, {7}));
    std::vector<double> v(6);
    for (double& x : v) x = rng.uniform();
    const auto e = elementary_symmetric(v);
    REQUIRE(e.size() == 7);
    std::vector<double> ref(7, 0.0);
    for (unsigned m = 0; m < 64; ++m) {
        double prod = 1.0;
        int k = 0;
        for (int j = 0; j < 6; ++j)
            if (m & (1U << j)) {
                prod *= v[j];
                ++k;
            }
        ref[k] += prod;
    }
    for (int k = 0; k <= 6; ++k) CHECK(e[k] == doctest::Approx(ref[k]).epsilon(1e-13));
}

TEST_CASE("prior validation") {
    CHECK_THROWS_AS(PriorModel::iid(1.5), ConfigError);
    CHECK_THROWS_AS(PriorModel::group({{0, 1}, {1, 2}}, 0.1, 1e-3), ConfigError);
    CHECK_THROWS_AS(PriorModel::group({{0, 2}}, 0.1, 1e-3), ConfigError);
    CHECK_THROWS_AS(PriorModel::group({{0, 1}}, 0.1, 0.0), ConfigError);
    CHECK_THROWS_AS(PriorModel::group({{0, 1}}, 0.0, 1e-3), ConfigError);
    CHECK_THROWS_AS(PriorModel::mvb(3, {{{0, 3}, 1.0}}), ConfigError);
    CHECK_THROWS_AS(PriorModel::mvb(3, {{{}, 1.0}}), ConfigError);
    CHECK_THROWS_AS(PriorModel::mvb(17, {}), CapabilityError);
    CHECK_THROWS_AS(PriorModel::group_uniform(4, 5, 0.1, 1e-3), ConfigError);
    CHECK_THROWS_AS(PriorModel::group_uniform(4, 2, 0.1, 1e-3).check_devices(5), ConfigError);
}
