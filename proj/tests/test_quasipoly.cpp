#include <doctest.h>

#include <fstream>
#include <random>

#include "delaynet/quasipoly.hpp"
#include "delaynet/spectrum.hpp"
#include "delaynet/topology.hpp"
#include "oracles.hpp"

using namespace delaynet;

namespace {

std::vector<Factor> six_agent_factors(const Gains& g) {
    std::ifstream in(DELAYNET_DATA_DIR "/six_agents.json");
    REQUIRE(in.good());
    return factorize(spectrum(build_c_matrix(Topology::from_stream(in))), g);
}

Spectrum six_agent_spectrum() {
    std::ifstream in(DELAYNET_DATA_DIR "/six_agents.json");
    REQUIRE(in.good());
    return spectrum(build_c_matrix(Topology::from_stream(in)));
}

} // namespace

TEST_CASE("gains and delay validation") {
    CHECK_THROWS_AS(validate_gains(Gains{0.0, 1.0}), InputError);
    CHECK_THROWS_AS(validate_gains(Gains{1.0, -0.1}), InputError);
    CHECK_THROWS_AS(validate_delays(DelayPair{-0.1, 0.0}), InputError);
    CHECK_NOTHROW(validate_delays(DelayPair{0.0, 0.0}));
}

TEST_CASE("polynomial roots from companion matrix") {
    const auto roots = detail::poly_roots({-6.0, 11.0, -6.0, 1.0});
    REQUIRE(roots.size() == 3);
    std::vector<double> re;
    for (auto r : roots) {
        CHECK(std::abs(r.imag()) < 1e-9);
        re.push_back(r.real());
    }
    std::sort(re.begin(), re.end());
    CHECK(re[0] == doctest::Approx(1.0));
    CHECK(re[1] == doctest::Approx(2.0));
    CHECK(re[2] == doctest::Approx(3.0));
}

TEST_CASE("second-order factor equals the scalar quasipolynomial") {
    const Gains g{1.0, 0.5};
    const auto factors = six_agent_factors(g);
    std::mt19937 gen(11);
    for (const Factor& f : factors) {
        if (f.kind != FactorKind::SecondOrder) continue;
        for (int k = 0; k < 25; ++k) {
            const Complex s(oracles::uniform(gen, -2, 2), oracles::uniform(gen, -4, 4));
            const DelayPair tau{oracles::uniform(gen, 0, 3), oracles::uniform(gen, 0, 3)};
            const Complex want = oracles::q_scalar(s, f.lambda, g, tau);
            CHECK(std::abs(f.eval(s, tau) - want) < 1e-10 * std::max(1.0, std::abs(want)));
        }
    }
}

TEST_CASE("fourth-order factor equals the conjugate product") {
    const Gains g{1.0, 0.5};
    const auto factors = six_agent_factors(g);
    std::mt19937 gen(13);
    bool saw_pair = false;
    for (const Factor& f : factors) {
        if (f.kind != FactorKind::FourthOrder) continue;
        saw_pair = true;
        for (int k = 0; k < 40; ++k) {
            const Complex s(oracles::uniform(gen, -2, 2), oracles::uniform(gen, -4, 4));
            const DelayPair tau{oracles::uniform(gen, 0, 3), oracles::uniform(gen, 0, 3)};
            const Complex want = oracles::q_scalar(s, f.lambda, g, tau) *
                                 oracles::q_scalar(s, std::conj(f.lambda), g, tau);
            CHECK(std::abs(f.eval(s, tau) - want) < 1e-9 * std::max(1.0, std::abs(want)));
        }
    }
    CHECK(saw_pair);
}

TEST_CASE("coefficient s-derivatives match finite differences") {
    const Gains g{1.3, 0.7};
    const auto factors = six_agent_factors(g);
    std::mt19937 gen(17);
    for (const Factor& f : factors) {
        for (int k = 0; k < 10; ++k) {
            const Complex s(oracles::uniform(gen, -1, 1), oracles::uniform(gen, -2, 2));
            const double h = 1e-6;
            const auto c = f.coeffs(s);
            const auto cp = f.coeffs(s + h);
            const auto cm = f.coeffs(s - h);
            for (int i = 0; i < 6; ++i) {
                const Complex fd = (cp.g[i] - cm.g[i]) / (2.0 * h);
                CHECK(std::abs(c.dg[i] - fd) < 1e-6 * std::max(1.0, std::abs(fd)));
            }
        }
    }
}

TEST_CASE("jet partials match finite differences of eval") {
    const Gains g{1.0, 0.5};
    const auto factors = six_agent_factors(g);
    std::mt19937 gen(19);
    for (const Factor& f : factors) {
        for (int k = 0; k < 12; ++k) {
            const Complex s(oracles::uniform(gen, -1, 1), oracles::uniform(gen, 0.1, 3));
            const DelayPair tau{oracles::uniform(gen, 0.05, 2), oracles::uniform(gen, 0.05, 2)};
            const auto j = f.jet(s, tau);
            CHECK(std::abs(j.value - f.eval(s, tau)) < 1e-12 * std::max(1.0, std::abs(j.value)));
            const double h = 1e-6;
            const Complex fds = (f.eval(s + h, tau) - f.eval(s - h, tau)) / (2.0 * h);
            CHECK(std::abs(j.d_s - fds) < 2e-5 * std::max(1.0, std::abs(fds)));
            const Complex fd1 = (f.eval(s, {tau.tau1 + h, tau.tau2}) -
                                 f.eval(s, {tau.tau1 - h, tau.tau2})) /
                                (2.0 * h);
            CHECK(std::abs(j.d_tau1 - fd1) < 2e-5 * std::max(1.0, std::abs(fd1)));
            const Complex fd2 = (f.eval(s, {tau.tau1, tau.tau2 + h}) -
                                 f.eval(s, {tau.tau1, tau.tau2 - h})) /
                                (2.0 * h);
            CHECK(std::abs(j.d_tau2 - fd2) < 2e-5 * std::max(1.0, std::abs(fd2)));
        }
    }
}

TEST_CASE("delay-free polynomial agrees with eval at zero delays") {
    const Gains g{1.0, 0.5};
    const auto factors = six_agent_factors(g);
    std::mt19937 gen(23);
    for (const Factor& f : factors) {
        const auto coeffs = f.delay_free_coeffs();
        for (int k = 0; k < 10; ++k) {
            const Complex s(oracles::uniform(gen, -2, 2), oracles::uniform(gen, -2, 2));
            Complex poly = 0.0;
            Complex pw = 1.0;
            for (double c : coeffs) {
                poly += c * pw;
                pw *= s;
            }
            CHECK(std::abs(f.eval(s, {0.0, 0.0}) - poly) < 1e-9 * std::max(1.0, std::abs(poly)));
        }
    }
}

TEST_CASE("centroid factor vanishes identically at s = 0") {
    const auto factors = six_agent_factors(Gains{1.0, 0.5});
    REQUIRE(factors[0].is_centroid);
    std::mt19937 gen(29);
    for (int k = 0; k < 50; ++k) {
        const DelayPair tau{oracles::uniform(gen, 0, 8), oracles::uniform(gen, 0, 8)};
        CHECK(factors[0].eval(Complex(0.0, 0.0), tau) == Complex(0.0, 0.0));
    }
}

TEST_CASE("magnitude margin is positive above the crossing bound") {
    const auto factors = six_agent_factors(Gains{1.0, 0.5});
    for (const Factor& f : factors) {
        const double bound = f.crossing_frequency_bound();
        if (bound == 0.0) continue;
        for (double w = bound * 1.01; w < bound * 3.0; w *= 1.17)
            CHECK(f.magnitude_margin(w) > 0.0);
    }
}

TEST_CASE("rhp root radius encloses all delay-free roots") {
    const auto factors = six_agent_factors(Gains{1.0, 0.5});
    for (const Factor& f : factors) {
        const double radius = f.rhp_root_radius();
        for (Complex r : detail::poly_roots(f.delay_free_coeffs()))
            CHECK(std::abs(r) < radius);
    }
}

TEST_CASE("delay-free census counts unstable polynomial roots") {
    const auto factors = six_agent_factors(Gains{1.0, 0.5});
    int total = 0;
    for (const Factor& f : factors) {
        const auto census = delay_free_unstable_count(f);
        total += census.unstable;
        // with zero delays the centroid factor degenerates to s^2: the
        // rigid-body mode plus the undamped drift mode both sit at the origin
        if (f.is_centroid) CHECK(census.at_origin == 2);
    }
    CHECK(total == 0); // row-stochastic C with these gains is delay-free stable

    Factor bad;
    bad.kind = FactorKind::SecondOrder;
    bad.lambda = Complex(1.5, 0.0);
    bad.gains = Gains{1.0, 0.5};
    CHECK(delay_free_unstable_count(bad).unstable == 1);
}

TEST_CASE("full-system determinant equals the factor product") {
    const Spectrum sp = six_agent_spectrum();
    const Gains g{1.0, 0.5};
    const auto factors = factorize(sp, g);
    std::mt19937 gen(31);
    for (int k = 0; k < 30; ++k) {
        const Complex s(oracles::uniform(gen, -1.5, 1.5), oracles::uniform(gen, -3, 3));
        const DelayPair tau{oracles::uniform(gen, 0, 4), oracles::uniform(gen, 0, 4)};
        const Complex det = eval_full_system(sp, g, s, tau);
        const Complex prod = eval_factor_product(factors, s, tau);
        CHECK(std::abs(prod - det) < 1e-6 * std::max(1e-12, std::abs(det)));
    }
}

TEST_CASE("closed-loop matrices carry the gains on the right blocks") {
    Eigen::MatrixXd c(2, 2);
    c << 0, 1, 1, 0;
    const Gains g{2.0, 3.0};
    const SystemMatrices m = system_matrices(c, g);
    // velocity row of agent 0: -P x_0 - D v_0 + P c01 x_1(t - tau1) + D c01 v_1(t - tau2)
    CHECK(m.a0(1, 0) == -2.0);
    CHECK(m.a0(1, 1) == -3.0);
    CHECK(m.b1(1, 2) == 2.0);
    CHECK(m.b2(1, 3) == 3.0);
    CHECK(m.a0(0, 1) == 1.0);
    CHECK(m.b1(0, 2) == 0.0);
}
