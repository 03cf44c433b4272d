#include <doctest.h>

#include <fstream>
#include <random>

#include "delaynet/spectral.hpp"
#include "delaynet/spectrum.hpp"
#include "delaynet/topology.hpp"
#include "oracles.hpp"

using namespace delaynet;

namespace {

const std::vector<Factor>& paper_factors() {
    static const std::vector<Factor> factors = [] {
        std::ifstream in(DELAYNET_DATA_DIR "/six_agents.json");
        REQUIRE(in.good());
        return factorize(spectrum(build_c_matrix(Topology::from_stream(in))), Gains{1.0, 0.5});
    }();
    return factors;
}

} // namespace

TEST_CASE("centroid factor: the rigid-body root is found at the origin") {
    const Factor& f = paper_factors()[0];
    REQUIRE(f.is_centroid);
    const RootCensus census =
        find_roots(f, DelayPair{0.7, 0.4}, Region{-0.5, 0.5, 0.0, 0.6});
    bool zero_found = false;
    for (const auto& r : census.roots)
        if (std::abs(r.s) < 1e-8 && r.converged) zero_found = true;
    CHECK(zero_found);
}

TEST_CASE("zero-delay roots match the polynomial oracle") {
    for (const Factor& f : paper_factors()) {
        const auto poly = detail::poly_roots(f.delay_free_coeffs());
        const RootCensus census = find_roots(f, DelayPair{0.0, 0.0}, Region{-3.0, 1.0, 0.0, 3.0});
        for (const Complex& want : poly) {
            if (want.imag() < -1e-12) continue; // conjugate halves
            if (want.real() < -2.9 || want.imag() > 2.9) continue;
            double best = 1e9;
            for (const auto& r : census.roots) best = std::min(best, std::abs(r.s - want));
            CHECK(best < 1e-8);
        }
        for (const auto& r : census.roots) CHECK(r.residual < 1e-9);
    }
}

TEST_CASE("winding count: stable and unstable probe points") {
    const auto& factors = paper_factors();
    CHECK(count_rhp_roots(factors, DelayPair{0.3, 0.2}) == 0);
    CHECK(count_rhp_roots(factors, DelayPair{2.0, 1.0}) == 0);
    const int at_c = count_rhp_roots(factors, DelayPair{1.0, 2.0});
    CHECK(at_c >= 2);
    CHECK(at_c % 2 == 0);
    CHECK(count_rhp_roots(factors, DelayPair{0.0, 0.0}) == 0);
}

TEST_CASE("census count matches the root list at an unstable point") {
    const auto& factors = paper_factors();
    const DelayPair tau{1.0, 2.0};
    int total_rhp = 0;
    int from_roots = 0;
    for (const Factor& f : factors) {
        const double radius = f.rhp_root_radius();
        const RootCensus census =
            find_roots(f, tau, Region{-0.05, radius, 0.0, radius},
                       RootOptions{.deflate_centroid = f.is_centroid});
        total_rhp += census.count_rhp;
        for (const auto& r : census.roots) {
            if (!r.converged || r.s.real() <= 1e-9) continue;
            from_roots += r.s.imag() > 1e-9 ? 2 : 1;
        }
    }
    CHECK(total_rhp == from_roots);
    CHECK(total_rhp == count_rhp_roots(factors, tau));
}

TEST_CASE("zero-delay abscissa equals the rightmost polynomial root") {
    const auto& factors = paper_factors();
    double want = -1e9;
    for (const Factor& f : factors)
        for (const Complex& r : detail::poly_roots(f.delay_free_coeffs())) {
            if (f.is_centroid && std::abs(r) < 1e-12) continue;
            want = std::max(want, r.real());
        }
    const double got = spectral_abscissa(factors, DelayPair{0.0, 0.0});
    CHECK(got == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("abscissa is a true rightmost root at a delayed stable point") {
    const auto& factors = paper_factors();
    const DelayPair tau{0.3, 0.2};
    const double sigma = spectral_abscissa(factors, tau);
    CHECK(sigma < 0.0);

    // some factor has a root with that real part
    bool hit = false;
    for (const Factor& f : factors) {
        const RootCensus census =
            find_roots(f, tau, Region{sigma - 0.04, sigma + 0.04, 0.0, 8.0},
                       RootOptions{.grid = 400, .deflate_centroid = f.is_centroid});
        for (const auto& r : census.roots)
            if (r.converged && std::abs(r.s.real() - sigma) < 1e-6) hit = true;
    }
    CHECK(hit);

    // and nothing lives strictly to the right of it
    for (const Factor& f : factors) {
        const RootCensus census =
            find_roots(f, tau, Region{sigma + 1e-3, 1.0, 0.0, 10.0},
                       RootOptions{.grid = 400, .deflate_centroid = f.is_centroid});
        for (const auto& r : census.roots) CHECK_FALSE(r.converged);
    }
}

TEST_CASE("abscissa surface signs agree with the winding counter") {
    const auto& factors = paper_factors();
    const AbscissaSurface surf = abscissa_surface(factors, 4.0, 24);
    CHECK(surf.sigma_at(0.3, 0.2) < 0.0);
    std::mt19937 gen(41);
    for (int k = 0; k < 10; ++k) {
        const int i = static_cast<int>(gen() % 24);
        const int j = static_cast<int>(gen() % 24);
        const size_t idx = static_cast<size_t>(j) * 24 + i;
        if (surf.rhp[idx] == 0)
            CHECK(surf.sigma[idx] < 1e-9);
        else
            CHECK(surf.sigma[idx] > 0.0);
    }
}

TEST_CASE("contour extraction recovers a straight level set") {
    const int res = 20;
    const double cell = 0.5;
    std::vector<double> field(static_cast<size_t>(res) * res);
    for (int j = 0; j < res; ++j)
        for (int i = 0; i < res; ++i)
            field[static_cast<size_t>(j) * res + i] = (i + 0.5) * cell - 3.3;
    const auto lines = contour_polylines(field, res, cell, 0.0);
    REQUIRE(!lines.empty());
    size_t total = 0;
    for (const auto& line : lines)
        for (const auto& pt : line) {
            CHECK(pt[0] == doctest::Approx(3.3).epsilon(1e-9));
            ++total;
        }
    CHECK(total >= res - 2);
}
