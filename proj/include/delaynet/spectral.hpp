#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "delaynet/errors.hpp"
#include "delaynet/quasipoly.hpp"

namespace delaynet {

namespace detail {

/// (e^z - 1)/z, continued through z = 0 by its series.
inline Complex expm1_over_z(Complex z) {
    if (std::abs(z) < 1e-2)
        return 1.0 + z * (1.0 / 2.0 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z * (1.0 / 120.0))));
    return (std::exp(z) - 1.0) / z;
}

/// d/dz of (e^z - 1)/z.
inline Complex expm1_over_z_prime(Complex z) {
    if (std::abs(z) < 1e-2)
        return 0.5 + z * (1.0 / 3.0 + z * (1.0 / 8.0 + z * (1.0 / 30.0 + z * (1.0 / 144.0))));
    return (std::exp(z) * (z - 1.0) + 1.0) / (z * z);
}

/// With tau1 = 0 the centroid factor collapses to s^2 + D s (1 - e^{-tau2 s}):
/// the structural origin root becomes double, and dividing by s^2 leaves the
/// entire, cancellation-free function 1 + D tau2 (e^z - 1)/z at z = -tau2 s.
inline bool centroid_double_origin(const DelayPair& tau) { return tau.tau1 == 0.0; }

/// Sum of term magnitudes of the factor at s; the natural scale for
/// relative residuals. When deflated, the structural 1/s is applied.
inline double term_scale(const Factor& f, Complex s, const DelayPair& tau, bool deflate) {
    if (deflate && centroid_double_origin(tau)) {
        const double dt = f.gains.d * tau.tau2;
        return 1.0 + dt * std::abs(expm1_over_z(-tau.tau2 * s));
    }
    const Factor::Coeffs c = f.coeffs(s);
    const double m1 = std::abs(std::exp(-tau.tau1 * s));
    const double m2 = std::abs(std::exp(-tau.tau2 * s));
    const std::array<double, 6> e = {1.0, m1, m2, m1 * m1, m2 * m2, m1 * m2};
    double scale = 1.0;
    for (int k = 0; k < 6; ++k) scale += std::abs(c.g[k]) * e[static_cast<size_t>(k)];
    if (deflate) scale /= std::max(std::abs(s), 1e-6);
    return scale;
}

/// Factor value, optionally divided by s to remove the centroid's
/// structural origin root (the limit F'(0) is used near s = 0). When that
/// root is double the division is by s^2, in closed form.
inline Complex eval_deflated(const Factor& f, Complex s, const DelayPair& tau, bool deflate) {
    if (!deflate) return f.eval(s, tau);
    if (centroid_double_origin(tau))
        return 1.0 + f.gains.d * tau.tau2 * expm1_over_z(-tau.tau2 * s);
    if (std::abs(s) < 1e-12) return f.jet(s, tau).d_s;
    return f.eval(s, tau) / s;
}

/// Value and s-derivative of the (possibly deflated) factor.
inline std::pair<Complex, Complex> value_and_slope(const Factor& f, Complex s,
                                                   const DelayPair& tau, bool deflate) {
    if (deflate && centroid_double_origin(tau)) {
        const Complex z = -tau.tau2 * s;
        const double dt = f.gains.d * tau.tau2;
        return {1.0 + dt * expm1_over_z(z), -dt * tau.tau2 * expm1_over_z_prime(z)};
    }
    const Factor::Jet j = f.jet(s, tau);
    if (!deflate) return {j.value, j.d_s};
    return {j.value / s, j.d_s / s - j.value / (s * s)};
}

/// Accumulate the phase change of ev along [a, b], subdividing until each
/// step turns less than pi/2. Fails (false) when the contour runs into a
/// near-zero of ev.
template <class Eval, class Scale>
inline bool march_winding(const Eval& ev, const Scale& sc, Complex a, Complex b, double& winding,
                          Complex& fz, int depth) {
    const Complex fb = ev(b);
    if (std::abs(fb) < 1e-12 * sc(b)) return false;
    const double dphi = std::arg(fb / fz);
    if (std::abs(dphi) < 1.5 || std::abs(b - a) < 1e-13) {
        winding += dphi;
        fz = fb;
        return true;
    }
    if (depth <= 0) return false;
    const Complex m = 0.5 * (a + b);
    if (!march_winding(ev, sc, a, m, winding, fz, depth - 1)) return false;
    return march_winding(ev, sc, m, b, winding, fz, depth - 1);
}

} // namespace detail

/// Number of roots with Re s > 0, by the argument principle along a
/// rectangle enclosing the root bound. The centroid factor is deflated
/// (twice when its origin root is double) so the structural s = 0 mode
/// neither blocks the contour nor counts.
inline int count_rhp_roots(const Factor& f, const DelayPair& tau) {
    validate_delays(tau);
    const double radius = f.rhp_root_radius();
    const bool deflate = f.is_centroid;
    const auto ev = [&](Complex s) { return detail::eval_deflated(f, s, tau, deflate); };
    const auto sc = [&](Complex s) { return detail::term_scale(f, s, tau, deflate); };

    for (int attempt = 0; attempt < 5; ++attempt) {
        const double sl = -2e-6 * attempt;
        const std::array<Complex, 4> corner = {Complex(sl, -radius), Complex(radius, -radius),
                                               Complex(radius, radius), Complex(sl, radius)};
        double winding = 0.0;
        Complex fz = ev(corner[0]);
        bool ok = std::abs(fz) >= 1e-12 * sc(corner[0]);
        for (int e = 0; e < 4 && ok; ++e) {
            const Complex a = corner[static_cast<size_t>(e)];
            const Complex b = corner[static_cast<size_t>((e + 1) % 4)];
            const int steps = 48;
            for (int i = 1; i <= steps && ok; ++i) {
                const Complex za = a + (b - a) * ((i - 1.0) / steps);
                const Complex zb = a + (b - a) * (static_cast<double>(i) / steps);
                ok = detail::march_winding(ev, sc, za, zb, winding, fz, 46);
            }
        }
        if (!ok) continue;
        const double turns = winding / kTwoPi;
        const long n = std::lround(turns);
        if (std::abs(turns - n) <= 1e-3 && n >= 0) return static_cast<int>(n);
    }
    throw NumericalError("count_rhp_roots: contour repeatedly passes near a root");
}

inline int count_rhp_roots(const std::vector<Factor>& factors, const DelayPair& tau) {
    int total = 0;
    for (const Factor& f : factors) total += count_rhp_roots(f, tau);
    return total;
}

/// Complex rectangle [sigma_lo, sigma_hi] x [omega_lo, omega_hi].
struct Region {
    double sigma_lo = -1.0;
    double sigma_hi = 1.0;
    double omega_lo = 0.0;
    double omega_hi = 10.0;
};

struct RootOptions {
    int grid = 600;          // level-set grid per rectangle side
    int newton_iters = 50;
    double residual_tol = 1e-9; // relative to the term-magnitude scale
    double dedupe_tol = 1e-6;
    bool deflate_centroid = false;
};

struct FoundRoot {
    Complex s;
    double residual = 0.0;
    bool converged = true;
};

struct RootCensus {
    Region region;
    std::vector<FoundRoot> roots;
    int count_rhp = 0;
};

/// Level-set root search: cells where both Re F and Im F change sign are
/// refined once 3x3, then Newton-polished; duplicates merged. count_rhp
/// comes from the independent winding counter.
inline RootCensus find_roots(const Factor& f, const DelayPair& tau, Region region,
                             const RootOptions& opt = {}) {
    validate_delays(tau);
    if (!(region.sigma_hi > region.sigma_lo) || !(region.omega_hi > region.omega_lo))
        throw InputError("find_roots: empty region");
    const Region req = region; // roots are reported against the region as requested
    // keep grid nodes off s = 0 so the centroid's structural root cannot
    // land exactly on a sample
    region.sigma_lo += 1.31e-7;
    region.omega_lo += 1.07e-7;

    const bool deflate = opt.deflate_centroid && f.is_centroid;
    const int g = std::max(opt.grid, 8);
    const double ds = (region.sigma_hi - region.sigma_lo) / g;
    const double dw = (region.omega_hi - region.omega_lo) / g;

    std::vector<int8_t> sign_re(static_cast<size_t>(g + 1) * (g + 1));
    std::vector<int8_t> sign_im(static_cast<size_t>(g + 1) * (g + 1));
    for (int j = 0; j <= g; ++j) {
        for (int i = 0; i <= g; ++i) {
            const Complex s(region.sigma_lo + i * ds, region.omega_lo + j * dw);
            const Complex v = detail::eval_deflated(f, s, tau, deflate);
            sign_re[static_cast<size_t>(j) * (g + 1) + i] = v.real() >= 0.0 ? 1 : -1;
            sign_im[static_cast<size_t>(j) * (g + 1) + i] = v.imag() >= 0.0 ? 1 : -1;
        }
    }
    auto mixed = [&](const std::vector<int8_t>& sg, int i, int j) {
        const int8_t a = sg[static_cast<size_t>(j) * (g + 1) + i];
        const int8_t b = sg[static_cast<size_t>(j) * (g + 1) + i + 1];
        const int8_t c = sg[static_cast<size_t>(j + 1) * (g + 1) + i];
        const int8_t d = sg[static_cast<size_t>(j + 1) * (g + 1) + i + 1];
        return !(a == b && b == c && c == d);
    };

    std::vector<Complex> seeds;
    for (int j = 0; j < g; ++j) {
        for (int i = 0; i < g; ++i) {
            if (!mixed(sign_re, i, j) || !mixed(sign_im, i, j)) continue;
            // one 3x3 refinement pass inside the candidate cell
            const double x0 = region.sigma_lo + i * ds, y0 = region.omega_lo + j * dw;
            std::array<std::array<Complex, 4>, 4> v;
            for (int jj = 0; jj < 4; ++jj)
                for (int ii = 0; ii < 4; ++ii)
                    v[static_cast<size_t>(jj)][static_cast<size_t>(ii)] = detail::eval_deflated(
                        f, Complex(x0 + ii * ds / 3.0, y0 + jj * dw / 3.0), tau, deflate);
            bool any = false;
            for (int jj = 0; jj < 3; ++jj) {
                for (int ii = 0; ii < 3; ++ii) {
                    const auto& a = v[static_cast<size_t>(jj)][static_cast<size_t>(ii)];
                    const auto& b = v[static_cast<size_t>(jj)][static_cast<size_t>(ii + 1)];
                    const auto& c = v[static_cast<size_t>(jj + 1)][static_cast<size_t>(ii)];
                    const auto& d = v[static_cast<size_t>(jj + 1)][static_cast<size_t>(ii + 1)];
                    auto mix = [](double p, double q, double r, double t) {
                        const bool pos = p >= 0 || q >= 0 || r >= 0 || t >= 0;
                        const bool neg = p < 0 || q < 0 || r < 0 || t < 0;
                        return pos && neg;
                    };
                    if (mix(a.real(), b.real(), c.real(), d.real()) &&
                        mix(a.imag(), b.imag(), c.imag(), d.imag())) {
                        seeds.emplace_back(x0 + (ii + 0.5) * ds / 3.0, y0 + (jj + 0.5) * dw / 3.0);
                        any = true;
                    }
                }
            }
            if (!any) seeds.emplace_back(x0 + 0.5 * ds, y0 + 0.5 * dw);
        }
    }
    if (std::abs(req.omega_lo) <= 1e-12) {
        // just above the real axis Im F keeps one sign, so real roots never
        // produce a mixed cell; sign changes of Re F along the bottom row
        // are seeded on the axis itself instead
        for (int i = 0; i < g; ++i) {
            if (sign_re[static_cast<size_t>(i)] != sign_re[static_cast<size_t>(i) + 1])
                seeds.emplace_back(region.sigma_lo + (i + 0.5) * ds, 0.0);
        }
    }

    RootCensus census;
    census.region = region;
    for (const Complex& seed : seeds) {
        Complex s = seed;
        bool converged = false;
        for (int it = 0; it < opt.newton_iters; ++it) {
            if (deflate && std::abs(s) < 1e-12) break;
            const auto [v, dv] = detail::value_and_slope(f, s, tau, deflate);
            if (std::abs(v) <= opt.residual_tol * detail::term_scale(f, s, tau, deflate)) {
                converged = true;
                break;
            }
            if (std::abs(dv) < 1e-300) break;
            Complex step = v / dv;
            const double cap = 2.0 * std::max(ds, dw) * 10.0;
            if (std::abs(step) > cap) step *= cap / std::abs(step);
            s -= step;
        }
        // keep to the requested rectangle (tiny slack for roundoff only)
        if (s.real() < req.sigma_lo - 1e-9 || s.real() > req.sigma_hi + 1e-9 ||
            s.imag() < req.omega_lo - 1e-9 || s.imag() > req.omega_hi + 1e-9)
            continue;
        FoundRoot r;
        r.s = s;
        r.converged = converged;
        r.residual = std::abs(detail::eval_deflated(f, s, tau, deflate)) /
                     detail::term_scale(f, s, tau, deflate);
        census.roots.push_back(r);
    }
    if (f.is_centroid && !deflate && req.sigma_lo <= 0.0 && req.sigma_hi >= 0.0 &&
        req.omega_lo <= 0.0 && req.omega_hi >= 0.0) {
        // the factor carries a structural root at the origin for every delay
        // pair; the grid cannot see roots on the axis, so it is entered
        // directly (its residual is exactly zero by construction)
        FoundRoot origin;
        origin.s = Complex(0.0, 0.0);
        origin.residual = std::abs(f.eval(origin.s, tau)) /
                          detail::term_scale(f, origin.s, tau, false);
        origin.converged = true;
        census.roots.push_back(origin);
    }

    std::sort(census.roots.begin(), census.roots.end(), [](const FoundRoot& a, const FoundRoot& b) {
        return a.residual < b.residual;
    });
    std::vector<FoundRoot> unique;
    for (const FoundRoot& r : census.roots) {
        bool dup = false;
        for (const FoundRoot& u : unique)
            if (std::abs(u.s - r.s) < opt.dedupe_tol) {
                dup = true;
                break;
            }
        if (!dup) unique.push_back(r);
    }
    std::sort(unique.begin(), unique.end(),
              [](const FoundRoot& a, const FoundRoot& b) { return a.s.real() > b.s.real(); });
    census.roots = std::move(unique);
    census.count_rhp = count_rhp_roots(f, tau);
    return census;
}

/// Union of per-factor censuses over the same region.
inline RootCensus find_roots(const std::vector<Factor>& factors, const DelayPair& tau,
                             const Region& region, const RootOptions& opt = {}) {
    RootCensus total;
    total.region = region;
    for (const Factor& f : factors) {
        RootCensus c = find_roots(f, tau, region, opt);
        total.count_rhp += c.count_rhp;
        for (auto& r : c.roots) total.roots.push_back(r);
    }
    std::sort(total.roots.begin(), total.roots.end(),
              [](const FoundRoot& a, const FoundRoot& b) { return a.s.real() > b.s.real(); });
    return total;
}

struct AbscissaOptions {
    double floor_sigma = -1.2; // report this when every root lies deeper
    double omega_cap = 60.0;   // frequency window cap for deep-strip searches
    int max_tracked = 24;      // roots carried per factor for continuation
    double residual_tol = 1e-9;
    bool exhaustive_fallback = true; // level-set rescue when seeds find nothing
};

namespace detail {

/// Conservative frequency cap: above the returned omega no root with
/// Re s >= sigma_lo can exist (term-magnitude bound with exponential
/// inflation of the delayed terms).
inline double strip_frequency_cap(const Factor& f, double sigma_lo, const DelayPair& tau,
                                  double cap) {
    const double p = f.gains.p, d = f.gains.d;
    const double sm = std::max(0.0, -sigma_lo);
    const double e1 = std::exp(tau.tau1 * sm), e2 = std::exp(tau.tau2 * sm);
    auto margin = [&](double w) {
        const double hyp = sm + w; // >= |s| on the strip
        const double lo1 = w * w - d * hyp - p;
        if (f.kind == FactorKind::SecondOrder) {
            const double lam = std::abs(f.lambda.real());
            return lo1 - lam * (p * e1 + d * hyp * e2);
        }
        const double r = std::abs(f.lambda.real());
        const double q = std::norm(f.lambda);
        const double bhi = hyp * hyp + d * hyp + p;
        const double upper = 2.0 * r * bhi * (p * e1 + d * hyp * e2) + q * p * p * e1 * e1 +
                             q * d * d * hyp * hyp * e2 * e2 + 2.0 * q * p * d * hyp * e1 * e2;
        return (lo1 < 0.0 ? -1.0 : lo1 * lo1) - upper;
    };
    double w = std::max(2.0, 1.2 * f.crossing_frequency_bound());
    while (w < cap) {
        if (margin(w) > 0.0 && margin(1.5 * w) > 0.0 && margin(2.5 * w) > 0.0) return w;
        w *= 1.3;
    }
    return cap;
}

inline std::vector<Complex> abscissa_newton_set(const Factor& f, const DelayPair& tau,
                                                const std::vector<Complex>& seeds,
                                                const AbscissaOptions& opt) {
    const bool deflate = f.is_centroid;
    std::vector<Complex> roots;
    for (Complex s : seeds) {
        bool converged = false;
        for (int it = 0; it < 35; ++it) {
            if (deflate && std::abs(s) < 1e-12) break;
            const auto [v, dv] = value_and_slope(f, s, tau, deflate);
            if (std::abs(v) <= opt.residual_tol * term_scale(f, s, tau, deflate)) {
                converged = true;
                break;
            }
            if (std::abs(dv) < 1e-300) break;
            Complex step = v / dv;
            if (std::abs(step) > 2.0) step *= 2.0 / std::abs(step);
            s -= step;
            if (s.real() < opt.floor_sigma - 2.0 || s.real() > 50.0 ||
                std::abs(s.imag()) > opt.omega_cap + 10.0)
                break;
        }
        if (!converged) continue;
        if (s.imag() < 0.0) s = std::conj(s);
        if (s.imag() < 1e-9) s = Complex(s.real(), 0.0);
        if (s.real() < opt.floor_sigma - 0.8) continue;
        bool dup = false;
        for (const Complex& u : roots)
            if (std::abs(u - s) < 1e-7) {
                dup = true;
                break;
            }
        if (!dup) roots.push_back(s);
    }
    std::sort(roots.begin(), roots.end(),
              [](const Complex& a, const Complex& b) { return a.real() > b.real(); });
    if (roots.size() > static_cast<size_t>(opt.max_tracked)) roots.resize(opt.max_tracked);
    return roots;
}

struct CellAbscissa {
    double sigma = 0.0;
    int rhp = 0;
    bool floored = false;
    std::vector<std::vector<Complex>> roots; // per factor, for continuation
};

/// Rightmost-root estimate at one delay pair. Seeds come from the caller
/// (neighboring cells), the delay-free polynomial roots, and a fixed
/// ladder; the sign is then reconciled against the exact winding count so
/// the zero contour of a surface never depends on seed quality.
inline CellAbscissa abscissa_cell(const std::vector<Factor>& factors, const DelayPair& tau,
                                  const std::vector<std::vector<Complex>>* carried,
                                  const AbscissaOptions& opt) {
    CellAbscissa cell;
    cell.roots.resize(factors.size());
    double best = -std::numeric_limits<double>::infinity();

    for (size_t fi = 0; fi < factors.size(); ++fi) {
        const Factor& f = factors[fi];
        std::vector<Complex> seeds;
        if (carried) seeds = (*carried)[fi];
        for (const Complex& r : poly_roots(f.delay_free_coeffs()))
            if (r.imag() >= -1e-12) seeds.push_back(r);
        for (double w : {0.25, 0.6, 1.2, 2.0, 3.2, 5.0})
            for (double sg : {-0.03, -0.25, -0.7}) seeds.emplace_back(sg, w);

        std::vector<Complex> roots = abscissa_newton_set(f, tau, seeds, opt);
        const int rhp = count_rhp_roots(f, tau);
        cell.rhp += rhp;

        if (rhp == 0) {
            roots.erase(std::remove_if(roots.begin(), roots.end(),
                                       [](const Complex& s) { return s.real() > 1e-8; }),
                        roots.end());
        } else if (roots.empty() || roots.front().real() <= 0.0) {
            // winding says unstable but the seeds missed the root: exhaustive pass
            const double radius = f.rhp_root_radius();
            RootOptions ro;
            ro.grid = 240;
            ro.deflate_centroid = true;
            const RootCensus c =
                find_roots(f, tau, Region{-1e-6, radius, 0.0, radius}, ro);
            for (const FoundRoot& r : c.roots)
                if (r.converged && r.s.real() > 0.0) roots.push_back(r.s);
            std::sort(roots.begin(), roots.end(),
                      [](const Complex& a, const Complex& b) { return a.real() > b.real(); });
        }
        if (rhp > 0 && (roots.empty() || roots.front().real() <= 0.0)) {
            // keep the sign honest even if the value stays unknown
            roots.insert(roots.begin(), Complex(1e-3, 0.0));
        }
        cell.roots[fi] = roots;
        if (!roots.empty()) best = std::max(best, roots.front().real());
    }

    if (!std::isfinite(best) && opt.exhaustive_fallback) {
        // staged shallow strips, stopping at the first that holds a root
        const std::array<std::pair<double, double>, 3> strips = {
            {{-0.05, 0.002}, {-0.3, -0.049}, {-0.9, -0.299}}};
        for (const auto& [lo, hi] : strips) {
            for (size_t fi = 0; fi < factors.size(); ++fi) {
                const Factor& f = factors[fi];
                const double wcap = strip_frequency_cap(f, lo, tau, opt.omega_cap);
                RootOptions ro;
                ro.grid = std::clamp(static_cast<int>(wcap / 0.02), 120, 700);
                ro.deflate_centroid = true;
                const RootCensus c = find_roots(f, tau, Region{lo, hi, 0.0, wcap}, ro);
                for (const FoundRoot& r : c.roots)
                    if (r.converged && r.s.real() >= lo && r.s.real() <= hi + 1e-9) {
                        cell.roots[fi].push_back(r.s);
                        best = std::max(best, r.s.real());
                    }
            }
            if (std::isfinite(best)) break;
        }
    }

    if (!std::isfinite(best)) {
        cell.sigma = opt.floor_sigma;
        cell.floored = true;
    } else {
        cell.sigma = std::max(best, opt.floor_sigma);
    }
    return cell;
}

} // namespace detail

/// Rightmost root real part at one delay pair, excluding the centroid's
/// structural s = 0 root. Values below floor_sigma are clamped to it.
inline double spectral_abscissa(const std::vector<Factor>& factors, const DelayPair& tau,
                                const AbscissaOptions& opt = {}) {
    return detail::abscissa_cell(factors, tau, nullptr, opt).sigma;
}

struct AbscissaSurface {
    double tau_max = 8.0;
    int resolution = 0;
    std::vector<double> sigma; // row-major at cell centers, like StabilityMap
    std::vector<int> rhp;      // winding-counted RHP roots per cell

    double cell() const { return tau_max / resolution; }
    double sigma_at(double tau1, double tau2) const {
        const double h = cell();
        const int i = std::clamp(static_cast<int>(tau1 / h), 0, resolution - 1);
        const int j = std::clamp(static_cast<int>(tau2 / h), 0, resolution - 1);
        return sigma[static_cast<size_t>(j) * resolution + i];
    }
};

/// Dominant-root surface over [0, tau_max]^2 at cell centers. Roots are
/// continued from neighboring cells (left and below) with per-cell winding
/// reconciliation, so the sign field is exact even where the value rests
/// on Newton continuation.
inline AbscissaSurface abscissa_surface(const std::vector<Factor>& factors, double tau_max,
                                        int resolution, const AbscissaOptions& base_opt = {}) {
    if (factors.empty()) throw InputError("abscissa_surface: no factors");
    if (!(tau_max > 0.0) || resolution < 1)
        throw InputError("abscissa_surface: bad window or resolution");
    AbscissaSurface surf;
    surf.tau_max = tau_max;
    surf.resolution = resolution;
    surf.sigma.assign(static_cast<size_t>(resolution) * resolution, 0.0);
    surf.rhp.assign(static_cast<size_t>(resolution) * resolution, 0);

    const double h = tau_max / resolution;
    std::vector<std::vector<std::vector<Complex>>> below(static_cast<size_t>(resolution));
    std::vector<std::vector<Complex>> left;

    for (int j = 0; j < resolution; ++j) {
        for (int i = 0; i < resolution; ++i) {
            const DelayPair tau{(i + 0.5) * h, (j + 0.5) * h};
            std::vector<std::vector<Complex>> seeds(factors.size());
            if (i > 0)
                for (size_t fi = 0; fi < factors.size(); ++fi)
                    seeds[fi].insert(seeds[fi].end(), left[fi].begin(), left[fi].end());
            if (!below[static_cast<size_t>(i)].empty())
                for (size_t fi = 0; fi < factors.size(); ++fi)
                    seeds[fi].insert(seeds[fi].end(), below[static_cast<size_t>(i)][fi].begin(),
                                     below[static_cast<size_t>(i)][fi].end());
            AbscissaOptions opt = base_opt;
            opt.exhaustive_fallback = base_opt.exhaustive_fallback && i == 0 && j == 0;
            detail::CellAbscissa cell = detail::abscissa_cell(factors, tau, &seeds, opt);
            surf.sigma[static_cast<size_t>(j) * resolution + i] = cell.sigma;
            surf.rhp[static_cast<size_t>(j) * resolution + i] = cell.rhp;
            left = cell.roots;
            below[static_cast<size_t>(i)] = std::move(cell.roots);
        }
    }
    return surf;
}

/// Marching-squares level contours of a row-major cell-center field.
/// Returns polylines in the same coordinates as the field centers.
inline std::vector<std::vector<std::array<double, 2>>> contour_polylines(
    const std::vector<double>& field, int resolution, double cell, double level) {
    struct Pt {
        double x, y;
    };
    auto value = [&](int i, int j) {
        return field[static_cast<size_t>(j) * resolution + i] - level;
    };
    auto interp = [&](double xa, double ya, double va, double xb, double yb, double vb) -> Pt {
        const double t = va / (va - vb);
        return {xa + t * (xb - xa), ya + t * (yb - ya)};
    };
    auto key_of = [](const Pt& p) {
        return std::pair<int64_t, int64_t>(static_cast<int64_t>(std::llround(p.x * 1e7)),
                                           static_cast<int64_t>(std::llround(p.y * 1e7)));
    };

    std::vector<std::pair<Pt, Pt>> segs;
    for (int j = 0; j + 1 < resolution; ++j) {
        for (int i = 0; i + 1 < resolution; ++i) {
            const double x0 = (i + 0.5) * cell, y0 = (j + 0.5) * cell;
            const double x1 = x0 + cell, y1 = y0 + cell;
            const double va = value(i, j), vb = value(i + 1, j);
            const double vc = value(i + 1, j + 1), vd = value(i, j + 1);
            std::vector<Pt> hits;
            std::vector<int> edge_id;
            if ((va >= 0) != (vb >= 0)) { hits.push_back(interp(x0, y0, va, x1, y0, vb)); edge_id.push_back(0); }
            if ((vb >= 0) != (vc >= 0)) { hits.push_back(interp(x1, y0, vb, x1, y1, vc)); edge_id.push_back(1); }
            if ((vc >= 0) != (vd >= 0)) { hits.push_back(interp(x1, y1, vc, x0, y1, vd)); edge_id.push_back(2); }
            if ((vd >= 0) != (va >= 0)) { hits.push_back(interp(x0, y1, vd, x0, y0, va)); edge_id.push_back(3); }
            if (hits.size() == 2) {
                segs.push_back({hits[0], hits[1]});
            } else if (hits.size() == 4) {
                // saddle: use the center average to pick the pairing
                const double vm = 0.25 * (va + vb + vc + vd);
                if ((vm >= 0) == (va >= 0)) {
                    segs.push_back({hits[0], hits[1]});
                    segs.push_back({hits[2], hits[3]});
                } else {
                    segs.push_back({hits[3], hits[0]});
                    segs.push_back({hits[1], hits[2]});
                }
            }
        }
    }

    std::multimap<std::pair<int64_t, int64_t>, size_t> by_end;
    for (size_t k = 0; k < segs.size(); ++k) {
        by_end.insert({key_of(segs[k].first), k});
        by_end.insert({key_of(segs[k].second), k});
    }
    std::vector<bool> used(segs.size(), false);
    std::vector<std::vector<std::array<double, 2>>> lines;
    for (size_t k = 0; k < segs.size(); ++k) {
        if (used[k]) continue;
        used[k] = true;
        std::vector<std::array<double, 2>> line = {{segs[k].first.x, segs[k].first.y},
                                                   {segs[k].second.x, segs[k].second.y}};
        // extend forward from the tail, then backward from the head
        for (int dir = 0; dir < 2; ++dir) {
            while (true) {
                const Pt tail{line.back()[0], line.back()[1]};
                bool extended = false;
                auto [lo, hi] = by_end.equal_range(key_of(tail));
                for (auto it = lo; it != hi; ++it) {
                    const size_t idx = it->second;
                    if (used[idx]) continue;
                    const auto ka = key_of(segs[idx].first);
                    used[idx] = true;
                    const Pt next = (ka == key_of(tail)) ? segs[idx].second : segs[idx].first;
                    line.push_back({next.x, next.y});
                    extended = true;
                    break;
                }
                if (!extended) break;
            }
            std::reverse(line.begin(), line.end());
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

} // namespace delaynet
