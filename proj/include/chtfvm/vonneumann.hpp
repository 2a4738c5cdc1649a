#pragma once

/// Fourier-mode stability analysis of the semi-implicit scheme: assembles the
/// amplification polynomial phi3 = phi1 * phi2 of the linearized system and
/// checks root magnitudes and the simple-von-Neumann conditions by a
/// conjugate-polynomial degree reduction.

#include <algorithm>
#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

namespace cht::vn {

using cd = std::complex<double>;

struct StabilityParams {
    double cm1 = 0, cm2 = 0;    ///< convective Courant numbers u0*dt/dx, v0*dt/dy
    double cs1 = 0, cs2 = 0;    ///< acoustic Courant numbers c0*dt/dx, c0*dt/dy
    double cmu1 = 0, cmu2 = 0;  ///< diffusion numbers 2*mu*dt/dx^2, 2*mu*dt/dy^2
    double rho0 = 1;            ///< reference density
    double theta1 = 0, theta2 = 0;  ///< wavenumber angles in [-pi, pi]
};

/// phi1(g) = p1*g + p0 (degree 1), phi2(g) = a2*g^2 + a1*g + a0 (degree 2).
struct CharacteristicPolynomial {
    cd p1, p0;
    cd a2, a1, a0;
};

inline CharacteristicPolynomial characteristic_polynomial(const StabilityParams& q) {
    const cd I(0.0, 1.0);
    const double c1 = std::cos(q.theta1), s1 = std::sin(q.theta1);
    const double c2 = std::cos(q.theta2), s2 = std::sin(q.theta2);

    const cd k11 = 1.0 - c1 - I * s1;  // 1 - e^{i theta}
    const cd k12 = 1.0 - c2 - I * s2;
    const double k31 = (c1 - 1.0) * (c1 - 1.0);
    const double k32 = (c2 - 1.0) * (c2 - 1.0);
    const double k41 = c1 - 1.0;
    const double k42 = c2 - 1.0;

    const double cmu3 = 1.0 / (1.0 + q.cmu1 + q.cmu2);
    const cd gk = q.cm1 * k11 + q.cm2 * k12 - 1.0;
    const double D = q.rho0 * cmu3 * (q.cs1 * q.cs1 * k31 + q.cs2 * q.cs2 * k32);
    const double E = -(q.cmu1 * k41 + q.cmu2 * k42);

    CharacteristicPolynomial p;
    p.p1 = 1.0 + E;
    p.p0 = gk;
    p.a2 = (1.0 + D) * (1.0 + E) + q.rho0 * (q.cs1 * q.cs1 * s1 * s1 + q.cs2 * q.cs2 * s2 * s2);
    p.a1 = gk * (2.0 + D + E);
    p.a0 = gk * gk;
    return p;
}

/// Roots of a degree-2 complex polynomial by the stable quadratic formula.
inline std::array<cd, 2> quadratic_roots(cd a2, cd a1, cd a0) {
    if (a2 == cd(0.0)) throw std::invalid_argument("quadratic_roots: leading coefficient is zero");
    const cd disc = std::sqrt(a1 * a1 - 4.0 * a2 * a0);
    // pick the sign that avoids cancellation in -a1 -+ disc
    const cd q = (std::norm(-a1 + disc) >= std::norm(-a1 - disc)) ? 0.5 * (-a1 + disc)
                                                                  : 0.5 * (-a1 - disc);
    if (q == cd(0.0)) return {cd(0.0), cd(0.0)};  // a1 = a0 = 0
    return {q / a2, a0 / q};
}

inline std::array<cd, 3> amplification_roots(const StabilityParams& q) {
    const auto p = characteristic_polynomial(q);
    // Appendix inequality a2 = (1+D)(1+E) + rho0(...) >= 1 rules out a degenerate leading term.
    if (!(std::abs(p.a2) >= 1.0 - 1e-12))
        throw std::logic_error("amplification_roots: leading coefficient below 1");
    const auto r = quadratic_roots(p.a2, p.a1, p.a0);
    return {-p.p0 / p.p1, r[0], r[1]};
}

inline double max_root_magnitude(const StabilityParams& q) {
    const auto r = amplification_roots(q);
    return std::max({std::abs(r[0]), std::abs(r[1]), std::abs(r[2])});
}

struct Lemma1Result {
    bool pass = false;
    double cond1_lhs = 0, cond1_rhs = 0;  ///< |phi(0)| < |phi*(0)|
    double cond2_lhs = 0, cond2_rhs = 0;  ///< reduced degree-1 root inside the closed disk
};

/// Simple-von-Neumann test for a degree-2 polynomial a2 g^2 + a1 g + a0 via the
/// conjugate polynomial phi*(g) = conj(a0) g^2 + conj(a1) g + conj(a2):
/// (1) |phi(0)| < |phi*(0)|, and (2) the degree-1 reduction
/// phi_1(g) = [phi*(0) phi(g) - phi(0) phi*(g)]/g has its root in |g| <= 1.
inline Lemma1Result lemma1_check(cd a2, cd a1, cd a0) {
    Lemma1Result r;
    r.cond1_lhs = std::abs(a0);
    r.cond1_rhs = std::abs(a2);
    const cd b1 = std::conj(a2) * a2 - a0 * std::conj(a0);  // coefficient of g
    const cd b0 = std::conj(a2) * a1 - a0 * std::conj(a1);
    r.cond2_lhs = std::abs(b0);
    r.cond2_rhs = std::abs(b1);
    r.pass = (r.cond1_lhs < r.cond1_rhs) && (r.cond2_lhs <= r.cond2_rhs);
    return r;
}

inline Lemma1Result lemma1_check(const CharacteristicPolynomial& p) {
    return lemma1_check(p.a2, p.a1, p.a0);
}

struct SweepSample {
    StabilityParams params;
    double max_modulus = 0;
};

/// Random admissible draws: cm1 + cm2 <= cm_max, cs in [cs_lo, cs_hi] (log-uniform),
/// cmu in [0, cmu_max], rho0 in [rho_lo, rho_hi], theta in [-pi, pi]^2.
inline std::vector<SweepSample> random_sweep(int n, double cm_max, double cs_lo, double cs_hi,
                                             double cmu_max, double rho_lo, double rho_hi,
                                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<SweepSample> out;
    out.reserve(n);
    const double pi = 3.14159265358979323846;
    for (int i = 0; i < n; ++i) {
        StabilityParams q;
        const double cm = cm_max * uni(rng);
        const double split = uni(rng);
        q.cm1 = cm * split;
        q.cm2 = cm * (1.0 - split);
        q.cs1 = cs_lo * std::pow(cs_hi / cs_lo, uni(rng));
        q.cs2 = cs_lo * std::pow(cs_hi / cs_lo, uni(rng));
        q.cmu1 = cmu_max * uni(rng);
        q.cmu2 = cmu_max * uni(rng);
        q.rho0 = rho_lo + (rho_hi - rho_lo) * uni(rng);
        q.theta1 = pi * (2.0 * uni(rng) - 1.0);
        q.theta2 = pi * (2.0 * uni(rng) - 1.0);
        out.push_back({q, max_root_magnitude(q)});
    }
    return out;
}

}  // namespace cht::vn
