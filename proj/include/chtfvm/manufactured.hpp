#pragma once

/// Manufactured steady diffusion solution used by the verification cases:
/// T(x,y) = 20 + x^2 - x*y - 3*y^2 on (0,1)x(0,2), with the volumetric source
/// chosen so that -div(k(T) grad T) = Q holds exactly for each conductivity law.

#include <array>
#include <stdexcept>

namespace cht {

/// Polynomial conductivity law k(T) = c0 + c1 T + c2 T^2 + c3 T^3.
struct PolynomialLaw {
    std::array<double, 4> c{0, 0, 0, 0};

    double k(double T) const { return c[0] + T * (c[1] + T * (c[2] + T * c[3])); }
    double dk(double T) const { return c[1] + T * (2 * c[2] + T * 3 * c[3]); }

    static PolynomialLaw constant(double k0) { return PolynomialLaw{{k0, 0, 0, 0}}; }

    bool operator==(const PolynomialLaw&) const = default;
};

inline double manufactured_exact(double x, double y) {
    return 20.0 + x * x - x * y - 3.0 * y * y;
}

/// Conductivity law of verification case 1, 2 or 3.
inline PolynomialLaw manufactured_k_law(int case_id) {
    switch (case_id) {
        case 1: return PolynomialLaw{{0.0, 1.0, -0.1, 2.0}};  // 2T^3 - 0.1T^2 + T
        case 2: return PolynomialLaw{{0.0, 1.0, -0.1, 0.0}};  // -0.1T^2 + T
        case 3: return PolynomialLaw::constant(1.0);
    }
    throw std::invalid_argument("manufactured_k_law: case id must be 1, 2 or 3");
}

/// Q = -div(k(T) grad T) evaluated analytically:
/// grad T = (2x - y, -x - 6y), lap T = -4, so
/// Q = 4 k(T) - k'(T) * ((2x - y)^2 + (x + 6y)^2).
inline double manufactured_source(int case_id, double x, double y) {
    const PolynomialLaw law = manufactured_k_law(case_id);
    const double T = manufactured_exact(x, y);
    const double gx = 2.0 * x - y;
    const double gy = -x - 6.0 * y;
    return 4.0 * law.k(T) - law.dk(T) * (gx * gx + gy * gy);
}

}  // namespace cht
