#pragma once

/// Incompressible Navier-Stokes on the fluid block, collocated finite volumes.
///
/// Semi-implicit scheme: implicit Euler time term and central diffusion,
/// fully explicit upwind convection evaluated with the time-n divergence-free
/// face velocities, pressure handled through a Rhie-Chow corrected
/// predictor/correction pass. Because convection sits entirely on the
/// right-hand side, the momentum and pressure-correction matrices are fixed
/// for the whole run and their factorizations are computed once.
///
/// The SIMPLE baseline re-linearizes convection implicitly (Picard) inside
/// each time step under velocity/pressure under-relaxation, so its matrices
/// change every outer iteration.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "chtfvm/bc.hpp"
#include "chtfvm/grid.hpp"
#include "chtfvm/sparse.hpp"

namespace cht {

struct FluidProps {
    double rho = 1;
    double mu = 1;
    double beta = 0;              ///< thermal expansion (Boussinesq)
    double g0x = 0, g0y = 0;      ///< gravity vector
    double T_ref = 0;
    bool operator==(const FluidProps&) const = default;

    bool buoyant() const { return beta != 0 && (g0x != 0 || g0y != 0); }
};

struct FluidState {
    Field u, v, p;
    FaceVelocities faces;
    double t = 0;

    static FluidState rest(const GridBlock& b) {
        FluidState s;
        s.u.assign(b.cells(), 0.0);
        s.v.assign(b.cells(), 0.0);
        s.p.assign(b.cells(), 0.0);
        s.faces = FaceVelocities::zeros(b);
        return s;
    }
};

/// dt such that u0*dt/dx + v0*dt/dy = cfl.
inline double cfl_timestep(double u0, double v0, double dx, double dy, double cfl) {
    if (u0 < 0 || v0 < 0) throw std::invalid_argument("cfl_timestep: speeds must be >= 0");
    if (u0 == 0 && v0 == 0)
        throw std::invalid_argument("cfl_timestep: both characteristic speeds are zero; "
                                    "supply the time step explicitly");
    if (cfl <= 0 || cfl > 1) throw std::invalid_argument("cfl_timestep: require 0 < cfl <= 1");
    return cfl / (u0 / dx + v0 / dy);
}

/// err = sqrt(sum |u_new - u_old|^2) / sqrt(sum |u_new|^2) over all cells,
/// both velocity components.
inline double steady_state_error(const Field& u_new, const Field& v_new, const Field& u_old,
                                 const Field& v_old) {
    if (u_new.size() != u_old.size() || v_new.size() != v_old.size())
        throw std::invalid_argument("steady_state_error: field shapes differ");
    double num = 0, den = 0;
    for (std::size_t i = 0; i < u_new.size(); ++i) {
        num += (u_new[i] - u_old[i]) * (u_new[i] - u_old[i]) + (v_new[i] - v_old[i]) * (v_new[i] - v_old[i]);
        den += u_new[i] * u_new[i] + v_new[i] * v_new[i];
    }
    if (den == 0) throw std::invalid_argument("steady_state_error: new field is identically zero");
    return std::sqrt(num) / std::sqrt(den);
}

inline double steady_state_error(const FluidState& s_new, const FluidState& s_old) {
    return steady_state_error(s_new.u, s_new.v, s_old.u, s_old.v);
}

namespace detail {

/// Same metric but tolerant of identically-zero fields (a rest state that
/// stays at rest counts as fully converged).
inline double relative_change(const Field& u_new, const Field& v_new, const Field& u_old,
                              const Field& v_old) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < u_new.size(); ++i) {
        num += (u_new[i] - u_old[i]) * (u_new[i] - u_old[i]) +
               (v_new[i] - v_old[i]) * (v_new[i] - v_old[i]);
        den += u_new[i] * u_new[i] + v_new[i] * v_new[i];
    }
    if (den == 0) return num == 0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num) / std::sqrt(den);
}

enum Component { U = 0, V = 1 };

inline double bc_component(const VelocityBc& bc, Component c) {
    return c == Component::U ? bc.u : bc.v;
}

/// Whether the wall Dirichlet diffusion term applies to a component at a side.
/// Slip walls constrain only the normal component; everything else prescribes both.
inline bool wall_constrains(const VelocityBc& bc, Side s, Component c) {
    switch (bc.kind) {
        case VelocityBcKind::NoSlip:
        case VelocityBcKind::MovingWall:
        case VelocityBcKind::Inlet:
            return true;
        case VelocityBcKind::Slip: {
            const bool normal_is_u = (s == Side::West || s == Side::East);
            return (c == Component::U) == normal_is_u;
        }
        case VelocityBcKind::Outlet:
            return false;  // zero gradient
    }
    return false;
}

/// Prescribed normal face velocity at a boundary face, or the cell value for
/// outlets (zero-gradient).
inline double boundary_normal_velocity(const VelocityBc& bc, Side s, double cell_value) {
    switch (bc.kind) {
        case VelocityBcKind::Inlet:
            return (s == Side::West || s == Side::East) ? bc.u : bc.v;
        case VelocityBcKind::Outlet:
            return cell_value;
        default:
            return 0.0;  // walls: no normal flux
    }
}

}  // namespace detail

/// Cell-centered gradient used for the pressure terms: central differences in
/// the interior, one-sided two-point differences at boundary cells (exact for
/// linear fields, which keeps the Rhie-Chow correction zero there).
inline void pressure_gradient(const GridBlock& b, const Field& p, Field& gx, Field& gy) {
    gx.assign(b.cells(), 0.0);
    gy.assign(b.cells(), 0.0);
    for (int j = 0; j < b.ny; ++j)
        for (int i = 0; i < b.nx; ++i) {
            const int c = b.cell(i, j);
            if (b.nx > 1) {
                if (i == 0)
                    gx[c] = (p[b.cell(1, j)] - p[c]) / b.dx;
                else if (i == b.nx - 1)
                    gx[c] = (p[c] - p[b.cell(b.nx - 2, j)]) / b.dx;
                else
                    gx[c] = (p[b.cell(i + 1, j)] - p[b.cell(i - 1, j)]) / (2 * b.dx);
            }
            if (b.ny > 1) {
                if (j == 0)
                    gy[c] = (p[b.cell(i, 1)] - p[c]) / b.dy;
                else if (j == b.ny - 1)
                    gy[c] = (p[c] - p[b.cell(i, b.ny - 2)]) / b.dy;
                else
                    gy[c] = (p[b.cell(i, j + 1)] - p[b.cell(i, j - 1)]) / (2 * b.dy);
            }
        }
}

/// Rhie-Chow face velocities: average of the adjacent cell velocities minus
/// D_b [ (p_N - p_C)/d - mean of the adjacent cell pressure gradients ].
/// Boundary faces take the imposed values; no correction is applied there.
inline FaceVelocities rhie_chow_faces(const GridBlock& b, const FluidBcTable& bc, const Field& u,
                                      const Field& v, const Field& p, const Field& Du,
                                      const Field& Dv) {
    FaceVelocities f = FaceVelocities::zeros(b);
    Field gx, gy;
    pressure_gradient(b, p, gx, gy);

    for (int j = 0; j < b.ny; ++j) {
        for (int i = 1; i < b.nx; ++i) {
            const int L = b.cell(i - 1, j), R = b.cell(i, j);
            const double D = 0.5 * (Du[L] + Du[R]);
            const double compact = (p[R] - p[L]) / b.dx;
            const double gbar = 0.5 * (gx[L] + gx[R]);
            f.uf[fx_index(b, i, j)] = 0.5 * (u[L] + u[R]) - D * (compact - gbar);
        }
        f.uf[fx_index(b, 0, j)] =
            detail::boundary_normal_velocity(bc.at(Side::West, j), Side::West, u[b.cell(0, j)]);
        f.uf[fx_index(b, b.nx, j)] =
            detail::boundary_normal_velocity(bc.at(Side::East, j), Side::East, u[b.cell(b.nx - 1, j)]);
    }
    for (int i = 0; i < b.nx; ++i) {
        for (int j = 1; j < b.ny; ++j) {
            const int S = b.cell(i, j - 1), N = b.cell(i, j);
            const double D = 0.5 * (Dv[S] + Dv[N]);
            const double compact = (p[N] - p[S]) / b.dy;
            const double gbar = 0.5 * (gy[S] + gy[N]);
            f.vf[fy_index(b, i, j)] = 0.5 * (v[S] + v[N]) - D * (compact - gbar);
        }
        f.vf[fy_index(b, i, 0)] =
            detail::boundary_normal_velocity(bc.at(Side::South, i), Side::South, v[b.cell(i, 0)]);
        f.vf[fy_index(b, i, b.ny)] =
            detail::boundary_normal_velocity(bc.at(Side::North, i), Side::North, v[b.cell(i, b.ny - 1)]);
    }
    return f;
}

/// Explicit upwind convection divergence per cell and component:
/// (1/V) sum_b rho * m_b * phi_upwind with m_b the outward volume flux.
inline void convection_rhs(const GridBlock& b, const FluidBcTable& bc, const FluidProps& props,
                           const FaceVelocities& faces, const Field& u, const Field& v, Field& conv_u,
                           Field& conv_v) {
    conv_u.assign(b.cells(), 0.0);
    conv_v.assign(b.cells(), 0.0);
    const double iV = 1.0 / b.volume();

    auto face_flux = [&](int L, int R, double m) {
        // m: volume flux from L to R
        const double fu = props.rho * m * (m >= 0 ? u[L] : u[R]);
        const double fv = props.rho * m * (m >= 0 ? v[L] : v[R]);
        conv_u[L] += fu * iV;
        conv_u[R] -= fu * iV;
        conv_v[L] += fv * iV;
        conv_v[R] -= fv * iV;
    };
    for (int j = 0; j < b.ny; ++j)
        for (int i = 1; i < b.nx; ++i)
            face_flux(b.cell(i - 1, j), b.cell(i, j), faces.uf[fx_index(b, i, j)] * b.dy);
    for (int i = 0; i < b.nx; ++i)
        for (int j = 1; j < b.ny; ++j)
            face_flux(b.cell(i, j - 1), b.cell(i, j), faces.vf[fy_index(b, i, j)] * b.dx);

    auto boundary = [&](int c, Side s, int m_idx, double m_out) {
        const VelocityBc& vbc = bc.at(s, m_idx);
        double ub, vb;
        if (m_out >= 0) {  // outflow: upwind from the cell
            ub = u[c];
            vb = v[c];
        } else {  // inflow carries the boundary velocity
            ub = vbc.u;
            vb = vbc.v;
        }
        conv_u[c] += props.rho * m_out * ub * iV;
        conv_v[c] += props.rho * m_out * vb * iV;
    };
    for (int j = 0; j < b.ny; ++j) {
        boundary(b.cell(0, j), Side::West, j, -faces.uf[fx_index(b, 0, j)] * b.dy);
        boundary(b.cell(b.nx - 1, j), Side::East, j, faces.uf[fx_index(b, b.nx, j)] * b.dy);
    }
    for (int i = 0; i < b.nx; ++i) {
        boundary(b.cell(i, 0), Side::South, i, -faces.vf[fy_index(b, i, 0)] * b.dx);
        boundary(b.cell(i, b.ny - 1), Side::North, i, faces.vf[fy_index(b, i, b.ny)] * b.dx);
    }
}

/// Time-invariant part of the semi-implicit momentum systems: implicit Euler
/// plus implicit central diffusion with boundary terms folded into a_C. The
/// compact-form coefficients a_C are exposed for Rhie-Chow (D = 1/a_C).
struct MomentumOperator {
    LinearSystem Au, Av;
    Field aC_u, aC_v;      ///< diagonal coefficients of the compact form
    Field rhs_bc_u, rhs_bc_v;  ///< wall/inlet diffusion source terms (per volume)

    MomentumOperator(const GridBlock& b, const FluidBcTable& bc, const FluidProps& props, double dt)
        : Au(b.cells()), Av(b.cells()) {
        if (dt <= 0) throw std::invalid_argument("momentum assembly: dt must be positive");
        const int n = b.cells();
        aC_u.assign(n, props.rho / dt);
        aC_v.assign(n, props.rho / dt);
        rhs_bc_u.assign(n, 0.0);
        rhs_bc_v.assign(n, 0.0);
        const double iV = 1.0 / b.volume();

        std::vector<Eigen::Triplet<double>> off_u, off_v;
        auto interior = [&](int c, int nb, double A, double d) {
            const double w = props.mu * A / (d * b.volume());
            aC_u[c] += w;
            aC_v[c] += w;
            off_u.emplace_back(c, nb, -w);
            off_v.emplace_back(c, nb, -w);
        };
        auto boundary = [&](int c, Side s, int m) {
            const VelocityBc& vbc = bc.at(s, m);
            const double A = b.edge_area(s);
            const double dn = b.normal_spacing(s);
            const double w = props.mu * A / (0.5 * dn) * iV;
            if (detail::wall_constrains(vbc, s, detail::U)) {
                aC_u[c] += w;
                rhs_bc_u[c] += w * detail::bc_component(vbc, detail::U);
            }
            if (detail::wall_constrains(vbc, s, detail::V)) {
                aC_v[c] += w;
                rhs_bc_v[c] += w * detail::bc_component(vbc, detail::V);
            }
        };

        for (int j = 0; j < b.ny; ++j)
            for (int i = 0; i < b.nx; ++i) {
                const int c = b.cell(i, j);
                if (i > 0) interior(c, b.cell(i - 1, j), b.dy, b.dx);
                if (i + 1 < b.nx) interior(c, b.cell(i + 1, j), b.dy, b.dx);
                if (j > 0) interior(c, b.cell(i, j - 1), b.dx, b.dy);
                if (j + 1 < b.ny) interior(c, b.cell(i, j + 1), b.dx, b.dy);
                if (i == 0) boundary(c, Side::West, j);
                if (i == b.nx - 1) boundary(c, Side::East, j);
                if (j == 0) boundary(c, Side::South, i);
                if (j == b.ny - 1) boundary(c, Side::North, i);
            }
        for (int c = 0; c < n; ++c) {
            Au.add(c, c, aC_u[c]);
            Av.add(c, c, aC_v[c]);
        }
        for (const auto& t : off_u) Au.add(t.row(), t.col(), t.value());
        for (const auto& t : off_v) Av.add(t.row(), t.col(), t.value());
        Au.finalize();
        Av.finalize();
    }
};

/// Pressure-correction system for given face diffusivities D = 1/a_C. The
/// pressure gauge is pinned at cell (0,0) by row replacement unless an outlet
/// provides a Dirichlet condition.
struct PressureOperator {
    LinearSystem Ap;
    bool pinned = false;

    PressureOperator(const GridBlock& b, const FluidBcTable& bc, const Field& Du, const Field& Dv)
        : Ap(b.cells()) {
        bool has_outlet = false;
        for (Side s : all_sides)
            for (const auto& e : bc.side[static_cast<int>(s)])
                if (e.kind == VelocityBcKind::Outlet) has_outlet = true;
        pinned = !has_outlet;

        auto add = [&](int r, int c, double v) {
            if (pinned && r == 0) return;  // replaced by the gauge row
            Ap.add(r, c, v);
        };
        for (int j = 0; j < b.ny; ++j)
            for (int i = 1; i < b.nx; ++i) {
                const int L = b.cell(i - 1, j), R = b.cell(i, j);
                const double c = 0.5 * (Du[L] + Du[R]) * b.dy / b.dx;
                add(L, L, c);
                add(L, R, -c);
                add(R, R, c);
                add(R, L, -c);
            }
        for (int i = 0; i < b.nx; ++i)
            for (int j = 1; j < b.ny; ++j) {
                const int S = b.cell(i, j - 1), N = b.cell(i, j);
                const double c = 0.5 * (Dv[S] + Dv[N]) * b.dx / b.dy;
                add(S, S, c);
                add(S, N, -c);
                add(N, N, c);
                add(N, S, -c);
            }
        // outlet faces: p' = 0 on the face at half-spacing
        auto outlet = [&](int c, Side s, int m, double D) {
            if (bc.at(s, m).kind != VelocityBcKind::Outlet) return;
            add(c, c, D * b.edge_area(s) / (0.5 * b.normal_spacing(s)));
        };
        for (int j = 0; j < b.ny; ++j) {
            outlet(b.cell(0, j), Side::West, j, Du[b.cell(0, j)]);
            outlet(b.cell(b.nx - 1, j), Side::East, j, Du[b.cell(b.nx - 1, j)]);
        }
        for (int i = 0; i < b.nx; ++i) {
            outlet(b.cell(i, 0), Side::South, i, Dv[b.cell(i, 0)]);
            outlet(b.cell(i, b.ny - 1), Side::North, i, Dv[b.cell(i, b.ny - 1)]);
        }
        if (pinned) Ap.add(0, 0, 1.0);
        Ap.finalize();
    }
};

/// Per-cell discrete mass defect sum_b u_face . S_b.
inline Field mass_defect(const GridBlock& b, const FaceVelocities& f) {
    Field d(b.cells(), 0.0);
    for (int j = 0; j < b.ny; ++j)
        for (int i = 0; i < b.nx; ++i) {
            const int c = b.cell(i, j);
            d[c] = (f.uf[fx_index(b, i + 1, j)] - f.uf[fx_index(b, i, j)]) * b.dy +
                   (f.vf[fy_index(b, i, j + 1)] - f.vf[fy_index(b, i, j)]) * b.dx;
        }
    return d;
}

struct FluidStepStats {
    int subiterations = 0;  ///< predictor/correction passes (1 when K = 0)
    double last_change = 0;
    double max_mass_defect = 0;
};

/// Iterative semi-implicit stepper. Matrices are assembled and factorized at
/// construction; a step performs K+1 predictor/correction passes (K = 0 gives
/// the non-iterative scheme) and leaves a divergence-free face field.
class SemiImplicitSolver {
  public:
    SemiImplicitSolver(const Grid& grid, const FluidProps& props, FluidBcTable bc, double dt)
        : b_(grid.fluid),
          props_(props),
          bc_(std::move(bc)),
          dt_(dt),
          mom_(b_, bc_, props_, dt),
          Du_(reciprocal(mom_.aC_u)),
          Dv_(reciprocal(mom_.aC_v)),
          pres_(b_, bc_, Du_, Dv_) {
        for (Side s : all_sides)
            for (const auto& e : bc_.side[static_cast<int>(s)])
                bc_vel_scale_ = std::max({bc_vel_scale_, std::abs(e.u), std::abs(e.v)});
    }

    void set_buoyancy_field(const Field* T) { buoy_T_ = T; }
    double dt() const { return dt_; }
    const Field& diag_u() const { return mom_.aC_u; }
    const Field& diag_v() const { return mom_.aC_v; }

    /// Advance state from t^n to t^{n+1}. K is the subiteration cap (K = 0:
    /// one predictor plus one correction); tol the relative-change criterion.
    FluidStepStats step(FluidState& s, int K = 0, double tol = 1e-6) {
        const int n = b_.cells();
        if (props_.buoyant() && !buoy_T_)
            throw std::invalid_argument("semi-implicit step: buoyancy is active but no temperature "
                                        "field was supplied");

        // explicit right-hand side, frozen for the whole step
        Field conv_u, conv_v;
        convection_rhs(b_, bc_, props_, s.faces, s.u, s.v, conv_u, conv_v);
        Field Bu(n), Bv(n);
        for (int c = 0; c < n; ++c) {
            Bu[c] = props_.rho * s.u[c] / dt_ - conv_u[c] + mom_.rhs_bc_u[c];
            Bv[c] = props_.rho * s.v[c] / dt_ - conv_v[c] + mom_.rhs_bc_v[c];
        }
        if (props_.buoyant()) {
            for (int c = 0; c < n; ++c) {
                const double dT = (*buoy_T_)[c] - props_.T_ref;
                Bu[c] -= props_.rho * props_.beta * props_.g0x * dT;
                Bv[c] -= props_.rho * props_.beta * props_.g0y * dT;
            }
        }

        FluidStepStats stats;
        Field u = s.u, v = s.v, p = s.p;
        Field gx, gy;
        const double vel_scale = 1.0 + linf(s.u) + linf(s.v) + bc_vel_scale_;

        for (int k = 0; ; ++k) {
            // predictor with the lagged pressure
            pressure_gradient(b_, p, gx, gy);
            Eigen::VectorXd rhs(n);
            for (int c = 0; c < n; ++c) rhs[c] = Bu[c] - gx[c];
            mom_.Au.set_rhs(rhs);
            Eigen::VectorXd us = mom_.Au.solve(/*reuse=*/true);
            for (int c = 0; c < n; ++c) rhs[c] = Bv[c] - gy[c];
            mom_.Av.set_rhs(rhs);
            Eigen::VectorXd vs = mom_.Av.solve(/*reuse=*/true);

            Field u_star(us.data(), us.data() + n), v_star(vs.data(), vs.data() + n);
            FaceVelocities fstar = rhie_chow_faces(b_, bc_, u_star, v_star, p, Du_, Dv_);

            // pressure correction from discrete mass conservation
            Field md = mass_defect(b_, fstar);
            Eigen::VectorXd prhs(n);
            for (int c = 0; c < n; ++c) prhs[c] = -md[c];
            if (pres_.pinned) prhs[0] = 0.0;
            pres_.Ap.set_rhs(prhs);
            Eigen::VectorXd pc = pres_.Ap.solve(/*reuse=*/true);
            Field pprime(pc.data(), pc.data() + n);

            // correct cells, faces and pressure
            pressure_gradient(b_, pprime, gx, gy);
            Field u_prev = std::move(u), v_prev = std::move(v);
            u.resize(n);
            v.resize(n);
            for (int c = 0; c < n; ++c) {
                u[c] = u_star[c] - Du_[c] * gx[c];
                v[c] = v_star[c] - Dv_[c] * gy[c];
                p[c] += pprime[c];
            }
            correct_faces(fstar, pprime);
            s.faces = std::move(fstar);

            if (linf(u) > 1e6 * vel_scale)
                throw std::runtime_error(
                    "semi-implicit step diverged (velocity grew by > 1e6); convective CFL " +
                    format_double(convective_cfl(u_prev, v_prev)));

            stats.subiterations = k + 1;
            if (k >= K) {
                // K = 0: exactly one predictor + one correction
                break;
            }
            const double change = detail::relative_change(u, v, u_prev, v_prev);
            stats.last_change = change;
            if (change < tol) break;
        }

        s.u = std::move(u);
        s.v = std::move(v);
        s.p = std::move(p);
        s.t += dt_;
        stats.max_mass_defect = linf(mass_defect(b_, s.faces));
        return stats;
    }

    double convective_cfl(const Field& u, const Field& v) const {
        return linf(u) * dt_ / b_.dx + linf(v) * dt_ / b_.dy;
    }

  private:
    static Field reciprocal(const Field& a) {
        Field d(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) d[i] = 1.0 / a[i];
        return d;
    }

    void correct_faces(FaceVelocities& f, const Field& pp) {
        for (int j = 0; j < b_.ny; ++j) {
            for (int i = 1; i < b_.nx; ++i) {
                const int L = b_.cell(i - 1, j), R = b_.cell(i, j);
                f.uf[fx_index(b_, i, j)] -= 0.5 * (Du_[L] + Du_[R]) * (pp[R] - pp[L]) / b_.dx;
            }
            apply_outlet_face_correction(f, pp, Side::West, j);
            apply_outlet_face_correction(f, pp, Side::East, j);
        }
        for (int i = 0; i < b_.nx; ++i) {
            for (int j = 1; j < b_.ny; ++j) {
                const int S = b_.cell(i, j - 1), N = b_.cell(i, j);
                f.vf[fy_index(b_, i, j)] -= 0.5 * (Dv_[S] + Dv_[N]) * (pp[N] - pp[S]) / b_.dy;
            }
            apply_outlet_face_correction(f, pp, Side::South, i);
            apply_outlet_face_correction(f, pp, Side::North, i);
        }
    }

    void apply_outlet_face_correction(FaceVelocities& f, const Field& pp, Side s, int m) {
        if (bc_.at(s, m).kind != VelocityBcKind::Outlet) return;
        switch (s) {
            case Side::West: {
                const int c = b_.cell(0, m);
                f.uf[fx_index(b_, 0, m)] += Du_[c] * (0.0 - pp[c]) / (0.5 * b_.dx);
                break;
            }
            case Side::East: {
                const int c = b_.cell(b_.nx - 1, m);
                f.uf[fx_index(b_, b_.nx, m)] -= Du_[c] * (0.0 - pp[c]) / (0.5 * b_.dx);
                break;
            }
            case Side::South: {
                const int c = b_.cell(m, 0);
                f.vf[fy_index(b_, m, 0)] += Dv_[c] * (0.0 - pp[c]) / (0.5 * b_.dy);
                break;
            }
            case Side::North: {
                const int c = b_.cell(m, b_.ny - 1);
                f.vf[fy_index(b_, m, b_.ny)] -= Dv_[c] * (0.0 - pp[c]) / (0.5 * b_.dy);
                break;
            }
        }
    }

    const GridBlock& b_;
    FluidProps props_;
    FluidBcTable bc_;
    double dt_;
    MomentumOperator mom_;
    Field Du_, Dv_;
    PressureOperator pres_;
    const Field* buoy_T_ = nullptr;
    double bc_vel_scale_ = 0;
};

/// Classical SIMPLE with implicit Picard-lagged upwind convection and
/// velocity/pressure under-relaxation. Matrices are rebuilt and refactorized
/// on every outer iteration.
class SimpleSolver {
  public:
    SimpleSolver(const Grid& grid, const FluidProps& props, FluidBcTable bc, double dt,
                 double relax_u = 0.7, double relax_p = 0.3)
        : b_(grid.fluid), props_(props), bc_(std::move(bc)), dt_(dt), relax_u_(relax_u),
          relax_p_(relax_p) {
        if (relax_u <= 0 || relax_u > 1 || relax_p <= 0 || relax_p > 1)
            throw std::invalid_argument("SIMPLE: relaxation factors must be in (0, 1]");
        if (dt <= 0) throw std::invalid_argument("SIMPLE: dt must be positive");
    }

    void set_buoyancy_field(const Field* T) { buoy_T_ = T; }

    FluidStepStats step(FluidState& s, int max_iters = 200, double tol = 1e-5) {
        const int n = b_.cells();
        Field u = s.u, v = s.v, p = s.p;
        FaceVelocities faces = s.faces;
        FluidStepStats stats;

        for (int it = 1; it <= max_iters; ++it) {
            Field aC_u(n, 0.0), aC_v(n, 0.0);
            LinearSystem Au(n), Av(n);
            Field rhs_u(n, 0.0), rhs_v(n, 0.0);
            assemble_momentum_implicit(faces, s, Au, Av, aC_u, aC_v, rhs_u, rhs_v);

            Field gx, gy;
            pressure_gradient(b_, p, gx, gy);
            Eigen::VectorXd bu(n), bv(n);
            // aC is already the relaxed diagonal aC/alpha_u
            for (int c = 0; c < n; ++c) {
                bu[c] = rhs_u[c] - gx[c] + (1 - relax_u_) * aC_u[c] * u[c];
                bv[c] = rhs_v[c] - gy[c] + (1 - relax_u_) * aC_v[c] * v[c];
            }
            Au.set_rhs(bu);
            Av.set_rhs(bv);
            Eigen::VectorXd us = Au.solve(), vs = Av.solve();
            Field u_star(us.data(), us.data() + n), v_star(vs.data(), vs.data() + n);

            // relaxed diagonals govern the actually-solved system
            Field Du(n), Dv(n);
            for (int c = 0; c < n; ++c) {
                Du[c] = relax_u_ / aC_u[c];
                Dv[c] = relax_u_ / aC_v[c];
            }
            FaceVelocities fstar = rhie_chow_faces(b_, bc_, u_star, v_star, p, Du, Dv);

            PressureOperator pres(b_, bc_, Du, Dv);
            Field md = mass_defect(b_, fstar);
            Eigen::VectorXd prhs(n);
            for (int c = 0; c < n; ++c) prhs[c] = -md[c];
            if (pres.pinned) prhs[0] = 0.0;
            pres.Ap.set_rhs(prhs);
            Eigen::VectorXd pc = pres.Ap.solve();
            Field pprime(pc.data(), pc.data() + n);

            pressure_gradient(b_, pprime, gx, gy);
            Field u_new(n), v_new(n);
            for (int c = 0; c < n; ++c) {
                u_new[c] = u_star[c] - Du[c] * gx[c];
                v_new[c] = v_star[c] - Dv[c] * gy[c];
                p[c] += relax_p_ * pprime[c];
            }
            correct_faces_simple(fstar, pprime, Du, Dv);
            faces = std::move(fstar);

            const double change = detail::relative_change(u_new, v_new, u, v);
            u = std::move(u_new);
            v = std::move(v_new);
            stats.subiterations = it;
            stats.last_change = change;
            if (change < tol) {
                s.u = std::move(u);
                s.v = std::move(v);
                s.p = std::move(p);
                s.faces = std::move(faces);
                s.t += dt_;
                stats.max_mass_defect = linf(mass_defect(b_, s.faces));
                return stats;
            }
        }
        throw std::runtime_error("SIMPLE: outer iteration did not converge within " +
                                 std::to_string(max_iters) + " iterations (last change " +
                                 format_double(stats.last_change) + ")");
    }

  private:
    void assemble_momentum_implicit(const FaceVelocities& faces, const FluidState& s_n,
                                    LinearSystem& Au, LinearSystem& Av, Field& aC_u, Field& aC_v,
                                    Field& rhs_u, Field& rhs_v) {
        const int n = b_.cells();
        const double iV = 1.0 / b_.volume();
        for (int c = 0; c < n; ++c) {
            aC_u[c] = props_.rho / dt_;
            aC_v[c] = props_.rho / dt_;
            rhs_u[c] = props_.rho * s_n.u[c] / dt_;
            rhs_v[c] = props_.rho * s_n.v[c] / dt_;
        }
        if (props_.buoyant()) {
            if (!buoy_T_) throw std::invalid_argument("SIMPLE: buoyancy active without temperature");
            for (int c = 0; c < n; ++c) {
                const double dT = (*buoy_T_)[c] - props_.T_ref;
                rhs_u[c] -= props_.rho * props_.beta * props_.g0x * dT;
                rhs_v[c] -= props_.rho * props_.beta * props_.g0y * dT;
            }
        }

        std::vector<Eigen::Triplet<double>> off_u, off_v;
        auto interior = [&](int c, int nb, double A, double d, double m_out) {
            // diffusion + upwind convection, per volume
            const double wd = props_.mu * A / (d * b_.volume());
            const double conv = props_.rho * m_out * iV;
            aC_u[c] += wd + std::max(conv, 0.0);
            aC_v[c] += wd + std::max(conv, 0.0);
            const double offc = -wd + std::min(conv, 0.0);
            off_u.emplace_back(c, nb, offc);
            off_v.emplace_back(c, nb, offc);
        };
        auto boundary = [&](int c, Side s, int m) {
            const VelocityBc& vbc = bc_.at(s, m);
            const double A = b_.edge_area(s);
            const double dn = b_.normal_spacing(s);
            const double wd = props_.mu * A / (0.5 * dn) * iV;
            if (detail::wall_constrains(vbc, s, detail::U)) {
                aC_u[c] += wd;
                rhs_u[c] += wd * detail::bc_component(vbc, detail::U);
            }
            if (detail::wall_constrains(vbc, s, detail::V)) {
                aC_v[c] += wd;
                rhs_v[c] += wd * detail::bc_component(vbc, detail::V);
            }
            double m_out = 0;
            switch (s) {
                case Side::West: m_out = -faces.uf[fx_index(b_, 0, m)] * b_.dy; break;
                case Side::East: m_out = faces.uf[fx_index(b_, b_.nx, m)] * b_.dy; break;
                case Side::South: m_out = -faces.vf[fy_index(b_, m, 0)] * b_.dx; break;
                case Side::North: m_out = faces.vf[fy_index(b_, m, b_.ny)] * b_.dx; break;
            }
            const double conv = props_.rho * m_out * iV;
            if (conv >= 0) {
                aC_u[c] += conv;
                aC_v[c] += conv;
            } else {
                rhs_u[c] -= conv * vbc.u;
                rhs_v[c] -= conv * vbc.v;
            }
        };
        for (int j = 0; j < b_.ny; ++j)
            for (int i = 0; i < b_.nx; ++i) {
                const int c = b_.cell(i, j);
                if (i > 0) interior(c, b_.cell(i - 1, j), b_.dy, b_.dx, -faces.uf[fx_index(b_, i, j)] * b_.dy);
                if (i + 1 < b_.nx)
                    interior(c, b_.cell(i + 1, j), b_.dy, b_.dx, faces.uf[fx_index(b_, i + 1, j)] * b_.dy);
                if (j > 0) interior(c, b_.cell(i, j - 1), b_.dx, b_.dy, -faces.vf[fy_index(b_, i, j)] * b_.dx);
                if (j + 1 < b_.ny)
                    interior(c, b_.cell(i, j + 1), b_.dx, b_.dy, faces.vf[fy_index(b_, i, j + 1)] * b_.dx);
                if (i == 0) boundary(c, Side::West, j);
                if (i == b_.nx - 1) boundary(c, Side::East, j);
                if (j == 0) boundary(c, Side::South, i);
                if (j == b_.ny - 1) boundary(c, Side::North, i);
            }
        for (int c = 0; c < n; ++c) {
            aC_u[c] /= relax_u_;  // the relaxed diagonal is what D sees
            aC_v[c] /= relax_u_;
            Au.add(c, c, aC_u[c]);
            Av.add(c, c, aC_v[c]);
        }
        for (const auto& t : off_u) Au.add(t.row(), t.col(), t.value());
        for (const auto& t : off_v) Av.add(t.row(), t.col(), t.value());
    }

    void correct_faces_simple(FaceVelocities& f, const Field& pp, const Field& Du, const Field& Dv) {
        for (int j = 0; j < b_.ny; ++j)
            for (int i = 1; i < b_.nx; ++i) {
                const int L = b_.cell(i - 1, j), R = b_.cell(i, j);
                f.uf[fx_index(b_, i, j)] -= 0.5 * (Du[L] + Du[R]) * (pp[R] - pp[L]) / b_.dx;
            }
        for (int i = 0; i < b_.nx; ++i)
            for (int j = 1; j < b_.ny; ++j) {
                const int S = b_.cell(i, j - 1), N = b_.cell(i, j);
                f.vf[fy_index(b_, i, j)] -= 0.5 * (Dv[S] + Dv[N]) * (pp[N] - pp[S]) / b_.dy;
            }
        auto outlet = [&](Side s, int m) {
            if (bc_.at(s, m).kind != VelocityBcKind::Outlet) return;
            switch (s) {
                case Side::West: {
                    const int c = b_.cell(0, m);
                    f.uf[fx_index(b_, 0, m)] += Du[c] * (0.0 - pp[c]) / (0.5 * b_.dx);
                    break;
                }
                case Side::East: {
                    const int c = b_.cell(b_.nx - 1, m);
                    f.uf[fx_index(b_, b_.nx, m)] -= Du[c] * (0.0 - pp[c]) / (0.5 * b_.dx);
                    break;
                }
                case Side::South: {
                    const int c = b_.cell(m, 0);
                    f.vf[fy_index(b_, m, 0)] += Dv[c] * (0.0 - pp[c]) / (0.5 * b_.dy);
                    break;
                }
                case Side::North: {
                    const int c = b_.cell(m, b_.ny - 1);
                    f.vf[fy_index(b_, m, b_.ny)] -= Dv[c] * (0.0 - pp[c]) / (0.5 * b_.dy);
                    break;
                }
            }
        };
        for (int j = 0; j < b_.ny; ++j) {
            outlet(Side::West, j);
            outlet(Side::East, j);
        }
        for (int i = 0; i < b_.nx; ++i) {
            outlet(Side::South, i);
            outlet(Side::North, i);
        }
    }

    const GridBlock& b_;
    FluidProps props_;
    FluidBcTable bc_;
    double dt_;
    double relax_u_, relax_p_;
    const Field* buoy_T_ = nullptr;
};

/// Complete momentum systems for one semi-implicit step (matrix + right-hand
/// side with pressure gradient and optional buoyancy), exposed for direct
/// inspection and the single-step oracles.
struct MomentumSystems {
    MomentumOperator op;
    Field rhs_u, rhs_v;

    MomentumSystems(const Grid& grid, const FluidState& s, const FluidProps& props,
                    const FluidBcTable& bc, double dt, const Field& pressure,
                    const Field* buoyancy_T = nullptr)
        : op(grid.fluid, bc, props, dt) {
        const GridBlock& b = grid.fluid;
        if (props.buoyant() && !buoyancy_T)
            throw std::invalid_argument("assemble_momentum: buoyancy requires a temperature field");
        const int n = b.cells();
        Field conv_u, conv_v, gx, gy;
        convection_rhs(b, bc, props, s.faces, s.u, s.v, conv_u, conv_v);
        pressure_gradient(b, pressure, gx, gy);
        rhs_u.resize(n);
        rhs_v.resize(n);
        for (int c = 0; c < n; ++c) {
            rhs_u[c] = props.rho * s.u[c] / dt - conv_u[c] + op.rhs_bc_u[c] - gx[c];
            rhs_v[c] = props.rho * s.v[c] / dt - conv_v[c] + op.rhs_bc_v[c] - gy[c];
        }
        if (props.buoyant())
            for (int c = 0; c < n; ++c) {
                const double dT = (*buoyancy_T)[c] - props.T_ref;
                rhs_u[c] -= props.rho * props.beta * props.g0x * dT;
                rhs_v[c] -= props.rho * props.beta * props.g0y * dT;
            }
        op.Au.set_rhs(rhs_u);
        op.Av.set_rhs(rhs_v);
    }
};

}  // namespace cht
