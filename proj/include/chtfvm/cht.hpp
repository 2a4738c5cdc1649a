#pragma once

/// Outer coupling loop for buoyant conjugate heat transfer: within one time
/// step, alternate (a) a fluid solve with buoyancy evaluated at the current
/// temperature iterate and (b) a thermal SQP solve with the resulting face
/// velocities in the convective term, until the interface control settles.

#include <stdexcept>
#include <vector>

#include "chtfvm/fluid.hpp"
#include "chtfvm/thermal.hpp"

namespace cht {

struct ChtStepDiagnostics {
    int outer_iterations = 0;
    std::vector<int> sqp_iterations;    ///< per outer iteration
    std::vector<int> fluid_subiterations;
    double last_g_change = 0;
};

struct ChtStepper {
    const Grid* grid = nullptr;
    SemiImplicitSolver* fluid = nullptr;
    HeatProblem heat_fluid, heat_solid;  ///< templates; T_old/faces set per step
    SqpOptions sqp;
    double outer_tol = 1e-6;
    int K_outer = 50;
    int fluid_K = 50;
    double fluid_tol = 1e-6;
    bool warm_start_g = true;

    /// Advance the coupled state from t^n to t^{n+1}.
    ChtStepDiagnostics step(FluidState& fs, ThermalState& ts, double dt) {
        if (dt <= 0) throw std::invalid_argument("cht_step: dt must be positive");
        const int nfaces = static_cast<int>(grid->interface_faces.size());
        ChtStepDiagnostics diag;

        const FluidState fluid_base = fs;
        const Field Tf_base = ts.T_f, Ts_base = ts.T_s;
        heat_fluid.steady = false;
        heat_fluid.dt = dt;
        heat_fluid.T_old = &Tf_base;
        heat_solid.steady = false;
        heat_solid.dt = dt;
        heat_solid.T_old = &Ts_base;

        Field g_iter = warm_start_g ? ts.g : Field(nfaces, 0.0);
        Field T_f_cur = ts.T_f, T_s_cur = ts.T_s;
        Field p_warm = fs.p;
        FluidState fluid_work;
        bool converged = false;

        for (int k = 0; k <= K_outer && !converged; ++k) {
            // fluid solve with buoyancy at the current temperature iterate
            fluid_work = fluid_base;
            fluid_work.p = p_warm;
            fluid->set_buoyancy_field(&T_f_cur);
            FluidStepStats fstats = fluid->step(fluid_work, fluid_K, fluid_tol);
            p_warm = fluid_work.p;

            // thermal SQP solve using the new velocity field for convection
            heat_fluid.faces = &fluid_work.faces;
            SqpResult th = sqp_solve(heat_fluid, heat_solid, T_f_cur, T_s_cur, g_iter, sqp);

            double dg = 0, gn = 0;
            for (int q = 0; q < nfaces; ++q) {
                dg += (th.g[q] - g_iter[q]) * (th.g[q] - g_iter[q]);
                gn += g_iter[q] * g_iter[q];
            }
            dg = std::sqrt(dg);
            gn = std::sqrt(gn);
            // relative criterion is undefined at g = 0: fall back to absolute
            diag.last_g_change = (gn > 1e-14) ? dg / gn : dg;

            T_f_cur = th.T_f;
            T_s_cur = th.T_s;
            g_iter = th.g;
            diag.outer_iterations = k + 1;
            diag.sqp_iterations.push_back(th.iterations);
            diag.fluid_subiterations.push_back(fstats.subiterations);
            converged = diag.last_g_change < outer_tol;
        }
        if (!converged)
            throw std::runtime_error("cht_step: outer loop exceeded " + std::to_string(K_outer) +
                                     " iterations (last control change " +
                                     format_double(diag.last_g_change) + ")");

        fs = fluid_work;
        ts.T_f = std::move(T_f_cur);
        ts.T_s = std::move(T_s_cur);
        ts.g = std::move(g_iter);
        return diag;
    }
};

}  // namespace cht
