#pragma once

/// Case driver: builds the grid and solvers from a CaseSpec, marches the
/// requested problem (flow only, steady thermal, decoupled flow + heat, or
/// the fully coupled transient), and produces probe histories, profiles,
/// snapshots and the run manifest.

#include <algorithm>
#include <chrono>
#include <json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chtfvm/cases.hpp"
#include "chtfvm/cht.hpp"
#include "chtfvm/fluid.hpp"
#include "chtfvm/output.hpp"
#include "chtfvm/thermal.hpp"

namespace cht {

inline constexpr const char* project_version = "0.1.0";

/// Clamped bilinear interpolation of a cell-centered field.
inline double sample_field(const GridBlock& b, const Field& f, double x, double y) {
    auto locate = [](double t, double t0, double dt, int n, int& i0, double& w) {
        double r = (t - t0) / dt - 0.5;
        if (r <= 0) { i0 = 0; w = 0; return; }
        if (r >= n - 1) { i0 = n - 2 >= 0 ? n - 2 : 0; w = n > 1 ? 1 : 0; return; }
        i0 = static_cast<int>(r);
        w = r - i0;
    };
    int i0, j0;
    double wx, wy;
    locate(x, b.x0, b.dx, b.nx, i0, wx);
    locate(y, b.y0, b.dy, b.ny, j0, wy);
    const int i1 = std::min(i0 + 1, b.nx - 1), j1 = std::min(j0 + 1, b.ny - 1);
    return (1 - wx) * (1 - wy) * f[b.cell(i0, j0)] + wx * (1 - wy) * f[b.cell(i1, j0)] +
           (1 - wx) * wy * f[b.cell(i0, j1)] + wx * wy * f[b.cell(i1, j1)];
}

struct StepRecord {
    double t = 0;
    int outer_iterations = 0;   ///< coupling outer loop (coupled runs)
    int fluid_iterations = 0;   ///< fluid subiterations / SIMPLE outer iterations
    int sqp_iterations = 0;     ///< inner SQP count (coupled runs)
    double steady_err = 0;
    double max_mass_defect = 0;
};

struct RunResult {
    Grid grid;
    FluidState fluid;
    ThermalState thermal;
    bool has_fluid = false, has_thermal = false;
    bool flow_steady = false;
    bool coupling_converged = true;
    int coupling_iterations = 0;  ///< steady coupled-solve iterations (OB/DtN)
    std::vector<StepRecord> steps;
    std::vector<double> probe_times;
    std::vector<Field> probe_series;  ///< one per probe
    std::vector<std::pair<double, ThermalState>> thermal_snapshots;
    std::vector<std::pair<double, FluidState>> fluid_snapshots;
    double wall_seconds = 0;
};

namespace detail_run {

inline double resolve_dt(const CaseSpec& c, const GridBlock& b) {
    if (c.dt > 0) return c.dt;
    if (c.cfl > 0) return cfl_timestep(c.u_char, c.v_char, b.dx, b.dy, c.cfl);
    throw std::invalid_argument("case '" + c.name + "': neither dt nor cfl given");
}

}  // namespace detail_run

/// Execute a case end to end. Throws on solver failure; DtN non-convergence is
/// reported through RunResult::coupling_converged instead (it is an expected
/// outcome for strongly nonlinear conduction).
inline RunResult run_case(const CaseSpec& spec) {
    const auto t_start = std::chrono::steady_clock::now();
    RunResult res;
    res.grid = build_grid(spec.geometry);
    const Grid& grid = res.grid;
    const GridBlock& fb = grid.fluid;

    ThermalBcTable bc_hf, bc_hs;
    double T_fill = spec.T_init;
    if (spec.solve_heat) {
        bc_hf = resolve_case_thermal_bc(grid, true, spec.bc_heat_fluid);
        if (grid.has_solid) bc_hs = resolve_case_thermal_bc(grid, false, spec.bc_heat_solid);
        if (spec.T_init_mean_dirichlet) {
            // area-weighted mean over the Dirichlet faces of both blocks
            double s = 0, a = 0;
            auto acc = [&](const ThermalBcTable& t, const GridBlock& b) {
                for (Side sd : all_sides)
                    for (const auto& e : t.side[static_cast<int>(sd)])
                        if (e.kind == ThermalBcKind::FixedTemperature) {
                            s += e.T * b.edge_area(sd);
                            a += b.edge_area(sd);
                        }
            };
            acc(bc_hf, fb);
            if (grid.has_solid) acc(bc_hs, grid.solid);
            T_fill = a > 0 ? s / a : spec.T_init;
        }
        res.thermal.T_f.assign(fb.cells(), T_fill);
        if (grid.has_solid) res.thermal.T_s.assign(grid.solid.cells(), T_fill);
        res.thermal.g.assign(grid.interface_faces.size(), 0.0);
        res.has_thermal = true;
    }

    HeatProblem hp_f, hp_s;
    if (spec.solve_heat) {
        hp_f.grid = &grid;
        hp_f.fluid_block = true;
        hp_f.props = spec.th_fluid;
        hp_f.bc = bc_hf;
        hp_f.steady = spec.thermal_steady;
        hp_s.grid = &grid;
        hp_s.fluid_block = false;
        hp_s.props = spec.th_solid;
        hp_s.bc = bc_hs;
        hp_s.steady = spec.thermal_steady;
    }

    auto record_probes = [&](double t) {
        if (spec.probes.empty()) return;
        res.probe_times.push_back(t);
        if (res.probe_series.size() != spec.probes.size()) res.probe_series.resize(spec.probes.size());
        for (std::size_t i = 0; i < spec.probes.size(); ++i) {
            const auto& pr = spec.probes[i];
            double val = 0;
            if (pr.field == "u") val = sample_field(fb, res.fluid.u, pr.x, pr.y);
            else if (pr.field == "v") val = sample_field(fb, res.fluid.v, pr.x, pr.y);
            else if (pr.field == "p") val = sample_field(fb, res.fluid.p, pr.x, pr.y);
            else if (pr.field == "T") val = sample_field(fb, res.thermal.T_f, pr.x, pr.y);
            else throw std::invalid_argument("unknown probe field '" + pr.field + "'");
            res.probe_series[i].push_back(val);
        }
    };

    // ----- steady thermal solve helper (OB / reduced OB / DtN) -----
    auto thermal_solve = [&](const FaceVelocities* faces) {
        hp_f.faces = faces;
        if (spec.coupling == CaseSpec::Coupling::DtN) {
            DtnOptions opt{spec.dtn_relaxation, spec.coupling_tol, spec.coupling_max_iters};
            // cold interface-temperature start; the change metric guards g = 0
            Field tg(grid.interface_faces.size(), 0.0);
            DtnResult r = dtn_solve(hp_f, hp_s, res.thermal.T_f, res.thermal.T_s, tg, opt);
            res.coupling_converged = r.converged;
            res.coupling_iterations = r.iterations;
            if (r.converged) {
                res.thermal.T_f = r.T_f;
                res.thermal.T_s = r.T_s;
                res.thermal.g = r.g;
            }
        } else {
            SqpOptions opt;
            opt.delta = spec.delta;
            opt.tol = spec.coupling_tol;
            opt.max_iters = spec.coupling_max_iters;
            opt.nr = (spec.coupling == CaseSpec::Coupling::ReducedOB) ? spec.nr : 0;
            SqpResult r = sqp_solve(hp_f, hp_s, res.thermal.T_f, res.thermal.T_s, res.thermal.g, opt);
            res.coupling_converged = r.converged;
            res.coupling_iterations = r.iterations;
            res.thermal.T_f = r.T_f;
            res.thermal.T_s = r.T_s;
            res.thermal.g = r.g;
        }
    };

    // ----- flow-only and decoupled runs -----
    if (spec.solve_flow) {
        res.has_fluid = true;
        res.fluid = FluidState::rest(fb);
        FluidBcTable bc_flow = resolve_fluid_bc(grid, spec.bc_flow);
        const double dt = detail_run::resolve_dt(spec, fb);

        const bool coupled = spec.solve_heat && spec.fluid_props.buoyant();
        if (!coupled) {
            std::optional<SemiImplicitSolver> semi;
            std::optional<SimpleSolver> simple;
            if (spec.method == CaseSpec::FlowMethod::SemiImplicit)
                semi.emplace(grid, spec.fluid_props, bc_flow, dt);
            else
                simple.emplace(grid, spec.fluid_props, bc_flow, dt, spec.relax_u, spec.relax_p);

            record_probes(0.0);
            for (int step = 1; step <= spec.max_steps; ++step) {
                const Field u_prev = res.fluid.u, v_prev = res.fluid.v;
                FluidStepStats st = semi ? semi->step(res.fluid, spec.fluid_K, spec.fluid_tol)
                                         : simple->step(res.fluid, spec.simple_max_iters, spec.simple_tol);
                StepRecord rec;
                rec.t = res.fluid.t;
                rec.fluid_iterations = st.subiterations;
                rec.max_mass_defect = st.max_mass_defect;
                rec.steady_err = detail::relative_change(res.fluid.u, res.fluid.v, u_prev, v_prev);
                res.steps.push_back(rec);
                record_probes(res.fluid.t);
                for (double ts : spec.snapshot_times)
                    if (std::abs(res.fluid.t - ts) < 0.5 * dt &&
                        (res.fluid_snapshots.empty() || res.fluid_snapshots.back().first != res.fluid.t))
                        res.fluid_snapshots.emplace_back(res.fluid.t, res.fluid);
                if (spec.until_steady && rec.steady_err < spec.steady_tol) {
                    res.flow_steady = true;
                    break;
                }
                if (spec.t_end > 0 && res.fluid.t >= spec.t_end - 1e-12) break;
            }
            if (spec.until_steady && !res.flow_steady)
                throw std::runtime_error("case '" + spec.name + "': flow did not reach steady state in " +
                                         std::to_string(spec.max_steps) + " steps");

            if (spec.solve_heat) thermal_solve(&res.fluid.faces);  // decoupled path
            res.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
            return res;
        }

        // ----- fully coupled transient (Boussinesq) -----
        SemiImplicitSolver semi(grid, spec.fluid_props, bc_flow, dt);
        ChtStepper stepper;
        stepper.grid = &grid;
        stepper.fluid = &semi;
        stepper.heat_fluid = hp_f;
        stepper.heat_solid = hp_s;
        stepper.heat_fluid.steady = false;
        stepper.heat_solid.steady = false;
        stepper.sqp.delta = spec.delta;
        stepper.sqp.tol = spec.coupling_tol;
        stepper.sqp.max_iters = spec.coupling_max_iters;
        stepper.sqp.nr = (spec.coupling == CaseSpec::Coupling::ReducedOB) ? spec.nr : 0;
        stepper.outer_tol = spec.outer_tol;
        stepper.K_outer = spec.K_outer;
        stepper.fluid_K = spec.fluid_K;
        stepper.fluid_tol = spec.fluid_tol;
        stepper.warm_start_g = spec.warm_start_g;

        record_probes(0.0);
        bool first_step = true;
        for (int step = 1; step <= spec.max_steps; ++step) {
            const Field u_prev = res.fluid.u, v_prev = res.fluid.v;
            // zero start for g on the very first step, then warm starts
            stepper.warm_start_g = first_step ? false : spec.warm_start_g;
            first_step = false;
            ChtStepDiagnostics d = stepper.step(res.fluid, res.thermal, dt);
            StepRecord rec;
            rec.t = res.fluid.t;
            rec.outer_iterations = d.outer_iterations;
            rec.fluid_iterations = d.fluid_subiterations.empty() ? 0 : d.fluid_subiterations.back();
            rec.sqp_iterations =
                d.sqp_iterations.empty() ? 0 : *std::max_element(d.sqp_iterations.begin(), d.sqp_iterations.end());
            rec.steady_err = detail::relative_change(res.fluid.u, res.fluid.v, u_prev, v_prev);
            res.steps.push_back(rec);
            record_probes(res.fluid.t);
            for (double ts : spec.snapshot_times)
                if (std::abs(res.fluid.t - ts) < 0.5 * dt &&
                    (res.thermal_snapshots.empty() || res.thermal_snapshots.back().first != res.fluid.t)) {
                    res.thermal_snapshots.emplace_back(res.fluid.t, res.thermal);
                    res.fluid_snapshots.emplace_back(res.fluid.t, res.fluid);
                }
            if (spec.until_steady && rec.steady_err < spec.steady_tol) {
                res.flow_steady = true;
                break;
            }
            if (spec.t_end > 0 && res.fluid.t >= spec.t_end - 1e-12) break;
        }
        res.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        return res;
    }

    // ----- pure thermal runs (diffusion benchmarks) -----
    if (!spec.solve_heat) throw std::invalid_argument("case '" + spec.name + "' solves nothing");
    if (!spec.thermal_steady)
        throw std::invalid_argument("transient thermal-only runs are not used by any case");
    thermal_solve(nullptr);
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return res;
}

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

/// Named profile extraction; returns columns + data ready for CSV.
inline std::pair<std::vector<std::string>, std::vector<Field>> extract_profile(
    const CaseSpec& spec, const RunResult& res, const std::string& kind) {
    const GridBlock& fb = res.grid.fluid;

    if (kind == "centerline-u" || kind == "centerline-v") {
        const bool is_u = kind == "centerline-u";
        Field coord, val;
        const double mid = is_u ? fb.x0 + 0.5 * (fb.x1() - fb.x0) : fb.y0 + 0.5 * (fb.y1() - fb.y0);
        const int n = is_u ? fb.ny : fb.nx;
        // wall row, cell centers, lid row
        coord.push_back(is_u ? fb.y0 : fb.x0);
        val.push_back(0.0);
        for (int m = 0; m < n; ++m) {
            if (is_u) {
                coord.push_back(fb.yc(m));
                val.push_back(sample_field(fb, res.fluid.u, mid, fb.yc(m)));
            } else {
                coord.push_back(fb.xc(m));
                val.push_back(sample_field(fb, res.fluid.v, fb.xc(m), mid));
            }
        }
        coord.push_back(is_u ? fb.y1() : fb.x1());
        // boundary value from the spec (lid velocity for the cavity)
        const VelocityBc top = is_u ? spec.bc_flow[Side::North].at(mid) : spec.bc_flow[Side::East].at(mid);
        val.push_back(is_u ? (top.kind == VelocityBcKind::MovingWall ? top.u : 0.0)
                           : (top.kind == VelocityBcKind::MovingWall ? top.v : 0.0));
        return {{is_u ? "y" : "x", is_u ? "u" : "v"}, {coord, val}};
    }

    if (kind == "interface-trel") {
        // fluid-side reconstructed interface temperature, normalized by the
        // inlet and base Dirichlet values
        Field tg = interface_temperatures(res.grid, spec.th_fluid, res.thermal.T_f, res.thermal.g, true);
        double t_in = 300, t_0 = 310;
        for (const auto& s : spec.bc_heat_fluid.edges)
            for (const auto& seg : s.segments)
                if (seg.bc.kind == ThermalBcKind::FixedTemperature) t_in = seg.bc.T;
        for (const auto& s : spec.bc_heat_solid.edges)
            for (const auto& seg : s.segments)
                if (seg.bc.kind == ThermalBcKind::FixedTemperature) t_0 = seg.bc.T;
        Field x, trel;
        for (const auto& f : res.grid.interface_faces) {
            const int i = f.fluid_cell % fb.nx;
            x.push_back(fb.xc(i));
            trel.push_back((tg[f.id] - t_in) / (t_0 - t_in));
        }
        return {{"x", "T_rel"}, {x, trel}};
    }

    if (kind == "theta-y05") {
        double t_c = 1, t_h = 2;
        for (const auto& s : spec.bc_heat_fluid.edges)
            for (const auto& seg : s.segments)
                if (seg.bc.kind == ThermalBcKind::FixedTemperature) t_c = seg.bc.T;
        for (const auto& s : spec.bc_heat_solid.edges)
            for (const auto& seg : s.segments)
                if (seg.bc.kind == ThermalBcKind::FixedTemperature) t_h = seg.bc.T;
        Field x, theta;
        const double ymid = fb.y0 + 0.5 * (fb.y1() - fb.y0);
        for (int i = 0; i < fb.nx; ++i) {
            x.push_back(fb.xc(i));
            theta.push_back((sample_field(fb, res.thermal.T_f, fb.xc(i), ymid) - t_c) / (t_h - t_c));
        }
        if (res.grid.has_solid) {
            const GridBlock& sb = res.grid.solid;
            for (int i = 0; i < sb.nx; ++i) {
                x.push_back(sb.xc(i));
                theta.push_back((sample_field(sb, res.thermal.T_s, sb.xc(i), ymid) - t_c) / (t_h - t_c));
            }
        }
        return {{"x", "theta"}, {x, theta}};
    }

    throw std::invalid_argument("unknown profile kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Output writing
// ---------------------------------------------------------------------------

inline nlohmann::json write_run_outputs(const CaseSpec& spec, const RunResult& res,
                                        const fs::path& dir) {
    RunWriter w(dir);
    const GridBlock& fb = res.grid.fluid;

    auto snapshot_name = [](const char* blockname, double t) {
        std::string s = "fields_" + std::string(blockname);
        if (t >= 0) s += "_t" + format_double(t);
        return s + ".vtk";
    };
    auto add_fluid_vtk = [&](const FluidState& fs_, const ThermalState* ts_, double t) {
        VtkSnapshot snap;
        snap.block = &fb;
        snap.scalars.emplace_back("p", &fs_.p);
        if (ts_ && !ts_->T_f.empty()) snap.scalars.emplace_back("T", &ts_->T_f);
        snap.vec_u = &fs_.u;
        snap.vec_v = &fs_.v;
        w.add_file(snapshot_name("fluid", t), vtk_to_string(spec.name, snap));
    };
    auto add_solid_vtk = [&](const ThermalState& ts_, double t) {
        VtkSnapshot snap;
        snap.block = &res.grid.solid;
        snap.scalars.emplace_back("T", &ts_.T_s);
        w.add_file(snapshot_name("solid", t), vtk_to_string(spec.name, snap));
    };

    if (res.has_fluid) add_fluid_vtk(res.fluid, res.has_thermal ? &res.thermal : nullptr, -1);
    else if (res.has_thermal) {
        VtkSnapshot snap;
        snap.block = &fb;
        snap.scalars.emplace_back("T", &res.thermal.T_f);
        w.add_file("fields_fluid.vtk", vtk_to_string(spec.name, snap));
    }
    if (res.has_thermal && res.grid.has_solid) add_solid_vtk(res.thermal, -1);
    for (const auto& [t, fs_] : res.fluid_snapshots) add_fluid_vtk(fs_, nullptr, t);
    for (const auto& [t, ts_] : res.thermal_snapshots) add_solid_vtk(ts_, t);

    for (const auto& kind : spec.profiles) {
        auto [cols, data] = extract_profile(spec, res, kind);
        w.add_file("profile_" + kind + ".csv", csv_to_string(cols, data, "case=" + spec.name));
    }

    if (!spec.probes.empty() && !res.probe_times.empty()) {
        std::vector<std::string> cols = {"t"};
        std::vector<Field> data = {res.probe_times};
        for (std::size_t i = 0; i < spec.probes.size(); ++i) {
            cols.push_back(spec.probes[i].field + "@" + format_double(spec.probes[i].x) + "," +
                           format_double(spec.probes[i].y));
            data.push_back(res.probe_series[i]);
        }
        w.add_file("probes.csv", csv_to_string(cols, data, "case=" + spec.name));
    }

    // iteration tables
    {
        std::vector<std::string> cols = {"t", "outer_iterations", "fluid_iterations",
                                         "sqp_iterations", "steady_err", "max_mass_defect"};
        std::vector<Field> data(6);
        for (const auto& r : res.steps) {
            data[0].push_back(r.t);
            data[1].push_back(r.outer_iterations);
            data[2].push_back(r.fluid_iterations);
            data[3].push_back(r.sqp_iterations);
            data[4].push_back(r.steady_err);
            data[5].push_back(r.max_mass_defect);
        }
        if (!res.steps.empty()) w.add_file("iterations.csv", csv_to_string(cols, data, "case=" + spec.name));
    }

    nlohmann::json manifest;
    manifest["case"] = spec.name;
    manifest["spec"] = spec;
    manifest["spec_fnv1a64"] = fnv1a(case_to_string(spec));
    manifest["version"] = project_version;
    manifest["provenance_warnings"] = spec.provenance_warnings;
    auto& timers = SolverTimers::instance();
    manifest["timings"] = {{"wall_s", res.wall_seconds},
                           {"assembly_s", timers.assembly_us.load() / 1e6},
                           {"factorization_s", timers.factorize_us.load() / 1e6},
                           {"solves_s", timers.solve_us.load() / 1e6}};
    manifest["flow_steady"] = res.flow_steady;
    manifest["coupling_converged"] = res.coupling_converged;
    manifest["coupling_iterations"] = res.coupling_iterations;
    manifest["steps"] = res.steps.size();
    return w.write(std::move(manifest));
}

}  // namespace cht
