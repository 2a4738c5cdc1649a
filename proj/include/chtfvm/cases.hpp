#pragma once

/// Declarative benchmark definitions, manufactured solutions and bundled
/// reference data, plus the external case-file format (JSON key-value tree
/// with a versioned schema; see docs/case_format.md).

#include <algorithm>
#include <json.hpp>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chtfvm/bc.hpp"
#include "chtfvm/fluid.hpp"
#include "chtfvm/grid.hpp"
#include "chtfvm/manufactured.hpp"
#include "chtfvm/thermal.hpp"

namespace cht {

using json = nlohmann::json;

struct CaseSpec {
    int schema_version = 1;
    std::string name;
    CaseGeometry geometry;

    bool solve_flow = false;
    bool solve_heat = false;

    FluidProps fluid_props;
    ThermalBlockProps th_fluid, th_solid;

    EdgeSet<VelocityBc> bc_flow;
    EdgeSet<ThermalBc> bc_heat_fluid, bc_heat_solid;

    enum class FlowMethod { SemiImplicit, Simple };
    FlowMethod method = FlowMethod::SemiImplicit;
    int fluid_K = 0;          ///< semi-implicit subiteration cap
    double fluid_tol = 1e-6;
    double relax_u = 0.7, relax_p = 0.3;  ///< SIMPLE under-relaxation
    int simple_max_iters = 400;
    double simple_tol = 1e-5;

    double cfl = 0;  ///< when > 0 the time step is cfl/(u_char/dx + v_char/dy)
    double u_char = 0, v_char = 0;
    double dt = 0;   ///< explicit time step when > 0
    double t_end = 0;
    bool until_steady = false;
    double steady_tol = 1e-5;
    int max_steps = 1000000;

    enum class Coupling { OB, ReducedOB, DtN };
    Coupling coupling = Coupling::OB;
    int nr = 5;
    double dtn_relaxation = 0.2;
    double coupling_tol = 1e-6;
    int coupling_max_iters = 400;
    double delta = 0;
    bool thermal_steady = false;
    double outer_tol = 1e-6;
    int K_outer = 50;
    bool warm_start_g = true;
    double T_init = 0;
    bool T_init_mean_dirichlet = false;  ///< seed steady solves at the mean Dirichlet value

    struct Probe {
        double x = 0, y = 0;
        std::string field;  ///< "u", "v", "p", "T"
        bool operator==(const Probe&) const = default;
    };
    std::vector<Probe> probes;
    std::vector<double> snapshot_times;
    std::vector<std::string> profiles;  ///< "centerline-u", "centerline-v", "interface-trel", "theta-y05"

    std::vector<std::string> provenance_warnings;
};

// ---------------------------------------------------------------------------
// JSON mapping
// ---------------------------------------------------------------------------

inline void to_json(json& j, const BlockExtent& e) {
    j = json{{"x0", e.x0}, {"y0", e.y0}, {"x1", e.x1}, {"y1", e.y1}, {"nx", e.nx}, {"ny", e.ny}};
}
inline void from_json(const json& j, BlockExtent& e) {
    j.at("x0").get_to(e.x0);
    j.at("y0").get_to(e.y0);
    j.at("x1").get_to(e.x1);
    j.at("y1").get_to(e.y1);
    j.at("nx").get_to(e.nx);
    j.at("ny").get_to(e.ny);
}

inline void to_json(json& j, const FluidProps& p) {
    j = json{{"rho", p.rho}, {"mu", p.mu},       {"beta", p.beta},
             {"g0x", p.g0x}, {"g0y", p.g0y},     {"T_ref", p.T_ref}};
}
inline void from_json(const json& j, FluidProps& p) {
    j.at("rho").get_to(p.rho);
    j.at("mu").get_to(p.mu);
    j.at("beta").get_to(p.beta);
    j.at("g0x").get_to(p.g0x);
    j.at("g0y").get_to(p.g0y);
    j.at("T_ref").get_to(p.T_ref);
}

inline void to_json(json& j, const SourceSpec& q) {
    switch (q.kind) {
        case SourceSpec::Kind::Zero: j = json{{"kind", "zero"}}; break;
        case SourceSpec::Kind::Constant: j = json{{"kind", "constant"}, {"value", q.value}}; break;
        case SourceSpec::Kind::Manufactured:
            j = json{{"kind", "manufactured"}, {"case", q.mcase}};
            break;
    }
}
inline void from_json(const json& j, SourceSpec& q) {
    const std::string k = j.at("kind").get<std::string>();
    if (k == "zero") {
        q = SourceSpec{};
    } else if (k == "constant") {
        q.kind = SourceSpec::Kind::Constant;
        q.value = j.at("value").get<double>();
    } else if (k == "manufactured") {
        q.kind = SourceSpec::Kind::Manufactured;
        q.mcase = j.at("case").get<int>();
    } else {
        throw std::invalid_argument("case file: unknown source kind '" + k + "'");
    }
}

inline void to_json(json& j, const ThermalBlockProps& p) {
    j = json{{"rho", p.rho}, {"cp", p.cp}, {"k_poly", p.k.c}, {"Q", p.Q}};
}
inline void from_json(const json& j, ThermalBlockProps& p) {
    j.at("rho").get_to(p.rho);
    j.at("cp").get_to(p.cp);
    j.at("k_poly").get_to(p.k.c);
    j.at("Q").get_to(p.Q);
}

inline void to_json(json& j, const VelocityBc& b) {
    static const char* names[] = {"no-slip", "slip", "lid", "inlet", "outlet"};
    j = json{{"type", names[static_cast<int>(b.kind)]}};
    if (b.kind == VelocityBcKind::MovingWall || b.kind == VelocityBcKind::Inlet) {
        j["u"] = b.u;
        j["v"] = b.v;
    }
}
inline void from_json(const json& j, VelocityBc& b) {
    const std::string t = j.at("type").get<std::string>();
    if (t == "no-slip") b.kind = VelocityBcKind::NoSlip;
    else if (t == "slip") b.kind = VelocityBcKind::Slip;
    else if (t == "lid") b.kind = VelocityBcKind::MovingWall;
    else if (t == "inlet") b.kind = VelocityBcKind::Inlet;
    else if (t == "outlet") b.kind = VelocityBcKind::Outlet;
    else throw std::invalid_argument("case file: unknown velocity bc '" + t + "'");
    b.u = j.value("u", 0.0);
    b.v = j.value("v", 0.0);
}

inline void to_json(json& j, const ThermalBc& b) {
    if (b.kind == ThermalBcKind::Adiabatic) {
        j = json{{"type", "adiabatic"}};
    } else if (b.manufactured) {
        j = json{{"type", "dirichlet"}, {"value", "manufactured"}};
    } else {
        j = json{{"type", "dirichlet"}, {"value", b.T}};
    }
}
inline void from_json(const json& j, ThermalBc& b) {
    const std::string t = j.at("type").get<std::string>();
    if (t == "adiabatic") {
        b = ThermalBc{};
    } else if (t == "dirichlet") {
        b.kind = ThermalBcKind::FixedTemperature;
        if (j.at("value").is_string()) {
            if (j.at("value").get<std::string>() != "manufactured")
                throw std::invalid_argument("case file: unknown dirichlet value keyword");
            b.manufactured = true;
            b.T = 0;
        } else {
            b.T = j.at("value").get<double>();
            b.manufactured = false;
        }
    } else {
        throw std::invalid_argument("case file: unknown thermal bc '" + t + "'");
    }
}

template <class Bc>
inline void to_json(json& j, const EdgeSegments<Bc>& e) {
    j = json::array();
    for (const auto& s : e.segments) {
        json js;
        js["lo"] = s.lo;
        js["hi"] = s.hi;
        js["bc"] = s.bc;
        j.push_back(js);
    }
}
template <class Bc>
inline void from_json(const json& j, EdgeSegments<Bc>& e) {
    e.segments.clear();
    for (const auto& js : j) {
        typename EdgeSegments<Bc>::Segment s;
        js.at("lo").get_to(s.lo);
        js.at("hi").get_to(s.hi);
        js.at("bc").get_to(s.bc);
        e.segments.push_back(s);
    }
}

template <class Bc>
inline void to_json(json& j, const EdgeSet<Bc>& e) {
    j = json{{"west", e[Side::West]}, {"east", e[Side::East]},
             {"south", e[Side::South]}, {"north", e[Side::North]}};
}
template <class Bc>
inline void from_json(const json& j, EdgeSet<Bc>& e) {
    j.at("west").get_to(e[Side::West]);
    j.at("east").get_to(e[Side::East]);
    j.at("south").get_to(e[Side::South]);
    j.at("north").get_to(e[Side::North]);
}

inline void to_json(json& j, const CaseSpec::Probe& p) {
    j = json{{"x", p.x}, {"y", p.y}, {"field", p.field}};
}
inline void from_json(const json& j, CaseSpec::Probe& p) {
    j.at("x").get_to(p.x);
    j.at("y").get_to(p.y);
    j.at("field").get_to(p.field);
}

inline void to_json(json& j, const CaseSpec& c) {
    j = json::object();
    j["schema_version"] = c.schema_version;
    j["name"] = c.name;
    j["geometry"]["fluid"] = c.geometry.fluid;
    if (c.geometry.solid) j["geometry"]["solid"] = *c.geometry.solid;
    j["solve_flow"] = c.solve_flow;
    j["solve_heat"] = c.solve_heat;
    j["fluid_props"] = c.fluid_props;
    j["thermal"]["fluid"] = c.th_fluid;
    j["thermal"]["solid"] = c.th_solid;
    j["bc"]["flow"] = c.bc_flow;
    j["bc"]["heat_fluid"] = c.bc_heat_fluid;
    j["bc"]["heat_solid"] = c.bc_heat_solid;
    auto& s = j["solver"];
    s["method"] = (c.method == CaseSpec::FlowMethod::SemiImplicit) ? "semi-implicit" : "simple";
    s["fluid_K"] = c.fluid_K;
    s["fluid_tol"] = c.fluid_tol;
    s["relax_u"] = c.relax_u;
    s["relax_p"] = c.relax_p;
    s["simple_max_iters"] = c.simple_max_iters;
    s["simple_tol"] = c.simple_tol;
    s["cfl"] = c.cfl;
    s["u_char"] = c.u_char;
    s["v_char"] = c.v_char;
    s["dt"] = c.dt;
    s["t_end"] = c.t_end;
    s["until_steady"] = c.until_steady;
    s["steady_tol"] = c.steady_tol;
    s["max_steps"] = c.max_steps;
    static const char* coupling_names[] = {"ob", "reduced-ob", "dtn"};
    s["coupling"] = coupling_names[static_cast<int>(c.coupling)];
    s["nr"] = c.nr;
    s["dtn_relaxation"] = c.dtn_relaxation;
    s["coupling_tol"] = c.coupling_tol;
    s["coupling_max_iters"] = c.coupling_max_iters;
    s["delta"] = c.delta;
    s["thermal_steady"] = c.thermal_steady;
    s["outer_tol"] = c.outer_tol;
    s["K_outer"] = c.K_outer;
    s["warm_start_g"] = c.warm_start_g;
    s["T_init"] = c.T_init;
    s["T_init_mean_dirichlet"] = c.T_init_mean_dirichlet;
    j["output"]["probes"] = c.probes;
    j["output"]["snapshot_times"] = c.snapshot_times;
    j["output"]["profiles"] = c.profiles;
    j["provenance_warnings"] = c.provenance_warnings;
}

inline void from_json(const json& j, CaseSpec& c) {
    c = CaseSpec{};
    c.schema_version = j.at("schema_version").get<int>();
    if (c.schema_version != 1)
        throw std::invalid_argument("case file: unsupported schema_version " +
                                    std::to_string(c.schema_version));
    j.at("name").get_to(c.name);
    j.at("geometry").at("fluid").get_to(c.geometry.fluid);
    if (j.at("geometry").contains("solid"))
        c.geometry.solid = j.at("geometry").at("solid").get<BlockExtent>();
    j.at("solve_flow").get_to(c.solve_flow);
    j.at("solve_heat").get_to(c.solve_heat);
    j.at("fluid_props").get_to(c.fluid_props);
    j.at("thermal").at("fluid").get_to(c.th_fluid);
    j.at("thermal").at("solid").get_to(c.th_solid);
    j.at("bc").at("flow").get_to(c.bc_flow);
    j.at("bc").at("heat_fluid").get_to(c.bc_heat_fluid);
    j.at("bc").at("heat_solid").get_to(c.bc_heat_solid);
    const auto& s = j.at("solver");
    const std::string m = s.at("method").get<std::string>();
    if (m == "semi-implicit") c.method = CaseSpec::FlowMethod::SemiImplicit;
    else if (m == "simple") c.method = CaseSpec::FlowMethod::Simple;
    else throw std::invalid_argument("case file: unknown method '" + m + "'");
    s.at("fluid_K").get_to(c.fluid_K);
    s.at("fluid_tol").get_to(c.fluid_tol);
    s.at("relax_u").get_to(c.relax_u);
    s.at("relax_p").get_to(c.relax_p);
    s.at("simple_max_iters").get_to(c.simple_max_iters);
    s.at("simple_tol").get_to(c.simple_tol);
    s.at("cfl").get_to(c.cfl);
    s.at("u_char").get_to(c.u_char);
    s.at("v_char").get_to(c.v_char);
    s.at("dt").get_to(c.dt);
    s.at("t_end").get_to(c.t_end);
    s.at("until_steady").get_to(c.until_steady);
    s.at("steady_tol").get_to(c.steady_tol);
    s.at("max_steps").get_to(c.max_steps);
    const std::string cp = s.at("coupling").get<std::string>();
    if (cp == "ob") c.coupling = CaseSpec::Coupling::OB;
    else if (cp == "reduced-ob") c.coupling = CaseSpec::Coupling::ReducedOB;
    else if (cp == "dtn") c.coupling = CaseSpec::Coupling::DtN;
    else throw std::invalid_argument("case file: unknown coupling '" + cp + "'");
    s.at("nr").get_to(c.nr);
    s.at("dtn_relaxation").get_to(c.dtn_relaxation);
    s.at("coupling_tol").get_to(c.coupling_tol);
    s.at("coupling_max_iters").get_to(c.coupling_max_iters);
    s.at("delta").get_to(c.delta);
    s.at("thermal_steady").get_to(c.thermal_steady);
    s.at("outer_tol").get_to(c.outer_tol);
    s.at("K_outer").get_to(c.K_outer);
    s.at("warm_start_g").get_to(c.warm_start_g);
    s.at("T_init").get_to(c.T_init);
    s.at("T_init_mean_dirichlet").get_to(c.T_init_mean_dirichlet);
    j.at("output").at("probes").get_to(c.probes);
    j.at("output").at("snapshot_times").get_to(c.snapshot_times);
    j.at("output").at("profiles").get_to(c.profiles);
    j.at("provenance_warnings").get_to(c.provenance_warnings);
}

inline std::string case_to_string(const CaseSpec& c) {
    json j = c;
    return j.dump(2) + "\n";
}

inline CaseSpec case_from_string(const std::string& text) {
    return json::parse(text).get<CaseSpec>();
}

/// Resolve the thermal BC table, evaluating manufactured Dirichlet values at
/// boundary-face centers.
inline ThermalBcTable resolve_case_thermal_bc(const Grid& grid, bool fluid_block,
                                              const EdgeSet<ThermalBc>& spec) {
    ThermalBcTable t = resolve_thermal_bc(grid, fluid_block, spec);
    const GridBlock& b = grid.block(fluid_block);
    for (Side s : all_sides) {
        auto& col = t.side[static_cast<int>(s)];
        for (int m = 0; m < static_cast<int>(col.size()); ++m)
            if (col[m].kind == ThermalBcKind::FixedTemperature && col[m].manufactured) {
                const auto fc = edge_face_center(b, s, m);
                col[m].T = manufactured_exact(fc[0], fc[1]);
            }
    }
    return t;
}

// ---------------------------------------------------------------------------
// Reference data
// ---------------------------------------------------------------------------

struct GhiaProfile {
    std::vector<double> y, u;  ///< u through the vertical centerline
    std::vector<double> x, v;  ///< v through the horizontal centerline
};

/// Centerline benchmark values for the lid-driven cavity, bundled verbatim
/// from the multigrid tables of Ghia, Ghia & Shin (1982). Also shipped as
/// data/ghia1982.csv with provenance header.
inline GhiaProfile ghia_reference(int re) {
    static const std::vector<double> ys = {0.0000, 0.0547, 0.0625, 0.0703, 0.1016, 0.1719,
                                           0.2813, 0.4531, 0.5000, 0.6172, 0.7344, 0.8516,
                                           0.9531, 0.9609, 0.9688, 0.9766, 1.0000};
    static const std::vector<double> xs = {0.0000, 0.0625, 0.0703, 0.0781, 0.0938, 0.1563,
                                           0.2266, 0.2344, 0.5000, 0.8047, 0.8594, 0.9063,
                                           0.9453, 0.9531, 0.9609, 0.9688, 1.0000};
    GhiaProfile p;
    p.y = ys;
    p.x = xs;
    switch (re) {
        case 100:
            p.u = {0.00000, -0.03717, -0.04192, -0.04775, -0.06434, -0.10150, -0.15662, -0.21090,
                   -0.20581, -0.13641, 0.00332, 0.23151, 0.68717, 0.73722, 0.78871, 0.84123, 1.00000};
            p.v = {0.00000, 0.09233, 0.10091, 0.10890, 0.12317, 0.16077, 0.17507, 0.17527, 0.05454,
                   -0.24533, -0.22445, -0.16914, -0.10313, -0.08864, -0.07391, -0.05906, 0.00000};
            return p;
        case 400:
            p.u = {0.00000, -0.08186, -0.09266, -0.10338, -0.14612, -0.24299, -0.32726, -0.17119,
                   -0.11477, 0.02135, 0.16256, 0.29093, 0.55892, 0.61756, 0.68439, 0.75837, 1.00000};
            p.v = {0.00000, 0.18360, 0.19713, 0.20920, 0.22965, 0.28124, 0.30203, 0.30174, 0.05186,
                   -0.38598, -0.44993, -0.33827, -0.22847, -0.19254, -0.15663, -0.12146, 0.00000};
            return p;
        case 1000:
            p.u = {0.00000, -0.18109, -0.20196, -0.22220, -0.29730, -0.38289, -0.27805, -0.10648,
                   -0.06080, 0.05702, 0.18719, 0.33304, 0.46604, 0.51117, 0.57492, 0.65928, 1.00000};
            p.v = {0.00000, 0.27485, 0.29012, 0.30353, 0.32627, 0.37095, 0.33075, 0.32235, 0.02526,
                   -0.31966, -0.42665, -0.51550, -0.39188, -0.33714, -0.27669, -0.21388, 0.00000};
            return p;
    }
    throw std::invalid_argument("ghia_reference: Re must be 100, 400 or 1000");
}

// ---------------------------------------------------------------------------
// Builtin cases
// ---------------------------------------------------------------------------

namespace detail_cases {

inline void warn_override(CaseSpec& c, const std::string& key) {
    c.provenance_warnings.push_back("override of paper-fixed parameter '" + key + "'");
}

}  // namespace detail_cases

/// Fully populated benchmark definitions. Overrides are a flat JSON object;
/// discretization/solver knobs apply silently, physics overrides are recorded
/// as provenance warnings in the resulting spec.
inline CaseSpec builtin_case(const std::string& name, const json& overrides = json::object()) {
    CaseSpec c;
    c.name = name;

    auto ov_num = [&](const char* key, double dflt) {
        return overrides.contains(key) ? overrides.at(key).get<double>() : dflt;
    };
    auto ov_int = [&](const char* key, int dflt) {
        return overrides.contains(key) ? overrides.at(key).get<int>() : dflt;
    };
    auto ov_str = [&](const char* key, std::string dflt) {
        return overrides.contains(key) ? overrides.at(key).get<std::string>() : dflt;
    };

    static const std::vector<std::string> solver_keys = {
        "h", "coupling", "nr", "relaxation", "method", "cfl", "dt", "t_end", "tol", "outer_tol",
        "delta", "until_steady", "K", "steady_tol", "warm_start_g", "max_steps", "picard"};
    static const std::vector<std::string> physics_keys = {"mu_f", "rho_f", "beta", "k_s", "c_ps",
                                                          "rho_s", "u_in", "pr", "k_ratio", "re"};
    for (auto it = overrides.begin(); it != overrides.end(); ++it) {
        const std::string& k = it.key();
        const bool solver = std::find(solver_keys.begin(), solver_keys.end(), k) != solver_keys.end();
        const bool physics = std::find(physics_keys.begin(), physics_keys.end(), k) != physics_keys.end();
        if (!solver && !physics)
            throw std::invalid_argument("builtin_case: unknown override '" + k + "'");
        if (physics) detail_cases::warn_override(c, k);
    }

    auto apply_coupling = [&](CaseSpec& cs) {
        const std::string cp = ov_str("coupling", cs.coupling == CaseSpec::Coupling::OB ? "ob"
                                      : cs.coupling == CaseSpec::Coupling::ReducedOB ? "reduced-ob"
                                                                                     : "dtn");
        if (cp == "ob") cs.coupling = CaseSpec::Coupling::OB;
        else if (cp == "reduced-ob") cs.coupling = CaseSpec::Coupling::ReducedOB;
        else if (cp == "dtn") cs.coupling = CaseSpec::Coupling::DtN;
        else throw std::invalid_argument("builtin_case: unknown coupling '" + cp + "'");
        cs.nr = ov_int("nr", cs.nr);
        cs.dtn_relaxation = ov_num("relaxation", cs.dtn_relaxation);
        cs.coupling_tol = ov_num("tol", cs.coupling_tol);
        cs.delta = ov_num("delta", cs.delta);
    };
    auto apply_method = [&](CaseSpec& cs) {
        const std::string m =
            ov_str("method", cs.method == CaseSpec::FlowMethod::SemiImplicit ? "semi-implicit" : "simple");
        if (m == "semi-implicit") cs.method = CaseSpec::FlowMethod::SemiImplicit;
        else if (m == "simple") cs.method = CaseSpec::FlowMethod::Simple;
        else throw std::invalid_argument("builtin_case: unknown method '" + m + "'");
        cs.cfl = ov_num("cfl", cs.cfl);
        cs.dt = ov_num("dt", cs.dt);
        cs.t_end = ov_num("t_end", cs.t_end);
        cs.steady_tol = ov_num("steady_tol", cs.steady_tol);
        cs.fluid_K = ov_int("K", cs.fluid_K);
        cs.max_steps = ov_int("max_steps", cs.max_steps);
        if (overrides.contains("until_steady"))
            cs.until_steady = overrides.at("until_steady").get<bool>();
        if (overrides.contains("warm_start_g"))
            cs.warm_start_g = overrides.at("warm_start_g").get<bool>();
    };

    if (name == "cavity-re100" || name == "cavity-re400" || name == "cavity-re1000") {
        const int re = (name == "cavity-re100") ? 100 : (name == "cavity-re400") ? 400 : 1000;
        const int N = ov_int("h", re == 100 ? 40 : 120);
        c.geometry.fluid = {0, 0, 1, 1, N, N};
        c.solve_flow = true;
        c.fluid_props.rho = ov_num("rho_f", 1.0);
        c.fluid_props.mu = ov_num("mu_f", 1.0 / ov_num("re", re));
        c.bc_flow[Side::West] = EdgeSegments<VelocityBc>({VelocityBcKind::NoSlip});
        c.bc_flow[Side::East] = EdgeSegments<VelocityBc>({VelocityBcKind::NoSlip});
        c.bc_flow[Side::South] = EdgeSegments<VelocityBc>({VelocityBcKind::NoSlip});
        c.bc_flow[Side::North] = EdgeSegments<VelocityBc>({VelocityBcKind::MovingWall, 1.0, 0.0});
        c.cfl = 0.5;
        c.u_char = 1.0;
        c.until_steady = true;
        c.steady_tol = 1e-5;
        c.probes.push_back({0.5, 0.5, "u"});
        c.profiles = {"centerline-u", "centerline-v"};
        apply_method(c);
        return c;
    }

    if (name == "diffusion-1" || name == "diffusion-2" || name == "diffusion-3") {
        const int id = name.back() - '0';
        const int h = ov_int("h", 20);  // cells per unit length
        c.geometry.fluid = {0, 0, 1, 1, h, h};
        c.geometry.solid = BlockExtent{0, 1, 1, 2, h, h};
        c.solve_heat = true;
        c.thermal_steady = true;
        // both subdomains solve the same diffusion law; the fluid slot simply
        // carries no velocity field
        c.th_fluid.k = manufactured_k_law(id);
        c.th_solid.k = manufactured_k_law(id);
        c.th_fluid.Q = {SourceSpec::Kind::Manufactured, 0, id};
        c.th_solid.Q = {SourceSpec::Kind::Manufactured, 0, id};
        ThermalBc man{ThermalBcKind::FixedTemperature, 0, -1, true};
        for (Side s : all_sides) {
            c.bc_heat_fluid[s] = EdgeSegments<ThermalBc>(man);
            c.bc_heat_solid[s] = EdgeSegments<ThermalBc>(man);
        }
        c.coupling_tol = 1e-6;
        c.dtn_relaxation = 0.2;
        c.T_init_mean_dirichlet = true;
        apply_coupling(c);
        return c;
    }

    if (name == "heated-plate") {
        const int h = ov_int("h", 50);  // cells per unit plate length
        const double dx = 1.0 / h;
        c.geometry.fluid = {-0.5, 0, 2.5, 0.75, 3 * h, static_cast<int>(std::lround(0.75 / dx / 1.0))};
        c.geometry.solid = BlockExtent{0, -0.25, 1, 0, h, static_cast<int>(std::lround(0.25 / dx / 1.0))};
        c.solve_flow = true;
        c.solve_heat = true;
        c.thermal_steady = true;

        const double u_in = ov_num("u_in", 0.1);
        const double re = ov_num("re", 500.0);
        c.fluid_props.rho = ov_num("rho_f", 1.0);
        c.fluid_props.mu = ov_num("mu_f", c.fluid_props.rho * u_in * 1.0 / re);

        const double k_s = ov_num("k_s", 100.0);
        const double k_ratio = ov_num("k_ratio", 2.0);
        const double pr = ov_num("pr", 0.01);
        const double k_f = k_s / k_ratio;
        const double c_pf = pr * k_f / c.fluid_props.mu;
        c.th_fluid = {c.fluid_props.rho, c_pf, PolynomialLaw::constant(k_f), {}};
        c.th_solid = {ov_num("rho_s", 1.0), ov_num("c_ps", 100.0), PolynomialLaw::constant(k_s), {}};

        c.bc_flow[Side::West] = EdgeSegments<VelocityBc>({VelocityBcKind::Inlet, u_in, 0.0});
        c.bc_flow[Side::East] = EdgeSegments<VelocityBc>({VelocityBcKind::Outlet});
        c.bc_flow[Side::North] = EdgeSegments<VelocityBc>({VelocityBcKind::Slip});
        // slip upstream of the leading edge, no-slip on and beyond the plate;
        // the interface portion is no-slip automatically
        c.bc_flow[Side::South].segments = {
            {-1e300, 0.0, {VelocityBcKind::Slip}},
            {0.0, 1e300, {VelocityBcKind::NoSlip}},
        };

        c.bc_heat_fluid[Side::West] =
            EdgeSegments<ThermalBc>({ThermalBcKind::FixedTemperature, ov_num("t_in", 300.0)});
        c.bc_heat_fluid[Side::East] = EdgeSegments<ThermalBc>({ThermalBcKind::Adiabatic});
        c.bc_heat_fluid[Side::North] = EdgeSegments<ThermalBc>({ThermalBcKind::Adiabatic});
        c.bc_heat_fluid[Side::South] = EdgeSegments<ThermalBc>({ThermalBcKind::Adiabatic});
        c.bc_heat_solid[Side::West] = EdgeSegments<ThermalBc>({ThermalBcKind::Adiabatic});
        c.bc_heat_solid[Side::East] = EdgeSegments<ThermalBc>({ThermalBcKind::Adiabatic});
        c.bc_heat_solid[Side::South] =
            EdgeSegments<ThermalBc>({ThermalBcKind::FixedTemperature, 310.0});

        c.cfl = 0.5;
        c.u_char = u_in;
        c.until_steady = true;
        c.T_init = 300.0;
        c.probes.push_back({0.5, 0.002, "u"});
        c.profiles = {"interface-trel"};
        apply_method(c);
        apply_coupling(c);
        return c;
    }

    if (name == "natural-convection-1" || name == "natural-convection-2" ||
        name == "natural-convection-3") {
        const int id = name.back() - '0';
        const int h = ov_int("h", 80);
        c.geometry.fluid = {0, 0, 1, 1, h, h};
        c.geometry.solid = BlockExtent{1, 0, 1.2, 1, std::max(1, h / 5), h};
        c.solve_flow = true;
        c.solve_heat = true;

        double mu, beta, rho_s, k_s, c_ps, k_ratio, pr;
        switch (id) {
            case 1: mu = 0.7; beta = 0.7e5; rho_s = 7.5e3; k_s = 1.6e3; c_ps = 0.5; k_ratio = 1.6e3; pr = 0.7; break;
            case 2: mu = 7; beta = 4.9e5; rho_s = 7.5; k_s = 80; c_ps = 0.12; k_ratio = 80; pr = 7; break;
            default: mu = 7; beta = 4.9e5; rho_s = 7.5; k_s = 2.7; c_ps = 0.0576; k_ratio = 2.7; pr = 7; break;
        }
        c.fluid_props.rho = ov_num("rho_f", 1.0);
        c.fluid_props.mu = ov_num("mu_f", mu);
        c.fluid_props.beta = ov_num("beta", beta);
        c.fluid_props.g0x = 0;
        c.fluid_props.g0y = -1;
        const double T_c = 1.0, T_h = 2.0;
        c.fluid_props.T_ref = T_c;

        k_s = ov_num("k_s", k_s);
        k_ratio = ov_num("k_ratio", k_ratio);
        pr = ov_num("pr", pr);
        const double k_f = k_s / k_ratio;
        const double c_pf = pr * k_f / c.fluid_props.mu;
        c.th_fluid = {c.fluid_props.rho, c_pf, PolynomialLaw::constant(k_f), {}};
        c.th_solid = {ov_num("rho_s", rho_s), ov_num("c_ps", c_ps), PolynomialLaw::constant(k_s), {}};

        for (Side s : all_sides) c.bc_flow[s] = EdgeSegments<VelocityBc>({VelocityBcKind::NoSlip});
        c.bc_heat_fluid[Side::West] = EdgeSegments<ThermalBc>({ThermalBcKind::FixedTemperature, T_c});
        c.bc_heat_fluid[Side::East] = EdgeSegments<ThermalBc>({ThermalBcKind::Adiabatic});
        c.bc_heat_fluid[Side::South] = EdgeSegments<ThermalBc>({ThermalBcKind::Adiabatic});
        c.bc_heat_fluid[Side::North] = EdgeSegments<ThermalBc>({ThermalBcKind::Adiabatic});
        c.bc_heat_solid[Side::East] = EdgeSegments<ThermalBc>({ThermalBcKind::FixedTemperature, T_h});
        c.bc_heat_solid[Side::West] = EdgeSegments<ThermalBc>({ThermalBcKind::Adiabatic});
        c.bc_heat_solid[Side::South] = EdgeSegments<ThermalBc>({ThermalBcKind::Adiabatic});
        c.bc_heat_solid[Side::North] = EdgeSegments<ThermalBc>({ThermalBcKind::Adiabatic});

        c.dt = 1e-3;
        c.t_end = 0.07;
        c.fluid_K = 50;
        c.fluid_tol = 1e-6;
        c.outer_tol = 1e-6;
        c.K_outer = 50;
        c.T_init = T_c;
        c.probes.push_back({0.5, 0.5, "T"});
        c.profiles = {"theta-y05"};
        apply_method(c);
        apply_coupling(c);
        return c;
    }

    throw std::invalid_argument("builtin_case: unknown case '" + name + "'");
}

inline std::vector<std::string> builtin_case_names() {
    return {"cavity-re100", "cavity-re400",  "cavity-re1000",
            "diffusion-1",  "diffusion-2",   "diffusion-3",
            "heated-plate", "natural-convection-1", "natural-convection-2", "natural-convection-3"};
}

}  // namespace cht
