#pragma once

/// Boundary conditions, specified per subdomain edge as one or more segments
/// in the tangential coordinate, and resolved to one entry per boundary face.
/// Interface faces are owned by the coupling and carry no user condition.

#include <array>
#include <stdexcept>
#include <vector>

#include "chtfvm/grid.hpp"

namespace cht {

enum class VelocityBcKind { NoSlip, Slip, MovingWall, Inlet, Outlet };

struct VelocityBc {
    VelocityBcKind kind = VelocityBcKind::NoSlip;
    double u = 0, v = 0;  ///< prescribed velocity (MovingWall: tangential; Inlet: full vector)
};

enum class ThermalBcKind { Adiabatic, FixedTemperature, Interface };

struct ThermalBc {
    ThermalBcKind kind = ThermalBcKind::Adiabatic;
    double T = 0;
    int iface = -1;            ///< interface face id when kind == Interface
    bool manufactured = false; ///< FixedTemperature taken from the manufactured solution
};

template <class Bc>
struct EdgeSegments {
    struct Segment {
        double lo = 0, hi = 0;
        Bc bc;
    };
    std::vector<Segment> segments;

    EdgeSegments() = default;
    explicit EdgeSegments(Bc whole_edge) {
        segments.push_back({-1e300, 1e300, whole_edge});
    }

    const Bc& at(double t) const {
        for (const auto& s : segments)
            if (t >= s.lo && t < s.hi) return s.bc;
        if (!segments.empty() && t >= segments.back().lo) return segments.back().bc;
        throw std::invalid_argument("boundary condition: no segment covers coordinate " +
                                    format_double(t));
    }
};

template <class Bc>
struct EdgeSet {
    std::array<EdgeSegments<Bc>, 4> edges;  // indexed by Side
    EdgeSegments<Bc>& operator[](Side s) { return edges[static_cast<int>(s)]; }
    const EdgeSegments<Bc>& operator[](Side s) const { return edges[static_cast<int>(s)]; }
};

/// One resolved condition per boundary face of one block.
template <class Bc>
struct BcTable {
    std::array<std::vector<Bc>, 4> side;
    const Bc& at(Side s, int m) const { return side[static_cast<int>(s)][m]; }
};

using FluidBcTable = BcTable<VelocityBc>;
using ThermalBcTable = BcTable<ThermalBc>;

/// Resolve an edge-segment specification into a per-face table for a block.
/// Faces that lie on the interface get Interface entries (thermal) or NoSlip
/// walls (velocity); the user specification is ignored there.
inline ThermalBcTable resolve_thermal_bc(const Grid& grid, bool fluid_block,
                                         const EdgeSet<ThermalBc>& spec) {
    const GridBlock& b = grid.block(fluid_block);
    ThermalBcTable t;
    for (Side s : all_sides) {
        const int n = b.edge_faces(s);
        auto& col = t.side[static_cast<int>(s)];
        col.resize(n);
        for (int m = 0; m < n; ++m) {
            const int id = grid.interface_face_at(fluid_block, s, m);
            if (id >= 0) {
                col[m].kind = ThermalBcKind::Interface;
                col[m].iface = id;
            } else {
                col[m] = spec[s].at(b.edge_coord(s, m));
            }
        }
    }
    return t;
}

inline FluidBcTable resolve_fluid_bc(const Grid& grid, const EdgeSet<VelocityBc>& spec) {
    const GridBlock& b = grid.fluid;
    FluidBcTable t;
    for (Side s : all_sides) {
        const int n = b.edge_faces(s);
        auto& col = t.side[static_cast<int>(s)];
        col.resize(n);
        for (int m = 0; m < n; ++m) {
            const int id = grid.interface_face_at(true, s, m);
            // the solid wall is rigid: interface faces are no-slip for the flow
            col[m] = (id >= 0) ? VelocityBc{VelocityBcKind::NoSlip, 0, 0}
                               : spec[s].at(b.edge_coord(s, m));
        }
    }
    return t;
}

}  // namespace cht
