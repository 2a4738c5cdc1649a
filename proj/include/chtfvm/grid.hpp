#pragma once

/// Structured, orthogonal, conforming 2D meshes with a fluid and an optional
/// solid subdomain sharing an axis-aligned interface.
///
/// Cells are uniform per subdomain; spacings may differ between subdomains
/// only in the direction normal to the interface. Cell ids are row-major by
/// (i, j): id = j * nx + i. Faces of a cell are enumerated W, E, S, N with
/// outward area vectors (-dy,0), (dy,0), (0,-dx), (0,dx).

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chtfvm/common.hpp"

namespace cht {

enum class Side : int { West = 0, East = 1, South = 2, North = 3 };

constexpr std::array<Side, 4> all_sides = {Side::West, Side::East, Side::South, Side::North};

inline const char* side_name(Side s) {
    switch (s) {
        case Side::West: return "west";
        case Side::East: return "east";
        case Side::South: return "south";
        case Side::North: return "north";
    }
    return "?";
}

/// One uniform structured block of cells.
struct GridBlock {
    int nx = 0, ny = 0;
    double dx = 0, dy = 0;
    double x0 = 0, y0 = 0;

    int cells() const { return nx * ny; }
    int cell(int i, int j) const { return j * nx + i; }
    double xc(int i) const { return x0 + (i + 0.5) * dx; }
    double yc(int j) const { return y0 + (j + 0.5) * dy; }
    double x1() const { return x0 + nx * dx; }
    double y1() const { return y0 + ny * dy; }
    double volume() const { return dx * dy; }

    /// Number of boundary faces along a side.
    int edge_faces(Side s) const {
        return (s == Side::West || s == Side::East) ? ny : nx;
    }
    /// Tangential coordinate of the m-th boundary-face center along a side.
    double edge_coord(Side s, int m) const {
        return (s == Side::West || s == Side::East) ? yc(m) : xc(m);
    }
    /// Area (2D: length) of a boundary face on a side.
    double edge_area(Side s) const {
        return (s == Side::West || s == Side::East) ? dy : dx;
    }
    /// Spacing normal to a side.
    double normal_spacing(Side s) const {
        return (s == Side::West || s == Side::East) ? dx : dy;
    }
};

/// A face shared by exactly one fluid and one solid cell.
struct InterfaceFace {
    int id = -1;
    int fluid_cell = -1;
    int solid_cell = -1;
    double area = 0;  ///< face length (unit depth)
    double d_f = 0;   ///< fluid cell center to face center
    double d_s = 0;   ///< solid cell center to face center
    double xi = 0;    ///< curvilinear coordinate of the face center along the interface
};

struct BlockExtent {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    int nx = 0, ny = 0;
};

struct CaseGeometry {
    BlockExtent fluid;
    std::optional<BlockExtent> solid;
};

struct Grid {
    GridBlock fluid;
    bool has_solid = false;
    GridBlock solid;

    std::vector<InterfaceFace> interface_faces;
    Side fluid_iface_side = Side::East;  ///< fluid edge carrying the interface
    Side solid_iface_side = Side::West;

    /// Per boundary face of the interface-carrying edges: interface face id or -1.
    std::vector<int> fluid_edge_iface;  ///< indexed along fluid_iface_side
    std::vector<int> solid_edge_iface;

    int interface_face_at(bool on_fluid, Side s, int m) const {
        if (on_fluid) {
            if (!has_solid || s != fluid_iface_side) return -1;
            return fluid_edge_iface[m];
        }
        if (!has_solid || s != solid_iface_side) return -1;
        return solid_edge_iface[m];
    }

    const GridBlock& block(bool fluid_block) const { return fluid_block ? fluid : solid; }
};

namespace detail {

inline bool near(double a, double b, double scale) {
    return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(scale));
}

inline GridBlock make_block(const BlockExtent& e, const char* which) {
    if (e.nx < 1 || e.ny < 1)
        throw std::invalid_argument(std::string("grid: ") + which + " cell counts must be >= 1");
    if (!(e.x1 > e.x0) || !(e.y1 > e.y0))
        throw std::invalid_argument(std::string("grid: ") + which + " extents must be positive");
    GridBlock b;
    b.nx = e.nx;
    b.ny = e.ny;
    b.x0 = e.x0;
    b.y0 = e.y0;
    b.dx = (e.x1 - e.x0) / e.nx;
    b.dy = (e.y1 - e.y0) / e.ny;
    return b;
}

}  // namespace detail

/// Build a grid from extents and cell counts. When a solid block is present it
/// must abut the fluid block along exactly one axis-aligned segment, with
/// matching tangential spacing and face-aligned overlap (conforming mesh).
inline Grid build_grid(const CaseGeometry& geo) {
    Grid g;
    g.fluid = detail::make_block(geo.fluid, "fluid");
    if (!geo.solid) return g;

    g.has_solid = true;
    g.solid = detail::make_block(*geo.solid, "solid");
    const GridBlock& f = g.fluid;
    const GridBlock& s = g.solid;

    // Identify the shared edge pair.
    bool vertical;  // interface line is vertical (normal along x)
    double fx = 0;  // interface coordinate
    if (detail::near(f.x1(), s.x0, f.x1())) {
        g.fluid_iface_side = Side::East;
        g.solid_iface_side = Side::West;
        vertical = true;
        fx = f.x1();
    } else if (detail::near(s.x1(), f.x0, f.x0)) {
        g.fluid_iface_side = Side::West;
        g.solid_iface_side = Side::East;
        vertical = true;
        fx = f.x0;
    } else if (detail::near(f.y1(), s.y0, f.y1())) {
        g.fluid_iface_side = Side::North;
        g.solid_iface_side = Side::South;
        vertical = false;
        fx = f.y1();
    } else if (detail::near(s.y1(), f.y0, f.y0)) {
        g.fluid_iface_side = Side::South;
        g.solid_iface_side = Side::North;
        vertical = false;
        fx = f.y0;
    } else {
        throw std::invalid_argument("grid: subdomains must abut along exactly one axis-aligned segment");
    }
    (void)fx;

    const double ht_f = vertical ? f.dy : f.dx;  // tangential spacing
    const double ht_s = vertical ? s.dy : s.dx;
    if (!detail::near(ht_f, ht_s, ht_f))
        throw std::invalid_argument(
            "grid: non-conforming subdomains: tangential spacing along the interface differs (" +
            format_double(ht_f) + " vs " + format_double(ht_s) + ")");

    const double flo = vertical ? f.y0 : f.x0;
    const double fhi = vertical ? f.y1() : f.x1();
    const double slo = vertical ? s.y0 : s.x0;
    const double shi = vertical ? s.y1() : s.x1();
    const double lo = std::max(flo, slo);
    const double hi = std::min(fhi, shi);
    if (!(hi - lo > 0.5 * ht_f))
        throw std::invalid_argument("grid: subdomain interface overlap is empty");

    // Overlap endpoints must land on face coordinates of both blocks.
    auto face_index = [&](double coord, double origin, const char* which) {
        double r = (coord - origin) / ht_f;
        double ri = std::round(r);
        if (std::abs(r - ri) > 1e-7)
            throw std::invalid_argument(std::string("grid: non-conforming subdomains: interface endpoint "
                                                    "does not align with the face grid of the ") +
                                        which + " block");
        return static_cast<int>(ri);
    };
    const int f_begin = face_index(lo, flo, "fluid");
    const int s_begin = face_index(lo, slo, "solid");
    const int nfaces = face_index(hi, flo, "fluid") - f_begin;

    g.fluid_edge_iface.assign(f.edge_faces(g.fluid_iface_side), -1);
    g.solid_edge_iface.assign(s.edge_faces(g.solid_iface_side), -1);
    g.interface_faces.reserve(nfaces);

    for (int m = 0; m < nfaces; ++m) {
        InterfaceFace fc;
        fc.id = m;
        fc.area = ht_f;
        fc.xi = (m + 0.5) * ht_f;
        const int fm = f_begin + m;
        const int sm = s_begin + m;
        if (vertical) {
            fc.fluid_cell = (g.fluid_iface_side == Side::East) ? f.cell(f.nx - 1, fm) : f.cell(0, fm);
            fc.solid_cell = (g.solid_iface_side == Side::West) ? s.cell(0, sm) : s.cell(s.nx - 1, sm);
            fc.d_f = 0.5 * f.dx;
            fc.d_s = 0.5 * s.dx;
        } else {
            fc.fluid_cell = (g.fluid_iface_side == Side::North) ? f.cell(fm, f.ny - 1) : f.cell(fm, 0);
            fc.solid_cell = (g.solid_iface_side == Side::South) ? s.cell(sm, 0) : s.cell(sm, s.ny - 1);
            fc.d_f = 0.5 * f.dy;
            fc.d_s = 0.5 * s.dy;
        }
        g.fluid_edge_iface[fm] = m;
        g.solid_edge_iface[sm] = m;
        g.interface_faces.push_back(fc);
    }
    return g;
}

/// Total interface length (sum of face areas; unit depth in 2D).
inline double interface_length(const Grid& g) {
    if (g.interface_faces.empty())
        throw std::invalid_argument("interface_length: grid has no interface faces");
    double L = 0;
    for (const auto& f : g.interface_faces) L += f.area;
    return L;
}

/// Outward face area vectors of one cell, order W, E, S, N. Their sum is zero
/// (closed control volume).
inline std::array<std::array<double, 2>, 4> cell_face_area_vectors(const GridBlock& b) {
    return {{{-b.dy, 0.0}, {b.dy, 0.0}, {0.0, -b.dx}, {0.0, b.dx}}};
}

/// Center of the m-th boundary face along a side of a block.
inline std::array<double, 2> edge_face_center(const GridBlock& b, Side s, int m) {
    switch (s) {
        case Side::West: return {b.x0, b.yc(m)};
        case Side::East: return {b.x1(), b.yc(m)};
        case Side::South: return {b.xc(m), b.y0};
        case Side::North: return {b.xc(m), b.y1()};
    }
    return {0, 0};
}

// Face-normal velocity storage on a block. x-normal faces are indexed
// j*(nx+1)+i with i in [0,nx]; y-normal faces j*nx+i with j in [0,ny].
inline int fx_index(const GridBlock& b, int i, int j) { return j * (b.nx + 1) + i; }
inline int fy_index(const GridBlock& b, int i, int j) { return j * b.nx + i; }

struct FaceVelocities {
    Field uf;  ///< x-normal face velocities (u component)
    Field vf;  ///< y-normal face velocities (v component)

    static FaceVelocities zeros(const GridBlock& b) {
        FaceVelocities f;
        f.uf.assign(static_cast<std::size_t>(b.nx + 1) * b.ny, 0.0);
        f.vf.assign(static_cast<std::size_t>(b.nx) * (b.ny + 1), 0.0);
        return f;
    }
};

}  // namespace cht
