#include <catch2/catch_amalgamated.hpp>

#include "chtfvm/grid.hpp"

using namespace cht;

TEST_CASE("single-domain cavity grid") {
    CaseGeometry geo;
    geo.fluid = {0, 0, 1, 1, 40, 40};
    Grid g = build_grid(geo);
    CHECK(g.fluid.cells() == 1600);
    CHECK_FALSE(g.has_solid);
    CHECK(g.interface_faces.empty());
    CHECK(g.fluid.dx == Catch::Approx(1.0 / 40));
    CHECK_THROWS(interface_length(g));
}

TEST_CASE("enclosure with solid wall: conforming vertical interface") {
    CaseGeometry geo;
    geo.fluid = {0, 0, 1, 1, 80, 80};
    geo.solid = BlockExtent{1, 0, 1.2, 1, 16, 80};
    Grid g = build_grid(geo);
    REQUIRE(g.has_solid);
    REQUIRE(g.interface_faces.size() == 80);
    CHECK(g.fluid_iface_side == Side::East);
    CHECK(g.solid_iface_side == Side::West);
    for (const auto& f : g.interface_faces) {
        CHECK(f.area == Catch::Approx(1.0 / 80));
        CHECK(f.d_f == Catch::Approx(0.5 / 80));
        CHECK(f.d_s == Catch::Approx(0.5 * 0.2 / 16));
    }
    CHECK(interface_length(g) == Catch::Approx(1.0).margin(1e-14));

    // xi strictly increasing, within [0, L]
    double prev = -1;
    for (const auto& f : g.interface_faces) {
        CHECK(f.xi > prev);
        CHECK(f.xi >= 0);
        CHECK(f.xi <= 1.0);
        prev = f.xi;
    }
    // interface cells: fluid east column, solid west column
    for (const auto& f : g.interface_faces) {
        CHECK(f.fluid_cell % g.fluid.nx == g.fluid.nx - 1);
        CHECK(f.solid_cell % g.solid.nx == 0);
    }
}

TEST_CASE("heated-plate layout: interface is a subsegment of the fluid bottom") {
    CaseGeometry geo;
    geo.fluid = {-0.5, 0, 2.5, 0.75, 150, 38};
    geo.solid = BlockExtent{0, -0.25, 1, 0, 50, 13};
    Grid g = build_grid(geo);
    REQUIRE(g.interface_faces.size() == 50);
    CHECK(g.fluid_iface_side == Side::South);
    CHECK(g.solid_iface_side == Side::North);
    CHECK(interface_length(g) == Catch::Approx(1.0).margin(1e-12));
    // faces are exactly the fluid bottom faces with centers in (0, 1)
    for (const auto& f : g.interface_faces) {
        const int i = f.fluid_cell % g.fluid.nx;
        const double x = g.fluid.xc(i);
        CHECK(x > 0);
        CHECK(x < 1);
    }
    // fluid bottom faces outside the plate carry no interface id
    CHECK(g.fluid_edge_iface[0] == -1);
    CHECK(g.fluid_edge_iface[24] == -1);
    CHECK(g.fluid_edge_iface[25] == 0);
    CHECK(g.fluid_edge_iface[74] == 49);
    CHECK(g.fluid_edge_iface[75] == -1);
}

TEST_CASE("single interface face of width h") {
    CaseGeometry geo;
    geo.fluid = {0, 0, 0.25, 0.25, 1, 1};
    geo.solid = BlockExtent{0.25, 0, 0.5, 0.25, 1, 1};
    Grid g = build_grid(geo);
    REQUIRE(g.interface_faces.size() == 1);
    CHECK(interface_length(g) == Catch::Approx(0.25));
}

TEST_CASE("face area vectors close the control volume") {
    GridBlock b{7, 3, 0.1, 0.22, 0, 0};
    auto S = cell_face_area_vectors(b);
    double sx = 0, sy = 0;
    for (auto& v : S) {
        sx += v[0];
        sy += v[1];
    }
    CHECK(sx == 0.0);
    CHECK(sy == 0.0);
}

TEST_CASE("deterministic rebuild is bit-identical") {
    CaseGeometry geo;
    geo.fluid = {0, 0, 1, 1, 20, 20};
    geo.solid = BlockExtent{0, 1, 1, 2, 20, 20};
    Grid a = build_grid(geo);
    Grid b = build_grid(geo);
    REQUIRE(a.interface_faces.size() == b.interface_faces.size());
    for (std::size_t i = 0; i < a.interface_faces.size(); ++i) {
        CHECK(a.interface_faces[i].xi == b.interface_faces[i].xi);
        CHECK(a.interface_faces[i].fluid_cell == b.interface_faces[i].fluid_cell);
        CHECK(a.interface_faces[i].area == b.interface_faces[i].area);
    }
}

TEST_CASE("rejects non-conforming and invalid geometries") {
    CaseGeometry geo;
    geo.fluid = {0, 0, 1, 1, 40, 40};
    geo.solid = BlockExtent{1, 0, 1.2, 1, 16, 60};  // mismatched tangential spacing
    CHECK_THROWS_WITH(build_grid(geo), Catch::Matchers::ContainsSubstring("non-conforming"));

    geo.solid = BlockExtent{2, 0, 2.2, 1, 16, 40};  // not abutting
    CHECK_THROWS_WITH(build_grid(geo), Catch::Matchers::ContainsSubstring("abut"));

    geo.solid.reset();
    geo.fluid.nx = 0;
    CHECK_THROWS(build_grid(geo));
    geo.fluid = {0, 0, -1, 1, 10, 10};
    CHECK_THROWS(build_grid(geo));
}
