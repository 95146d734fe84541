/// @file test_flow_oracle.cpp
/// @brief Oracle validation: Poiseuille channel, obstacle-free plug flow,
///        mass conservation, symmetry, nondimensionalization, interpolation,
///        grid-refinement stability of the critical diameter, persistence.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dld/flow_oracle.hpp"
#include "dld/tracer.hpp"

using namespace dld;

namespace {

const UnitCellGeometry kCell = make_cell(0.5, 10, 0.4);

const FlowField& tilted_field() {
    static const FlowField f = [] {
        SolveOptions opt;
        opt.nx = opt.ny = 128;
        return solve_steady(kCell, opt);
    }();
    return f;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("poiseuille_reference profile") {
    CHECK(poiseuille_reference(0.0, 0.2, 1.0) == Catch::Approx(1.0));
    CHECK(poiseuille_reference(0.2, 0.2, 1.0) == Catch::Approx(0.0).margin(1e-15));
    CHECK(poiseuille_reference(0.1, 0.2, 2.0) == Catch::Approx(1.5));
    CHECK_THROWS_AS(poiseuille_reference(0.25, 0.2, 1.0), std::domain_error);
}

TEST_CASE("channel validation reproduces the parabolic profile to <= 1% L2") {
    SolveOptions opt;
    opt.nx = opt.ny = 96;
    opt.include_posts = false;
    opt.channel_walls = true;
    const FlowField f = solve_steady(kCell, opt);
    const double h = 0.5 * kCell.Dy();
    const double g = opt.dp / kCell.Dx();
    const double u_max = g * h * h / (2.0 * opt.mu);
    double num = 0.0, den = 0.0;
    const int i = f.nx / 2;
    for (int j = 0; j <= f.ny; ++j) {
        const double ref = poiseuille_reference(f.y_of(j) - h, h, u_max);
        const double d = f.u[f.idx(i, j)] - ref;
        num += d * d;
        den += ref * ref;
    }
    CHECK(std::sqrt(num / den) < 0.01);
}

TEST_CASE("obstacle-free periodic cell yields uniform flow and linear pressure") {
    SolveOptions opt;
    opt.nx = opt.ny = 64;
    opt.include_posts = false;
    const FlowField f = solve_steady(kCell, opt);
    double umin = 1e300, umax = -1e300, vmax = 0.0;
    for (std::size_t k = 0; k < f.u.size(); ++k) {
        umin = std::min(umin, f.u[k]);
        umax = std::max(umax, f.u[k]);
        vmax = std::max(vmax, std::abs(f.v[k]));
    }
    CHECK(umin > 0.0);
    CHECK((umax - umin) / umax < 1e-10);
    CHECK(vmax < 1e-12 * umax);
    // pressure linear in x: column means match the linear drive exactly
    const double g = opt.dp / kCell.Dx();
    for (int i = 0; i <= f.nx; i += 8) {
        const double expect = g * (kCell.Dx() - f.x_of(i));
        CHECK(column_mean_pressure(f, i) == Catch::Approx(expect).margin(1e-10));
    }
}

TEST_CASE("post-cell solution conserves mass across every column") {
    const FlowField& f = tilted_field();
    const double f0 = flux_through_column(f, 0);
    REQUIRE(f0 > 0.0);
    double fmin = 1e300, fmax = -1e300;
    for (int i = 0; i <= f.nx; ++i) {
        const double fl = flux_through_column(f, i);
        fmin = std::min(fmin, fl);
        fmax = std::max(fmax, fl);
    }
    CHECK((fmax - fmin) / f0 < 1e-3);  // contract is 0.1%; measured ~1e-9
    CHECK(flux_through_column(f, 0) ==
          Catch::Approx(flux_through_column(f, f.nx)).epsilon(1e-9));
}

TEST_CASE("solution rows at y=0 and y=Dy are identical by construction") {
    const FlowField& f = tilted_field();
    for (int i = 0; i <= f.nx; ++i) {
        CHECK(f.u[f.idx(i, 0)] == f.u[f.idx(i, f.ny)]);
        CHECK(f.v[f.idx(i, 0)] == f.v[f.idx(i, f.ny)]);
    }
}

TEST_CASE("untilted flow is u-symmetric and v-antisymmetric about mid-height") {
    SolveOptions opt;
    opt.nx = opt.ny = 96;
    opt.tilted = false;
    const FlowField f = solve_steady(kCell, opt);
    double umax = 0.0, dev = 0.0;
    for (int j = 0; j <= f.ny; ++j)
        for (int i = 0; i <= f.nx; ++i) {
            const std::size_t a = f.idx(i, j), b = f.idx(i, f.ny - j);
            if (f.solid_mask[a] || f.solid_mask[b]) continue;
            umax = std::max(umax, std::abs(f.u[a]));
            dev = std::max(dev, std::abs(f.u[a] - f.u[b]));
            dev = std::max(dev, std::abs(f.v[a] + f.v[b]));
        }
    CHECK(dev / umax < 0.01);
}

TEST_CASE("no-slip holds at every solid vertex") {
    const FlowField& f = tilted_field();
    for (std::size_t k = 0; k < f.u.size(); ++k)
        if (f.solid_mask[k]) {
            CHECK(f.u[k] == 0.0);
            CHECK(f.v[k] == 0.0);
        }
}

TEST_CASE("nondimensionalize pins the inlet/outlet pressure averages") {
    const FlowField& raw = tilted_field();
    const double u_scale = max_abs_velocity(raw);
    const FlowField nd = nondimensionalize(raw, 0.1, u_scale);
    CHECK(column_mean_pressure(nd, 0) == Catch::Approx(0.1).margin(1e-12));
    CHECK(column_mean_pressure(nd, nd.nx) == Catch::Approx(0.0).margin(1e-12));
    CHECK(max_abs_velocity(nd) == Catch::Approx(1.0).epsilon(1e-12));

    // round trip via scale_meta
    for (std::size_t k = 0; k < nd.u.size(); k += 97) {
        const double u_back = nd.u[k] * nd.scale_meta.u_scale;
        const double p_back = nd.p[k] / nd.scale_meta.p_scale + nd.scale_meta.p_offset;
        CHECK(u_back == Catch::Approx(raw.u[k]).margin(1e-12 * std::abs(raw.u[k]) + 1e-300));
        CHECK(p_back == Catch::Approx(raw.p[k]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(nondimensionalize(raw, 0.1, 0.0), std::domain_error);
}

TEST_CASE("interp_field is exact at grid nodes and for bilinear data") {
    const FlowField& f = tilted_field();
    for (int j = 0; j <= f.ny; j += 13)
        for (int i = 0; i <= f.nx; i += 11) {
            const FieldSample s = interp_field_local(f, f.x_of(i), f.y_of(j));
            CHECK(s.u == f.u[f.idx(i, j)]);
            CHECK(s.v == f.v[f.idx(i, j)]);
        }

    // synthetic field u = x + 2y is reproduced exactly between nodes
    FlowField lin;
    lin.cell = kCell;
    lin.nx = lin.ny = 64;
    const std::size_t n = 65 * 65;
    lin.u.assign(n, 0.0);
    lin.v.assign(n, 0.0);
    lin.p.assign(n, 0.0);
    lin.solid_mask.assign(n, 0);
    for (int j = 0; j <= 64; ++j)
        for (int i = 0; i <= 64; ++i) lin.u[lin.idx(i, j)] = lin.x_of(i) + 2.0 * lin.y_of(j);
    Rng rng(31);
    for (int k = 0; k < 200; ++k) {
        const double x = rng.uniform(0.0, 0.4), y = rng.uniform(0.0, 0.4);
        CHECK(interp_field_local(lin, x, y).u == Catch::Approx(x + 2.0 * y).epsilon(1e-13));
    }
}

TEST_CASE("solver validates grid, tolerance, and resolution preconditions") {
    SolveOptions opt;
    opt.nx = opt.ny = 32;
    CHECK_THROWS_AS(solve_steady(kCell, opt), std::invalid_argument);
    opt.nx = opt.ny = 64;
    opt.tol = 0.0;
    CHECK_THROWS_AS(solve_steady(kCell, opt), std::invalid_argument);
    // gap below 4 grid spacings
    const UnitCellGeometry tight = make_cell(0.97, 5, 0.4);
    SolveOptions opt2;
    opt2.nx = opt2.ny = 64;
    CHECK_THROWS_AS(solve_steady(tight, opt2), ResolutionError);
}

TEST_CASE("solver reports non-convergence with the final residual") {
    SolveOptions opt;
    opt.nx = opt.ny = 64;
    opt.max_iters = 1;
    opt.tol = 1e-30;
    try {
        solve_steady(kCell, opt);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(std::string(e.what()).find("iterations") != std::string::npos);
        CHECK(e.residual() >= 0.0);
    }
}

TEST_CASE("tilted grids round ny to a multiple of N") {
    SolveOptions opt;
    opt.nx = opt.ny = 100;
    const UnitCellGeometry c = make_cell(0.5, 8, 0.4);
    const FlowField f = solve_steady(c, opt);
    CHECK(f.ny % 8 == 0);
    CHECK(f.nx == f.ny);
}

TEST_CASE("doubling the grid moves the critical diameter by < 2%") {
    const UnitCellGeometry c = make_cell(0.5, 8, 0.4);
    SolveOptions a;
    a.nx = a.ny = 96;
    SolveOptions b;
    b.nx = b.ny = 192;
    const FlowField fa = solve_steady(c, a);
    const FlowField fb = solve_steady(c, b);
    GridFlowSource sa(fa), sb(fb);
    const double dca = critical_diameter(sa, c, 1e-4).dc;
    const double dcb = critical_diameter(sb, c, 1e-4).dc;
    CHECK(std::abs(dca - dcb) / dcb < 0.02);
}

TEST_CASE("field CSV + sidecar round trip preserves every value") {
    const FlowField nd = nondimensionalize(tilted_field(), 0.1, max_abs_velocity(tilted_field()));
    const auto path = temp_file("dld_field_rt.csv");
    write_field(nd, path.string());
    const FlowField back = read_field(path.string());
    REQUIRE(back.nx == nd.nx);
    REQUIRE(back.ny == nd.ny);
    CHECK(back.tilted == nd.tilted);
    CHECK(back.cell.F == nd.cell.F);
    CHECK(back.scale_meta.u_scale == nd.scale_meta.u_scale);
    for (std::size_t k = 0; k < nd.u.size(); ++k) {
        REQUIRE(back.u[k] == nd.u[k]);
        REQUIRE(back.v[k] == nd.v[k]);
        REQUIRE(back.p[k] == nd.p[k]);
        REQUIRE(back.solid_mask[k] == nd.solid_mask[k]);
    }
    std::filesystem::remove(path);
    std::filesystem::remove(field_meta_path(path.string()));
}

TEST_CASE("malformed field files are reported with a line number") {
    const auto path = temp_file("dld_field_bad.csv");
    {
        const FlowField nd = nondimensionalize(tilted_field(), 0.1, 1.0);
        write_field(nd, path.string());
        std::ofstream out(path, std::ios::app);
        out << "not,a,valid,row,at,all\n";
    }
    try {
        read_field(path.string());
        FAIL("expected parse error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find(":") != std::string::npos);
    }
    std::filesystem::remove(path);
    std::filesystem::remove(field_meta_path(path.string()));
}
