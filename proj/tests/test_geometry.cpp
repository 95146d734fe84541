/// @file test_geometry.cpp
/// @brief Unit-cell geometry: derived parameters, solid queries, Reynolds
///        number, corner symmetry, Monte-Carlo fluid fraction.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "dld/geometry.hpp"
#include "dld/rng.hpp"

using namespace dld;

TEST_CASE("make_cell derives post diameter, row shift, gap") {
    const UnitCellGeometry c = make_cell(0.5, 10, 0.4);
    CHECK(c.D0 == Catch::Approx(0.2));
    CHECK(c.epsilon == Catch::Approx(0.04));
    CHECK(c.gap == Catch::Approx(0.2));
    CHECK(c.Dx() == Catch::Approx(0.4));
    CHECK(c.Dy() == Catch::Approx(0.4));
    CHECK(c.epsilon * c.N == Catch::Approx(c.Ds));

    const UnitCellGeometry paper = make_cell(0.57, 10, 0.4);
    CHECK(paper.D0 == Catch::Approx(0.228));
}

TEST_CASE("make_cell rejects degenerate parameters") {
    CHECK_THROWS_AS(make_cell(1.0, 5, 0.4), std::domain_error);
    CHECK_THROWS_AS(make_cell(0.0, 5, 0.4), std::domain_error);
    CHECK_THROWS_AS(make_cell(-0.2, 5, 0.4), std::domain_error);
    CHECK_THROWS_AS(make_cell(0.5, 0, 0.4), std::domain_error);
    CHECK_THROWS_AS(make_cell(0.5, 5, 0.0), std::domain_error);
}

TEST_CASE("make_cell is pure and deterministic") {
    const UnitCellGeometry a = make_cell(0.37, 7, 0.4);
    const UnitCellGeometry b = make_cell(0.37, 7, 0.4);
    CHECK(a.D0 == b.D0);
    CHECK(a.epsilon == b.epsilon);
    CHECK(a.gap == b.gap);
}

TEST_CASE("is_solid classifies post interiors, boundary, and fluid") {
    const UnitCellGeometry c = make_cell(0.5, 10, 0.4);
    CHECK(is_solid(c, 0.0, 0.0));
    CHECK_FALSE(is_solid(c, 0.2, 0.2));
    CHECK(is_solid(c, 0.1, 0.0));  // exactly on the post surface
    CHECK(is_solid(c, 0.4, 0.4));
    CHECK_THROWS_AS(is_solid(c, -0.01, 0.2), std::domain_error);
    CHECK_THROWS_AS(is_solid(c, 0.2, 0.41), std::domain_error);
}

TEST_CASE("is_solid respects the corner symmetry of the cell") {
    const UnitCellGeometry c = make_cell(0.45, 8, 0.4);
    Rng rng(17);
    for (int k = 0; k < 2000; ++k) {
        const double x = rng.uniform(0.0, c.Dx());
        const double y = rng.uniform(0.0, c.Dy());
        const bool s = is_solid(c, x, y);
        CHECK(s == is_solid(c, c.Dx() - x, y));
        CHECK(s == is_solid(c, x, c.Dy() - y));
    }
}

TEST_CASE("Monte-Carlo fluid fraction matches the closed form within 1%") {
    const UnitCellGeometry c = make_cell(0.5, 10, 0.4);
    const double r = 0.5 * c.D0;
    const double expected = 1.0 - std::numbers::pi * r * r / (c.Dx() * c.Dy());
    Rng rng(99);
    long fluid = 0;
    const long n = 1000000;
    for (long k = 0; k < n; ++k)
        if (!is_solid(c, rng.uniform(0.0, c.Dx()), rng.uniform(0.0, c.Dy()))) ++fluid;
    const double estimate = static_cast<double>(fluid) / n;
    CHECK(std::abs(estimate - expected) / expected < 0.01);
}

TEST_CASE("reynolds evaluates rho U L / mu") {
    CHECK(reynolds({1, 1, 1, 1}) == Catch::Approx(1.0));
    CHECK(reynolds({1000, 0.001, 0.0002, 0.001}) == Catch::Approx(0.2));
    CHECK(reynolds({2, 3, 4, 6}) == Catch::Approx(4.0));
    CHECK_THROWS_AS(reynolds({0, 1, 1, 1}), std::domain_error);
    CHECK_THROWS_AS(reynolds({1, 1, 1, -2}), std::domain_error);
}

TEST_CASE("tilted lattice queries place right-edge posts at n*Dy + epsilon") {
    const UnitCellGeometry c = make_cell(0.5, 10, 0.4);
    // untilted equals the corner query everywhere
    Rng rng(5);
    for (int k = 0; k < 500; ++k) {
        const double x = rng.uniform(0.0, c.Dx());
        const double y = rng.uniform(0.0, c.Dy());
        CHECK(lattice_is_solid(c, x, y, false) == is_solid(c, x, y));
    }
    // tilted: the point at (Dx, epsilon) is a post center, (Dx, 0) is fluid
    CHECK(lattice_is_solid(c, c.Dx(), c.epsilon, true));
    CHECK_FALSE(lattice_is_solid(c, c.Dx() - 0.5 * c.gap, c.epsilon, true));
    // shear wrap: one column to the right, one shift down maps onto itself
    for (int k = 0; k < 500; ++k) {
        const double x = rng.uniform(0.0, c.Dx());
        const double y = rng.uniform(0.0, c.Dy());
        CHECK(lattice_is_solid(c, x, y, true) ==
              lattice_is_solid(c, x + c.Dx(), y + c.epsilon, true));
    }
}

TEST_CASE("nearest_post_center reports distance to the active lattice") {
    const UnitCellGeometry c = make_cell(0.5, 10, 0.4);
    PostCenter pc;
    const double d = nearest_post_center(c, 0.05, 0.05, false, pc);
    CHECK(d == Catch::Approx(std::hypot(0.05, 0.05)));
    CHECK(pc.x == 0.0);
    CHECK(pc.y == 0.0);
    const double dt = nearest_post_center(c, c.Dx() - 0.01, c.epsilon + 0.01, true, pc);
    CHECK(dt == Catch::Approx(std::hypot(0.01, 0.01)));
    CHECK(pc.x == c.Dx());
    CHECK(pc.y == Catch::Approx(c.epsilon));
}
