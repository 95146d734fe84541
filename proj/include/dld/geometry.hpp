/// @file geometry.hpp
/// @brief DLD unit-cell geometry: post placement, solid/fluid queries,
///        derived non-dimensional parameters.

#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dld {

/// One repeating tile of the post array. Four quarter-posts sit at the
/// corners; on the periodic cell they add up to a single full post.
struct UnitCellGeometry {
    double F = 0.0;        ///< post diameter / pitch
    int N = 0;             ///< period number of the array
    double Ds = 0.4;       ///< cell pitch
    double D0 = 0.0;       ///< post diameter, F * Ds
    double epsilon = 0.0;  ///< row shift per column, Ds / N
    double gap = 0.0;      ///< Ds - D0

    double Dx() const { return Ds; }
    double Dy() const { return Ds; }
};

struct ReynoldsSpec {
    double rho;  ///< fluid density
    double U;    ///< characteristic velocity
    double L;    ///< characteristic length (gap)
    double mu;   ///< dynamic viscosity
};

inline UnitCellGeometry make_cell(double F, int N, double Ds = 0.4) {
    if (!(F > 0.0) || !(F < 1.0))
        throw std::domain_error("make_cell: F must satisfy 0 < F < 1, got " + std::to_string(F));
    if (N < 1)
        throw std::domain_error("make_cell: N must be >= 1, got " + std::to_string(N));
    if (!(Ds > 0.0))
        throw std::domain_error("make_cell: Ds must be positive, got " + std::to_string(Ds));

    UnitCellGeometry cell;
    cell.F = F;
    cell.N = N;
    cell.Ds = Ds;
    cell.D0 = F * Ds;
    cell.epsilon = Ds / static_cast<double>(N);
    cell.gap = Ds - cell.D0;
    return cell;
}

/// True iff (x, y) lies within radius D0/2 of any corner post center.
/// The post surface itself counts as solid (no-slip holds there).
inline bool is_solid(const UnitCellGeometry& cell, double x, double y) {
    if (x < 0.0 || x > cell.Dx() || y < 0.0 || y > cell.Dy())
        throw std::domain_error("is_solid: point outside the unit cell");
    const double r = 0.5 * cell.D0;
    const double r2 = r * r;
    const double xs[2] = {x, cell.Dx() - x};
    const double ys[2] = {y, cell.Dy() - y};
    for (double cx : xs)
        for (double cy : ys)
            if (cx * cx + cy * cy <= r2) return true;
    return false;
}

/// Same query with y wrapped periodically into [0, Dy). Used by the
/// solver and tracer, which treat the cell as a torus.
inline bool is_solid_wrapped(const UnitCellGeometry& cell, double x, double y) {
    const double dy = cell.Dy();
    y = std::fmod(y, dy);
    if (y < 0.0) y += dy;
    const double dx = cell.Dx();
    x = std::fmod(x, dx);
    if (x < 0.0) x += dx;
    return is_solid(cell, x, y);
}

// ============================================================================
// Tilted (row-shifted) post lattice
// ============================================================================
//
// The device lattice places column m posts at (m Dx, n Dy + m epsilon). The
// solver's tilted cell covers x in [0, Dx] with left-edge posts at the
// corners and right-edge posts raised by epsilon; crossing the right edge
// maps to the left edge with y lowered by epsilon. The untilted queries
// above are the epsilon = 0 special case of these.

/// Wrap a point into the cell, honoring the shear relation
/// field(x + Dx, y) = field(x, y - epsilon) when tilted.
inline void wrap_into_cell(const UnitCellGeometry& cell, double& x, double& y, bool tilted) {
    const double Dx = cell.Dx(), Dy = cell.Dy();
    if (tilted) {
        const double k = std::floor(x / Dx);
        x -= k * Dx;
        y -= k * cell.epsilon;
        if (x >= Dx) {  // guard against floor rounding at the seam
            x -= Dx;
            y -= cell.epsilon;
        }
    } else {
        x = std::fmod(x, Dx);
        if (x < 0.0) x += Dx;
    }
    y = std::fmod(y, Dy);
    if (y < 0.0) y += Dy;
}

struct PostCenter {
    double x, y;
};

/// Nearest lattice post center to a point already wrapped into the cell.
/// Returns the distance; the center is reported in the same frame as (x, y).
inline double nearest_post_center(const UnitCellGeometry& cell, double x, double y, bool tilted,
                                  PostCenter& center) {
    const double Dx = cell.Dx(), Dy = cell.Dy();
    const double shift = tilted ? cell.epsilon : 0.0;
    double best = std::numeric_limits<double>::max();
    for (double cy : {-Dy, 0.0, Dy, 2.0 * Dy}) {
        double ddx = x, ddy = y - cy;
        double d = std::sqrt(ddx * ddx + ddy * ddy);
        if (d < best) {
            best = d;
            center = {0.0, cy};
        }
        ddx = x - Dx;
        ddy = y - (cy + shift);
        d = std::sqrt(ddx * ddx + ddy * ddy);
        if (d < best) {
            best = d;
            center = {Dx, cy + shift};
        }
    }
    return best;
}

/// Solid test against the (possibly tilted) post lattice; wraps internally.
inline bool lattice_is_solid(const UnitCellGeometry& cell, double x, double y, bool tilted) {
    if (!tilted) return is_solid_wrapped(cell, x, y);
    wrap_into_cell(cell, x, y, true);
    PostCenter c;
    return nearest_post_center(cell, x, y, true, c) <= 0.5 * cell.D0;
}

inline double reynolds(const ReynoldsSpec& spec) {
    if (!(spec.rho > 0.0) || !(spec.U > 0.0) || !(spec.L > 0.0) || !(spec.mu > 0.0))
        throw std::domain_error("reynolds: all parameters must be strictly positive");
    return spec.rho * spec.U * spec.L / spec.mu;
}

}  // namespace dld
