/// @file tracer.hpp
/// @brief Massless particle tracing through a flow source, post-collision
///        reflection, zig-zag / bumped classification, and critical-diameter
///        bisection.
///
/// Flow is solved on the single unit cell; the array tilt appears here as a
/// row shift of -epsilon applied every time the particle wraps into the next
/// column. On tilted (shear-periodic) fields this wrap is the exact lattice
/// translation, so trajectories are seamless across columns. Finite particle
/// size enters through the launch offset and the effective post radius
/// D0/2 + Dp/2 only.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dld/flow_oracle.hpp"
#include "dld/geometry.hpp"

namespace dld {

class SolidQueryError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class TrajectoryStallError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class NoCrossingError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Velocity {
    double u, v;
};

struct Vec2 {
    double x, y;
};

// ============================================================================
// Flow sources
// ============================================================================

/// Anything that can answer "fluid velocity at (x, y)" on the unit cell.
/// Queries wrap periodically; asking strictly inside a post is an error.
class FlowSource {
public:
    virtual ~FlowSource() = default;
    virtual const UnitCellGeometry& cell() const = 0;
    virtual Velocity velocity_at(double x, double y) const = 0;
    /// Length scale used to cap integration steps.
    virtual double step_scale() const = 0;
    /// Whether the underlying field uses the tilted (shear-periodic) lattice.
    virtual bool tilted() const = 0;
};

namespace detail {

inline void check_not_solid(const UnitCellGeometry& cell, double x, double y, bool tilted) {
    PostCenter c;
    const double d = nearest_post_center(cell, x, y, tilted, c);
    if (d < 0.5 * cell.D0)
        throw SolidQueryError("velocity query inside post at (" + std::to_string(x) + ", " +
                              std::to_string(y) + ")");
}

}  // namespace detail

/// Gridded field with bilinear interpolation.
class GridFlowSource final : public FlowSource {
public:
    explicit GridFlowSource(const FlowField& field) : field_(&field) {}

    const UnitCellGeometry& cell() const override { return field_->cell; }

    Velocity velocity_at(double x, double y) const override {
        wrap_into_cell(field_->cell, x, y, field_->tilted);
        detail::check_not_solid(field_->cell, x, y, field_->tilted);
        const FieldSample s = interp_field_local(*field_, x, y);
        return {s.u, s.v};
    }

    double step_scale() const override { return std::min(field_->dx(), field_->dy()); }

    bool tilted() const override { return field_->tilted; }

private:
    const FlowField* field_;
};

// ============================================================================
// Integration primitives
// ============================================================================

/// Classical 4-stage Runge-Kutta step of dx/dt = v_f(x).
inline Vec2 step_rk4(const FlowSource& src, Vec2 pos, double dt) {
    if (!(dt > 0.0)) throw std::domain_error("step_rk4: dt must be positive");
    const Velocity k1 = src.velocity_at(pos.x, pos.y);
    const Velocity k2 = src.velocity_at(pos.x + 0.5 * dt * k1.u, pos.y + 0.5 * dt * k1.v);
    const Velocity k3 = src.velocity_at(pos.x + 0.5 * dt * k2.u, pos.y + 0.5 * dt * k2.v);
    const Velocity k4 = src.velocity_at(pos.x + dt * k3.u, pos.y + dt * k3.v);
    return {pos.x + dt / 6.0 * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u),
            pos.y + dt / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v)};
}

enum class CollisionRule {
    reflect,  ///< normal velocity reversed, tangential kept
    slide     ///< normal velocity zeroed (sensitivity alternative)
};

struct CollisionResult {
    Vec2 pos;
    Velocity vel;
};

/// Project a penetrating particle back to the effective-radius circle and
/// apply the reflection law to its velocity. Contact acts only against an
/// approaching particle: an outgoing normal component (flow already leaving
/// the surface) passes through unchanged, otherwise departures from the rear
/// of a post would be reversed and the particle pinned at the stagnation line.
inline CollisionResult resolve_collision(Vec2 pos, Velocity vel, Vec2 post_center,
                                         double effective_radius,
                                         CollisionRule rule = CollisionRule::reflect) {
    const double dx = pos.x - post_center.x, dy = pos.y - post_center.y;
    const double dist = std::sqrt(dx * dx + dy * dy);
    if (dist == 0.0)
        throw std::domain_error("resolve_collision: particle exactly at post center");
    if (dist >= effective_radius) return {pos, vel};  // nothing to resolve
    const double nx = dx / dist, ny = dy / dist;
    CollisionResult r;
    r.pos = {post_center.x + nx * effective_radius, post_center.y + ny * effective_radius};
    const double vn = vel.u * nx + vel.v * ny;
    if (vn >= 0.0) {
        r.vel = vel;
        return r;
    }
    const double factor = (rule == CollisionRule::reflect) ? 2.0 : 1.0;
    r.vel = {vel.u - factor * vn * nx, vel.v - factor * vn * ny};
    return r;
}

// ============================================================================
// Mode classification
// ============================================================================

enum class Mode { zigzag, bumped, undetermined };

inline std::string mode_name(Mode m) {
    switch (m) {
        case Mode::zigzag: return "zigzag";
        case Mode::bumped: return "bumped";
        case Mode::undetermined: return "undetermined";
    }
    return "?";
}

struct WrapEvent {
    int column;    ///< column index just entered
    double shift;  ///< row shift applied
};

struct TrajectoryPoint {
    double t, x_device, y_device;
    int column;
};

struct Trajectory {
    std::vector<TrajectoryPoint> points;
    std::vector<WrapEvent> wrap_events;
    Mode mode = Mode::undetermined;
    double delta_y_device = 0.0;
};

struct TraceOptions {
    double cfl = 0.2;  ///< step displacement as a fraction of step_scale
    long max_steps = 4000000;
    CollisionRule collision = CollisionRule::reflect;
    int record_stride = 1;  ///< keep every k-th trajectory point
    bool record_points = false;
};

/// Launch a particle of diameter Dp at (0, D0/2 + Dp/2) and integrate until
/// it has traversed N columns. On reaching x >= Dx the position wraps
/// (x -= Dx) and the row shift y -= epsilon applies. Device-frame lateral
/// displacement after N columns is (y_final + N epsilon) - y_start; bumped
/// means it reaches at least half the locked-mode displacement N epsilon.
inline Trajectory trace_particle(const FlowSource& src, const UnitCellGeometry& cell, double Dp,
                                 const TraceOptions& opts = {}) {
    if (!(Dp > 0.0) || !(Dp < cell.gap))
        throw std::domain_error("trace_particle: particle diameter must satisfy 0 < Dp < gap");
    const double Dx = cell.Dx();
    const bool tilted = src.tilted();
    const double r_eff = 0.5 * (cell.D0 + Dp);
    const double h = src.step_scale();
    const double y_start = 0.5 * cell.D0 + 0.5 * Dp;

    double x = 0.0, y_cont = y_start;  // x in [0, Dx); y carries shifts, no wrap
    long column = 0;
    double t = 0.0;
    Trajectory traj;
    if (opts.record_points) traj.points.push_back({0.0, 0.0, y_start, 0});

    // Nearest post in the (possibly tilted) lattice, reported in the
    // continuous y frame of the particle.
    auto nearest = [&](double xq, double yq, Vec2& center) {
        double yw = std::fmod(yq, cell.Dy());
        if (yw < 0.0) yw += cell.Dy();
        PostCenter c;
        const double d = nearest_post_center(cell, xq, yw, tilted, c);
        center = {c.x, c.y + (yq - yw)};
        return d;
    };

    long steps = 0;
    while (column < cell.N) {
        if (++steps > opts.max_steps)
            throw TrajectoryStallError("trace_particle: step budget exhausted at column " +
                                       std::to_string(column) + " of " + std::to_string(cell.N));

        // resolve penetration of the effective circle before stepping
        Vec2 center;
        double dist = nearest(x, y_cont, center);
        Velocity vel{0.0, 0.0};
        bool collided = false;
        if (dist < r_eff) {
            const Velocity vf =
                src.velocity_at(center.x + (x - center.x) * (r_eff / dist),
                                center.y + (y_cont - center.y) * (r_eff / dist));
            const CollisionResult cr =
                resolve_collision({x, y_cont}, vf, center, r_eff, opts.collision);
            x = cr.pos.x;
            y_cont = cr.pos.y;
            vel = cr.vel;
            collided = true;
            dist = r_eff;
        } else {
            vel = src.velocity_at(x, y_cont);
        }

        const double speed = std::max(std::hypot(vel.u, vel.v), 1e-14);
        double dt = opts.cfl * h / speed;
        // approach limiting: do not cross more than half the remaining
        // distance to the effective surface in one step
        const double room = dist - r_eff;
        if (room > 0.0) dt = std::min(dt, std::max(0.5 * room, 0.05 * h) / speed);

        if (collided) {
            // Euler micro-step along the resolved velocity; RK4 stages would
            // immediately re-enter the circle.
            x += vel.u * dt;
            y_cont += vel.v * dt;
        } else {
            try {
                const Vec2 next = step_rk4(src, {x, y_cont}, dt);
                x = next.x;
                y_cont = next.y;
            } catch (const SolidQueryError&) {
                // a stage probed the true post; treat as contact and retry
                const CollisionResult cr =
                    resolve_collision({x, y_cont}, vel, center, r_eff, opts.collision);
                x = cr.pos.x + cr.vel.u * dt;
                y_cont = cr.pos.y + cr.vel.v * dt;
            }
        }
        t += dt;

        while (x >= Dx) {
            x -= Dx;
            y_cont -= cell.epsilon;
            column += 1;
            traj.wrap_events.push_back({static_cast<int>(column), -cell.epsilon});
        }
        while (x < 0.0) {
            x += Dx;
            y_cont += cell.epsilon;
            column -= 1;
            traj.wrap_events.push_back({static_cast<int>(column), cell.epsilon});
        }

        if (opts.record_points && steps % opts.record_stride == 0)
            traj.points.push_back({t, x + column * Dx, y_cont + column * cell.epsilon,
                                   static_cast<int>(column)});
    }

    traj.delta_y_device = (y_cont + cell.N * cell.epsilon) - y_start;
    traj.mode =
        traj.delta_y_device >= 0.5 * cell.N * cell.epsilon ? Mode::bumped : Mode::zigzag;
    if (opts.record_points)
        traj.points.push_back(
            {t, x + column * Dx, y_cont + column * cell.epsilon, static_cast<int>(column)});
    return traj;
}

inline Mode classify_mode(const FlowSource& src, const UnitCellGeometry& cell, double Dp,
                          const TraceOptions& opts = {}) {
    TraceOptions o = opts;
    o.record_points = false;
    return trace_particle(src, cell, Dp, o).mode;
}

// ============================================================================
// Critical diameter
// ============================================================================

struct DcEvaluation {
    double dp;
    Mode mode;
};

struct DcResult {
    double dc = 0.0;
    double bracket_low = 0.0, bracket_high = 0.0;
    long evaluations = 0;
    std::vector<DcEvaluation> log;
};

/// Bisect the smallest bumped diameter over [0.01 gap, 0.99 gap].
inline DcResult critical_diameter(const FlowSource& src, const UnitCellGeometry& cell,
                                  double tol = 1e-4, const TraceOptions& opts = {}) {
    if (!(tol > 0.0)) throw std::domain_error("critical_diameter: tol must be positive");
    DcResult res;
    double lo = 0.01 * cell.gap, hi = 0.99 * cell.gap;
    const Mode m_lo = classify_mode(src, cell, lo, opts);
    const Mode m_hi = classify_mode(src, cell, hi, opts);
    res.log.push_back({lo, m_lo});
    res.log.push_back({hi, m_hi});
    res.evaluations = 2;
    if (m_lo != Mode::zigzag || m_hi != Mode::bumped)
        throw NoCrossingError("critical_diameter: no zigzag/bumped crossing in bracket (" +
                              mode_name(m_lo) + " at " + std::to_string(lo) + ", " +
                              mode_name(m_hi) + " at " + std::to_string(hi) + ")");
    while (hi - lo >= tol) {
        const double mid = 0.5 * (lo + hi);
        const Mode m = classify_mode(src, cell, mid, opts);
        res.log.push_back({mid, m});
        ++res.evaluations;
        if (m == Mode::bumped)
            hi = mid;
        else
            lo = mid;
    }
    res.bracket_low = lo;
    res.bracket_high = hi;
    res.dc = 0.5 * (lo + hi);
    return res;
}

}  // namespace dld
