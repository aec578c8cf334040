#pragma once

// Backward Euler for the mollified problems v' + Av + j_n'(v) = F (SOURCE) and
// v' + Av + gamma* j_n'(gamma v) = F (BOUNDARY).

#include "hemiflow/discretization.hpp"
#include "hemiflow/errors.hpp"
#include "hemiflow/nonsmooth.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace hemiflow {

struct ProblemSpec {
    ProblemKind kind = ProblemKind::Source;
    PiecewisePotential potential;
    Field F;
    std::shared_ptr<const DiscreteSpace> space;
    HypothesisConstants constants;

    void validate() const {
        if (!space) throw std::invalid_argument("problem: space is not set");
        space->check(F);
        if (kind == ProblemKind::Boundary) {
            if (space->bc() != BoundaryCondition::DirichletLeft)
                throw std::invalid_argument("problem: BOUNDARY requires DIRICHLET_LEFT");
            if (potential.growth_exponent() != 2.0) throw std::invalid_argument("problem: BOUNDARY requires p = 2");
        } else if (space->bc() != BoundaryCondition::DirichletBoth) {
            throw std::invalid_argument("problem: SOURCE requires DIRICHLET_BOTH");
        }
    }
};

struct IntegratorConfig {
    double dt = 1e-3;
    double horizon = 1.0;
    unsigned level = 64;  ///< mollification level n
    SelectionPolicy policy = SelectionPolicy::Mid;
    std::uint64_t seed = 0;
    double tolerance = 1e-10;
    int max_iterations = 50;
    int stride = 1;
    unsigned quad_points = 64;
    int max_halvings = 5;

    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("integrator: dt must be > 0");
        if (!(horizon > 0.0)) throw std::invalid_argument("integrator: horizon must be > 0");
        if (dt > horizon) throw std::invalid_argument("integrator: dt must not exceed the horizon");
        if (level < 1) throw std::invalid_argument("integrator: n must be >= 1");
        if (!(tolerance > 0.0)) throw std::invalid_argument("integrator: tolerance must be > 0");
        if (max_iterations < 1) throw std::invalid_argument("integrator: max_iterations must be >= 1");
        if (stride < 1) throw std::invalid_argument("integrator: stride must be >= 1");
    }

    std::size_t steps() const { return static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9)); }
};

/// Scalars recorded after every step (and for the initial state).
struct StepRecord {
    double t = 0.0;
    double l2_sq = 0.0;
    double v_sq = 0.0;
    double lp_p = 0.0;
    double trace = std::numeric_limits<double>::quiet_NaN();
    int fp_iters = 0;
    int halvings = 0;
};

struct Trajectory {
    ProblemKind kind = ProblemKind::Source;
    double dt = 0.0;
    int stride = 1;
    unsigned level = 0;
    double offset = 0.0;  ///< kernel offset realizing the selection policy
    std::vector<double> times;
    std::vector<std::size_t> step_index;
    std::vector<Field> states;
    /// SOURCE: nodal j_n'(v) over dofs; BOUNDARY: one entry j_n'(trace v).
    std::vector<Eigen::VectorXd> xi;
    std::vector<StepRecord> records;
    /// Set when the run aborted; states up to the failure are kept.
    std::string error;

    std::size_t size() const { return states.size(); }
};

namespace detail {

inline Eigen::VectorXd slopes(const ProblemSpec& spec, const MollifiedPotential& mp, const Field& v) {
    if (spec.kind == ProblemKind::Boundary) {
        Eigen::VectorXd g(1);
        g[0] = mp.slope(v[v.size() - 1]);
        return g;
    }
    Eigen::VectorXd g(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) g[i] = mp.slope(v[i]);
    return g;
}

/// Load vector of the nonlinear term for recorded slopes.
inline Eigen::VectorXd nonlinear_load(const ProblemSpec& spec, const Eigen::VectorXd& xi) {
    if (spec.kind == ProblemKind::Boundary) {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(spec.space->dofs());
        r[r.size() - 1] = xi[0];
        return r;
    }
    return spec.space->lumped_mass().cwiseProduct(xi);
}

inline StepRecord make_record(const ProblemSpec& spec, const Field& v, double t) {
    StepRecord r;
    r.t = t;
    const auto nm = norms(*spec.space, v);
    r.l2_sq = nm.l2_sq;
    r.v_sq = nm.v_sq;
    r.lp_p = lp_norm_p(*spec.space, v, spec.potential.growth_exponent());
    if (spec.kind == ProblemKind::Boundary) r.trace = trace(*spec.space, v);
    return r;
}

}  // namespace detail

struct StepResult {
    Field state;
    Eigen::VectorXd xi;
    int iterations = 0;
    double residual = 0.0;
};

namespace detail {

inline StepResult trace_step(const ProblemSpec& spec, const MollifiedPotential& mp, const TridiagonalLDL& system,
                             const Eigen::VectorXd& base, double dt, double tolerance, int max_iterations) {
    const auto& space = *spec.space;
    const Eigen::Index last = space.dofs() - 1;
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(space.dofs());
    unit[last] = 1.0;
    const Field y = system.solve(base);
    const Field z = system.solve(unit);
    const double w = dt * z[last];
    int evaluations = 0;
    auto q = [&](double s) {
        ++evaluations;
        return s + w * mp.slope(s) - y[last];
    };
    // Bracket by doubling outward from y_N.
    double lo = y[last], hi = y[last];
    double q_lo = q(lo), q_hi = q_lo;
    double width = w * (1.0 + std::abs(mp.slope(y[last]))) + 1e-12;
    while (q_lo > 0.0 && evaluations < 4 * max_iterations) {
        hi = lo;
        q_hi = q_lo;
        lo -= width;
        width *= 2.0;
        q_lo = q(lo);
    }
    while (q_hi < 0.0 && evaluations < 4 * max_iterations) {
        lo = hi;
        q_lo = q_hi;
        hi += width;
        width *= 2.0;
        q_hi = q(hi);
    }
    if (q_lo > 0.0 || q_hi < 0.0) throw NonConvergence("trace equation could not be bracketed", q_hi - q_lo);
    double root = q_lo == 0.0 ? lo : hi;
    if (q_lo != 0.0 && q_hi != 0.0) {
        std::uintmax_t iters = static_cast<std::uintmax_t>(std::max(8, 2 * max_iterations));
        const auto bracket = boost::math::tools::toms748_solve(q, lo, hi, q_lo, q_hi,
                                                                boost::math::tools::eps_tolerance<double>(52), iters);
        root = 0.5 * (bracket.first + bracket.second);
    }
    Eigen::VectorXd g(1);
    g[0] = mp.slope(root);
    Field v = y - dt * g[0] * z;
    Eigen::VectorXd g_next = slopes(spec, mp, v);
    const double residual = std::sqrt(std::max(0.0, dual_norm_sq(space, nonlinear_load(spec, g_next - g))));
    if (!(residual <= tolerance))
        throw NonConvergence("trace equation residual " + std::to_string(residual) + " above tolerance", residual);
    return {v, g_next, evaluations, residual};
}

}  // namespace detail

/// One backward Euler step of size dt, fixed-point iteration on the nonlinear term.
///
/// Iterates (M + dt K) v^{k+1} = M v + dt M F - dt N(v^k) from v^0 = v and stops
/// when the dual norm of N(v^{k+1}) - N(v^k) is below the tolerance.
///
/// BOUNDARY: the nonlinearity acts on the trace dof only, so v = y - dt g z with
/// y = A^{-1} base, z = A^{-1} e_N, and the trace solves the scalar equation
/// s + dt z_N j_n'(s) = y_N. It is bracketed and solved by TOMS 748 (derivative
/// free); the iteration count is the number of slope evaluations.
inline StepResult step(const Field& state, const ProblemSpec& spec, const MollifiedPotential& mp, double dt,
                       double tolerance, int max_iterations) {
    const auto& space = *spec.space;
    const TridiagonalLDL system(space.mass() + space.stiffness().scaled(dt));
    const Eigen::VectorXd base = space.mass().apply(state) + dt * space.mass().apply(spec.F);
    if (spec.kind == ProblemKind::Boundary) return detail::trace_step(spec, mp, system, base, dt, tolerance, max_iterations);
    Field v = state;
    Eigen::VectorXd g = detail::slopes(spec, mp, v);
    double residual = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= max_iterations; ++k) {
        Field next = system.solve(base - dt * detail::nonlinear_load(spec, g));
        Eigen::VectorXd g_next = detail::slopes(spec, mp, next);
        residual = std::sqrt(std::max(0.0, dual_norm_sq(space, detail::nonlinear_load(spec, g_next - g))));
        v = std::move(next);
        g = std::move(g_next);
        if (residual <= tolerance) return {v, g, k, residual};
    }
    throw NonConvergence("fixed-point iteration stalled at residual " + std::to_string(residual), residual);
}

namespace detail {

struct AdvanceResult {
    Field state;
    Eigen::VectorXd xi;
    int iterations = 0;
    int halvings = 0;
};

inline AdvanceResult advance(const Field& v, const ProblemSpec& spec, const MollifiedPotential& mp, double dt,
                             const IntegratorConfig& cfg, int depth) {
    try {
        auto r = step(v, spec, mp, dt, cfg.tolerance, cfg.max_iterations);
        return {std::move(r.state), std::move(r.xi), r.iterations, depth};
    } catch (const NonConvergence&) {
        if (depth >= cfg.max_halvings) throw;
    }
    auto first = advance(v, spec, mp, 0.5 * dt, cfg, depth + 1);
    auto second = advance(first.state, spec, mp, 0.5 * dt, cfg, depth + 1);
    second.iterations += first.iterations;
    second.halvings = std::max(first.halvings, second.halvings);
    return second;
}

}  // namespace detail

/// Mollified potential used by a run: level n and the policy's kernel offset.
inline MollifiedPotential run_potential(const ProblemSpec& spec, const IntegratorConfig& cfg) {
    return mollify(spec.potential, cfg.level, cfg.quad_points, selection_offset(cfg.policy, cfg.seed));
}

/// Integrate from v0 to the horizon. States and xi are kept every `stride`
/// steps and at the final step; scalar records are kept for every step.
/// A step that fails after max_halvings throws NonConvergence.
inline Trajectory integrate(const ProblemSpec& spec, const Field& v0, const IntegratorConfig& cfg) {
    spec.validate();
    cfg.validate();
    spec.space->check(v0);
    const auto mp = run_potential(spec, cfg);
    const std::size_t steps = cfg.steps();

    Trajectory traj;
    traj.kind = spec.kind;
    traj.dt = cfg.dt;
    traj.stride = cfg.stride;
    traj.level = cfg.level;
    traj.offset = mp.offset();
    traj.records.reserve(steps + 1);

    Field v = v0;
    traj.times.push_back(0.0);
    traj.step_index.push_back(0);
    traj.states.push_back(v);
    traj.xi.push_back(detail::slopes(spec, mp, v));
    traj.records.push_back(detail::make_record(spec, v, 0.0));

    for (std::size_t k = 1; k <= steps; ++k) {
        auto r = detail::advance(v, spec, mp, cfg.dt, cfg, 0);
        v = std::move(r.state);
        const double t = static_cast<double>(k) * cfg.dt;
        auto rec = detail::make_record(spec, v, t);
        rec.fp_iters = r.iterations;
        rec.halvings = r.halvings;
        traj.records.push_back(rec);
        if (k % static_cast<std::size_t>(cfg.stride) == 0 || k == steps) {
            traj.times.push_back(t);
            traj.step_index.push_back(k);
            traj.states.push_back(v);
            traj.xi.push_back(std::move(r.xi));
        }
    }
    return traj;
}

/// Max over stored consecutive steps of sqrt(r^T (M + K)^{-1} r) with
/// r = M (v+ - v)/dt + K v+ + N(xi+) - M F. Steps that needed dt halving are skipped.
inline double residual_check(const Trajectory& traj, const ProblemSpec& spec) {
    if (traj.stride != 1) throw std::invalid_argument("residual_check: needs a stride-1 trajectory");
    const auto& space = *spec.space;
    const Eigen::VectorXd MF = space.mass().apply(spec.F);
    double worst = 0.0;
    for (std::size_t i = 1; i < traj.states.size(); ++i) {
        if (traj.step_index[i] != traj.step_index[i - 1] + 1) continue;
        if (traj.records[traj.step_index[i]].halvings > 0) continue;
        const Field& v = traj.states[i - 1];
        const Field& w = traj.states[i];
        const Eigen::VectorXd r = space.mass().apply(w - v) / traj.dt + space.stiffness().apply(w) +
                                  detail::nonlinear_load(spec, traj.xi[i]) - MF;
        worst = std::max(worst, std::sqrt(std::max(0.0, dual_norm_sq(space, r))));
    }
    return worst;
}

/// Range of the one-sided slopes of j over [s - radius, s + radius]; radius 0 gives dj(s).
inline SubgradientInterval slope_envelope(const PiecewisePotential& pot, double s, double radius) {
    if (radius <= 0.0) return clarke_subdifferential(pot, s);
    const double lo = s - radius, hi = s + radius;
    double mn = std::numeric_limits<double>::infinity(), mx = -mn;
    auto take = [&](double value) {
        mn = std::min(mn, value);
        mx = std::max(mx, value);
    };
    std::vector<double> cuts{lo};
    for (double b : pot.breakpoints())
        if (b > lo && b < hi) cuts.push_back(b);
    cuts.push_back(hi);
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const auto& slope = pot.slope_pieces()[pot.piece_index(0.5 * (cuts[k] + cuts[k + 1]))];
        constexpr int samples = 64;
        for (int i = 0; i <= samples; ++i)
            take(poly::eval(slope, cuts[k] + (cuts[k + 1] - cuts[k]) * i / samples));
    }
    return {mn, mx};
}

/// Number of (stored time, node) pairs with dist(xi, envelope) > tol, where the
/// envelope is dj(v) for radius 0 and the slope range over |s - v| <= radius otherwise.
inline std::size_t selection_consistency(const Trajectory& traj, const ProblemSpec& spec, double tol,
                                         double radius = 0.0) {
    std::size_t violations = 0;
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const Field& v = traj.states[i];
        const auto& xi = traj.xi[i];
        if (spec.kind == ProblemKind::Boundary) {
            const auto iv = slope_envelope(spec.potential, v[v.size() - 1], radius);
            if (iv.distance(xi[0]) > tol) ++violations;
            continue;
        }
        for (Eigen::Index k = 0; k < v.size(); ++k)
            if (slope_envelope(spec.potential, v[k], radius).distance(xi[k]) > tol) ++violations;
    }
    return violations;
}

inline std::size_t cells_for(double h) {
    const double cells = std::round(1.0 / h);
    if (!(h > 0.0) || std::abs(cells * h - 1.0) > 1e-9) throw std::invalid_argument("h must be 1/integer");
    return static_cast<std::size_t>(cells);
}

/// Rerun on a uniform mesh of size fine_h with step fine_dt and interpolate
/// the states back onto spec.space at the output times of cfg.
inline Trajectory reference_solve(const ProblemSpec& spec, const Field& v0, const IntegratorConfig& cfg,
                                  double fine_h, double fine_dt) {
    spec.validate();
    cfg.validate();
    if (!(fine_h < spec.space->mesh().max_size()) || !(fine_dt < cfg.dt))
        throw std::invalid_argument("reference_solve: fine_h and fine_dt must be finer than the configuration");
    const double ratio = cfg.dt / fine_dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9) throw std::invalid_argument("reference_solve: dt/fine_dt must be an integer");

    auto fine_space = build_space(Mesh1D::uniform(cells_for(fine_h)), spec.space->bc(), false);
    ProblemSpec fine = spec;
    fine.space = fine_space;
    fine.F = transfer(*spec.space, spec.F, *fine_space);
    IntegratorConfig fine_cfg = cfg;
    fine_cfg.dt = fine_dt;
    fine_cfg.stride = cfg.stride * static_cast<int>(std::round(ratio));
    const auto run = integrate(fine, transfer(*spec.space, v0, *fine_space), fine_cfg);

    Trajectory out;
    out.kind = spec.kind;
    out.dt = cfg.dt;
    out.stride = cfg.stride;
    out.level = cfg.level;
    out.offset = run.offset;
    const auto mp = run_potential(spec, cfg);
    for (std::size_t i = 0; i < run.size(); ++i) {
        Field v = transfer(*fine_space, run.states[i], *spec.space);
        out.times.push_back(run.times[i]);
        out.step_index.push_back(static_cast<std::size_t>(std::llround(run.times[i] / cfg.dt)));
        out.xi.push_back(detail::slopes(spec, mp, v));
        out.records.push_back(detail::make_record(spec, v, run.times[i]));
        out.states.push_back(std::move(v));
    }
    return out;
}

}  // namespace hemiflow
