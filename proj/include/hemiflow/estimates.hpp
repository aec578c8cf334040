#pragma once

// Sampled checks of the energy, absorbing-set, truncation and flattening
// inequalities, with the explicit constant chains they rely on.

#include "hemiflow/discretization.hpp"
#include "hemiflow/errors.hpp"
#include "hemiflow/nonsmooth.hpp"
#include "hemiflow/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace hemiflow {

/// Margins (RHS - LHS) of one inequality along a time series.
struct InequalityReport {
    std::string id;
    double slack = 0.0;
    std::vector<double> times;
    std::vector<double> margins;
    double min_margin = std::numeric_limits<double>::infinity();
    std::size_t violations = 0;
    /// Sample points where a premise failed, so the inequality was not asserted.
    std::size_t skipped = 0;
    bool asserted = true;
    std::string note;

    void add(double t, double margin) {
        times.push_back(t);
        margins.push_back(margin);
        min_margin = std::min(min_margin, margin);
        if (margin < -slack) ++violations;
    }
    bool holds() const { return violations == 0; }
};

inline void write_report(std::ostream& os, const InequalityReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s samples=%zu min_margin=%.17g violations=%zu skipped=%zu slack=%.17g asserted=%s",
                  r.id.c_str(), r.margins.size(), r.margins.empty() ? 0.0 : r.min_margin, r.violations, r.skipped,
                  r.slack, r.asserted ? "yes" : "no");
    os << buf;
    if (!r.note.empty()) os << " note=\"" << r.note << '"';
    os << '\n';
}

/// slack = c_slack (dt + h^2).
inline double discretization_slack(double c_slack, double dt, double h) { return c_slack * (dt + h * h); }

// ---------------------------------------------------------------------------
// Translated Gronwall lemma

namespace detail {

template <class Forcing>
InequalityReport gronwall_core(const std::vector<double>& y, const std::vector<double>& h, double lambda, double dt,
                               double slack, Forcing&& forcing) {
    if (!(lambda > 0.0) || !(dt > 0.0)) throw std::invalid_argument("translated_gronwall: lambda and dt must be > 0");
    if (h.size() != y.size()) throw std::invalid_argument("translated_gronwall: y and h lengths differ");
    const double steps_per_unit = 1.0 / dt;
    const auto unit = static_cast<std::size_t>(std::llround(steps_per_unit));
    if (std::abs(steps_per_unit - static_cast<double>(unit)) > 1e-9)
        throw std::invalid_argument("translated_gronwall: 1/dt must be an integer");
    if (y.size() < 2 * unit + 1) throw std::invalid_argument("translated_gronwall: series must cover [0, 2]");

    const std::size_t n = y.size();
    // bad[i] = premise failures among forward differences 0..i-1.
    std::vector<std::size_t> bad(n, 0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double lhs = (y[i + 1] - y[i]) / dt + lambda * y[i];
        const double allowance = dt * (lambda * lambda * std::abs(y[i]) + lambda * std::abs(h[i]));
        bad[i + 1] = bad[i] + (lhs <= h[i] + allowance ? 0 : 1);
    }

    InequalityReport report;
    report.id = "translated_gronwall";
    report.slack = slack;
    for (std::size_t i = 0; i + 2 * unit < n; ++i) {
        if (bad[i + 2 * unit] - bad[i] > 0) {
            ++report.skipped;
            continue;
        }
        double int_y = 0.0;
        for (std::size_t k = i; k < i + unit; ++k) int_y += 0.5 * dt * (y[k] + y[k + 1]);
        const double rhs = std::exp(-lambda) * int_y + forcing(i, unit);
        report.add(static_cast<double>(i) * dt, rhs - y[i + 2 * unit]);
    }
    if (bad[n - 1] > 0) report.note = std::to_string(bad[n - 1]) + " premise failures";
    report.asserted = !report.margins.empty();
    return report;
}

}  // namespace detail

/// If y' + lambda y <= h on [t, t+2] then
/// y(t+2) <= e^{-lambda} int_t^{t+1} y + e^{-lambda (t+2)} int_t^{t+2} e^{lambda s} h(s) ds.
///
/// y and h are sampled with step dt from s = 0. The premise is tested with
/// forward differences plus a first-order allowance dt (lambda^2 |y| + lambda |h|);
/// windows where it fails are counted as skipped. Integrals use the trapezoid rule.
inline InequalityReport translated_gronwall(const std::vector<double>& y, const std::vector<double>& h, double lambda,
                                            double dt, double slack = 0.0) {
    return detail::gronwall_core(y, h, lambda, dt, slack, [&](std::size_t i, std::size_t unit) {
        // e^{-lambda(t+2)} int e^{lambda s} h = int e^{-lambda (t+2-s)} h(s) ds.
        double total = 0.0;
        for (std::size_t k = i; k < i + 2 * unit; ++k) {
            const double w0 = std::exp(-lambda * static_cast<double>(i + 2 * unit - k) * dt);
            const double w1 = std::exp(-lambda * static_cast<double>(i + 2 * unit - k - 1) * dt);
            total += 0.5 * dt * (w0 * h[k] + w1 * h[k + 1]);
        }
        return total;
    });
}

/// Constant h: the forcing part is replaced by its closed-form bound h/lambda.
inline InequalityReport translated_gronwall(const std::vector<double>& y, double h, double lambda, double dt,
                                            double slack = 0.0) {
    auto report = detail::gronwall_core(y, std::vector<double>(y.size(), h), lambda, dt, slack,
                                        [&](std::size_t, std::size_t) { return h / lambda; });
    report.id = "translated_gronwall_constant";
    return report;
}

/// Trapezoid value of e^{-lambda(t+2)} int_t^{t+2} e^{lambda s} h ds for constant h.
inline double gronwall_forcing_integral(double h, double lambda, double dt) {
    const auto unit2 = static_cast<std::size_t>(std::llround(2.0 / dt));
    double total = 0.0;
    for (std::size_t k = 0; k < unit2; ++k) {
        const double w0 = std::exp(-lambda * static_cast<double>(unit2 - k) * dt);
        const double w1 = std::exp(-lambda * static_cast<double>(unit2 - k - 1) * dt);
        total += 0.5 * dt * h * (w0 + w1);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Constants

/// Named constants of one problem instance.
struct ConstantSet {
    ProblemKind kind = ProblemKind::Source;
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0, p = 2.0;
    double lambda1 = 0.0;
    double trace_norm_sq = 0.0;  ///< ||gamma||^2 (BOUNDARY)
    double m_omega = 1.0;
    double m_gamma = 1.0;
    double F_h_sq = 0.0;     ///< ||F||_H^2
    double F_dual_sq = 0.0;  ///< ||F||_{V*}^2
    // BOUNDARY chain.
    double C1 = 0.0, C2 = 0.0, C3 = 0.0, C4 = 0.0, C5 = 0.0, C6 = 0.0, D1 = 0.0, D2 = 0.0;
    bool c2_nonpositive = false;
    // Absorbing ball: ||v(t)||^2 <= ||v0||^2 e^{-kappa t} + offset, radius R0.
    double kappa = 0.0;
    double offset = 0.0;
    double R0 = 0.0;
    // SOURCE truncation.
    double forcing_factor = 4.0;
    double threshold_M = 0.0;  ///< (-2c/d)^{1/p}
};

inline double absorbing_radius(double C1, double C2, double lambda1) { return C2 / (C1 * lambda1) + 1.0; }

/// Constant chain from verified hypothesis constants and the discrete space.
///
/// BOUNDARY: C1 = 1 - d||g||^2, C2 = ||F||_{V*}^2 / C1 - 2 c m(G), R0 = C2/(C1 l1) + 1,
/// C3 = ||F||_{V*} + a ||g|| m(G)^{1/2}, C4 = 1 + b ||g||^2, C5 = (C2 + R0^2)/C1,
/// C6 = 2 C3^2 + 2 C4^2 C5, D1 = 2||F||_{V*}^2 + 4||g||^2 a^2 m(G), D2 = 4 ||g||^2 b^2.
/// SOURCE: kappa = l1, offset = (||F||_H^2 - 2 c m l1)/l1^2, R0 = offset + 1.
inline ConstantSet derive_constants(const ProblemSpec& spec, double forcing_factor = 4.0) {
    spec.validate();
    const auto& h = spec.constants;
    const auto& space = *spec.space;
    ConstantSet k;
    k.kind = spec.kind;
    k.a = h.a;
    k.b = h.b;
    k.c = h.c;
    k.d = h.d;
    k.p = spec.potential.growth_exponent();
    k.lambda1 = space.lambda1();
    k.F_h_sq = space.mass().quadratic_form(spec.F);
    k.F_dual_sq = forcing_dual_sq(space, spec.F);
    k.forcing_factor = forcing_factor;
    if (spec.kind == ProblemKind::Boundary) {
        k.trace_norm_sq = space.trace_norm_sq();
        k.C1 = 1.0 - k.d * k.trace_norm_sq;
        if (!(k.C1 > 0.0))
            throw HypothesisViolation("derive_constants: C1 = 1 - d||gamma||^2 = " + std::to_string(k.C1) + " <= 0");
        k.C2 = k.F_dual_sq / k.C1 - 2.0 * k.c * k.m_gamma;
        k.c2_nonpositive = !(k.C2 > 0.0);
        k.kappa = k.C1 * k.lambda1;
        k.offset = k.C2 / (k.C1 * k.lambda1);
        k.R0 = absorbing_radius(k.C1, k.C2, k.lambda1);
        const double g = std::sqrt(k.trace_norm_sq);
        k.C3 = std::sqrt(k.F_dual_sq) + k.a * g * std::sqrt(k.m_gamma);
        k.C4 = 1.0 + k.b * k.trace_norm_sq;
        k.C5 = (k.C2 + k.R0 * k.R0) / k.C1;
        k.C6 = 2.0 * k.C3 * k.C3 + 2.0 * k.C4 * k.C4 * k.C5;
        k.D1 = 2.0 * k.F_dual_sq + 4.0 * k.trace_norm_sq * k.a * k.a * k.m_gamma;
        k.D2 = 4.0 * k.trace_norm_sq * k.b * k.b;
    } else {
        if (k.c > 0.0) throw HypothesisViolation("derive_constants: SOURCE requires c <= 0");
        k.kappa = k.lambda1;
        k.offset = (k.F_h_sq - 2.0 * k.c * k.m_omega * k.lambda1) / (k.lambda1 * k.lambda1);
        k.R0 = k.offset + 1.0;
        k.threshold_M = k.d > 0.0 ? std::pow(-2.0 * k.c / k.d, 1.0 / k.p) : 0.0;
    }
    return k;
}

/// Time after which ||v0||^2 e^{-kappa t} + offset <= R0^2; 0 if already inside.
inline double predicted_entry_time(const ConstantSet& k, double v0_l2_sq) {
    const double room = k.R0 * k.R0 - k.offset;
    if (!(room > 0.0)) return std::numeric_limits<double>::infinity();
    if (v0_l2_sq <= room) return 0.0;
    return std::log(v0_l2_sq / room) / k.kappa;
}

// ---------------------------------------------------------------------------
// Energy inequalities

/// SOURCE: (y+ - y)/dt + ||v+||_V^2 + 2d ||v+||_p^p <= ||F||_H^2/l1 - 2 c m(Omega) per step.
inline InequalityReport check_energy_inequality(const Trajectory& traj, const ConstantSet& k, double slack) {
    InequalityReport r;
    r.id = "first_inequality";
    r.slack = slack;
    const double rhs = k.F_h_sq / k.lambda1 - 2.0 * k.c * k.m_omega;
    for (std::size_t i = 1; i < traj.records.size(); ++i) {
        const auto& prev = traj.records[i - 1];
        const auto& cur = traj.records[i];
        if (cur.halvings > 0) {
            ++r.skipped;
            continue;
        }
        const double lhs = (cur.l2_sq - prev.l2_sq) / traj.dt + cur.v_sq + 2.0 * k.d * cur.lp_p;
        r.add(cur.t, rhs - lhs);
    }
    return r;
}

/// BOUNDARY chain: energy (y+ - y)/dt + C1 ||v+||^2 <= C2; derivative bound
/// ||v'||_{V*} <= C3 + C4 ||v|| over stored intervals; unit-window integrals
/// int ||v||^2 <= C5 and int ||v'||_{V*}^2 <= C6 for windows starting at or after t0.
inline std::vector<InequalityReport> check_boundary_chain(const Trajectory& traj, const ProblemSpec& spec,
                                                          const ConstantSet& k, double slack, double t0) {
    const auto& space = *spec.space;
    std::vector<InequalityReport> out(4);
    out[0].id = "p1_energy";
    out[1].id = "p1_derivative";
    out[2].id = "p1_integral_C5";
    out[3].id = "p1_integral_C6";
    for (auto& r : out) r.slack = slack;

    const auto& rec = traj.records;
    for (std::size_t i = 1; i < rec.size(); ++i) {
        if (rec[i].halvings > 0) {
            ++out[0].skipped;
            continue;
        }
        out[0].add(rec[i].t, k.C2 - ((rec[i].l2_sq - rec[i - 1].l2_sq) / traj.dt + k.C1 * rec[i].v_sq));
    }

    // Interval averages of v' between stored states, in the V* norm.
    std::vector<double> dual_sq(traj.states.size(), 0.0);
    for (std::size_t i = 1; i < traj.states.size(); ++i) {
        const double span = traj.times[i] - traj.times[i - 1];
        const Eigen::VectorXd w = (traj.states[i] - traj.states[i - 1]) / span;
        dual_sq[i] = space.stiffness_factor().inverse_form(space.mass().apply(w));
        double vmax = 0.0;
        for (std::size_t s = traj.step_index[i - 1] + 1; s <= traj.step_index[i]; ++s)
            vmax = std::max(vmax, std::sqrt(rec[s].v_sq));
        out[1].add(traj.times[i], k.C3 + k.C4 * vmax - std::sqrt(dual_sq[i]));
    }

    const auto unit = static_cast<std::size_t>(std::llround(1.0 / traj.dt));
    const std::size_t last = rec.size() - 1;
    for (std::size_t s = 0; s + unit <= last; ++s) {
        if (rec[s].t + 1e-12 < t0) continue;
        double integral = 0.0;
        for (std::size_t j = s + 1; j <= s + unit; ++j) integral += traj.dt * rec[j].v_sq;
        out[2].add(rec[s].t, k.C5 - integral);
    }
    if (traj.stride == 1) {
        for (std::size_t s = 0; s + unit < traj.states.size(); ++s) {
            if (traj.times[s] + 1e-12 < t0) continue;
            double integral = 0.0;
            for (std::size_t j = s + 1; j <= s + unit; ++j) integral += traj.dt * dual_sq[j];
            out[3].add(traj.times[s], k.C6 - integral);
        }
    } else {
        out[3].asserted = false;
        out[3].note = "needs stride-1 states";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Absorbing bounds

/// ||v(t)||_H^2 <= ||v0||_H^2 e^{-kappa t} + offset at every step record.
inline InequalityReport check_decay_bound(const Trajectory& traj, const ConstantSet& k, double slack) {
    InequalityReport r;
    r.id = "decay_bound";
    r.slack = slack;
    const double y0 = traj.records.front().l2_sq;
    for (const auto& rec : traj.records) r.add(rec.t, y0 * std::exp(-k.kappa * rec.t) + k.offset - rec.l2_sq);
    return r;
}

// ---------------------------------------------------------------------------
// L^p truncation machinery (SOURCE)

/// RHS of the truncation tail bound at level M for initial radius R.
inline double truncation_tail_rhs(const ConstantSet& k, double M, double R) {
    const double pm2 = k.p - 2.0;
    const double decay = std::exp(-(k.d * k.p / 4.0) * std::pow(M, pm2));
    const double l1 = k.lambda1;
    const double base = R * R / (2.0 * k.d) +
                        (k.F_h_sq - 2.0 * k.c * k.m_omega * l1) * (1.0 + l1) / (2.0 * k.d * l1 * l1);
    return decay * base + 4.0 * k.forcing_factor * k.F_h_sq / (k.d * k.d * std::pow(M, pm2));
}

/// Smallest M >= (-2c/d)^{1/p} with truncation_tail_rhs(M) <= eps: geometric
/// bracketing M0 2^k, then 64 bisections.
inline double choose_M(const ConstantSet& k, double eps, double R) {
    if (k.kind != ProblemKind::Source) throw std::invalid_argument("choose_M: SOURCE problems only");
    if (!(k.p > 2.0)) throw std::invalid_argument("choose_M: needs p > 2 (the bound does not decay in M for p = 2)");
    if (!(eps > 0.0)) throw std::invalid_argument("choose_M: eps must be > 0");
    if (!(R >= 0.0)) throw std::invalid_argument("choose_M: R must be >= 0");
    const double M0 = std::max(k.threshold_M, 1e-6);
    if (truncation_tail_rhs(k, M0, R) <= eps) return M0;
    double lo = M0, hi = 2.0 * M0;
    while (truncation_tail_rhs(k, hi, R) > eps) {
        lo = hi;
        hi *= 2.0;
    }
    for (int i = 0; i < 64; ++i) {
        const double mid = 0.5 * (lo + hi);
        (truncation_tail_rhs(k, mid, R) <= eps ? hi : lo) = mid;
    }
    return hi;
}

/// M^p m (1 + 2^{p-1}) + 2^{p-1} 4 phi ||F||^2/(d^2 M^{p-2}) + 2^{p-1} e^{-(dp/4) M^{p-2} t} ||v0||_p^p.
inline double bound_lp(const ConstantSet& k, double M, double t, double v0_lp_p) {
    const double p = k.p;
    const double two = std::pow(2.0, p - 1.0);
    return std::pow(M, p) * k.m_omega * (1.0 + two) +
           two * 4.0 * k.forcing_factor * k.F_h_sq / (k.d * k.d * std::pow(M, p - 2.0)) +
           two * std::exp(-(k.d * p / 4.0) * std::pow(M, p - 2.0) * t) * v0_lp_p;
}

/// Three reports over stored states:
///  second_inequality (integrated between stored times, right-endpoint rule),
///  bound_lp at every stored time,
///  lp_tail: ||(|v(t)| - M)_+||_p^p <= eps for t >= 2.
inline std::vector<InequalityReport> check_truncation_bounds(const Trajectory& traj, const ProblemSpec& spec,
                                                             const ConstantSet& k, double M, double eps,
                                                             double slack) {
    if (k.kind != ProblemKind::Source) throw std::invalid_argument("check_truncation_bounds: SOURCE problems only");
    if (M < k.threshold_M * (1.0 - 1e-12))
        throw std::invalid_argument("check_truncation_bounds: M = " + std::to_string(M) +
                                    " is below the threshold (-2c/d)^{1/p} = " + std::to_string(k.threshold_M));
    const auto& space = *spec.space;
    const double p = k.p;
    std::vector<InequalityReport> out(3);
    out[0].id = "second_inequality";
    out[1].id = "bound_lp";
    out[2].id = "lp_tail";
    for (auto& r : out) r.slack = slack;

    const double rhs_rate = k.forcing_factor * (p / k.d) * k.F_h_sq;
    const double v0_lp = traj.records.front().lp_p;
    double prev_T = lp_norm_p(space, traj.states.front(), p, M);
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const auto& v = traj.states[i];
        const double t = traj.times[i];
        const double T = i == 0 ? prev_T : lp_norm_p(space, v, p, M);
        if (i > 0) {
            const double span = t - traj.times[i - 1];
            const double U = lp_norm_p(space, v, 2.0 * p - 2.0, M);
            const double lhs = T - prev_T + span * (k.d * p / 8.0 * U + k.d * p / 4.0 * std::pow(M, p - 2.0) * T);
            out[0].add(t, span * rhs_rate - lhs);
        }
        out[1].add(t, bound_lp(k, M, t, v0_lp) - lp_norm_p(space, v, p));
        if (t >= 2.0 - 1e-12) out[2].add(t, eps - T);
        prev_T = T;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Flattening

/// I_1..I_6 of the SOURCE tail bound at time t (the bound applies to time t + 2).
inline std::array<double, 6> flattening_terms(const ConstantSet& k, double lambda_next, double delta, double M,
                                              double R, double t) {
    const double p = k.p, l1 = k.lambda1, b2 = k.b * k.b, F = k.F_h_sq, m = k.m_omega;
    const double phi = k.forcing_factor;
    return {
        std::exp(-lambda_next) * std::exp(-l1 * t) * R * R,
        std::exp(-lambda_next) * (F - 2.0 * k.c * m * l1) / (l1 * l1),
        (F + 2.0 * k.a * k.a * m) / (l1 * lambda_next),
        b2 * std::pow(2.0, 2.0 * p - 2.0) * std::pow(M, 2.0 * p - 2.0) * m / (l1 * lambda_next),
        phi * b2 * std::pow(2.0, 2.0 * p + 1.0) * F / (k.d * k.d * l1 * lambda_next),
        b2 * std::pow(2.0, 2.0 * p + 2.0) * delta / (k.d * p * l1),
    };
}

/// Terms of the BOUNDARY tail bound without the measured window integral:
/// e^{-l} R0^2, D1/l, 2 D2 e^{-delta l} ||g||^2 C5.
inline std::array<double, 3> boundary_flattening_terms(const ConstantSet& k, double lambda_next, double delta) {
    return {std::exp(-lambda_next) * k.R0 * k.R0, k.D1 / lambda_next,
            2.0 * k.D2 * std::exp(-delta * lambda_next) * k.trace_norm_sq * k.C5};
}

/// Measured ||(I - P_m) v(t + 2)||_H^2 against the tail bound for stored t >= t0.
///
/// SOURCE: sum of I_1..I_6 with truncation level M (>= threshold) and premise
/// ||(|v(s)| - M)_+||_p^p <= delta on the stored states of [t, t + 2]; windows
/// where the premise fails are skipped. R bounds ||v0||_H.
/// BOUNDARY: delta in (0, 2) is the window length; the trace integral over
/// [t + 2 - delta, t + 2] is measured from the step records.
inline InequalityReport flattening_tail_bound(const ConstantSet& k, const ProblemSpec& spec, Eigen::Index m,
                                              double delta, double M, const Trajectory& traj, double t0, double R,
                                              double slack) {
    const auto& space = *spec.space;
    if (m < 0 || m >= space.dofs()) throw std::out_of_range("flattening_tail_bound: need eigenvalue m + 1");
    const double lambda_next = space.eigenvalues()[m];
    InequalityReport r;
    r.id = "flattening";
    r.slack = slack;
    if (k.kind == ProblemKind::Source) {
        if (M < k.threshold_M * (1.0 - 1e-12)) throw std::invalid_argument("flattening_tail_bound: M below threshold");
        if (!(delta > 0.0)) throw std::invalid_argument("flattening_tail_bound: delta must be > 0");
    } else if (!(delta > 0.0 && delta < 2.0)) {
        throw std::invalid_argument("flattening_tail_bound: window delta must lie in (0, 2)");
    }

    std::vector<double> truncation;
    if (k.kind == ProblemKind::Source)
        for (const auto& v : traj.states) truncation.push_back(lp_norm_p(space, v, k.p, M));

    for (std::size_t j = 0; j < traj.states.size(); ++j) {
        const double t_end = traj.times[j];
        const double t = t_end - 2.0;
        if (t + 1e-12 < t0) continue;
        double bound = 0.0;
        if (k.kind == ProblemKind::Source) {
            bool premise = true;
            for (std::size_t i = 0; i <= j; ++i)
                if (traj.times[i] >= t - 1e-12 && truncation[i] > delta) premise = false;
            if (!premise) {
                ++r.skipped;
                continue;
            }
            for (double term : flattening_terms(k, lambda_next, delta, M, R, t)) bound += term;
        } else {
            for (double term : boundary_flattening_terms(k, lambda_next, delta)) bound += term;
            double window = 0.0;
            const std::size_t end = traj.step_index[j];
            const auto count = static_cast<std::size_t>(std::llround(delta / traj.dt));
            for (std::size_t s = end + 1 - std::min(count, end); s <= end; ++s)
                window += traj.dt * traj.records[s].trace * traj.records[s].trace;
            bound += k.D2 * window;
        }
        r.add(t_end, bound - project_tail(space, traj.states[j], m).tail_l2_sq);
    }
    if (r.margins.empty()) r.asserted = false;
    return r;
}

/// Smallest m whose SOURCE bound sum at time t is <= target, or nullopt.
inline std::optional<Eigen::Index> flattening_dimension(const ConstantSet& k, const DiscreteSpace& space,
                                                        double delta, double M, double R, double t, double target) {
    for (Eigen::Index m = 1; m < space.dofs(); ++m) {
        double sum = 0.0;
        for (double term : flattening_terms(k, space.eigenvalues()[m], delta, M, R, t)) sum += term;
        if (sum <= target) return m;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Slack calibration

/// c_slack from the smooth reaction j = s^2/2 (SOURCE, F = 0, v0 = R phi_1):
/// the largest gap |y - y_ref| between the run at (h, dt) and the reference
/// run at (h/2, dt/4) over t in [0, 1], doubled and divided by (dt + h^2).
inline double calibrate_slack(double R, double dt, double h) {
    auto space = build_space(Mesh1D::uniform(cells_for(h)), BoundaryCondition::DirichletBoth);
    ProblemSpec spec;
    spec.kind = ProblemKind::Source;
    spec.potential = PiecewisePotential::quadratic();
    spec.space = space;
    spec.F = space->zero();
    IntegratorConfig cfg;
    cfg.dt = dt;
    cfg.horizon = 1.0;
    cfg.stride = 1;
    const Field v0 = R * space->eigenvectors().col(0);
    const auto coarse = integrate(spec, v0, cfg);
    const auto fine = reference_solve(spec, v0, cfg, 0.5 * h, 0.25 * dt);
    double gap = 0.0;
    for (std::size_t i = 0; i < coarse.size(); ++i)
        gap = std::max(gap, std::abs(coarse.records[coarse.step_index[i]].l2_sq - fine.records[i].l2_sq));
    return 2.0 * gap / (dt + h * h);
}

}  // namespace hemiflow
