#pragma once

// Finite samples of G(t, B) and set diagnostics on them.

#include "hemiflow/discretization.hpp"
#include "hemiflow/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace hemiflow {

/// N fields with ||f||_H <= R: normal eigen-coefficients c_k ~ N(0, 1)/k,
/// rescaled to a radius drawn uniformly from [0, R].
inline std::vector<Field> sample_initials(const DiscreteSpace& space, double R, std::size_t N, std::uint64_t seed) {
    if (!(R >= 0.0)) throw std::invalid_argument("sample_initials: R must be >= 0");
    if (N < 1) throw std::invalid_argument("sample_initials: N must be >= 1");
    std::mt19937_64 engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const auto& phi = space.eigenvectors();
    std::vector<Field> out;
    out.reserve(N);
    for (std::size_t i = 0; i < N; ++i) {
        Eigen::VectorXd c(space.dofs());
        for (Eigen::Index k = 0; k < c.size(); ++k) c[k] = normal(engine) / static_cast<double>(k + 1);
        const double radius = R * uniform(engine);
        const double norm = c.norm();  // M-orthonormal basis: ||sum c_k phi_k||_H = |c|
        Field f = norm > 0.0 ? Field(phi * (c * (radius / norm))) : space.zero();
        // Guard against rounding pushing the norm above the radius.
        const double l2 = std::sqrt(space.mass().quadratic_form(f));
        if (l2 > radius && l2 > 0.0) f *= radius / l2;
        out.push_back(std::move(f));
    }
    return out;
}

struct EnsembleMember {
    Field initial;
    std::uint64_t seed = 0;
    Trajectory trajectory;
    std::string error;  ///< nonempty if the solver aborted
    bool ok() const { return error.empty(); }
};

struct EnsembleRun {
    ProblemSpec spec;
    IntegratorConfig config;
    std::vector<EnsembleMember> members;

    /// Output time grid shared by all members (from the first successful member).
    const std::vector<double>& times() const {
        for (const auto& m : members)
            if (m.ok()) return m.trajectory.times;
        throw std::runtime_error("ensemble: no successful member");
    }
    std::size_t successful() const {
        return static_cast<std::size_t>(std::count_if(members.begin(), members.end(), [](const auto& m) { return m.ok(); }));
    }
};

/// One trajectory per initial; seeds has one entry per initial or a single shared
/// entry. Solver failures are recorded per member. threads <= 1 runs sequentially.
inline EnsembleRun evolve_ensemble(const ProblemSpec& spec, const std::vector<Field>& initials,
                                   const IntegratorConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                   unsigned threads = 1) {
    spec.validate();
    cfg.validate();
    if (initials.empty()) throw std::invalid_argument("evolve_ensemble: no initials");
    if (seeds.size() != initials.size() && seeds.size() != 1)
        throw std::invalid_argument("evolve_ensemble: need one seed per initial or a single seed");
    EnsembleRun run{spec, cfg, std::vector<EnsembleMember>(initials.size())};
    for (std::size_t i = 0; i < initials.size(); ++i) {
        run.members[i].initial = initials[i];
        run.members[i].seed = seeds.size() == 1 ? seeds[0] : seeds[i];
    }
    auto work = [&](std::size_t i) {
        auto& member = run.members[i];
        IntegratorConfig c = cfg;
        c.seed = member.seed;
        try {
            member.trajectory = integrate(spec, member.initial, c);
        } catch (const std::exception& e) {
            member.error = e.what();
        }
    };
    if (threads <= 1) {
        for (std::size_t i = 0; i < initials.size(); ++i) work(i);
        return run;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < std::min<std::size_t>(threads, initials.size()); ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < initials.size(); i = next++) work(i);
        });
    for (auto& th : pool) th.join();
    return run;
}

/// A finite set of fields of one space.
struct SetSample {
    std::vector<Field> points;
    double time = 0.0;
    std::string tag;
};

/// Distance ||a - b||_H with the consistent mass matrix.
struct MassMetric {
    const DiscreteSpace* space;
    double operator()(const Field& a, const Field& b) const {
        return std::sqrt(std::max(0.0, space->mass().quadratic_form(a - b)));
    }
};

/// sup_{a in A} inf_{b in B} dist(a, b).
template <class Point, class Metric>
double hausdorff_semidistance(const std::vector<Point>& A, const std::vector<Point>& B, Metric&& dist) {
    if (A.empty() || B.empty()) throw std::invalid_argument("hausdorff_semidistance: empty sample");
    double sup = 0.0;
    for (const auto& a : A) {
        double inf = std::numeric_limits<double>::infinity();
        for (const auto& b : B) inf = std::min(inf, dist(a, b));
        sup = std::max(sup, inf);
    }
    return sup;
}

inline double hausdorff_semidistance(const DiscreteSpace& space, const SetSample& A, const SetSample& B) {
    return hausdorff_semidistance(A.points, B.points, MassMetric{&space});
}

struct Cover {
    double diameter = 0.0;               ///< max over clusters of the largest pairwise distance
    std::vector<std::size_t> centers;    ///< point indices
    std::vector<std::size_t> assignment; ///< cluster index per point
};

/// Greedy farthest-point cover: centers from index 0, points to their nearest
/// center (lowest index on ties). Upper-bounds the best k-partition diameter.
template <class Point, class Metric>
Cover covering_diameter(const std::vector<Point>& points, std::size_t k, Metric&& dist) {
    if (k < 1) throw std::invalid_argument("covering_diameter: k must be >= 1");
    if (points.empty()) throw std::invalid_argument("covering_diameter: empty sample");
    const std::size_t n = points.size();
    Cover cover;
    cover.centers.push_back(0);
    std::vector<double> nearest(n);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = dist(points[i], points[0]);
    while (cover.centers.size() < std::min(k, n)) {
        const auto far = static_cast<std::size_t>(std::max_element(nearest.begin(), nearest.end()) - nearest.begin());
        if (nearest[far] == 0.0) break;
        cover.centers.push_back(far);
        for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], dist(points[i], points[far]));
    }
    cover.assignment.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cover.centers.size(); ++c) {
            const double d = dist(points[i], points[cover.centers[c]]);
            if (d < best) {
                best = d;
                cover.assignment[i] = c;
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (cover.assignment[i] == cover.assignment[j])
                cover.diameter = std::max(cover.diameter, dist(points[i], points[j]));
    return cover;
}

inline double covering_diameter(const DiscreteSpace& space, const SetSample& sample, std::size_t k) {
    return covering_diameter(sample.points, k, MassMetric{&space}).diameter;
}

/// States of the successful members at output index i.
inline SetSample slice(const EnsembleRun& run, std::size_t i) {
    SetSample s;
    s.time = run.times().at(i);
    s.tag = "slice";
    for (const auto& m : run.members)
        if (m.ok()) s.points.push_back(m.trajectory.states.at(i));
    return s;
}

/// All stored states with t >= t_min, merged by single linkage at merge_tol;
/// each cluster is represented by its first collected point.
inline SetSample omega_limit_estimate(const EnsembleRun& run, double t_min, double merge_tol) {
    const auto& space = *run.spec.space;
    const MassMetric dist{&space};
    std::vector<const Field*> pts;
    for (const auto& m : run.members) {
        if (!m.ok()) continue;
        for (std::size_t i = 0; i < m.trajectory.states.size(); ++i)
            if (m.trajectory.times[i] >= t_min) pts.push_back(&m.trajectory.states[i]);
    }
    if (pts.empty()) throw std::invalid_argument("omega_limit_estimate: no states at or after t_min");
    std::vector<std::size_t> parent(pts.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            if (find(i) != find(j) && dist(*pts[i], *pts[j]) <= merge_tol) {
                const auto a = find(i), b = find(j);
                parent[std::max(a, b)] = std::min(a, b);
            }
    SetSample out;
    out.time = t_min;
    out.tag = "omega";
    for (std::size_t i = 0; i < pts.size(); ++i)
        if (find(i) == i) out.points.push_back(*pts[i]);
    return out;
}

/// First output time after which ||v(t)||_H <= R0 at every remaining output time.
inline std::vector<std::optional<double>> absorbing_entry(const EnsembleRun& run, double R0) {
    std::vector<std::optional<double>> out;
    const double r2 = R0 * R0;
    for (const auto& m : run.members) {
        if (!m.ok()) {
            out.emplace_back();
            continue;
        }
        const auto& tr = m.trajectory;
        std::optional<double> entry;
        for (std::size_t i = tr.states.size(); i-- > 0;) {
            if (tr.records[tr.step_index[i]].l2_sq > r2) break;
            entry = tr.times[i];
        }
        out.push_back(entry);
    }
    return out;
}

/// Squared tails ||(I - P_m) v||_H^2, indexed [member][time][m index].
struct FlatteningProfile {
    std::vector<Eigen::Index> m_list;
    std::vector<double> times;
    std::vector<std::vector<std::vector<double>>> tails;

    /// Max over members at output index i and m index j.
    double max_tail(std::size_t i, std::size_t j) const {
        double out = 0.0;
        for (const auto& member : tails)
            if (!member.empty()) out = std::max(out, member[i][j]);
        return out;
    }
};

inline FlatteningProfile flattening_profile(const EnsembleRun& run, const std::vector<Eigen::Index>& m_list) {
    const auto& space = *run.spec.space;
    for (auto m : m_list)
        if (m < 0 || m > space.dofs()) throw std::out_of_range("flattening_profile: m out of range");
    FlatteningProfile prof;
    prof.m_list = m_list;
    prof.times = run.times();
    for (const auto& member : run.members) {
        std::vector<std::vector<double>> rows;
        if (member.ok()) {
            for (const auto& v : member.trajectory.states) {
                const auto spectrum = tail_spectrum(space, v);
                std::vector<double> row;
                for (auto m : m_list) row.push_back(std::max(0.0, spectrum[static_cast<std::size_t>(m)]));
                rows.push_back(std::move(row));
            }
        }
        prof.tails.push_back(std::move(rows));
    }
    return prof;
}

/// dist_H(G(t, B), A) at every output time.
inline std::vector<double> attraction_curve(const EnsembleRun& run, const SetSample& A) {
    std::vector<double> out;
    const auto& space = *run.spec.space;
    for (std::size_t i = 0; i < run.times().size(); ++i) out.push_back(hausdorff_semidistance(space, slice(run, i), A));
    return out;
}

/// Greedy k-cover diameter of every slice.
inline std::vector<double> covering_series(const EnsembleRun& run, std::size_t k) {
    std::vector<double> out;
    const auto& space = *run.spec.space;
    for (std::size_t i = 0; i < run.times().size(); ++i) out.push_back(covering_diameter(space, slice(run, i), k));
    return out;
}

}  // namespace hemiflow
