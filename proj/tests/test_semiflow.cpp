#include "hemiflow/semiflow.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace hemiflow;

namespace {

double euclid(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm(); }

// Smallest max-cluster diameter over all partitions into at most k labels.
double exhaustive_optimum(const std::vector<Eigen::VectorXd>& pts, std::size_t k) {
    const std::size_t n = pts.size();
    std::vector<std::size_t> label(n, 0);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        double diam = 0.0;
        for (std::size_t i = 0; i < n && diam < best; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (label[i] == label[j]) diam = std::max(diam, euclid(pts[i], pts[j]));
        best = std::min(best, diam);
        std::size_t pos = 0;
        while (pos < n && ++label[pos] == k) label[pos++] = 0;
        if (pos == n) break;
    }
    return best;
}

std::vector<Eigen::VectorXd> random_points(std::mt19937_64& rng, std::size_t n, Eigen::Index dim) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Eigen::VectorXd> pts(n, Eigen::VectorXd(dim));
    for (auto& p : pts)
        for (Eigen::Index i = 0; i < dim; ++i) p[i] = g(rng);
    return pts;
}

ProblemSpec heat_spec(std::size_t cells) {
    ProblemSpec spec;
    spec.kind = ProblemKind::Source;
    spec.potential = PiecewisePotential::zero();
    spec.space = build_space(Mesh1D::uniform(cells), BoundaryCondition::DirichletBoth);
    spec.F = spec.space->zero();
    return spec;
}

}  // namespace

TEST(Sampling, InitialsRespectTheRadiusAndSeed) {
    const auto space = build_space(Mesh1D::uniform(32), BoundaryCondition::DirichletBoth);
    const auto a = sample_initials(*space, 5.0, 20, 7);
    const auto b = sample_initials(*space, 5.0, 20, 7);
    const auto c = sample_initials(*space, 5.0, 20, 8);
    ASSERT_EQ(a.size(), 20u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_LE(std::sqrt(space->mass().quadratic_form(a[i])), 5.0);
        EXPECT_EQ((a[i] - b[i]).cwiseAbs().maxCoeff(), 0.0);
    }
    EXPECT_GT((a[0] - c[0]).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(sample_initials(*space, -1.0, 2, 0), std::invalid_argument);
    EXPECT_THROW(sample_initials(*space, 1.0, 0, 0), std::invalid_argument);
}

TEST(Hausdorff, SmallExamples) {
    const std::vector<Eigen::VectorXd> A{Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 3.0)};
    const std::vector<Eigen::VectorXd> B{Eigen::VectorXd::Constant(1, 1.0)};
    EXPECT_DOUBLE_EQ(hausdorff_semidistance(A, B, euclid), 2.0);
    EXPECT_DOUBLE_EQ(hausdorff_semidistance(B, A, euclid), 1.0);
    EXPECT_DOUBLE_EQ(hausdorff_semidistance(A, A, euclid), 0.0);
    EXPECT_THROW(hausdorff_semidistance(A, std::vector<Eigen::VectorXd>{}, euclid), std::invalid_argument);
}

TEST(Hausdorff, TriangleInequalityOnRandomSamples) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto A = random_points(rng, 1 + trial % 7, 3);
        const auto B = random_points(rng, 1 + trial % 5, 3);
        const auto C = random_points(rng, 1 + trial % 9, 3);
        EXPECT_LE(hausdorff_semidistance(A, C, euclid),
                  hausdorff_semidistance(A, B, euclid) + hausdorff_semidistance(B, C, euclid) + 1e-12);
    }
}

TEST(Covering, SmallExamples) {
    const std::vector<Eigen::VectorXd> one{Eigen::VectorXd::Constant(2, 1.0)};
    EXPECT_EQ(covering_diameter(one, 1, euclid).diameter, 0.0);
    EXPECT_EQ(covering_diameter(one, 4, euclid).diameter, 0.0);
    const std::vector<Eigen::VectorXd> two{Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 1.0)};
    EXPECT_DOUBLE_EQ(covering_diameter(two, 1, euclid).diameter, 1.0);
    EXPECT_DOUBLE_EQ(covering_diameter(two, 2, euclid).diameter, 0.0);
    EXPECT_THROW(covering_diameter(two, 0, euclid), std::invalid_argument);
}

TEST(Covering, GreedyIsWithinTwiceTheExhaustiveOptimum) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto pts = random_points(rng, 10, 2);
        const auto cover = covering_diameter(pts, 3, euclid);
        const double opt = exhaustive_optimum(pts, 3);
        EXPECT_GE(cover.diameter, opt - 1e-12);
        EXPECT_LE(cover.diameter, 2.0 * opt + 1e-12);
        EXPECT_EQ(cover.centers.size(), 3u);
    }
}

TEST(Covering, KEqualOneIsTheDiameter) {
    std::mt19937_64 rng(9);
    const auto pts = random_points(rng, 8, 3);
    double diam = 0.0;
    for (const auto& a : pts)
        for (const auto& b : pts) diam = std::max(diam, euclid(a, b));
    EXPECT_DOUBLE_EQ(covering_diameter(pts, 1, euclid).diameter, diam);
}

TEST(Ensemble, IdentityAxiomAndDeterminism) {
    const auto spec = heat_spec(32);
    const auto initials = sample_initials(*spec.space, 2.0, 6, 3);
    IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.horizon = 0.2;
    cfg.stride = 20;
    const auto a = evolve_ensemble(spec, initials, cfg, {0}, 1);
    const auto b = evolve_ensemble(spec, initials, cfg, {0}, 3);
    ASSERT_EQ(a.successful(), 6u);
    for (std::size_t i = 0; i < initials.size(); ++i) {
        EXPECT_EQ((a.members[i].trajectory.states.front() - initials[i]).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ((a.members[i].trajectory.states.back() - b.members[i].trajectory.states.back()).cwiseAbs().maxCoeff(),
                  0.0);
    }
    EXPECT_THROW(evolve_ensemble(spec, initials, cfg, {1, 2}, 1), std::invalid_argument);
}

TEST(Ensemble, HeatDiagnostics) {
    const auto spec = heat_spec(32);
    const auto initials = sample_initials(*spec.space, 3.0, 8, 21);
    IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.horizon = 0.5;
    cfg.stride = 25;
    const auto run = evolve_ensemble(spec, initials, cfg, {0});
    // Contraction semigroup: the k-cover diameter does not grow.
    for (std::size_t k : {1u, 2u, 3u}) {
        const auto series = covering_series(run, k);
        for (std::size_t t = 1; t < series.size(); ++t) EXPECT_LE(series[t], series[t - 1] + 1e-12);
    }
    // A = {0}: the attraction curve is the largest member norm, strictly decreasing.
    SetSample origin;
    origin.points.push_back(spec.space->zero());
    const auto curve = attraction_curve(run, origin);
    for (std::size_t t = 1; t < curve.size(); ++t) EXPECT_LT(curve[t], curve[t - 1]);
    // A = final slice: terminal value 0.
    const auto last = slice(run, run.times().size() - 1);
    EXPECT_EQ(attraction_curve(run, last).back(), 0.0);
    // Everything enters a ball of radius 1 and stays.
    for (const auto& e : absorbing_entry(run, 1.0)) EXPECT_TRUE(e.has_value());
    // Tails per member and time, nonincreasing in m.
    const auto prof = flattening_profile(run, {1, 4, 8});
    for (std::size_t t = 0; t < prof.times.size(); ++t) {
        EXPECT_GE(prof.max_tail(t, 0), prof.max_tail(t, 1));
        EXPECT_GE(prof.max_tail(t, 1), prof.max_tail(t, 2));
    }
}

TEST(Ensemble, OmegaLimitMergesAndIsStable) {
    ProblemSpec spec = heat_spec(32);
    spec.potential = PiecewisePotential::pot_b();
    spec.constants = verify_hypotheses(spec.potential, ProblemKind::Source, 1.0, 4.0);
    spec.F = spec.space->interpolate([](double) { return 4.0; });
    const auto initials = sample_initials(*spec.space, 3.0, 6, 2);
    IntegratorConfig cfg;
    cfg.dt = 2e-3;
    cfg.horizon = 6.0;
    cfg.stride = 50;
    cfg.level = 32;
    const auto run = evolve_ensemble(spec, initials, cfg, {0});
    const double tol = 1e-4;
    const auto omega = omega_limit_estimate(run, 3.0, tol);
    const auto later = omega_limit_estimate(run, 5.9, tol);
    EXPECT_LT(omega.points.size(), 6u * 31u);
    EXPECT_LE(hausdorff_semidistance(*spec.space, later, omega), tol);
    EXPECT_THROW(omega_limit_estimate(run, 7.0, tol), std::invalid_argument);
}
