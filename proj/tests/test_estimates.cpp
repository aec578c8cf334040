#include "hemiflow/estimates.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hemiflow;

namespace {

std::vector<double> sampled(double dt, double T, double (*f)(double)) {
    std::vector<double> y;
    const auto n = static_cast<std::size_t>(std::llround(T / dt));
    for (std::size_t i = 0; i <= n; ++i) y.push_back(f(static_cast<double>(i) * dt));
    return y;
}

constexpr double lambda = 1.5;
double decaying(double s) { return std::exp(-lambda * s); }
double growing(double s) { return std::exp(lambda * s); }

ProblemSpec potb_spec(std::size_t cells, double F) {
    ProblemSpec spec;
    spec.kind = ProblemKind::Source;
    spec.potential = PiecewisePotential::pot_b();
    spec.space = build_space(Mesh1D::uniform(cells), BoundaryCondition::DirichletBoth);
    spec.F = spec.space->interpolate([&](double) { return F; });
    spec.constants = verify_hypotheses(spec.potential, ProblemKind::Source, 1.0, 4.0);
    return spec;
}

ProblemSpec pota_spec(std::size_t cells, double F) {
    ProblemSpec spec;
    spec.kind = ProblemKind::Boundary;
    spec.potential = PiecewisePotential::pot_a();
    spec.space = build_space(Mesh1D::uniform(cells), BoundaryCondition::DirichletLeft);
    spec.F = spec.space->interpolate([&](double) { return F; });
    spec.constants = verify_hypotheses(spec.potential, ProblemKind::Boundary, spec.space->trace_norm_sq(), 4.0);
    return spec;
}

}  // namespace

TEST(Gronwall, DecayingSolutionPasses) {
    const auto y = sampled(1e-3, 5.0, decaying);
    const auto r = translated_gronwall(y, std::vector<double>(y.size(), 0.0), lambda, 1e-3);
    EXPECT_TRUE(r.holds());
    EXPECT_EQ(r.skipped, 0u);
    EXPECT_TRUE(r.asserted);
    EXPECT_GT(r.min_margin, 0.0);
}

TEST(Gronwall, ConstantSolutionPasses) {
    const double h = 3.0;
    const std::vector<double> y(5001, h / lambda);
    const auto r = translated_gronwall(y, h, lambda, 1e-3);
    EXPECT_TRUE(r.holds());
    EXPECT_EQ(r.skipped, 0u);
    EXPECT_EQ(r.id, "translated_gronwall_constant");
}

TEST(Gronwall, GrowingSolutionIsFlagged) {
    const auto y = sampled(1e-3, 5.0, growing);
    const auto r = translated_gronwall(y, std::vector<double>(y.size(), 0.0), lambda, 1e-3);
    EXPECT_GT(r.skipped, 0u);
    EXPECT_FALSE(r.asserted);
    EXPECT_FALSE(r.note.empty());
}

TEST(Gronwall, ForcingIntegralIsSecondOrder) {
    const double h = 2.0, l = 0.8;
    const double exact = h * (1.0 - std::exp(-2.0 * l)) / l;
    const double e1 = std::abs(gronwall_forcing_integral(h, l, 1e-2) - exact);
    const double e2 = std::abs(gronwall_forcing_integral(h, l, 5e-3) - exact);
    EXPECT_NEAR(e1 / e2, 4.0, 0.05);
    EXPECT_LE(gronwall_forcing_integral(h, l, 1e-3), h / l);
}

TEST(Gronwall, RejectsShortSeries) {
    EXPECT_THROW(translated_gronwall(std::vector<double>(10, 1.0), 0.0, 1.0, 1e-3), std::invalid_argument);
    EXPECT_THROW(translated_gronwall(std::vector<double>(10, 1.0), 0.0, 1.0, 0.3), std::invalid_argument);
}

TEST(Constants, SourceChain) {
    const auto spec = potb_spec(64, 2.0);
    const auto k = derive_constants(spec);
    EXPECT_DOUBLE_EQ(k.kappa, k.lambda1);
    // F = 2 at interior nodes, 0 at the two boundary nodes: 4 - 16h/3.
    EXPECT_NEAR(k.F_h_sq, 4.0 - 16.0 / (3.0 * 64.0), 1e-12);
    EXPECT_DOUBLE_EQ(k.offset, (k.F_h_sq - 2.0 * k.c * k.lambda1) / (k.lambda1 * k.lambda1));
    EXPECT_DOUBLE_EQ(k.R0, k.offset + 1.0);
    EXPECT_NEAR(k.threshold_M, std::pow(-2.0 * k.c / k.d, 0.25), 1e-15);
}

TEST(Constants, BoundaryChain) {
    const auto spec = pota_spec(64, 1.0);
    const auto k = derive_constants(spec);
    EXPECT_NEAR(k.trace_norm_sq, 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(k.C1, 1.0 - k.d * k.trace_norm_sq);
    EXPECT_DOUBLE_EQ(k.C2, k.F_dual_sq / k.C1 - 2.0 * k.c);
    EXPECT_DOUBLE_EQ(k.R0, absorbing_radius(k.C1, k.C2, k.lambda1));
    EXPECT_DOUBLE_EQ(k.C5, (k.C2 + k.R0 * k.R0) / k.C1);
    EXPECT_DOUBLE_EQ(k.C6, 2.0 * k.C3 * k.C3 + 2.0 * k.C4 * k.C4 * k.C5);
    EXPECT_DOUBLE_EQ(k.D2, 4.0 * k.trace_norm_sq * k.b * k.b);
    // ||1||_{V*}^2 with a free right end: u'' = -1, u(0) = 0, u'(1) = 0 gives int u = 1/3.
    EXPECT_NEAR(k.F_dual_sq, 1.0 / 3.0, 1e-3);
    auto bad = spec;
    bad.constants.d = 1.0;
    EXPECT_THROW(derive_constants(bad), HypothesisViolation);
}

TEST(Constants, EntryTimeInvertsTheDecayFormula) {
    const auto k = derive_constants(potb_spec(64, 0.0));
    const double y0 = 25.0;
    const double t = predicted_entry_time(k, y0);
    EXPECT_NEAR(y0 * std::exp(-k.kappa * t) + k.offset, k.R0 * k.R0, 1e-12);
    EXPECT_EQ(predicted_entry_time(k, 0.0), 0.0);
}

TEST(Truncation, ChooseMIsTheSmallestAdmissibleLevel) {
    const auto k = derive_constants(potb_spec(64, 1.0));
    const double M = choose_M(k, 1e-2, 5.0);
    EXPECT_LE(truncation_tail_rhs(k, M, 5.0), 1e-2);
    EXPECT_GT(truncation_tail_rhs(k, M * (1.0 - 1e-9), 5.0), 1e-2);
    EXPECT_GE(M, k.threshold_M);
    EXPECT_LT(choose_M(k, 1e-1, 5.0), M);
    auto quad = k;
    quad.p = 2.0;
    EXPECT_THROW(choose_M(quad, 1e-2, 5.0), std::invalid_argument);
}

TEST(Truncation, BoundLpAtTimeZeroDominatesTheInitialNorm) {
    const auto k = derive_constants(potb_spec(64, 1.0));
    EXPECT_GE(bound_lp(k, 2.0, 0.0, 3.0), std::pow(2.0, 3.0) * 3.0);
    EXPECT_LT(bound_lp(k, 2.0, 10.0, 3.0), bound_lp(k, 2.0, 0.0, 3.0));
}

TEST(Flattening, TermsDecreaseInM) {
    const auto spec = potb_spec(128, 0.0);
    const auto k = derive_constants(spec);
    const double M = k.threshold_M;
    double previous = std::numeric_limits<double>::infinity();
    for (Eigen::Index m = 1; m < 60; m += 5) {
        const auto I = flattening_terms(k, spec.space->eigenvalues()[m], 1e-6, M, 5.0, 2.0);
        double sum = 0.0;
        for (double term : I) sum += term;
        EXPECT_LT(sum, previous);
        previous = sum;
        // I_6 does not see m.
        EXPECT_DOUBLE_EQ(I[5], k.b * k.b * std::pow(2.0, 2.0 * k.p + 2.0) * 1e-6 / (k.d * k.p * k.lambda1));
    }
    const auto m = flattening_dimension(k, *spec.space, 1e-6, M, 5.0, 2.0, 1e-2);
    ASSERT_TRUE(m.has_value());
    EXPECT_FALSE(flattening_dimension(k, *spec.space, 1e-2, M, 5.0, 2.0, 1e-2).has_value());
}

TEST(Checks, HeatEnergyAndDecay) {
    ProblemSpec spec;
    spec.kind = ProblemKind::Source;
    spec.potential = PiecewisePotential::zero();
    spec.space = build_space(Mesh1D::uniform(64), BoundaryCondition::DirichletBoth);
    spec.F = spec.space->zero();
    IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.horizon = 1.0;
    const auto traj = integrate(spec, spec.space->interpolate([](double x) { return x * (1.0 - x); }), cfg);
    const auto k = derive_constants(spec);
    EXPECT_TRUE(check_energy_inequality(traj, k, 0.0).holds());
    EXPECT_TRUE(check_decay_bound(traj, k, 0.0).holds());
}

TEST(Checks, PotBTruncationAndEnergy) {
    const auto spec = potb_spec(64, 0.0);
    IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.horizon = 3.0;
    cfg.stride = 10;
    const auto traj = integrate(spec, spec.space->interpolate([](double x) { return 3.0 * std::sin(M_PI * x); }), cfg);
    const auto k = derive_constants(spec);
    EXPECT_TRUE(check_energy_inequality(traj, k, 0.0).holds());
    EXPECT_TRUE(check_decay_bound(traj, k, 0.0).holds());
    const double M = choose_M(k, 1e-2, 3.0);
    for (const auto& r : check_truncation_bounds(traj, spec, k, M, 1e-2, 0.0)) EXPECT_TRUE(r.holds()) << r.id;
    EXPECT_THROW(check_truncation_bounds(traj, spec, k, 0.5 * k.threshold_M, 1e-2, 0.0), std::invalid_argument);
}

TEST(Checks, BoundaryChainHolds) {
    const auto spec = pota_spec(64, 1.0);
    IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.horizon = 3.0;
    const auto traj = integrate(spec, spec.space->interpolate([](double x) { return 2.0 * std::sin(M_PI * x); }), cfg);
    const auto k = derive_constants(spec);
    const auto reports = check_boundary_chain(traj, spec, k, 0.0, 0.0);
    ASSERT_EQ(reports.size(), 4u);
    for (const auto& r : reports) {
        EXPECT_TRUE(r.holds()) << r.id;
        EXPECT_TRUE(r.asserted) << r.id;
    }
    auto flat = flattening_tail_bound(k, spec, 8, 0.5, 0.0, traj, 0.0, 2.0, 0.0);
    EXPECT_TRUE(flat.holds());
    EXPECT_TRUE(flat.asserted);
}

TEST(Reports, Formatting) {
    InequalityReport r;
    r.id = "x";
    r.slack = 0.5;
    r.add(0.0, 1.0);
    r.add(1.0, -0.25);
    EXPECT_TRUE(r.holds());
    r.add(2.0, -0.75);
    EXPECT_FALSE(r.holds());
    EXPECT_EQ(r.violations, 1u);
    std::ostringstream os;
    write_report(os, r);
    EXPECT_NE(os.str().find("violations=1"), std::string::npos);
    EXPECT_DOUBLE_EQ(discretization_slack(2.0, 1e-3, 0.1), 2.0 * (1e-3 + 1e-2));
}
