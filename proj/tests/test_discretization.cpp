#include "hemiflow/discretization.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace hemiflow;

namespace {

// Consistent-mass P1 eigenvalues on a uniform mesh, Dirichlet at both ends.
double p1_eigenvalue(int k, double h) {
    const double c = std::cos(k * M_PI * h);
    return 6.0 / (h * h) * (1.0 - c) / (2.0 + c);
}

}  // namespace

TEST(Mesh, Validation) {
    EXPECT_THROW(Mesh1D({0.0, 1.0}), std::invalid_argument);
    EXPECT_THROW(Mesh1D({0.0, 0.7, 0.5, 1.0}), std::invalid_argument);
    EXPECT_THROW(Mesh1D({0.1, 0.5, 1.0}), std::invalid_argument);
    EXPECT_THROW(Mesh1D::uniform(1), std::invalid_argument);
    const auto m = Mesh1D::uniform(4);
    EXPECT_EQ(m.node_count(), 5u);
    EXPECT_DOUBLE_EQ(m.max_size(), 0.25);
}

TEST(Assembly, UniformStencils) {
    const auto space = build_space(Mesh1D::uniform(8), BoundaryCondition::DirichletBoth);
    const double h = 1.0 / 8.0;
    ASSERT_EQ(space->dofs(), 7);
    EXPECT_DOUBLE_EQ(space->mass().diag[3], 2.0 * h / 3.0);
    EXPECT_DOUBLE_EQ(space->mass().off[3], h / 6.0);
    EXPECT_DOUBLE_EQ(space->stiffness().diag[3], 2.0 / h);
    EXPECT_DOUBLE_EQ(space->stiffness().off[3], -1.0 / h);
    EXPECT_NEAR(space->lumped_mass()[3], h, 1e-15);

    const auto left = build_space(Mesh1D::uniform(8), BoundaryCondition::DirichletLeft);
    ASSERT_EQ(left->dofs(), 8);
    // Free end: half element.
    EXPECT_DOUBLE_EQ(left->mass().diag[7], h / 3.0);
    EXPECT_DOUBLE_EQ(left->stiffness().diag[7], 1.0 / h);
}

TEST(Spectrum, MatchesClosedForm) {
    const double h = 1.0 / 64.0;
    const auto space = build_space(Mesh1D::uniform(64), BoundaryCondition::DirichletBoth);
    for (int k = 1; k <= space->dofs(); ++k)
        EXPECT_NEAR(space->eigenvalues()[k - 1], p1_eigenvalue(k, h), 1e-9 * p1_eigenvalue(k, h));
    EXPECT_NEAR(space->lambda1(), M_PI * M_PI, 1e-2);
    // M-orthonormal basis.
    const auto& phi = space->eigenvectors();
    const Eigen::MatrixXd gram = phi.transpose() * space->mass().dense() * phi;
    EXPECT_LT((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-10);
    for (Eigen::Index k = 0; k < phi.cols(); ++k) {
        Eigen::Index i = 0;
        while (std::abs(phi(i, k)) < 1e-14) ++i;
        EXPECT_GT(phi(i, k), 0.0);
    }
}

TEST(Spectrum, MixedConditions) {
    const auto space = build_space(Mesh1D::uniform(128), BoundaryCondition::DirichletLeft);
    EXPECT_NEAR(space->lambda1(), M_PI * M_PI / 4.0, 1e-4);
    // v(1) = int v' and Cauchy-Schwarz: ||gamma||^2 = 1, attained by v(x) = x.
    EXPECT_NEAR(space->trace_norm_sq(), 1.0, 1e-12);
    const Field x = space->interpolate([](double s) { return s; });
    EXPECT_NEAR(trace(*space, x) * trace(*space, x), space->stiffness().quadratic_form(x), 1e-12);
    const auto both = build_space(Mesh1D::uniform(8), BoundaryCondition::DirichletBoth);
    EXPECT_THROW(both->trace_norm_sq(), std::logic_error);
}

TEST(Spectrum, OptionalForLargeSpaces) {
    const auto space = build_space(Mesh1D::uniform(16), BoundaryCondition::DirichletBoth, false);
    EXPECT_FALSE(space->has_spectrum());
    EXPECT_THROW(space->lambda1(), std::logic_error);
}

TEST(Tridiagonal, MatchesDenseSolve) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SymTridiagonal A{Eigen::VectorXd(20), Eigen::VectorXd(19)};
    for (int i = 0; i < 20; ++i) A.diag[i] = 4.0 + u(rng);
    for (int i = 0; i < 19; ++i) A.off[i] = u(rng);
    Eigen::VectorXd b(20);
    for (int i = 0; i < 20; ++i) b[i] = u(rng);
    const TridiagonalLDL ldl(A);
    const Eigen::VectorXd x = ldl.solve(b);
    const Eigen::VectorXd ref = A.dense().ldlt().solve(b);
    EXPECT_LT((x - ref).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_NEAR(ldl.inverse_form(b), b.dot(ref), 1e-12);
    SymTridiagonal indefinite{Eigen::VectorXd::Constant(3, -1.0), Eigen::VectorXd::Zero(2)};
    EXPECT_THROW(TridiagonalLDL{indefinite}, std::runtime_error);
}

TEST(Norms, SineProfile) {
    const auto space = build_space(Mesh1D::uniform(256), BoundaryCondition::DirichletBoth);
    const Field s = space->interpolate([](double x) { return std::sin(M_PI * x); });
    const auto n = norms(*space, s);
    EXPECT_NEAR(n.l2_sq, 0.5, 1e-4);
    EXPECT_NEAR(n.v_sq, M_PI * M_PI / 2.0, 1e-3);
    // int sin^4 = 3/8.
    EXPECT_NEAR(lp_norm_p(*space, s, 4.0), 0.375, 1e-4);
    // (|v| - M)_+ vanishes for M above the maximum.
    EXPECT_EQ(lp_norm_p(*space, s, 4.0, 1.5), 0.0);
    // Exact on piecewise-linear integrands: int_0^1 x^2 for v = x on DIRICHLET_LEFT.
    const auto left = build_space(Mesh1D::uniform(7), BoundaryCondition::DirichletLeft);
    const Field x = left->interpolate([](double t) { return t; });
    EXPECT_NEAR(lp_norm_p(*left, x, 2.0), 1.0 / 3.0, 1e-14);
    EXPECT_NEAR(lp_norm_p(*left, x, 4.0), 1.0 / 5.0, 1e-4);
    // int (x - 1/2)_+^2 = 1/24.
    const auto even = build_space(Mesh1D::uniform(8), BoundaryCondition::DirichletLeft);
    const Field y = even->interpolate([](double t) { return t; });
    EXPECT_NEAR(lp_norm_p(*even, y, 2.0, 0.5), 1.0 / 24.0, 1e-14);
}

TEST(Projection, TailOfEigenvector) {
    const auto space = build_space(Mesh1D::uniform(32), BoundaryCondition::DirichletBoth);
    const Field phi3 = space->eigenvectors().col(2);
    EXPECT_NEAR(project_tail(*space, phi3, 2).tail_l2_sq, 1.0, 1e-12);
    EXPECT_NEAR(project_tail(*space, phi3, 3).tail_l2_sq, 0.0, 1e-12);
    const Field f = space->interpolate([](double x) { return x * (1.0 - x) * std::exp(x); });
    const auto tails = tail_spectrum(*space, f);
    ASSERT_EQ(tails.size(), static_cast<std::size_t>(space->dofs()) + 1);
    EXPECT_NEAR(tails.front(), space->mass().quadratic_form(f), 1e-14);
    EXPECT_NEAR(tails.back(), 0.0, 1e-14);
    for (std::size_t m = 1; m < tails.size(); ++m) EXPECT_LE(tails[m], tails[m - 1] + 1e-15);
    for (Eigen::Index m : {1, 5, 17}) EXPECT_NEAR(project_tail(*space, f, m).tail_l2_sq, tails[m], 1e-13);
    // Courant-Fischer: the V norm of the tail dominates lambda_{m+1} times its H norm.
    const auto t = project_tail(*space, f, 4);
    EXPECT_GE(space->stiffness().quadratic_form(t.tail), space->eigenvalues()[4] * t.tail_l2_sq * (1.0 - 1e-12));
}

TEST(Duality, DualNorms) {
    const auto space = build_space(Mesh1D::uniform(64), BoundaryCondition::DirichletBoth);
    const Field F = space->interpolate([](double) { return 1.0; });
    // ||1||_{V*}^2 = int u with -u'' = 1: int x(1 - x)/2 = 1/12.
    EXPECT_NEAR(forcing_dual_sq(*space, F), 1.0 / 12.0, 1e-3);
    const Eigen::VectorXd r = space->mass().apply(F);
    EXPECT_LT(dual_norm_sq(*space, r), forcing_dual_sq(*space, F));
}

TEST(Transfer, NestedMeshesAreExactForLinearFunctions) {
    const auto coarse = build_space(Mesh1D::uniform(8), BoundaryCondition::DirichletLeft);
    const auto fine = build_space(Mesh1D::uniform(32), BoundaryCondition::DirichletLeft);
    const Field f = coarse->interpolate([](double x) { return 3.0 * x; });
    const Field g = transfer(*coarse, f, *fine);
    EXPECT_LT((g - fine->interpolate([](double x) { return 3.0 * x; })).cwiseAbs().maxCoeff(), 1e-14);
    const Field back = transfer(*fine, g, *coarse);
    EXPECT_LT((back - f).cwiseAbs().maxCoeff(), 1e-14);
    const auto other = build_space(Mesh1D::uniform(8), BoundaryCondition::DirichletBoth);
    EXPECT_THROW(transfer(*coarse, f, *other), std::invalid_argument);
}

TEST(Snapshot, RoundTripIsExact) {
    const auto space = build_space(Mesh1D::uniform(16), BoundaryCondition::DirichletBoth);
    const Field f = space->interpolate([](double x) { return std::sin(3.0 * x) / 7.0; });
    std::stringstream ss;
    write_snapshot(ss, *space, f, 0.1 + 0.2);
    const auto snap = read_snapshot(ss);
    EXPECT_EQ(snap.time, 0.1 + 0.2);
    EXPECT_EQ(snap.x.size(), 17u);
    const Field g = field_from_snapshot(*space, snap);
    EXPECT_EQ((g - f).cwiseAbs().maxCoeff(), 0.0);
    std::stringstream bad("17 0.0\n0 0\n");
    EXPECT_THROW(read_snapshot(bad), std::runtime_error);
}

TEST(Space, CheckRejectsWrongSize) {
    const auto space = build_space(Mesh1D::uniform(16), BoundaryCondition::DirichletBoth);
    EXPECT_THROW(space->check(Field::Zero(3)), std::invalid_argument);
}
