#include "hemiflow/nonsmooth.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace hemiflow;

namespace {

// Independent quadrature of the raw bump (double-exponential rule).
double bump_integral(double power) {
    boost::math::quadrature::tanh_sinh<double> rule;
    // Even integrand: integrate over (0, 1) so the |u| kink sits at an endpoint.
    return 2.0 * rule.integrate([&](double u) { return BumpKernel::raw_density(u) * std::pow(u, power); }, 0.0, 1.0);
}

// min over s of (min over xi in dj(s) of xi s) - d |s|^p on a dense grid.
double brute_force_c(const PiecewisePotential& pot, double d, double radius) {
    double best = std::numeric_limits<double>::infinity();
    const int n = 2'000'000;
    for (int i = 0; i <= n; ++i) {
        const double s = -radius + 2.0 * radius * i / n;
        const auto iv = clarke_subdifferential(pot, s);
        const double xs = std::min(iv.lo * s, iv.hi * s);
        best = std::min(best, xs - d * std::pow(std::abs(s), pot.growth_exponent()));
    }
    return best;
}

}  // namespace

TEST(Subdifferential, AbsoluteValue) {
    const auto pot = PiecewisePotential::absolute();
    const auto at0 = clarke_subdifferential(pot, 0.0);
    EXPECT_EQ(at0.lo, -1.0);
    EXPECT_EQ(at0.hi, 1.0);
    const auto at1 = clarke_subdifferential(pot, 1.5);
    EXPECT_TRUE(at1.singleton());
    EXPECT_EQ(at1.lo, 1.0);
    EXPECT_EQ(clarke_subdifferential(pot, -2.0).lo, -1.0);
}

TEST(Subdifferential, PotB) {
    const auto pot = PiecewisePotential::pot_b();
    const auto at0 = clarke_subdifferential(pot, 0.0);
    EXPECT_EQ(at0.lo, -1.0);
    EXPECT_EQ(at0.hi, 1.0);
    // j'(2) = 2^3 - 1.
    EXPECT_DOUBLE_EQ(clarke_subdifferential(pot, 2.0).lo, 7.0);
    EXPECT_DOUBLE_EQ(clarke_subdifferential(pot, -2.0).hi, -7.0);
    EXPECT_DOUBLE_EQ(evaluate(pot, 2.0), 2.0);
}

TEST(Subdifferential, DirectionalDerivativeIsSupportFunction) {
    const auto pot = PiecewisePotential::absolute();
    EXPECT_DOUBLE_EQ(directional_derivative(pot, 0.0, 0.7), 0.7);
    EXPECT_DOUBLE_EQ(directional_derivative(pot, 0.0, -0.7), 0.7);
    EXPECT_DOUBLE_EQ(directional_derivative(pot, 1.0, -0.7), -0.7);
    const auto a = PiecewisePotential::pot_a();
    EXPECT_DOUBLE_EQ(directional_derivative(a, 0.0, 1.0), 1.0);
}

TEST(Subdifferential, IntervalHelpers) {
    const SubgradientInterval iv{-1.0, 2.0};
    EXPECT_DOUBLE_EQ(iv.width(), 3.0);
    EXPECT_DOUBLE_EQ(iv.distance(0.5), 0.0);
    EXPECT_DOUBLE_EQ(iv.distance(3.0), 1.0);
    EXPECT_DOUBLE_EQ(iv.distance(-4.0), 3.0);
    EXPECT_DOUBLE_EQ(iv.max_abs(), 2.0);
    EXPECT_EQ(hull(3.0, 1.0).lo, 1.0);
}

TEST(Selection, Policies) {
    const SubgradientInterval iv{-1.0, 3.0};
    EXPECT_EQ(select(iv, SelectionPolicy::Min, 0), -1.0);
    EXPECT_EQ(select(iv, SelectionPolicy::Max, 0), 3.0);
    EXPECT_EQ(select(iv, SelectionPolicy::Mid, 0), 1.0);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const double u = select(iv, SelectionPolicy::Uniform, seed);
        EXPECT_GE(u, -1.0);
        EXPECT_LE(u, 3.0);
        EXPECT_EQ(u, select(iv, SelectionPolicy::Uniform, seed));
    }
    EXPECT_NE(select(iv, SelectionPolicy::Uniform, 1), select(iv, SelectionPolicy::Uniform, 2));
    EXPECT_EQ(select({2.0, 2.0}, SelectionPolicy::Uniform, 9), 2.0);
}

TEST(Potential, RejectsBadInput) {
    EXPECT_THROW(PiecewisePotential({0.0}, {{0.0, 1.0}, {1.0, 1.0}}, 2.0), std::invalid_argument);
    EXPECT_THROW(PiecewisePotential({0.0}, {{0.0}}, 2.0), std::invalid_argument);
    EXPECT_THROW(PiecewisePotential({}, {{0.0}}, 1.5), std::invalid_argument);
    EXPECT_THROW(PiecewisePotential({1.0, 0.0}, {{0.0}, {0.0}, {0.0}}, 2.0), std::invalid_argument);
}

TEST(Kernel, MassAgreesWithIndependentQuadrature) {
    EXPECT_NEAR(bump_integral(0.0), BumpKernel::reference_mass, 1e-14);
    const BumpKernel kernel(64);
    EXPECT_NEAR(kernel.integral(), 1.0, 1e-14);
    const double z = bump_integral(0.0);
    // 64 Gauss points resolve the moments to about 2e-12.
    EXPECT_NEAR(kernel.moment(2), bump_integral(2.0) / z, 1e-11);
    EXPECT_NEAR(kernel.moment(4), bump_integral(4.0) / z, 1e-11);
    EXPECT_NEAR(bump_integral(2.0) / z, 0.158113636263798230, 1e-14);
    EXPECT_NEAR(kernel.moment(1), 0.0, 1e-15);
}

TEST(Kernel, QuadratureFloor) {
    EXPECT_THROW(BumpKernel(15), std::invalid_argument);
    EXPECT_THROW(BumpKernel(16), QuadratureError);
    EXPECT_THROW(BumpKernel(32), QuadratureError);
    EXPECT_NO_THROW(BumpKernel(64));
}

TEST(Mollifier, AbsoluteValueAtKink) {
    // j_n(0) = c_rho / n with c_rho = int |u| rho(u) du.
    const double c_rho = bump_integral(1.0) / bump_integral(0.0);
    const auto mp = mollify(PiecewisePotential::absolute(), 10);
    EXPECT_NEAR(c_rho / 10.0, 0.0334453997709975330, 1e-15);
    EXPECT_NEAR(mp.value(0.0), c_rho / 10.0, 1e-13);
    EXPECT_NEAR(mp.slope(0.0), 0.0, 1e-14);
    EXPECT_NEAR(mp.slope(1.0), 1.0, 1e-14);
    EXPECT_NEAR(mp.slope(-0.2), -1.0, 1e-14);
    EXPECT_NEAR(mp.slope(0.05), -mp.slope(-0.05), 1e-14);
}

TEST(Mollifier, ConvergesToPotential) {
    const auto pot = PiecewisePotential::pot_b();
    double previous = std::numeric_limits<double>::infinity();
    for (unsigned n : {2u, 4u, 8u, 16u, 32u}) {
        const auto mp = mollify(pot, n);
        double err = 0.0;
        for (double s = -2.0; s <= 2.0; s += 0.01) err = std::max(err, std::abs(mp.value(s) - pot.value(s)));
        EXPECT_LT(err, previous);
        EXPECT_LT(err, 1.0 / n);  // j is 1-Lipschitz near the kink, and smooth elsewhere
        previous = err;
    }
    // Away from the kink the smoothed slope of s^3 - 1 is s^3 - 1 + 3 s mu_2 / n^2.
    const auto mp = mollify(pot, 8);
    const double mu2 = mp.kernel().moment(2);
    EXPECT_NEAR(mp.slope(1.5), 1.5 * 1.5 * 1.5 - 1.0 + 3.0 * 1.5 * mu2 / 64.0, 1e-12);
}

TEST(Mollifier, OffsetShiftsTheKernel) {
    // With offset theta the window is centered at r + theta/n.
    const auto pot = PiecewisePotential::absolute();
    const auto shifted = mollify(pot, 4, 64, 0.5);
    const auto centered = mollify(pot, 4);
    EXPECT_NEAR(shifted.value(0.3), centered.value(0.3 + 0.5 / 4.0), 1e-12);
    EXPECT_DOUBLE_EQ(shifted.reach(), 1.5 / 4.0);
    EXPECT_EQ(selection_offset(SelectionPolicy::Min, 0), -1.0);
    EXPECT_EQ(selection_offset(SelectionPolicy::Max, 0), 1.0);
    EXPECT_EQ(selection_offset(SelectionPolicy::Mid, 0), 0.0);
}

TEST(Hypotheses, PotBSource) {
    const auto pot = PiecewisePotential::pot_b();
    const auto h = verify_hypotheses(pot, ProblemKind::Source, 1.0, 4.0);
    EXPECT_NEAR(h.a, 1.0, 1e-9);
    EXPECT_NEAR(h.b, 1.0, 1e-9);
    EXPECT_DOUBLE_EQ(h.d, 0.5);
    // Closed form: min of s^4/2 - |s| is -(3/4) 2^{-1/3}.
    EXPECT_NEAR(h.c, -0.75 * std::cbrt(0.5), 1e-9);
    EXPECT_NEAR(h.c, brute_force_c(pot, h.d, 4.0), 1e-9);
}

TEST(Hypotheses, BoundaryPotentials) {
    const auto abs_h = verify_hypotheses(PiecewisePotential::absolute(), ProblemKind::Boundary, 1.0, 4.0);
    EXPECT_NEAR(abs_h.a, 1.0, 1e-12);
    EXPECT_NEAR(abs_h.b, 0.0, 1e-12);
    EXPECT_NEAR(abs_h.c, 0.0, 1e-12);
    EXPECT_DOUBLE_EQ(abs_h.d, 0.5);
    const auto a = verify_hypotheses(PiecewisePotential::pot_a(), ProblemKind::Boundary, 1.0, 4.0);
    EXPECT_NEAR(a.a, 1.0, 1e-12);
    EXPECT_NEAR(a.b, 0.5, 1e-12);
    EXPECT_NEAR(a.c, 0.0, 1e-12);
    // lower = 1/2 (xi s = |s| - s^2/2 >= -s^2/2), upper = 1/||gamma||^2.
    EXPECT_DOUBLE_EQ(a.d, 0.75);
}

TEST(Hypotheses, Violations) {
    EXPECT_THROW(verify_hypotheses(PiecewisePotential::pot_b(), ProblemKind::Boundary, 1.0, 4.0), HypothesisViolation);
    // Slope degree 3 exceeds p - 1 = 1.
    const PiecewisePotential steep({}, {{0.0, 0.0, 0.0, 0.0, 1.0}}, 2.0);
    EXPECT_THROW(verify_hypotheses(steep, ProblemKind::Source, 1.0, 4.0), HypothesisViolation);
    // Concave source: no dissipativity.
    const PiecewisePotential concave({}, {{0.0, 0.0, -0.5}}, 2.0);
    EXPECT_THROW(verify_hypotheses(concave, ProblemKind::Source, 1.0, 4.0), HypothesisViolation);
}

TEST(Hypotheses, MollifiedConstantsWidenAndConverge) {
    const auto pot = PiecewisePotential::pot_b();
    const auto base = verify_hypotheses(pot, ProblemKind::Source, 1.0, 4.0);
    double previous = std::numeric_limits<double>::infinity();
    for (unsigned n : {1u, 2u, 4u, 8u, 16u}) {
        const auto h = certify_mollified(base, mollify(pot, n), 1.0, 4.0);
        EXPECT_EQ(h.d, base.d);
        EXPECT_GE(h.b, base.b);
        EXPECT_LE(h.c, base.c + 1e-12);
        EXPECT_LT(h.b, previous);
        previous = h.b;
    }
    EXPECT_NEAR(previous, 1.0, 5e-3);
}
