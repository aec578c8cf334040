#pragma once

// Piecewise-polynomial locally Lipschitz potentials, their Clarke
// subdifferentials, mollified regularizations and growth/dissipativity
// constants.

#include "hemiflow/errors.hpp"
#include "hemiflow/polynomial.hpp"

#include <boost/math/special_functions/legendre.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hemiflow {

enum class ProblemKind { Boundary, Source };
enum class SelectionPolicy { Min, Max, Mid, Uniform };

inline const char* to_string(ProblemKind kind) {
    return kind == ProblemKind::Boundary ? "BOUNDARY" : "SOURCE";
}

inline const char* to_string(SelectionPolicy policy) {
    switch (policy) {
        case SelectionPolicy::Min: return "MIN";
        case SelectionPolicy::Max: return "MAX";
        case SelectionPolicy::Mid: return "MID";
        case SelectionPolicy::Uniform: return "UNIFORM";
    }
    return "?";
}

/// Clarke subdifferential of a scalar potential: a compact interval.
struct SubgradientInterval {
    double lo = 0.0;
    double hi = 0.0;

    bool singleton() const { return lo == hi; }
    double width() const { return hi - lo; }
    /// Distance from x to [lo, hi].
    double distance(double x) const {
        if (x < lo) return lo - x;
        if (x > hi) return x - hi;
        return 0.0;
    }
    double max_abs() const { return std::max(std::abs(lo), std::abs(hi)); }
};

inline SubgradientInterval hull(double x, double y) {
    return x <= y ? SubgradientInterval{x, y} : SubgradientInterval{y, x};
}

/// Continuous piecewise polynomial j on the real line.
///
/// With breakpoints b_1 < ... < b_K there are K + 1 pieces: piece 0 covers
/// (-inf, b_1], piece i covers [b_i, b_{i+1}] and piece K covers [b_K, inf).
/// Coefficients are in the global variable s, ascending degree.
class PiecewisePotential {
public:
    PiecewisePotential() : PiecewisePotential({}, {{0.0}}, 2.0) {}

    PiecewisePotential(std::vector<double> breakpoints, std::vector<poly::Coeffs> pieces,
                       double growth_exponent)
        : breakpoints_(std::move(breakpoints)), pieces_(std::move(pieces)), p_(growth_exponent) {
        if (pieces_.size() != breakpoints_.size() + 1)
            throw std::invalid_argument("potential: need breakpoints + 1 pieces");
        if (!(p_ >= 2.0)) throw std::invalid_argument("potential: growth exponent p must be >= 2");
        for (std::size_t i = 1; i < breakpoints_.size(); ++i)
            if (!(breakpoints_[i] > breakpoints_[i - 1]))
                throw std::invalid_argument("potential: breakpoints must be strictly increasing");
        for (auto& piece : pieces_)
            if (piece.empty()) piece.push_back(0.0);
        for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
            const double b = breakpoints_[i];
            const double left = poly::eval(pieces_[i], b);
            const double right = poly::eval(pieces_[i + 1], b);
            if (std::abs(left - right) > 1e-12 * std::max(1.0, std::abs(left)))
                throw std::invalid_argument("potential: discontinuous at breakpoint " + std::to_string(b));
        }
        slopes_.reserve(pieces_.size());
        for (const auto& piece : pieces_) slopes_.push_back(poly::derivative(piece));
    }

    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<poly::Coeffs>& pieces() const { return pieces_; }
    const std::vector<poly::Coeffs>& slope_pieces() const { return slopes_; }
    double growth_exponent() const { return p_; }
    double conjugate_exponent() const { return p_ / (p_ - 1.0); }

    /// Index of the piece containing s; at a breakpoint, the piece to its right.
    std::size_t piece_index(double s) const {
        return static_cast<std::size_t>(
            std::upper_bound(breakpoints_.begin(), breakpoints_.end(), s) - breakpoints_.begin());
    }

    bool is_breakpoint(double s) const {
        return std::binary_search(breakpoints_.begin(), breakpoints_.end(), s);
    }

    double value(double s) const { return poly::eval(pieces_[piece_index(s)], s); }

    double slope_right(double s) const { return poly::eval(slopes_[piece_index(s)], s); }

    double slope_left(double s) const {
        std::size_t i = piece_index(s);
        if (i > 0 && breakpoints_[i - 1] == s) --i;
        return poly::eval(slopes_[i], s);
    }

    // Named potentials used by presets and tests.
    static PiecewisePotential zero(double p = 2.0) { return {{}, {{0.0}}, p}; }
    static PiecewisePotential absolute() { return {{0.0}, {{0.0, -1.0}, {0.0, 1.0}}, 2.0}; }
    static PiecewisePotential quadratic() { return {{}, {{0.0, 0.0, 0.5}}, 2.0}; }
    /// |s| - s^2/4: nonmonotone boundary law.
    static PiecewisePotential pot_a() {
        return {{0.0}, {{0.0, -1.0, -0.25}, {0.0, 1.0, -0.25}}, 2.0};
    }
    /// s^4/4 - |s|: nonmonotone source with quartic growth.
    static PiecewisePotential pot_b() {
        return {{0.0}, {{0.0, 1.0, 0.0, 0.0, 0.25}, {0.0, -1.0, 0.0, 0.0, 0.25}}, 4.0};
    }

private:
    std::vector<double> breakpoints_;
    std::vector<poly::Coeffs> pieces_;
    std::vector<poly::Coeffs> slopes_;
    double p_;
};

inline double evaluate(const PiecewisePotential& pot, double s) { return pot.value(s); }

inline SubgradientInterval clarke_subdifferential(const PiecewisePotential& pot, double s) {
    const double right = pot.slope_right(s);
    if (!pot.is_breakpoint(s)) return {right, right};
    return hull(pot.slope_left(s), right);
}

/// Generalized directional derivative j0(s; v) = max { xi v : xi in dj(s) }.
inline double directional_derivative(const PiecewisePotential& pot, double s, double v) {
    const auto iv = clarke_subdifferential(pot, s);
    return std::max(iv.lo * v, iv.hi * v);
}

/// One element of [lo, hi]; deterministic in (policy, seed).
inline double select(const SubgradientInterval& iv, SelectionPolicy policy, std::uint64_t seed) {
    switch (policy) {
        case SelectionPolicy::Min: return iv.lo;
        case SelectionPolicy::Max: return iv.hi;
        case SelectionPolicy::Mid: return 0.5 * (iv.lo + iv.hi);
        case SelectionPolicy::Uniform: {
            if (iv.singleton()) return iv.lo;
            std::mt19937_64 engine(seed);
            const double u = std::generate_canonical<double, 53>(engine);
            return std::clamp(iv.lo + u * (iv.hi - iv.lo), iv.lo, iv.hi);
        }
    }
    return iv.lo;
}

/// Normalized bump exp(-1/(1-u^2)) on (-1, 1), tabulated by Gauss-Legendre.
class BumpKernel {
public:
    /// Integral of exp(-1/(1-u^2)) over (-1, 1).
    static constexpr double reference_mass = 0.44399381616807943;
    static constexpr double normalization_tolerance = 1e-8;

    explicit BumpKernel(unsigned quad_points) : quad_points_(quad_points) {
        if (quad_points < 16) throw std::invalid_argument("mollify: quad_points must be >= 16");
        const auto zeros = boost::math::legendre_p_zeros<double>(static_cast<int>(quad_points));
        const int n = static_cast<int>(quad_points);
        for (double x : zeros) {
            const double dp = boost::math::legendre_p_prime<double>(n, x);
            const double w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes_.push_back(x);
            weights_.push_back(w);
            if (x != 0.0) {
                nodes_.push_back(-x);
                weights_.push_back(w);
            }
        }
        double mass = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) mass += weights_[i] * raw_density(nodes_[i]);
        if (std::abs(mass / reference_mass - 1.0) > normalization_tolerance)
            throw QuadratureError("mollify: " + std::to_string(quad_points) +
                                  " Gauss points miss the kernel normalization tolerance");
        mass_ = mass;
        // Even moments mu_{2k}, enough for any practical polynomial degree.
        moments_.assign(kMaxMoment + 1, 0.0);
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const double w = weights_[i] * raw_density(nodes_[i]) / mass_;
            double power = 1.0;
            for (std::size_t k = 0; k <= kMaxMoment; ++k) {
                moments_[k] += w * power;
                power *= nodes_[i];
            }
        }
    }

    static double raw_density(double u) {
        const double q = 1.0 - u * u;
        return q > 0.0 ? std::exp(-1.0 / q) : 0.0;
    }
    double density(double u) const { return raw_density(u) / mass_; }

    unsigned quad_points() const { return quad_points_; }
    /// Quadrature approximation of the kernel integral (== 1 up to rounding).
    double integral() const {
        double total = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) total += weights_[i] * density(nodes_[i]);
        return total;
    }
    /// int rho(u) u^k du; odd moments vanish up to rounding.
    double moment(std::size_t k) const {
        if (k > kMaxMoment) throw std::out_of_range("kernel moment order too high");
        return moments_[k];
    }

    /// int_a^b rho(u) f(u) du with the same rule mapped onto [a, b].
    template <class F>
    double integrate(double a, double b, F&& f) const {
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        double total = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const double u = mid + half * nodes_[i];
            total += weights_[i] * density(u) * f(u);
        }
        return half * total;
    }

private:
    static constexpr std::size_t kMaxMoment = 24;
    unsigned quad_points_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
    std::vector<double> moments_;
    double mass_ = 1.0;
};

/// Coefficients of the convolution of a polynomial with rho_n (rho_n(s) = n rho(n s)).
inline poly::Coeffs smoothed(std::span<const double> c, unsigned n, const BumpKernel& kernel) {
    poly::Coeffs out(c.begin(), c.end());
    poly::Coeffs deriv(c.begin(), c.end());
    double factorial = 1.0;
    for (std::size_t k = 1; k < c.size(); ++k) {
        deriv = poly::derivative(deriv);
        factorial *= static_cast<double>(k);
        if (k % 2 == 1) continue;
        const double scale = kernel.moment(k) / (factorial * std::pow(static_cast<double>(n), static_cast<double>(k)));
        for (std::size_t i = 0; i < deriv.size(); ++i) out[i] += scale * deriv[i];
    }
    return out;
}

/// j_n(r) = int rho_n(s) j(r + offset/n - s) ds and its derivative.
///
/// offset = 0 is the symmetric mollifier; offset in [-1, 1] shifts the kernel
/// window to realize one-sided selections at kinks.
class MollifiedPotential {
public:
    MollifiedPotential(PiecewisePotential base, unsigned level, std::shared_ptr<const BumpKernel> kernel,
                       double offset = 0.0)
        : base_(std::move(base)), n_(level), offset_(offset), kernel_(std::move(kernel)) {
        if (n_ < 1) throw std::invalid_argument("mollify: level n must be >= 1");
        if (!(offset_ >= -1.0 && offset_ <= 1.0)) throw std::invalid_argument("mollify: offset must lie in [-1, 1]");
        for (const auto& piece : base_.pieces()) {
            auto value = smoothed(piece, n_, *kernel_);
            slope_.push_back(poly::derivative(value));
            value_.push_back(std::move(value));
        }
    }

    const PiecewisePotential& base() const { return base_; }
    unsigned level() const { return n_; }
    double offset() const { return offset_; }
    const BumpKernel& kernel() const { return *kernel_; }
    std::shared_ptr<const BumpKernel> kernel_ptr() const { return kernel_; }

    /// Half-width of the window of j' that j_n' averages, measured from r.
    double reach() const { return (1.0 + std::abs(offset_)) / static_cast<double>(n_); }

    double value(double r) const { return convolve(r, value_, base_.pieces()); }
    double slope(double r) const { return convolve(r, slope_, base_.slope_pieces()); }

    /// Polynomial form of j_n' valid for r >= right_tail_start().
    poly::Coeffs right_tail_slope() const { return poly::shifted(slope_.back(), offset_ / n_); }
    poly::Coeffs left_tail_slope() const { return poly::shifted(slope_.front(), offset_ / n_); }
    double right_tail_start() const {
        return base_.breakpoints().empty() ? 0.0 : base_.breakpoints().back() + reach();
    }
    double left_tail_start() const {
        return base_.breakpoints().empty() ? 0.0 : base_.breakpoints().front() - reach();
    }

private:
    double convolve(double r, const std::vector<poly::Coeffs>& smooth,
                    const std::vector<poly::Coeffs>& raw) const {
        const double inv_n = 1.0 / static_cast<double>(n_);
        const double center = r + offset_ * inv_n;
        const auto& bps = base_.breakpoints();
        auto first = std::upper_bound(bps.begin(), bps.end(), center - inv_n);
        auto last = std::lower_bound(bps.begin(), bps.end(), center + inv_n);
        if (first >= last) return poly::eval(smooth[base_.piece_index(center)], center);

        // Kernel support meets kinks: split u in (-1, 1) where center - u/n hits a breakpoint.
        std::vector<double> cuts{-1.0};
        for (auto it = last; it != first;) {
            --it;
            cuts.push_back(static_cast<double>(n_) * (center - *it));
        }
        cuts.push_back(1.0);
        double total = 0.0;
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            const double a = cuts[k], b = cuts[k + 1];
            if (!(b > a)) continue;
            const auto& piece = raw[base_.piece_index(center - 0.5 * (a + b) * inv_n)];
            total += kernel_->integrate(a, b, [&](double u) { return poly::eval(piece, center - u * inv_n); });
        }
        return total;
    }

    PiecewisePotential base_;
    unsigned n_;
    double offset_;
    std::shared_ptr<const BumpKernel> kernel_;
    std::vector<poly::Coeffs> value_;
    std::vector<poly::Coeffs> slope_;
};

inline MollifiedPotential mollify(const PiecewisePotential& pot, unsigned n, unsigned quad_points = 64,
                                  double offset = 0.0) {
    if (n < 1) throw std::invalid_argument("mollify: level n must be >= 1");
    return MollifiedPotential(pot, n, std::make_shared<const BumpKernel>(quad_points), offset);
}

/// Kernel offset realizing a selection policy at the mollified level.
inline double selection_offset(SelectionPolicy policy, std::uint64_t seed) {
    return select(SubgradientInterval{-1.0, 1.0}, policy, seed);
}

/// Growth |xi| <= a + b|s|^{p-1}; dissipativity xi s >= c + d|s|^p (SOURCE)
/// or xi s >= c - d|s|^2 (BOUNDARY).
struct HypothesisConstants {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double d = 0.0;
    ProblemKind kind = ProblemKind::Source;
    double p = 2.0;
    /// Upper bound on how far a between-grid extremum can exceed the scanned one.
    double scan_error = 0.0;
};

namespace detail {

/// Slope sets of a potential together with the polynomial tails used to
/// bound growth and dissipativity outside the scanned window.
struct SlopeModel {
    std::function<SubgradientInterval(double)> slopes;
    std::vector<double> kinks;
    poly::Coeffs left_tail;
    poly::Coeffs right_tail;
    double left_start = 0.0;
    double right_start = 0.0;
    double slope_lipschitz = 0.0;  // bound of |xi'| on smooth parts within the window
};

inline bool is_integer(double x) { return std::abs(x - std::round(x)) < 1e-12; }

struct TailInfo {
    double b = 0.0;           // sum_{k>=1} |c_k|
    double constant = 0.0;    // |c_0|
    double rate = 0.0;        // leading coefficient of xi*s at |s|^p (SOURCE) or s^2 (BOUNDARY)
    double lower_sum = 0.0;   // sum of |c_k| below the leading degree
};

inline TailInfo analyze_tail(const poly::Coeffs& slope, double p, ProblemKind kind, bool left) {
    TailInfo info;
    const std::size_t deg = poly::degree(slope);
    if (static_cast<double>(deg) > p - 1.0 + 1e-12)
        throw HypothesisViolation("growth: tail slope has degree " + std::to_string(deg) +
                                  " > p - 1 = " + std::to_string(p - 1.0));
    info.constant = std::abs(poly::coefficient(slope, 0));
    for (std::size_t k = 1; k <= deg; ++k) info.b += std::abs(slope[k]);
    const double q = kind == ProblemKind::Source ? p : 2.0;
    if (is_integer(q) && static_cast<double>(deg) == q - 1.0) {
        const double lead = slope[deg];
        // xi * s ~ lead * s^q; on the left tail s^q = (-1)^q |s|^q.
        const bool odd = static_cast<long>(std::round(q)) % 2 != 0;
        info.rate = (left && odd) ? -lead : lead;
        for (std::size_t k = 0; k < deg; ++k) info.lower_sum += std::abs(slope[k]);
    } else {
        for (std::size_t k = 0; k <= deg; ++k) info.lower_sum += std::abs(poly::coefficient(slope, k));
    }
    return info;
}

/// Dense scan of f over [-radius, radius] plus kinks, with Brent polish of
/// the best candidates; returns the maximum found.
inline double scan_maximum(const std::function<double(double)>& f, double radius,
                           const std::vector<double>& kinks, double step) {
    const auto count = static_cast<std::size_t>(std::ceil(2.0 * radius / step));
    std::vector<double> grid(count + 1);
    std::vector<double> values(count + 1);
    for (std::size_t i = 0; i <= count; ++i) {
        grid[i] = -radius + 2.0 * radius * static_cast<double>(i) / static_cast<double>(count);
        values[i] = f(grid[i]);
    }
    double best = *std::max_element(values.begin(), values.end());
    for (double k : kinks)
        if (std::abs(k) <= radius) best = std::max(best, f(k));

    // Polish the few largest local maxima of the grid.
    std::vector<std::size_t> local;
    for (std::size_t i = 0; i <= count; ++i) {
        const bool left_ok = i == 0 || values[i] >= values[i - 1];
        const bool right_ok = i == count || values[i] >= values[i + 1];
        if (left_ok && right_ok) local.push_back(i);
    }
    std::sort(local.begin(), local.end(), [&](std::size_t x, std::size_t y) { return values[x] > values[y]; });
    if (local.size() > 4) local.resize(4);
    for (std::size_t i : local) {
        const double lo = grid[i == 0 ? 0 : i - 1];
        const double hi = grid[i == count ? count : i + 1];
        if (!(hi > lo)) continue;
        auto neg = [&](double s) { return -f(s); };
        const auto res = boost::math::tools::brent_find_minima(neg, lo, hi, 52);
        best = std::max(best, -res.second);
    }
    return best;
}

inline HypothesisConstants certify(const SlopeModel& model, ProblemKind kind, double p,
                                   double trace_norm_sq, double scan_radius, std::optional<double> fixed_d,
                                   double d_fraction) {
    if (!(scan_radius > 0.0)) throw std::invalid_argument("verify_hypotheses: scan_radius must be > 0");
    const double q = kind == ProblemKind::Source ? p : 2.0;
    if (kind == ProblemKind::Boundary && std::abs(p - 2.0) > 1e-12)
        throw HypothesisViolation("BOUNDARY problems require p = 2");

    const TailInfo left = analyze_tail(model.left_tail, q, kind, true);
    const TailInfo right = analyze_tail(model.right_tail, q, kind, false);

    HypothesisConstants out;
    out.kind = kind;
    out.p = q;
    out.b = std::max(left.b, right.b);

    // d from the tail rates.
    const double rate = std::min(left.rate, right.rate);
    if (kind == ProblemKind::Source) {
        if (!(rate > 0.0))
            throw HypothesisViolation("dissipativity: SOURCE tails give xi*s ~ " + std::to_string(rate) +
                                      " |s|^p, need a positive rate");
        out.d = fixed_d ? *fixed_d : d_fraction * rate;
        if (!(out.d > 0.0) || out.d >= rate) throw HypothesisViolation("dissipativity: d must lie in (0, rate)");
    } else {
        if (!(trace_norm_sq > 0.0)) throw std::invalid_argument("verify_hypotheses: trace_norm_sq must be > 0");
        const double lower = std::max(0.0, -rate);
        const double upper = 1.0 / trace_norm_sq;
        if (!(lower < upper))
            throw HypothesisViolation("dissipativity: BOUNDARY needs d > " + std::to_string(lower) +
                                      " but d < 1/||gamma||^2 = " + std::to_string(upper));
        out.d = fixed_d ? *fixed_d : lower + d_fraction * (upper - lower);
        if (!(out.d > lower) && lower > 0.0) throw HypothesisViolation("dissipativity: d too small for tails");
        if (!(out.d * trace_norm_sq < 1.0)) throw HypothesisViolation("dissipativity: d ||gamma||^2 must be < 1");
    }
    const double effective = kind == ProblemKind::Source ? rate - out.d : rate + out.d;

    // Window: cover the scan radius, every kink, the tail starts, |s| >= 1 and
    // the radius past which xi*s -/+ d|s|^q is provably nonnegative.
    double window = std::max(scan_radius, 1.0);
    for (double k : model.kinks) window = std::max(window, std::abs(k) + 1e-9);
    window = std::max({window, std::abs(model.left_start), std::abs(model.right_start)});
    const double tail_zero = std::max(left.lower_sum, right.lower_sum) / effective;
    const double c_window = std::max(window, tail_zero + 1.0);

    const double step = 1e-3 * scan_radius;
    auto growth_excess = [&](double s) {
        return model.slopes(s).max_abs() - out.b * std::pow(std::abs(s), q - 1.0);
    };
    out.a = std::max({scan_maximum(growth_excess, window, model.kinks, step), left.constant, right.constant});
    if (out.a < 0.0) out.a = 0.0;

    auto dissipation = [&](double s) {
        const auto iv = model.slopes(s);
        const double xs = std::min(iv.lo * s, iv.hi * s);
        return kind == ProblemKind::Source ? xs - out.d * std::pow(std::abs(s), q) : xs + out.d * s * s;
    };
    out.c = -scan_maximum([&](double s) { return -dissipation(s); }, c_window, model.kinks,
                          std::max(step, 1e-3 * c_window));
    if (kind == ProblemKind::Source && out.c > 0.0) out.c = 0.0;

    const double xi_sup = out.a + out.b * std::pow(c_window, q - 1.0);
    const double growth_lip = model.slope_lipschitz + out.b * (q - 1.0) * std::pow(c_window, std::max(q - 2.0, 0.0));
    const double diss_lip = model.slope_lipschitz * c_window + xi_sup + out.d * q * std::pow(c_window, q - 1.0);
    out.scan_error = 0.5 * std::max(growth_lip * step, diss_lip * std::max(step, 1e-3 * c_window));
    return out;
}

inline double piece_slope_lipschitz(const std::vector<poly::Coeffs>& slopes, double radius) {
    double lip = 0.0;
    for (const auto& s : slopes) lip = std::max(lip, poly::derivative_bound(s, radius));
    return lip;
}

}  // namespace detail

/// Growth and dissipativity constants of a potential (see HypothesisConstants).
///
/// (a, b) certify every one-sided slope; d is d_fraction of the leading
/// dissipative rate (SOURCE) or of the admissible band below 1/||gamma||^2
/// (BOUNDARY); c is the sharpest constant found by grid scan + Brent polish.
inline HypothesisConstants verify_hypotheses(const PiecewisePotential& pot, ProblemKind kind, double trace_norm_sq,
                                             double scan_radius, double d_fraction = 0.5) {
    detail::SlopeModel model;
    model.slopes = [&pot](double s) { return clarke_subdifferential(pot, s); };
    model.kinks = pot.breakpoints();
    model.left_tail = pot.slope_pieces().front();
    model.right_tail = pot.slope_pieces().back();
    model.left_start = pot.breakpoints().empty() ? 0.0 : pot.breakpoints().front();
    model.right_start = pot.breakpoints().empty() ? 0.0 : pot.breakpoints().back();
    double radius = std::max(scan_radius, 1.0);
    for (double b : pot.breakpoints()) radius = std::max(radius, std::abs(b));
    model.slope_lipschitz = detail::piece_slope_lipschitz(pot.slope_pieces(), 4.0 * radius);
    return detail::certify(model, kind, pot.growth_exponent(), trace_norm_sq, scan_radius, std::nullopt, d_fraction);
}

/// Constants valid for both j and the mollified j_n (same d): a widened, c lowered.
inline HypothesisConstants certify_mollified(const HypothesisConstants& base, const MollifiedPotential& mp,
                                             double trace_norm_sq, double scan_radius) {
    detail::SlopeModel model;
    model.slopes = [&mp](double s) {
        const double g = mp.slope(s);
        return SubgradientInterval{g, g};
    };
    model.kinks = mp.base().breakpoints();
    for (double b : mp.base().breakpoints()) {
        model.kinks.push_back(b - mp.reach());
        model.kinks.push_back(b + mp.reach());
    }
    std::sort(model.kinks.begin(), model.kinks.end());
    model.left_tail = mp.left_tail_slope();
    model.right_tail = mp.right_tail_slope();
    model.left_start = mp.left_tail_start();
    model.right_start = mp.right_tail_start();
    double radius = std::max(scan_radius, 1.0);
    double jumps = 0.0;
    const auto& pot = mp.base();
    for (double b : pot.breakpoints()) {
        radius = std::max(radius, std::abs(b) + mp.reach());
        jumps += clarke_subdifferential(pot, b).width();
    }
    model.slope_lipschitz = detail::piece_slope_lipschitz(pot.slope_pieces(), 4.0 * radius) +
                            jumps * mp.level() * mp.kernel().density(0.0);
    auto widened = detail::certify(model, base.kind, base.p, trace_norm_sq, scan_radius, base.d, 0.5);
    widened.a = std::max(widened.a, base.a);
    widened.b = std::max(widened.b, base.b);
    widened.c = std::min(widened.c, base.c);
    widened.scan_error = std::max(widened.scan_error, base.scan_error);
    return widened;
}

}  // namespace hemiflow
