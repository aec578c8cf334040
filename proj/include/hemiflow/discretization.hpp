#pragma once

// Piecewise-linear finite elements on (0, 1).

#include "hemiflow/tridiagonal.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hemiflow {

/// Coefficients over the free dofs of a DiscreteSpace.
using Field = Eigen::VectorXd;

enum class BoundaryCondition {
    DirichletBoth,  ///< v(0) = v(1) = 0
    DirichletLeft,  ///< v(0) = 0, x = 1 carries the boundary law
};

inline const char* to_string(BoundaryCondition bc) {
    return bc == BoundaryCondition::DirichletBoth ? "DIRICHLET_BOTH" : "DIRICHLET_LEFT";
}

class Mesh1D {
public:
    explicit Mesh1D(std::vector<double> nodes) : nodes_(std::move(nodes)) {
        if (nodes_.size() < 3) throw std::invalid_argument("mesh: need at least 3 nodes");
        if (nodes_.front() != 0.0 || nodes_.back() != 1.0)
            throw std::invalid_argument("mesh: nodes must start at 0 and end at 1");
        double total = 0.0;
        for (std::size_t i = 1; i < nodes_.size(); ++i) {
            const double h = nodes_[i] - nodes_[i - 1];
            if (!(h > 0.0)) throw std::invalid_argument("mesh: nodes must be strictly increasing");
            sizes_.push_back(h);
            total += h;
        }
        if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mesh: element sizes must sum to 1");
    }

    static Mesh1D uniform(std::size_t cells) {
        if (cells < 2) throw std::invalid_argument("mesh: need at least 2 cells");
        std::vector<double> x(cells + 1);
        for (std::size_t i = 0; i <= cells; ++i) x[i] = static_cast<double>(i) / static_cast<double>(cells);
        x.back() = 1.0;
        return Mesh1D(std::move(x));
    }

    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& sizes() const { return sizes_; }
    std::size_t node_count() const { return nodes_.size(); }
    std::size_t cell_count() const { return sizes_.size(); }
    double max_size() const { return *std::max_element(sizes_.begin(), sizes_.end()); }

private:
    std::vector<double> nodes_;
    std::vector<double> sizes_;
};

/// P1 space with assembled operators and the full generalized spectrum K phi = lambda M phi.
class DiscreteSpace {
public:
    DiscreteSpace(Mesh1D mesh, BoundaryCondition bc, bool with_spectrum = true)
        : mesh_(std::move(mesh)), bc_(bc) {
        const std::size_t nodes = mesh_.node_count();
        first_dof_node_ = 1;
        const std::size_t last = bc_ == BoundaryCondition::DirichletBoth ? nodes - 2 : nodes - 1;
        const auto n = static_cast<Eigen::Index>(last - first_dof_node_ + 1);
        M_ = {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(std::max<Eigen::Index>(n - 1, 0))};
        K_ = M_;
        const auto& h = mesh_.sizes();
        for (std::size_t e = 0; e < h.size(); ++e) {
            // Element e joins nodes e and e + 1.
            const auto a = dof_of_node(e);
            const auto b = dof_of_node(e + 1);
            const double me = h[e] / 6.0, ke = 1.0 / h[e];
            if (a >= 0) {
                M_.diag[a] += 2.0 * me;
                K_.diag[a] += ke;
            }
            if (b >= 0) {
                M_.diag[b] += 2.0 * me;
                K_.diag[b] += ke;
            }
            if (a >= 0 && b >= 0) {
                M_.off[a] += me;
                K_.off[a] -= ke;
            }
        }
        lumped_ = M_.row_sums();
        K_fact_ = TridiagonalLDL(K_);
        MK_fact_ = TridiagonalLDL(M_ + K_);
        if (bc_ == BoundaryCondition::DirichletLeft) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
            e[n - 1] = 1.0;
            trace_norm_sq_ = K_fact_.inverse_form(e);
        }
        if (with_spectrum) {
            Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(K_.dense(), M_.dense());
            if (solver.info() != Eigen::Success) throw std::runtime_error("eigen_decompose: solver failed");
            eigenvalues_ = solver.eigenvalues();
            eigenvectors_ = solver.eigenvectors();
            // Fix signs: first nonzero component positive.
            for (Eigen::Index k = 0; k < eigenvectors_.cols(); ++k) {
                Eigen::Index i = 0;
                while (i < n && std::abs(eigenvectors_(i, k)) < 1e-14) ++i;
                if (i < n && eigenvectors_(i, k) < 0.0) eigenvectors_.col(k) *= -1.0;
            }
        }
    }

    const Mesh1D& mesh() const { return mesh_; }
    BoundaryCondition bc() const { return bc_; }
    Eigen::Index dofs() const { return M_.size(); }
    const SymTridiagonal& mass() const { return M_; }
    const SymTridiagonal& stiffness() const { return K_; }
    /// Row sums of M, i.e. the integrals of the hat functions.
    const Eigen::VectorXd& lumped_mass() const { return lumped_; }
    const TridiagonalLDL& stiffness_factor() const { return K_fact_; }
    const TridiagonalLDL& mass_plus_stiffness_factor() const { return MK_fact_; }
    bool has_spectrum() const { return eigenvalues_.size() > 0; }
    const Eigen::VectorXd& eigenvalues() const { require_spectrum(); return eigenvalues_; }
    /// Columns are M-orthonormal eigenvectors, ascending eigenvalue.
    const Eigen::MatrixXd& eigenvectors() const { require_spectrum(); return eigenvectors_; }
    double lambda1() const { return eigenvalues()[0]; }

    /// Max over fields of trace(f)^2 / v_sq(f); DIRICHLET_LEFT only.
    double trace_norm_sq() const {
        if (bc_ != BoundaryCondition::DirichletLeft)
            throw std::logic_error("trace: DIRICHLET_BOTH space has no Neumann boundary");
        return trace_norm_sq_;
    }

    /// Dof index of a mesh node, -1 for constrained nodes.
    Eigen::Index dof_of_node(std::size_t node) const {
        const auto idx = static_cast<Eigen::Index>(node) - static_cast<Eigen::Index>(first_dof_node_);
        return idx >= 0 && idx < dofs() ? idx : -1;
    }

    /// Nodal values on every mesh node (constrained nodes are zero).
    std::vector<double> nodal_values(const Field& f) const {
        check(f);
        std::vector<double> out(mesh_.node_count(), 0.0);
        for (Eigen::Index i = 0; i < dofs(); ++i) out[first_dof_node_ + i] = f[i];
        return out;
    }

    Field interpolate(const std::function<double(double)>& g) const {
        Field f(dofs());
        for (Eigen::Index i = 0; i < dofs(); ++i) f[i] = g(mesh_.nodes()[first_dof_node_ + i]);
        return f;
    }

    Field zero() const { return Field::Zero(dofs()); }

    void check(const Field& f) const {
        if (f.size() != dofs())
            throw std::invalid_argument("field has " + std::to_string(f.size()) + " entries, space has " +
                                        std::to_string(dofs()) + " dofs");
    }

private:
    void require_spectrum() const {
        if (!has_spectrum()) throw std::logic_error("space was built without eigenpairs");
    }

    Mesh1D mesh_;
    BoundaryCondition bc_;
    std::size_t first_dof_node_ = 1;
    SymTridiagonal M_;
    SymTridiagonal K_;
    Eigen::VectorXd lumped_;
    TridiagonalLDL K_fact_;
    TridiagonalLDL MK_fact_;
    double trace_norm_sq_ = 0.0;
    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd eigenvectors_;
};

inline std::shared_ptr<const DiscreteSpace> build_space(const Mesh1D& mesh, BoundaryCondition bc,
                                                        bool with_spectrum = true) {
    return std::make_shared<const DiscreteSpace>(mesh, bc, with_spectrum);
}

struct EigenPairs {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};

inline EigenPairs eigen_decompose(const DiscreteSpace& space, Eigen::Index m) {
    if (m < 1 || m > space.dofs())
        throw std::out_of_range("eigen_decompose: m must lie in [1, " + std::to_string(space.dofs()) + "]");
    return {space.eigenvalues().head(m), space.eigenvectors().leftCols(m)};
}

struct Norms {
    double l2_sq = 0.0;
    double v_sq = 0.0;
};

inline Norms norms(const DiscreteSpace& space, const Field& f) {
    space.check(f);
    return {space.mass().quadratic_form(f), space.stiffness().quadratic_form(f)};
}

/// int_0^1 (|v(x)| - shift)_+^p dx for the piecewise-linear reconstruction.
inline double lp_norm_p(const DiscreteSpace& space, const Field& f, double p, double shift = 0.0) {
    if (!(p >= 1.0)) throw std::invalid_argument("lp_norm_p: p must be >= 1");
    if (!(shift >= 0.0)) throw std::invalid_argument("lp_norm_p: shift must be >= 0");
    static constexpr std::array<double, 4> gx{-0.86113631159405258, -0.33998104358485626, 0.33998104358485626,
                                              0.86113631159405258};
    static constexpr std::array<double, 4> gw{0.34785484513745386, 0.65214515486254614, 0.65214515486254614,
                                              0.34785484513745386};
    const auto v = space.nodal_values(f);
    const auto& h = space.mesh().sizes();
    auto integrand = [&](double value) {
        const double excess = std::abs(value) - shift;
        return excess > 0.0 ? std::pow(excess, p) : 0.0;
    };
    double total = 0.0;
    for (std::size_t e = 0; e < h.size(); ++e) {
        const double va = v[e], vb = v[e + 1];
        if (std::max(std::abs(va), std::abs(vb)) <= shift) continue;
        // Split the reference interval [0, 1] where v crosses 0 or +-shift.
        std::array<double, 5> cuts{0.0, 1.0, 1.0, 1.0, 1.0};
        std::size_t count = 1;
        if (vb != va) {
            for (double level : {0.0, shift, -shift}) {
                const double t = (level - va) / (vb - va);
                if (t > 0.0 && t < 1.0) cuts[count++] = t;
            }
        }
        cuts[count++] = 1.0;
        std::sort(cuts.begin(), cuts.begin() + static_cast<long>(count));
        double element = 0.0;
        for (std::size_t k = 0; k + 1 < count; ++k) {
            const double t0 = cuts[k], t1 = cuts[k + 1];
            if (!(t1 > t0)) continue;
            double part = 0.0;
            for (std::size_t q = 0; q < 4; ++q) {
                const double t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * gx[q];
                part += gw[q] * integrand(va + t * (vb - va));
            }
            element += 0.5 * (t1 - t0) * part;
        }
        total += h[e] * element;
    }
    return total;
}

/// Value at x = 1; DIRICHLET_LEFT only.
inline double trace(const DiscreteSpace& space, const Field& f) {
    if (space.bc() != BoundaryCondition::DirichletLeft)
        throw std::logic_error("trace: DIRICHLET_BOTH space has no Neumann boundary");
    space.check(f);
    return f[space.dofs() - 1];
}

struct TailProjection {
    Field tail;
    double tail_l2_sq = 0.0;
};

/// (I - P_m) f with P_m the M-orthogonal projection onto the first m eigenvectors.
inline TailProjection project_tail(const DiscreteSpace& space, const Field& f, Eigen::Index m) {
    space.check(f);
    if (m < 0 || m > space.dofs())
        throw std::out_of_range("project_tail: m must lie in [0, " + std::to_string(space.dofs()) + "]");
    const auto& phi = space.eigenvectors();
    const Eigen::VectorXd Mf = space.mass().apply(f);
    const Eigen::VectorXd coeffs = phi.leftCols(m).transpose() * Mf;
    TailProjection out;
    out.tail = f - phi.leftCols(m) * coeffs;
    out.tail_l2_sq = space.mass().quadratic_form(out.tail);
    return out;
}

/// Squared tail norms for m = 0..dofs from the M-coefficients (entry m is ||(I - P_m) f||^2).
inline std::vector<double> tail_spectrum(const DiscreteSpace& space, const Field& f) {
    const Eigen::VectorXd coeffs = space.eigenvectors().transpose() * space.mass().apply(f);
    std::vector<double> out(static_cast<std::size_t>(space.dofs()) + 1, 0.0);
    for (Eigen::Index m = space.dofs(); m-- > 0;)
        out[static_cast<std::size_t>(m)] = out[static_cast<std::size_t>(m) + 1] + coeffs[m] * coeffs[m];
    return out;
}

/// r^T (M + K)^{-1} r: squared dual norm of a residual functional.
inline double dual_norm_sq(const DiscreteSpace& space, const Eigen::VectorXd& r) {
    return space.mass_plus_stiffness_factor().inverse_form(r);
}

/// sup_z (F, z)^2 / ||z||_V^2 = (MF)^T K^{-1} (MF).
inline double forcing_dual_sq(const DiscreteSpace& space, const Field& F) {
    space.check(F);
    return space.stiffness_factor().inverse_form(space.mass().apply(F));
}

/// Evaluate the piecewise-linear reconstruction at x in [0, 1].
inline double evaluate_at(const DiscreteSpace& space, const std::vector<double>& nodal, double x) {
    const auto& xs = space.mesh().nodes();
    if (x <= 0.0) return nodal.front();
    if (x >= 1.0) return nodal.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const auto e = static_cast<std::size_t>(it - xs.begin()) - 1;
    const double t = (x - xs[e]) / (xs[e + 1] - xs[e]);
    return (1.0 - t) * nodal[e] + t * nodal[e + 1];
}

/// Nodal interpolation of f (from `from`) onto the nodes of `to`.
inline Field transfer(const DiscreteSpace& from, const Field& f, const DiscreteSpace& to) {
    if (from.bc() != to.bc()) throw std::invalid_argument("transfer: boundary conditions differ");
    const auto nodal = from.nodal_values(f);
    return to.interpolate([&](double x) { return evaluate_at(from, nodal, x); });
}

/// Snapshot: "<node count> <time>" then one "x value" row per mesh node.
inline void write_snapshot(std::ostream& os, const DiscreteSpace& space, const Field& f, double time) {
    const auto v = space.nodal_values(f);
    const auto& x = space.mesh().nodes();
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu %.17g\n", x.size(), time);
    os << buf;
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", x[i], v[i]);
        os << buf;
    }
}

struct Snapshot {
    std::vector<double> x;
    std::vector<double> values;
    double time = 0.0;
};

inline Snapshot read_snapshot(std::istream& is) {
    Snapshot s;
    std::size_t count = 0;
    if (!(is >> count >> s.time)) throw std::runtime_error("snapshot: bad header");
    s.x.resize(count);
    s.values.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        if (!(is >> s.x[i] >> s.values[i])) throw std::runtime_error("snapshot: truncated at row " + std::to_string(i));
    return s;
}

/// Field on `space` from a snapshot written on the same mesh.
inline Field field_from_snapshot(const DiscreteSpace& space, const Snapshot& s) {
    if (s.values.size() != space.mesh().node_count()) throw std::runtime_error("snapshot: node count mismatch");
    Field f(space.dofs());
    for (std::size_t node = 0; node < s.values.size(); ++node) {
        const auto dof = space.dof_of_node(node);
        if (dof >= 0) f[dof] = s.values[node];
    }
    return f;
}

}  // namespace hemiflow
