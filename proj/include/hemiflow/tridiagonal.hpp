#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace hemiflow {

/// Symmetric tridiagonal matrix: diag(0..n-1), off(i) couples i and i+1.
struct SymTridiagonal {
    Eigen::VectorXd diag;
    Eigen::VectorXd off;

    Eigen::Index size() const { return diag.size(); }

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
        const Eigen::Index n = size();
        Eigen::VectorXd y = diag.cwiseProduct(x);
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
            y[i] += off[i] * x[i + 1];
            y[i + 1] += off[i] * x[i];
        }
        return y;
    }

    double quadratic_form(const Eigen::VectorXd& x) const { return x.dot(apply(x)); }

    Eigen::VectorXd row_sums() const {
        Eigen::VectorXd s = diag;
        for (Eigen::Index i = 0; i + 1 < size(); ++i) {
            s[i] += off[i];
            s[i + 1] += off[i];
        }
        return s;
    }

    Eigen::MatrixXd dense() const {
        const Eigen::Index n = size();
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) A(i, i) = diag[i];
        for (Eigen::Index i = 0; i + 1 < n; ++i) A(i, i + 1) = A(i + 1, i) = off[i];
        return A;
    }

    SymTridiagonal operator+(const SymTridiagonal& o) const { return {diag + o.diag, off + o.off}; }
    SymTridiagonal scaled(double s) const { return {s * diag, s * off}; }
};

/// LDL^T factorization of a symmetric positive definite tridiagonal matrix.
class TridiagonalLDL {
public:
    TridiagonalLDL() = default;

    explicit TridiagonalLDL(const SymTridiagonal& A) {
        const Eigen::Index n = A.size();
        d_.resize(n);
        l_.resize(n > 0 ? n - 1 : 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            double pivot = A.diag[i];
            if (i > 0) pivot -= l_[i - 1] * l_[i - 1] * d_[i - 1];
            if (!(pivot > 0.0)) throw std::runtime_error("tridiagonal matrix is not positive definite");
            d_[i] = pivot;
            if (i + 1 < n) l_[i] = A.off[i] / pivot;
        }
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
        const Eigen::Index n = d_.size();
        Eigen::VectorXd x = b;
        for (Eigen::Index i = 1; i < n; ++i) x[i] -= l_[i - 1] * x[i - 1];
        for (Eigen::Index i = 0; i < n; ++i) x[i] /= d_[i];
        for (Eigen::Index i = n - 1; i-- > 0;) x[i] -= l_[i] * x[i + 1];
        return x;
    }

    /// b^T A^{-1} b.
    double inverse_form(const Eigen::VectorXd& b) const { return b.dot(solve(b)); }

private:
    Eigen::VectorXd d_;
    Eigen::VectorXd l_;
};

}  // namespace hemiflow
