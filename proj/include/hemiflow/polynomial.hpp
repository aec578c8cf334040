#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace hemiflow::poly {

/// Coefficients in ascending degree: c[0] + c[1] s + c[2] s^2 + ...
using Coeffs = std::vector<double>;

inline double eval(std::span<const double> c, double s) {
    double acc = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) acc = acc * s + c[k];
    return acc;
}

inline Coeffs derivative(std::span<const double> c) {
    if (c.size() <= 1) return Coeffs{0.0};
    Coeffs d(c.size() - 1);
    for (std::size_t k = 1; k < c.size(); ++k) d[k - 1] = static_cast<double>(k) * c[k];
    return d;
}

/// Degree ignoring trailing zeros; the zero polynomial has degree 0.
inline std::size_t degree(std::span<const double> c) {
    std::size_t deg = c.empty() ? 0 : c.size() - 1;
    while (deg > 0 && c[deg] == 0.0) --deg;
    return deg;
}

inline double coefficient(std::span<const double> c, std::size_t k) {
    return k < c.size() ? c[k] : 0.0;
}

/// Coefficients of q(s) = c(s + shift).
inline Coeffs shifted(std::span<const double> c, double shift) {
    Coeffs out(c.begin(), c.end());
    if (shift == 0.0 || out.size() <= 1) return out;
    // Repeated synthetic division (Taylor shift).
    const std::size_t n = out.size();
    for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t k = n - 1; k > i; --k) out[k - 1] += shift * out[k];
    return out;
}

/// Upper bound of |c^{(1)}(s)| for |s| <= radius.
inline double derivative_bound(std::span<const double> c, double radius) {
    double bound = 0.0;
    for (std::size_t k = 1; k < c.size(); ++k)
        bound += static_cast<double>(k) * std::abs(c[k]) * std::pow(radius, static_cast<double>(k - 1));
    return bound;
}

}  // namespace hemiflow::poly
