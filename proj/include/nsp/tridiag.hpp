#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "nsp/error.hpp"

namespace nsp {

/// Tridiagonal matrix stored by diagonals. lower[0] and upper[n-1] are unused.
struct Tridiagonal {
    std::vector<double> lower;
    std::vector<double> diag;
    std::vector<double> upper;

    explicit Tridiagonal(std::size_t n = 0) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}

    std::size_t size() const noexcept { return diag.size(); }

    std::vector<double> apply(std::span<const double> x) const {
        const std::size_t n = size();
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = diag[i] * x[i];
            if (i > 0) s += lower[i] * x[i - 1];
            if (i + 1 < n) s += upper[i] * x[i + 1];
            y[i] = s;
        }
        return y;
    }

    /// Returns a copy with `shift` added to every diagonal entry.
    Tridiagonal shifted(double shift) const {
        Tridiagonal t = *this;
        for (auto& d : t.diag) d += shift;
        return t;
    }
};

/// Thomas algorithm without pivoting. Stable for diagonally dominant systems,
/// which is the only kind assembled in this library.
inline std::vector<double> solve_tridiagonal(const Tridiagonal& m, std::span<const double> rhs) {
    const std::size_t n = m.size();
    if (rhs.size() != n) throw ParameterError("solve_tridiagonal: size mismatch");
    if (n == 0) return {};
    std::vector<double> c(n), d(n), x(n);
    double piv = m.diag[0];
    if (piv == 0.0) throw InternalError("solve_tridiagonal: zero pivot");
    c[0] = (n > 1 ? m.upper[0] : 0.0) / piv;
    d[0] = rhs[0] / piv;
    for (std::size_t i = 1; i < n; ++i) {
        piv = m.diag[i] - m.lower[i] * c[i - 1];
        if (piv == 0.0 || !std::isfinite(piv)) throw InternalError("solve_tridiagonal: singular system");
        c[i] = (i + 1 < n ? m.upper[i] : 0.0) / piv;
        d[i] = (rhs[i] - m.lower[i] * d[i - 1]) / piv;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
    return x;
}

} // namespace nsp
