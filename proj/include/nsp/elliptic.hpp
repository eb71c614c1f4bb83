#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "nsp/domain.hpp"
#include "nsp/error.hpp"
#include "nsp/tridiag.hpp"

namespace nsp {

/// Conservative three-point discretization of the radial Laplacian phi'' + (2/r) phi'
/// with face coefficients r_i r_{i+1}, zero flux at R and the monopole Robin closure
/// phi' + phi/r = 0 at R_max. On uniform grids the interior rows coincide with the
/// standard centered stencil. The negated matrix is an irreducibly diagonally dominant
/// M-matrix, and it is symmetric in the inner product weighted by omega_i r_i^2.
class RadialLaplacian {
public:
    explicit RadialLaplacian(GridPtr grid) : grid_(std::move(grid)), op_(grid_->size()) {
        const auto& r = grid_->nodes();
        const auto& om = grid_->dr_weights();
        const std::size_t n = r.size();
        for (std::size_t i = 0; i < n; ++i) {
            const double vol = om[i] * r[i] * r[i];
            double lo = 0.0, up = 0.0;
            if (i > 0) lo = r[i - 1] * r[i] / (r[i] - r[i - 1]) / vol;
            if (i + 1 < n) up = r[i] * r[i + 1] / (r[i + 1] - r[i]) / vol;
            op_.lower[i] = lo;
            op_.upper[i] = up;
            op_.diag[i] = -(lo + up);
        }
        // Robin closure: r^2 phi'(R_max) = -R_max phi_N.
        op_.diag[n - 1] -= r[n - 1] / (om[n - 1] * r[n - 1] * r[n - 1]);
    }

    const GridPtr& grid_ptr() const noexcept { return grid_; }
    const Tridiagonal& matrix() const noexcept { return op_; }

    std::vector<double> apply(std::span<const double> phi) const { return op_.apply(phi); }

    /// Solves (Delta_h - shift) x = rhs.
    std::vector<double> solve(std::span<const double> rhs, double shift = 0.0) const {
        if (shift < 0.0) throw ParameterError("RadialLaplacian: shift must be >= 0");
        return shift == 0.0 ? solve_tridiagonal(op_, rhs) : solve_tridiagonal(op_.shifted(-shift), rhs);
    }

    /// Discrete Dirichlet energy, equal to -sum_i w_i phi_i (Delta_h phi)_i.
    double dirichlet_energy(std::span<const double> phi) const;

private:
    GridPtr grid_;
    Tridiagonal op_;
};

/// Discrete ||grad phi||^2 matching RadialLaplacian. The Robin term is the exact energy of the
/// monopole tail phi_N R_max / r beyond the truncation.
inline double dirichlet_energy(const RadialGrid& g, std::span<const double> phi) {
    const auto& r = g.nodes();
    const std::size_t n = r.size();
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double d = phi[i + 1] - phi[i];
        s += r[i] * r[i + 1] * d * d / (r[i + 1] - r[i]);
    }
    s += r[n - 1] * phi[n - 1] * phi[n - 1];
    return 4.0 * std::numbers::pi * s;
}

inline double RadialLaplacian::dirichlet_energy(std::span<const double> phi) const {
    return nsp::dirichlet_energy(*grid_, phi);
}

struct PoissonSolution {
    RadialField phi;
    double flux_at_outer = 0.0; ///< phi'(R_max) implied by the Robin closure
    double residual_norm = 0.0; ///< ||Delta_h phi - q||_{L^2}
};

inline PoissonSolution solve_poisson_neumann(const RadialLaplacian& lap, const RadialField& q) {
    auto phi = lap.solve(q.values());
    auto res = lap.apply(phi);
    for (std::size_t i = 0; i < res.size(); ++i) res[i] -= q[i];
    PoissonSolution out;
    const double r_out = q.grid().r_outer();
    out.flux_at_outer = -phi.back() / r_out;
    out.residual_norm = weighted_l2_norm(res, q.grid());
    out.phi = RadialField(q.grid_ptr(), std::move(phi));
    return out;
}

/// Solves phi'' + (2/r) phi' = q with phi'(R) = 0 and phi' + phi/r = 0 at R_max.
inline PoissonSolution solve_poisson_neumann(const RadialField& q) {
    return solve_poisson_neumann(RadialLaplacian(q.grid_ptr()), q);
}

/// Solves (Delta - M) w = rhs with the same boundary closures.
inline RadialField solve_shifted(double shift, const RadialField& rhs) {
    if (!(shift >= 0.0) || !std::isfinite(shift)) throw ParameterError("solve_shifted: M must be >= 0");
    RadialLaplacian lap(rhs.grid_ptr());
    return RadialField(rhs.grid_ptr(), lap.solve(rhs.values(), shift));
}

/// ||grad^2 phi|| for a radial potential: sqrt(||phi''||^2 + 2 ||phi'/r||^2).
inline double hessian_norm_radial(const RadialField& phi) { return scalar_tensor_gradient_norm(phi, 2); }

} // namespace nsp
