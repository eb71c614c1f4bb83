#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "nsp/error.hpp"

namespace nsp {

namespace detail {

/// Fornberg's recursion for finite-difference weights of derivative `order`
/// at `x0` on arbitrary distinct nodes.
inline std::vector<double> fornberg_weights(double x0, std::span<const double> x, int order) {
    const int n = static_cast<int>(x.size());
    std::vector<std::vector<double>> c(n, std::vector<double>(order + 1, 0.0));
    double c1 = 1.0;
    double c4 = x[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, order);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = c[i][order];
    return w;
}

struct Stencil {
    std::size_t start = 0;
    std::size_t len = 0;
    std::array<double, 5> w{};
};

/// Second-order stencils: centered in the interior, one-sided near the ends.
inline std::vector<Stencil> build_stencils(std::span<const double> r, int order) {
    const std::size_t n = r.size();
    const std::size_t centered = (order % 2 == 1) ? order + 2 : order + 1;
    const std::size_t half = centered / 2;
    const std::size_t onesided = order + 2;
    std::vector<Stencil> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        Stencil s;
        if (i >= half && i + half < n) {
            s.start = i - half;
            s.len = centered;
        } else {
            s.len = onesided;
            s.start = (i < half) ? 0 : n - onesided;
        }
        auto w = fornberg_weights(r[i], r.subspan(s.start, s.len), order);
        std::copy(w.begin(), w.end(), s.w.begin());
        out[i] = s;
    }
    return out;
}

} // namespace detail

/// Truncated exterior shell [R, R_max] with trapezoid volume weights w_i = 4 pi r_i^2 omega_i.
class RadialGrid {
public:
    RadialGrid(double r_inner, double r_outer, std::vector<double> nodes)
        : r_inner_(r_inner), r_outer_(r_outer), nodes_(std::move(nodes)) {
        const std::size_t n = nodes_.size();
        omega_.assign(n, 0.0);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double h = nodes_[i + 1] - nodes_[i];
            if (!(h > 0.0)) throw ParameterError("RadialGrid: nodes must be strictly increasing");
            omega_[i] += 0.5 * h;
            omega_[i + 1] += 0.5 * h;
        }
        weights_.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            weights_[i] = 4.0 * std::numbers::pi * nodes_[i] * nodes_[i] * omega_[i];
        for (int k = 1; k <= 3; ++k) stencils_[k - 1] = detail::build_stencils(nodes_, k);
    }

    double r_inner() const noexcept { return r_inner_; }
    double r_outer() const noexcept { return r_outer_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t n_cells() const noexcept { return nodes_.size() - 1; }
    const std::vector<double>& nodes() const noexcept { return nodes_; }
    double r(std::size_t i) const noexcept { return nodes_[i]; }
    /// Volume weights realizing the integral of f * 4 pi r^2 dr.
    const std::vector<double>& weights() const noexcept { return weights_; }
    /// Trapezoid weights in r alone.
    const std::vector<double>& dr_weights() const noexcept { return omega_; }
    double min_spacing() const {
        double h = nodes_[1] - nodes_[0];
        for (std::size_t i = 1; i + 1 < nodes_.size(); ++i) h = std::min(h, nodes_[i + 1] - nodes_[i]);
        return h;
    }
    double spacing(std::size_t cell) const { return nodes_[cell + 1] - nodes_[cell]; }
    const std::vector<detail::Stencil>& stencils(int order) const { return stencils_.at(order - 1); }

private:
    double r_inner_;
    double r_outer_;
    std::vector<double> nodes_;
    std::vector<double> omega_;
    std::vector<double> weights_;
    std::array<std::vector<detail::Stencil>, 3> stencils_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

/// Builds a shell grid. stretch = 0 is uniform; stretch > 0 grows the spacing geometrically
/// outward so that the last cell is (1 + stretch) times the first.
inline GridPtr build_radial_grid(double r_inner, double r_outer, std::size_t n_cells, double stretch = 0.0) {
    if (!std::isfinite(r_inner) || !std::isfinite(r_outer) || !std::isfinite(stretch))
        throw ParameterError("build_radial_grid: non-finite input");
    if (!(r_inner > 0.0)) throw ParameterError("build_radial_grid: R must be > 0");
    if (!(r_outer > r_inner)) throw ParameterError("build_radial_grid: R_max must exceed R");
    if (n_cells < 8) throw ParameterError("build_radial_grid: need at least 8 cells");
    if (stretch < 0.0) throw ParameterError("build_radial_grid: stretch must be >= 0");
    std::vector<double> r(n_cells + 1);
    const double len = r_outer - r_inner;
    if (stretch == 0.0) {
        for (std::size_t i = 0; i <= n_cells; ++i)
            r[i] = r_inner + len * static_cast<double>(i) / static_cast<double>(n_cells);
    } else {
        const double ratio = std::pow(1.0 + stretch, 1.0 / static_cast<double>(n_cells - 1));
        const double h0 = len * (ratio - 1.0) / (std::pow(ratio, static_cast<double>(n_cells)) - 1.0);
        double h = h0;
        r[0] = r_inner;
        for (std::size_t i = 1; i <= n_cells; ++i) {
            r[i] = r[i - 1] + h;
            h *= ratio;
        }
    }
    r.front() = r_inner;
    r.back() = r_outer;
    return std::make_shared<const RadialGrid>(r_inner, r_outer, std::move(r));
}

/// One scalar per grid node. Vector radial fields u(r) r-hat store the radial component only.
class RadialField {
public:
    RadialField() = default;
    RadialField(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
        if (!grid_) throw ParameterError("RadialField: null grid");
        if (values_.size() != grid_->size()) throw ParameterError("RadialField: length does not match grid");
        for (double v : values_)
            if (!std::isfinite(v)) throw ParameterError("RadialField: non-finite value");
    }

    static RadialField zeros(GridPtr grid) {
        const std::size_t n = grid->size();
        return RadialField(std::move(grid), std::vector<double>(n, 0.0));
    }
    static RadialField constant(GridPtr grid, double c) {
        const std::size_t n = grid->size();
        return RadialField(std::move(grid), std::vector<double>(n, c));
    }
    template <class F>
    static RadialField from_function(GridPtr grid, F&& f) {
        std::vector<double> v(grid->size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid->r(i));
        return RadialField(std::move(grid), std::move(v));
    }

    const GridPtr& grid_ptr() const noexcept { return grid_; }
    const RadialGrid& grid() const noexcept { return *grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    const std::vector<double>& values() const noexcept { return values_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    double max_abs() const noexcept {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    /// Pointwise map producing a new field on the same grid.
    template <class F>
    RadialField map(F&& f) const {
        std::vector<double> v(values_.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid_->r(i), values_[i]);
        return RadialField(grid_, std::move(v));
    }

    friend RadialField operator+(const RadialField& a, const RadialField& b) { return combine(a, b, 1.0, 1.0); }
    friend RadialField operator-(const RadialField& a, const RadialField& b) { return combine(a, b, 1.0, -1.0); }
    friend RadialField operator*(double s, const RadialField& a) {
        std::vector<double> v(a.values_);
        for (auto& x : v) x *= s;
        return RadialField(a.grid_, std::move(v));
    }

private:
    static RadialField combine(const RadialField& a, const RadialField& b, double sa, double sb) {
        if (a.size() != b.size()) throw ParameterError("RadialField: grid mismatch");
        std::vector<double> v(a.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = sa * a.values_[i] + sb * b.values_[i];
        return RadialField(a.grid_, std::move(v));
    }

    GridPtr grid_;
    std::vector<double> values_;
};

enum class FieldKind { scalar, vector };

/// Discrete integral of f over the shell with the 4 pi r^2 volume weight.
inline double integrate(const RadialField& f) {
    const auto& w = f.grid().weights();
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * f[i];
    return s;
}

inline double weighted_l2_norm(std::span<const double> f, const RadialGrid& g) {
    const auto& w = g.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (!std::isfinite(f[i])) throw ParameterError("weighted_l2_norm: non-finite input");
        s += w[i] * f[i] * f[i];
    }
    return std::sqrt(s);
}

inline double weighted_l2_norm(const RadialField& f) { return weighted_l2_norm(f.values(), f.grid()); }

/// Raw-array radial derivative used by the hot paths of the time integrator.
inline void radial_derivative_into(const RadialGrid& g, std::span<const double> f, int order, std::span<double> out) {
    const auto& st = g.stencils(order);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const auto& s = st[i];
        double acc = 0.0;
        for (std::size_t k = 0; k < s.len; ++k) acc += s.w[k] * f[s.start + k];
        out[i] = acc;
    }
}

inline std::vector<double> radial_derivative(const RadialGrid& g, std::span<const double> f, int order) {
    if (order < 1 || order > 3) throw ParameterError("radial_derivative: order must be 1, 2 or 3");
    if (g.size() < static_cast<std::size_t>(order) + 2) throw ParameterError("radial_derivative: grid too small");
    std::vector<double> out(f.size());
    radial_derivative_into(g, f, order, out);
    return out;
}

/// Second-order finite differences: centered in the interior, one-sided at both ends.
inline RadialField radial_derivative(const RadialField& f, int order) {
    return RadialField(f.grid_ptr(), radial_derivative(f.grid(), f.values(), order));
}

/// Derivative that telescopes against the trapezoid dr-weights:
/// sum_i omega_i (D g)_i = g_N - g_0 exactly, and sum omega (f Dg + g Df) = [f g] at the ends.
inline void conservative_derivative_into(const RadialGrid& g, std::span<const double> f, std::span<double> out) {
    const auto& r = g.nodes();
    const std::size_t n = f.size();
    out[0] = (f[1] - f[0]) / (r[1] - r[0]);
    for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (f[i + 1] - f[i - 1]) / (r[i + 1] - r[i - 1]);
    out[n - 1] = (f[n - 1] - f[n - 2]) / (r[n - 1] - r[n - 2]);
}

/// Pointwise |grad^k u|^2 for the radial vector field u(r) r-hat with profile f.
/// Uses g = (f' - f/r)/r, the angular part of the Hessian of the potential of u.
inline std::vector<double> vector_gradient_density(const RadialGrid& grid, std::span<const double> f, int k) {
    const std::size_t n = f.size();
    const auto& r = grid.nodes();
    std::vector<double> out(n);
    if (k == 0) {
        for (std::size_t i = 0; i < n; ++i) out[i] = f[i] * f[i];
        return out;
    }
    const auto d1 = radial_derivative(grid, f, 1);
    if (k == 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = d1[i] * d1[i] + 2.0 * (f[i] / r[i]) * (f[i] / r[i]);
        return out;
    }
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = (d1[i] - f[i] / r[i]) / r[i];
    const auto d2 = radial_derivative(grid, f, 2);
    if (k == 2) {
        for (std::size_t i = 0; i < n; ++i) out[i] = d2[i] * d2[i] + 6.0 * g[i] * g[i];
        return out;
    }
    if (k != 3) throw ParameterError("vector_gradient_density: k must be 0..3");
    const auto d3 = radial_derivative(grid, f, 3);
    const auto dg = radial_derivative(grid, g, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = (d2[i] - 2.0 * g[i]) / r[i];
        const double b = g[i] / r[i];
        out[i] = d3[i] * d3[i] + 6.0 * dg[i] * dg[i] + 6.0 * a * a + 24.0 * b * b;
    }
    return out;
}

inline double integrate_density(const RadialGrid& grid, std::span<const double> density) {
    const auto& w = grid.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i) s += w[i] * density[i];
    return s;
}

/// ||grad^k f||_{L^2}. For scalars this is the plain k-th radial derivative, for vectors the
/// full tensor norm including angular metric terms.
inline double gradient_norm(const RadialField& f, int k, FieldKind kind = FieldKind::scalar) {
    if (k < 0 || k > 3) throw ParameterError("gradient_norm: k must be 0..3");
    if (kind == FieldKind::vector) return std::sqrt(integrate_density(f.grid(), vector_gradient_density(f.grid(), f.values(), k)));
    if (k == 0) return weighted_l2_norm(f);
    return weighted_l2_norm(radial_derivative(f.grid(), f.values(), k), f.grid());
}

/// Full tensor norm ||grad^k f|| of a radial scalar, via grad f = f' r-hat.
inline double scalar_tensor_gradient_norm(const RadialField& f, int k) {
    if (k == 0) return weighted_l2_norm(f);
    const auto d1 = radial_derivative(f.grid(), f.values(), 1);
    return std::sqrt(integrate_density(f.grid(), vector_gradient_density(f.grid(), d1, k - 1)));
}

/// Discrete H^k norm: sqrt of the sum of squared gradient norms of orders 0..k.
inline double sobolev_norm(const RadialField& f, int k, FieldKind kind = FieldKind::scalar) {
    if (k < 0 || k > 3) throw ParameterError("sobolev_norm: k must be 0..3");
    double s = 0.0;
    for (int j = 0; j <= k; ++j) {
        const double n = gradient_norm(f, j, kind);
        s += n * n;
    }
    return std::sqrt(s);
}

} // namespace nsp
