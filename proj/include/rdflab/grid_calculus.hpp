#pragma once

// Finite-difference calculus, interpolation, norms and heat-kernel smoothing
// on uniform grids.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "rdflab/detail/linalg.hpp"
#include "rdflab/error.hpp"
#include "rdflab/field.hpp"
#include "rdflab/grid.hpp"
#include "rdflab/parallel.hpp"
#include "rdflab/stencil.hpp"

namespace rdflab {

namespace detail {

template <StencilOrder O>
ScalarField partial_impl(const ScalarField& f, int axis, int order) {
    const GridSpec& grid = f.grid();
    ScalarField out(grid);
    const double h = grid.spacing();
    const std::ptrdiff_t s = grid.stride(axis);
    const double* p = f.data().data();
    double* o = out.data().data();
    for_each_interior(grid, halo_width(O), [&](std::size_t n) {
        o[n] = order == 1 ? diff1<O>(p + n, s, 1.0 / h) : diff2<O>(p + n, s, 1.0 / (h * h));
    });
    return out;
}

template <StencilOrder O>
ScalarField laplacian_impl(const ScalarField& f) {
    const GridSpec& grid = f.grid();
    ScalarField out(grid);
    const double inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    const double* p = f.data().data();
    double* o = out.data().data();
    const int dim = grid.dim();
    for_each_interior(grid, halo_width(O), [&](std::size_t n) {
        double acc = 0.0;
        for (int a = 0; a < dim; ++a) acc += diff2<O>(p + n, grid.stride(a), inv_h2);
        o[n] = acc;
    });
    return out;
}

}  // namespace detail

/// Central-difference derivative of order 1 or 2 along `axis`.
/// Nodes within the stencil halo of a face are set to zero.
inline ScalarField partial_derivative(const ScalarField& f, int axis, int order,
                                      StencilOrder stencil = StencilOrder::second) {
    if (axis < 0 || axis >= f.grid().dim()) throw InvalidArgument("derivative axis out of range");
    if (order != 1 && order != 2) throw InvalidArgument("derivative order must be 1 or 2");
    return stencil == StencilOrder::second ? detail::partial_impl<StencilOrder::second>(f, axis, order)
                                           : detail::partial_impl<StencilOrder::fourth>(f, axis, order);
}

/// Sum of second derivatives; zero on the halo ring.
inline ScalarField laplacian(const ScalarField& f, StencilOrder stencil = StencilOrder::second) {
    return stencil == StencilOrder::second ? detail::laplacian_impl<StencilOrder::second>(f)
                                           : detail::laplacian_impl<StencilOrder::fourth>(f);
}

// ---------------------------------------------------------------------------
// Interpolation

/// Multilinear interpolation weights for a point: 2^dim corner nodes.
struct InterpolationStencil {
    std::array<std::size_t, 16> nodes{};
    std::array<double, 16> weights{};
    int count = 0;
};

inline InterpolationStencil interpolation_stencil(const GridSpec& grid, std::span<const double> x) {
    const int dim = grid.dim();
    if (static_cast<int>(x.size()) < dim) throw InvalidArgument("point has too few coordinates");
    std::array<std::size_t, kMaxDim> base{};
    std::array<double, kMaxDim> frac{};
    const double h = grid.spacing();
    for (int a = 0; a < dim; ++a) {
        if (!(std::abs(x[a]) <= grid.half_width(a))) throw DomainError("interpolation point outside the grid box");
        double u = (x[a] + grid.half_width(a)) / h;
        auto i = static_cast<std::size_t>(std::floor(u));
        if (i >= grid.nodes(a) - 1) i = grid.nodes(a) - 2;
        base[a] = i;
        frac[a] = u - static_cast<double>(i);
    }
    InterpolationStencil st;
    st.count = 1 << dim;
    for (int corner = 0; corner < st.count; ++corner) {
        std::array<std::size_t, kMaxDim> m{};
        double w = 1.0;
        for (int a = 0; a < dim; ++a) {
            const bool up = (corner >> a) & 1;
            m[a] = base[a] + (up ? 1 : 0);
            w *= up ? frac[a] : 1.0 - frac[a];
        }
        st.nodes[corner] = grid.index(m);
        st.weights[corner] = w;
    }
    return st;
}

/// Componentwise multilinear interpolation at an arbitrary point in the box.
template <FieldKind K>
std::vector<double> interpolate(const Field<K>& f, std::span<const double> x) {
    const auto st = interpolation_stencil(f.grid(), x);
    std::vector<double> out(static_cast<std::size_t>(f.components()), 0.0);
    for (int c = 0; c < f.components(); ++c) {
        double acc = 0.0;
        for (int k = 0; k < st.count; ++k) acc += st.weights[k] * f.at(c, st.nodes[k]);
        out[static_cast<std::size_t>(c)] = acc;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Regions and norms

/// Euclidean coordinate ball intersected with the grid nodes.
class Region {
public:
    Region(const GridSpec& grid, std::span<const double> center, double radius) : grid_(grid), radius_(radius) {
        if (static_cast<int>(center.size()) < grid.dim()) throw InvalidArgument("region centre has too few coordinates");
        if (!(radius > 0.0)) throw InvalidArgument("region radius must be positive");
        for (int a = 0; a < grid.dim(); ++a) {
            center_[a] = center[a];
            if (std::abs(center[a]) + radius >= grid.half_width(a)) {
                throw DomainError("region ball does not lie strictly inside the grid box");
            }
        }
        collect();
    }

    /// Every node of the grid (used for whole-space norms).
    static Region whole(const GridSpec& grid) {
        Region r;
        r.grid_ = grid;
        r.whole_ = true;
        r.radius_ = std::numeric_limits<double>::infinity();
        r.nodes_.resize(grid.node_count());
        for (std::size_t n = 0; n < grid.node_count(); ++n) r.nodes_[n] = n;
        return r;
    }

    const GridSpec& grid() const noexcept { return grid_; }
    std::span<const double> center() const noexcept { return {center_.data(), static_cast<std::size_t>(grid_.dim())}; }
    double radius() const noexcept { return radius_; }
    bool is_whole() const noexcept { return whole_; }
    const std::vector<std::size_t>& nodes() const noexcept { return nodes_; }
    bool empty() const noexcept { return nodes_.empty(); }

    /// Smallest distance (in nodes) from a region node to a box face.
    std::size_t boundary_margin() const noexcept {
        std::size_t m = static_cast<std::size_t>(-1);
        for (std::size_t n : nodes_) m = std::min(m, grid_.boundary_distance(n));
        return m;
    }

    bool contains_node(std::size_t n) const noexcept {
        if (whole_) return true;
        return std::binary_search(nodes_.begin(), nodes_.end(), n);
    }

private:
    Region() = default;

    void collect() {
        const double r2 = radius_ * radius_;
        for (std::size_t n = 0; n < grid_.node_count(); ++n) {
            const auto x = grid_.position(n);
            double d2 = 0.0;
            for (int a = 0; a < grid_.dim(); ++a) d2 += (x[a] - center_[a]) * (x[a] - center_[a]);
            if (d2 <= r2) nodes_.push_back(n);
        }
    }

    GridSpec grid_;
    std::array<double, kMaxDim> center_{};
    double radius_ = 0.0;
    bool whole_ = false;
    std::vector<std::size_t> nodes_;
};

inline constexpr double kLinf = std::numeric_limits<double>::infinity();

namespace detail {

// L^p sums are formed as M * (sum (v/M)^p vol)^{1/p} with M the largest
// pointwise value, so scaling a field by a power of two scales the norm exactly.
inline double accumulate_norm(const Region& region, double p, auto&& pointwise_and_volume) {
    if (region.empty()) throw InvalidArgument("norm over an empty region");
    if (!(p >= 1.0)) throw InvalidArgument("norm exponent p must be >= 1");
    const auto& nodes = region.nodes();
    const double cell = region.grid().cell_volume();
    const double sup = parallel_reduce(
        nodes.size(), 0.0,
        [&](std::size_t b, std::size_t e) {
            double m = 0.0;
            for (std::size_t k = b; k < e; ++k) m = std::max(m, pointwise_and_volume(nodes[k]).first);
            return m;
        },
        [](double a, double b) { return std::max(a, b); });
    if (std::isinf(p) || sup == 0.0) return sup;
    const double sum = parallel_reduce(
        nodes.size(), 0.0,
        [&](std::size_t b, std::size_t e) {
            double s = 0.0;
            for (std::size_t k = b; k < e; ++k) {
                const auto [v, vol] = pointwise_and_volume(nodes[k]);
                if (v != 0.0) s += std::pow(v / sup, p) * vol;
            }
            return s;
        },
        [](double a, double b) { return a + b; });
    return sup * std::pow(sum * cell, 1.0 / p);
}

template <int N>
std::pair<double, double> tensor_pointwise(const SymTensorField& f, const SymTensorField* ref, std::size_t n) {
    Mat<N> t;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) t[i][j] = f(i, j, n);
    if (ref == nullptr) {
        double s = 0.0;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) s += t[i][j] * t[i][j];
        return {std::sqrt(s), 1.0};
    }
    Mat<N> r, ri;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) r[i][j] = (*ref)(i, j, n);
    double det = 0.0;
    invert<N>(r, ri, det);
    // |T|^2 = r^{ia} r^{jb} T_ij T_ab
    Mat<N> up{};
    for (int i = 0; i < N; ++i)
        for (int b = 0; b < N; ++b) {
            double acc = 0.0;
            for (int j = 0; j < N; ++j) acc += t[i][j] * ri[j][b];
            up[i][b] = acc;
        }
    double s = 0.0;
    for (int i = 0; i < N; ++i)
        for (int a = 0; a < N; ++a) {
            double acc = 0.0;
            for (int b = 0; b < N; ++b) acc += up[a][b] * t[b][i];
            s += ri[i][a] * acc;
        }
    return {std::sqrt(std::max(0.0, s)), std::sqrt(std::max(0.0, det))};
}

}  // namespace detail

/// L^p (p >= 1, or kLinf) norm of a scalar field over a region, Euclidean volume.
inline double norm(const ScalarField& f, const Region& region, double p = kLinf) {
    if (!(region.grid() == f.grid())) throw InvalidArgument("region and field live on different grids");
    const double* d = f.data().data();
    return detail::accumulate_norm(region, p, [d](std::size_t n) { return std::pair{std::abs(d[n]), 1.0}; });
}

/// L^p norm of a symmetric 2-tensor with indices raised by `reference`
/// (Euclidean when null); the volume element is sqrt(det reference).
inline double norm(const SymTensorField& f, const Region& region, double p = kLinf,
                   const SymTensorField* reference = nullptr) {
    if (!(region.grid() == f.grid())) throw InvalidArgument("region and field live on different grids");
    if (reference != nullptr && !(reference->grid() == f.grid())) {
        throw InvalidArgument("reference metric lives on a different grid");
    }
    if (f.grid().dim() == 3) {
        return detail::accumulate_norm(region, p, [&](std::size_t n) { return detail::tensor_pointwise<3>(f, reference, n); });
    }
    return detail::accumulate_norm(region, p, [&](std::size_t n) { return detail::tensor_pointwise<4>(f, reference, n); });
}

// ---------------------------------------------------------------------------
// Heat-kernel convolution

/// Radius of the truncated heat kernel, in units of sqrt(t).
inline constexpr double kHeatKernelRadius = 6.0;

namespace detail {

inline std::vector<double> heat_weights(double t, double h, double radius_factor) {
    const auto half = static_cast<std::ptrdiff_t>(std::floor(radius_factor * std::sqrt(t) / h));
    std::vector<double> w(static_cast<std::size_t>(2 * half + 1));
    double mass = 0.0;
    for (std::ptrdiff_t k = -half; k <= half; ++k) {
        const double x = static_cast<double>(k) * h;
        const double v = std::exp(-x * x / (4.0 * t));
        w[static_cast<std::size_t>(k + half)] = v;
        mass += v;
    }
    for (double& v : w) v /= mass;
    return w;
}

/// One axis pass of a separable convolution; out-of-box samples take `outside`.
inline void convolve_axis(const GridSpec& grid, int axis, const std::vector<double>& w, double outside,
                          std::span<const double> in, std::span<double> out) {
    const auto half = static_cast<std::ptrdiff_t>(w.size() / 2);
    const auto n_axis = static_cast<std::ptrdiff_t>(grid.nodes(axis));
    const std::ptrdiff_t s = grid.stride(axis);
    parallel_for(grid.node_count(), [&](std::size_t b, std::size_t e) {
        for (std::size_t n = b; n < e; ++n) {
            const auto i = static_cast<std::ptrdiff_t>((n / static_cast<std::size_t>(s)) % static_cast<std::size_t>(n_axis));
            double acc = 0.0;
            for (std::ptrdiff_t k = -half; k <= half; ++k) {
                const std::ptrdiff_t j = i + k;
                const double v = (j < 0 || j >= n_axis) ? outside : in[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(n) + k * s)];
                acc += w[static_cast<std::size_t>(k + half)] * v;
            }
            out[n] = acc;
        }
    });
}

}  // namespace detail

/// Componentwise convolution with the Euclidean heat kernel at time t,
/// (4 pi t)^{-n/2} exp(-|x-y|^2 / 4t), truncated per axis at 6 sqrt(t) and
/// renormalised to unit discrete mass. Samples outside the box take the
/// per-component `outside` value (zero when empty).
template <FieldKind K>
Field<K> heat_convolve(const Field<K>& f, double t, std::span<const double> outside = {}) {
    if (!(t > 0.0)) throw InvalidArgument("heat_convolve needs t > 0");
    const GridSpec& grid = f.grid();
    if (kHeatKernelRadius * std::sqrt(t) > grid.min_half_width()) {
        throw DomainError("heat kernel support exceeds the box half-width");
    }
    if (!outside.empty() && static_cast<int>(outside.size()) != f.components()) {
        throw InvalidArgument("outside values must match the component count");
    }
    const auto w = detail::heat_weights(t, grid.spacing(), kHeatKernelRadius);
    Field<K> out = f;
    std::vector<double> scratch(grid.node_count());
    for (int c = 0; c < f.components(); ++c) {
        const double ext = outside.empty() ? 0.0 : outside[static_cast<std::size_t>(c)];
        auto comp = out.component(c);
        for (int a = 0; a < grid.dim(); ++a) {
            detail::convolve_axis(grid, a, w, ext, comp, scratch);
            std::copy(scratch.begin(), scratch.end(), comp.begin());
        }
    }
    return out;
}

}  // namespace rdflab
