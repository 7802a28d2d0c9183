#pragma once

// Metrics with cached inverse, Christoffel symbols, Riemann/Ricci/scalar
// curvature and covariant-derivative norms of the curvature tensor.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "rdflab/detail/jet.hpp"
#include "rdflab/detail/linalg.hpp"
#include "rdflab/error.hpp"
#include "rdflab/field.hpp"
#include "rdflab/grid.hpp"
#include "rdflab/grid_calculus.hpp"
#include "rdflab/parallel.hpp"
#include "rdflab/stencil.hpp"

namespace rdflab {

/// Smallest admissible metric eigenvalue (relative to Euclidean).
inline constexpr double kDegenerateEigenvalue = 0.1;

namespace detail {

template <int N>
Mat<N> node_matrix(const SymTensorField& f, std::size_t n) noexcept {
    Mat<N> m;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j <= i; ++j) m[i][j] = m[j][i] = f.at(sym_index(i, j), n);
    return m;
}

template <int N>
double min_eigenvalue(const Mat<N>& m) noexcept {
    // Frobenius distance <= 0.9 already bounds every eigenvalue below by 0.1
    if (identity_distance<N>(m) <= 1.0 - kDegenerateEigenvalue) return 1.0 - identity_distance<N>(m);
    return sym_eigenvalues<N>(m)[0];
}

template <int N>
void fill_inverse(const SymTensorField& g, SymTensorField& inv) {
    const std::size_t count = g.node_count();
    // report the lowest-index bad node so the error is deterministic
    const std::size_t first_bad = parallel_reduce(
        count, count,
        [&](std::size_t b, std::size_t e) {
            for (std::size_t n = b; n < e; ++n) {
                const auto m = node_matrix<N>(g, n);
                bool finite = true;
                for (int i = 0; i < N; ++i)
                    for (int j = 0; j < N; ++j) finite = finite && std::isfinite(m[i][j]);
                if (!finite || min_eigenvalue<N>(m) < kDegenerateEigenvalue) return n;
                Mat<N> mi;
                double det = 0.0;
                invert<N>(m, mi, det);
                for (int i = 0; i < N; ++i)
                    for (int j = 0; j <= i; ++j) inv.at(sym_index(i, j), n) = mi[i][j];
            }
            return count;
        },
        [](std::size_t a, std::size_t b) { return std::min(a, b); });
    if (first_bad < count) {
        const auto m = node_matrix<N>(g, first_bad);
        bool finite = true;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) finite = finite && std::isfinite(m[i][j]);
        throw DegenerateMetricError(first_bad, finite ? sym_eigenvalues<N>(m)[0] : std::nan(""));
    }
}

}  // namespace detail

/// A symmetric 2-tensor field that is a metric at every node, with its
/// pointwise inverse cached. Construction fails on degenerate nodes.
class MetricField {
public:
    MetricField() = default;

    explicit MetricField(SymTensorField g) : g_(std::move(g)), inv_(g_.grid()) {
        if (g_.grid().dim() == 3) {
            detail::fill_inverse<3>(g_, inv_);
        } else {
            detail::fill_inverse<4>(g_, inv_);
        }
    }

    static MetricField euclidean(const GridSpec& grid) { return MetricField(euclidean_tensor(grid)); }

    const SymTensorField& tensor() const noexcept { return g_; }
    const SymTensorField& inverse() const noexcept { return inv_; }
    const GridSpec& grid() const noexcept { return g_.grid(); }
    int dim() const noexcept { return g_.grid().dim(); }
    double operator()(int i, int j, std::size_t node) const noexcept { return g_(i, j, node); }

    /// Largest |lambda - 1| over nodes: the eigenvalue distance to Euclidean.
    double euclidean_deviation() const {
        return dim() == 3 ? deviation<3>() : deviation<4>();
    }

    /// Throws DomainError unless every eigenvalue lies in [1 - eps0, 1 + eps0].
    void require_close(double eps0, const char* what = "metric") const {
        const double d = euclidean_deviation();
        if (d > eps0) {
            throw DomainError(std::string(what) + " is not within eps0 = " + std::to_string(eps0) +
                              " of Euclidean (eigenvalue deviation " + std::to_string(d) + ")");
        }
    }

    friend bool operator==(const MetricField& a, const MetricField& b) noexcept { return a.g_ == b.g_; }

private:
    template <int N>
    double deviation() const {
        return parallel_reduce(
            g_.node_count(), 0.0,
            [&](std::size_t b, std::size_t e) {
                double m = 0.0;
                for (std::size_t n = b; n < e; ++n) {
                    const auto mat = detail::node_matrix<N>(g_, n);
                    if (detail::identity_distance<N>(mat) == 0.0) continue;
                    const auto ev = detail::sym_eigenvalues<N>(mat);
                    m = std::max({m, std::abs(ev[0] - 1.0), std::abs(ev[N - 1] - 1.0)});
                }
                return m;
            },
            [](double a, double b) { return std::max(a, b); });
    }

    SymTensorField g_;
    SymTensorField inv_;
};

// ---------------------------------------------------------------------------
// Christoffel symbols and curvature fields

/// Gamma^k_ij stored as component k * n(n+1)/2 + sym_index(i, j).
using ChristoffelField = GeneralField;

constexpr int christoffel_index(int dim, int k, int i, int j) noexcept {
    return k * sym_components(dim) + sym_index(i, j);
}

/// R^l_ijk stored as component ((l*n + i)*n + j)*n + k.
constexpr int riemann_index(int dim, int l, int i, int j, int k) noexcept {
    return ((l * dim + i) * dim + j) * dim + k;
}

namespace detail {

template <int N, StencilOrder O, class Body>
void for_each_jet(const SymTensorField& g, Body&& body, bool second = true) {
    const SymView<N> view(g);
    for_each_interior(g.grid(), halo_width(O), [&](std::size_t n) {
        Jet<N> J;
        if (second) {
            load_jet<N, O, true>(view, n, J);
        } else {
            load_jet<N, O, false>(view, n, J);
        }
        body(n, J);
    });
}

template <class Fn>
decltype(auto) dispatch(int dim, StencilOrder order, Fn&& fn) {
    if (dim == 3) {
        if (order == StencilOrder::second) return fn.template operator()<3, StencilOrder::second>();
        return fn.template operator()<3, StencilOrder::fourth>();
    }
    if (order == StencilOrder::second) return fn.template operator()<4, StencilOrder::second>();
    return fn.template operator()<4, StencilOrder::fourth>();
}

}  // namespace detail

/// Christoffel symbols of the second kind; zero on the stencil halo.
inline ChristoffelField christoffel(const MetricField& g, StencilOrder order = StencilOrder::second) {
    const int n = g.dim();
    ChristoffelField out(g.grid(), n * sym_components(n));
    detail::dispatch(n, order, [&]<int N, StencilOrder O>() {
        detail::for_each_jet<N, O>(
            g.tensor(),
            [&](std::size_t node, const detail::Jet<N>& J) {
                detail::Connection<N> C;
                detail::connection<N, false>(J, C);
                for (int k = 0; k < N; ++k)
                    for (int i = 0; i < N; ++i)
                        for (int j = 0; j <= i; ++j) out.at(christoffel_index(N, k, i, j), node) = C.gamma[k][i][j];
            },
            false);
    });
    return out;
}

/// Full (1,3) curvature tensor. n^4 components per node, so meant for small grids.
inline GeneralField riemann(const MetricField& g, StencilOrder order = StencilOrder::second) {
    const int n = g.dim();
    GeneralField out(g.grid(), n * n * n * n);
    detail::dispatch(n, order, [&]<int N, StencilOrder O>() {
        detail::for_each_jet<N, O>(g.tensor(), [&](std::size_t node, const detail::Jet<N>& J) {
            detail::Connection<N> C;
            detail::connection<N>(J, C);
            for (int l = 0; l < N; ++l)
                for (int i = 0; i < N; ++i)
                    for (int j = 0; j < N; ++j)
                        for (int k = 0; k < N; ++k)
                            out.at(riemann_index(N, l, i, j, k), node) = detail::riemann_component<N>(C, l, i, j, k);
        });
    });
    return out;
}

inline SymTensorField ricci(const MetricField& g, StencilOrder order = StencilOrder::second) {
    SymTensorField out(g.grid());
    detail::dispatch(g.dim(), order, [&]<int N, StencilOrder O>() {
        detail::for_each_jet<N, O>(g.tensor(), [&](std::size_t node, const detail::Jet<N>& J) {
            detail::Connection<N> C;
            detail::connection<N>(J, C);
            const auto r = detail::ricci_tensor<N>(C);
            for (int i = 0; i < N; ++i)
                for (int j = 0; j <= i; ++j) out.at(sym_index(i, j), node) = r[i][j];
        });
    });
    return out;
}

inline ScalarField scalar_curvature(const MetricField& g, StencilOrder order = StencilOrder::second) {
    ScalarField out(g.grid());
    detail::dispatch(g.dim(), order, [&]<int N, StencilOrder O>() {
        detail::for_each_jet<N, O>(g.tensor(), [&](std::size_t node, const detail::Jet<N>& J) {
            detail::Connection<N> C;
            detail::connection<N>(J, C);
            out[node] = detail::trace<N>(J.gi, detail::ricci_tensor<N>(C));
        });
    });
    return out;
}

/// g^{ik} g^{jl} R_ijkl from the lowered tensor; equals the scalar curvature algebraically.
inline ScalarField scalar_from_full_contraction(const MetricField& g) {
    ScalarField out(g.grid());
    detail::dispatch(g.dim(), StencilOrder::second, [&]<int N, StencilOrder O>() {
        detail::for_each_jet<N, O>(g.tensor(), [&](std::size_t node, const detail::Jet<N>& J) {
            detail::Connection<N> C;
            detail::connection<N>(J, C);
            std::array<double, detail::ipow(N, 4)> rm;
            detail::riemann_lowered<N>(J, C, rm.data());
            double s = 0.0;
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j)
                    for (int k = 0; k < N; ++k)
                        for (int l = 0; l < N; ++l)
                            s += J.gi[i][k] * J.gi[j][l] * rm[((i * N + j) * N + k) * N + l];
            out[node] = s;
        });
    });
    return out;
}

namespace detail {

template <int N>
double scalar_at_node(const SymView<N>& view, std::size_t node) noexcept {
    Jet<N> J;
    load_jet<N, StencilOrder::second, true>(view, node, J);
    Connection<N> C;
    connection<N>(J, C);
    return trace<N>(J.gi, ricci_tensor<N>(C));
}

}  // namespace detail

/// Scalar curvature at an arbitrary point: node values on the surrounding
/// cell, multilinearly interpolated.
inline double scalar_curvature_at(const MetricField& g, std::span<const double> x) {
    const auto st = interpolation_stencil(g.grid(), x);
    double acc = 0.0;
    for (int k = 0; k < st.count; ++k) {
        if (g.grid().boundary_distance(st.nodes[k]) < 1) throw DomainError("point too close to the box face");
        const double s = g.dim() == 3 ? detail::scalar_at_node<3>(detail::SymView<3>(g.tensor()), st.nodes[k])
                                      : detail::scalar_at_node<4>(detail::SymView<4>(g.tensor()), st.nodes[k]);
        acc += st.weights[k] * s;
    }
    return acc;
}

namespace detail {

template <int N>
double ricci_trace_at_node(const SymView<N>& view, const SymTensorField& h_inverse, std::size_t node) noexcept {
    Jet<N> J;
    load_jet<N, StencilOrder::second, true>(view, node, J);
    Connection<N> C;
    connection<N>(J, C);
    Mat<N> hi{};
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) hi[i][j] = h_inverse.at(sym_index(i, j), node);
    return trace<N>(hi, ricci_tensor<N>(C));
}

}  // namespace detail

/// tr_h Ric(g) at an arbitrary point: Ricci of g contracted with the inverse of
/// h node by node, then interpolated. ricci_trace_at(g, g, x) is the scalar curvature.
inline double ricci_trace_at(const MetricField& g, const MetricField& h, std::span<const double> x) {
    if (!(g.grid() == h.grid())) throw InvalidArgument("metrics live on different grids");
    const auto st = interpolation_stencil(g.grid(), x);
    double acc = 0.0;
    for (int k = 0; k < st.count; ++k) {
        if (g.grid().boundary_distance(st.nodes[k]) < 1) throw DomainError("point too close to the box face");
        const double s = g.dim() == 3
                             ? detail::ricci_trace_at_node<3>(detail::SymView<3>(g.tensor()), h.inverse(), st.nodes[k])
                             : detail::ricci_trace_at_node<4>(detail::SymView<4>(g.tensor()), h.inverse(), st.nodes[k]);
        acc += st.weights[k] * s;
    }
    return acc;
}

/// Scalar curvature of phi^{4/(n-2)} g_euc from the closed form
/// -4(n-1)/(n-2) phi^{-(n+2)/(n-2)} lap(phi). Zero on the stencil halo.
inline ScalarField conformal_scalar(const ScalarField& phi, int n, StencilOrder order = StencilOrder::second) {
    if (n < 3) throw InvalidArgument("conformal scalar formula needs n >= 3");
    if (n != phi.grid().dim()) throw InvalidArgument("dimension does not match the grid");
    for (double v : phi.data()) {
        if (!(v > 0.0)) throw DomainError("conformal factor must be positive");
    }
    const ScalarField lap = laplacian(phi, order);
    ScalarField out(phi.grid());
    const double c = -4.0 * (n - 1) / (n - 2);
    const double e = -static_cast<double>(n + 2) / (n - 2);
    for_each_interior(phi.grid(), halo_width(order), [&](std::size_t k) { out[k] = c * std::pow(phi[k], e) * lap[k]; });
    return out;
}

// ---------------------------------------------------------------------------
// Covariant curvature norms

struct CurvatureReport {
    // effective region
    std::vector<double> center;
    double radius = 0.0;
    std::size_t region_nodes = 0;
    std::size_t region_margin = 0;
    double r_scale = 1.0;

    double sup_rm = 0.0;
    double sup_grad_rm = 0.0;
    double sup_hess_rm = 0.0;
    double scal_min = 0.0;
    double scal_max = 0.0;
    /// sup|Rm| + r sup|grad Rm| + r^2 sup|hess Rm|
    double combined = 0.0;
    ScalarField scalar;
};

/// Interior margin (in nodes) a region needs for covariant_curvature_norms.
inline constexpr std::size_t kCovariantMargin = 3;

namespace detail {

// Streams through axis-0 planes of the region's bounding box so memory stays
// proportional to a few planes: curvature on planes i+1, its covariant
// derivative on plane i, and the second derivative at region nodes of plane i-1.
template <int N>
void covariant_norms_impl(const MetricField& g, const Region& region, CurvatureReport& rep) {
    constexpr int R4 = ipow(N, 4), R5 = ipow(N, 5), R6 = ipow(N, 6);
    const GridSpec& grid = g.grid();
    const SymView<N> view(g.tensor());
    const double inv_2h = 0.5 / grid.spacing();

    std::array<std::size_t, N> lo{}, hi{};
    lo.fill(std::numeric_limits<std::size_t>::max());
    for (std::size_t n : region.nodes()) {
        const auto m = grid.multi_index(n);
        for (int a = 0; a < N; ++a) {
            lo[a] = std::min(lo[a], m[a]);
            hi[a] = std::max(hi[a], m[a]);
        }
    }
    // B0: curvature needed on region box widened by 2
    std::array<std::size_t, N> b0{}, ext{};
    for (int a = 0; a < N; ++a) {
        b0[a] = lo[a] - 2;
        ext[a] = hi[a] - lo[a] + 5;
    }
    std::size_t plane = 1;
    for (int a = 1; a < N; ++a) plane *= ext[a];
    std::array<std::ptrdiff_t, N> pstride{};
    pstride[0] = 0;
    {
        std::ptrdiff_t s = 1;
        for (int a = N - 1; a >= 1; --a) {
            pstride[a] = s;
            s *= static_cast<std::ptrdiff_t>(ext[a]);
        }
    }
    auto global_index = [&](std::size_t i0, std::size_t local) {
        std::array<std::size_t, kMaxDim> m{};
        m[0] = i0;
        for (int a = N - 1; a >= 1; --a) {
            m[a] = b0[a] + local % ext[a];
            local /= ext[a];
        }
        return grid.index(m);
    };

    // per-plane storage: lowered curvature, Christoffel symbols, inverse metric
    struct PlaneRm {
        std::vector<double> rm, gamma, gi;
    };
    std::array<PlaneRm, 3> rm_ring;
    std::array<std::vector<double>, 3> grad_ring;
    for (auto& p : rm_ring) {
        p.rm.assign(plane * R4, 0.0);
        p.gamma.assign(plane * N * N * N, 0.0);
        p.gi.assign(plane * N * N, 0.0);
    }
    for (auto& p : grad_ring) p.assign(plane * R5, 0.0);

    double sup0 = 0.0, sup1 = 0.0, sup2 = 0.0;

    auto fill_rm = [&](std::size_t i0) {
        auto& P = rm_ring[i0 % 3];
        parallel_for(plane, [&](std::size_t b, std::size_t e) {
            for (std::size_t q = b; q < e; ++q) {
                const std::size_t n = global_index(i0, q);
                Jet<N> J;
                load_jet<N, StencilOrder::second, true>(view, n, J);
                Connection<N> C;
                connection<N>(J, C);
                riemann_lowered<N>(J, C, P.rm.data() + q * R4);
                for (int k = 0; k < N; ++k)
                    for (int i = 0; i < N; ++i)
                        for (int j = 0; j < N; ++j) P.gamma[q * N * N * N + (k * N + i) * N + j] = C.gamma[k][i][j];
                for (int i = 0; i < N; ++i)
                    for (int j = 0; j < N; ++j) P.gi[q * N * N + i * N + j] = J.gi[i][j];
            }
        });
    };
    auto gamma_at = [&](const PlaneRm& P, std::size_t q) {
        T3<N> G;
        for (int k = 0; k < N; ++k)
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j) G[k][i][j] = P.gamma[q * N * N * N + (k * N + i) * N + j];
        return G;
    };
    auto gi_at = [&](const PlaneRm& P, std::size_t q) {
        Mat<N> m;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) m[i][j] = P.gi[q * N * N + i * N + j];
        return m;
    };
    auto in_shrunk = [&](std::size_t q, std::size_t by) {
        for (int a = 1; a < N; ++a) {
            const std::size_t c = (q / static_cast<std::size_t>(pstride[a])) % ext[a];
            if (c < by || c + by >= ext[a]) return false;
        }
        return true;
    };
    // covariant derivative of the curvature on plane i0 (interior of B0 by 1)
    auto fill_grad = [&](std::size_t i0) {
        const auto& Pm = rm_ring[(i0 - 1) % 3];
        const auto& Pc = rm_ring[i0 % 3];
        const auto& Pp = rm_ring[(i0 + 1) % 3];
        auto& out = grad_ring[i0 % 3];
        parallel_for(plane, [&](std::size_t b, std::size_t e) {
            std::array<double, R5> d;
            for (std::size_t q = b; q < e; ++q) {
                if (!in_shrunk(q, 1)) continue;
                for (int a = 0; a < N; ++a) {
                    const double* plus;
                    const double* minus;
                    if (a == 0) {
                        plus = Pp.rm.data() + q * R4;
                        minus = Pm.rm.data() + q * R4;
                    } else {
                        plus = Pc.rm.data() + (q + pstride[a]) * R4;
                        minus = Pc.rm.data() + (q - pstride[a]) * R4;
                    }
                    for (int c = 0; c < R4; ++c) d[a * R4 + c] = (plus[c] - minus[c]) * inv_2h;
                }
                covariant_derivative<N, 4>(d.data(), Pc.rm.data() + q * R4, gamma_at(Pc, q), out.data() + q * R5);
            }
        });
    };
    auto finish_plane = [&](std::size_t i0) {
        const auto& Pc = rm_ring[i0 % 3];
        const auto& Gm = grad_ring[(i0 - 1) % 3];
        const auto& Gc = grad_ring[i0 % 3];
        const auto& Gp = grad_ring[(i0 + 1) % 3];
        struct Sups {
            double s0 = 0, s1 = 0, s2 = 0;
        };
        const Sups s = parallel_reduce(
            plane, Sups{},
            [&](std::size_t b, std::size_t e) {
                Sups acc;
                std::vector<double> d(R6), hess(R6);
                for (std::size_t q = b; q < e; ++q) {
                    if (!in_shrunk(q, 2)) continue;
                    const std::size_t n = global_index(i0, q);
                    if (!region.contains_node(n)) continue;
                    const Mat<N> gi = gi_at(Pc, q);
                    for (int a = 0; a < N; ++a) {
                        const double* plus;
                        const double* minus;
                        if (a == 0) {
                            plus = Gp.data() + q * R5;
                            minus = Gm.data() + q * R5;
                        } else {
                            plus = Gc.data() + (q + pstride[a]) * R5;
                            minus = Gc.data() + (q - pstride[a]) * R5;
                        }
                        for (int c = 0; c < R5; ++c) d[a * R5 + c] = (plus[c] - minus[c]) * inv_2h;
                    }
                    covariant_derivative<N, 5>(d.data(), Gc.data() + q * R5, gamma_at(Pc, q), hess.data());
                    acc.s0 = std::max(acc.s0, std::sqrt(std::max(0.0, squared_norm<N, 4>(Pc.rm.data() + q * R4, gi))));
                    acc.s1 = std::max(acc.s1, std::sqrt(std::max(0.0, squared_norm<N, 5>(Gc.data() + q * R5, gi))));
                    acc.s2 = std::max(acc.s2, std::sqrt(std::max(0.0, squared_norm<N, 6>(hess.data(), gi))));
                }
                return acc;
            },
            [](Sups a, Sups b) { return Sups{std::max(a.s0, b.s0), std::max(a.s1, b.s1), std::max(a.s2, b.s2)}; });
        sup0 = std::max(sup0, s.s0);
        sup1 = std::max(sup1, s.s1);
        sup2 = std::max(sup2, s.s2);
    };

    const std::size_t first = b0[0], last = b0[0] + ext[0] - 1;
    for (std::size_t i0 = first; i0 <= last; ++i0) {
        fill_rm(i0);
        if (i0 >= first + 2) fill_grad(i0 - 1);
        if (i0 >= first + 4) finish_plane(i0 - 2);
    }
    rep.sup_rm = sup0;
    rep.sup_grad_rm = sup1;
    rep.sup_hess_rm = sup2;
}

}  // namespace detail

/// Sups over `region` of |Rm|, |grad Rm|, |hess Rm| (indices contracted with g)
/// plus the scalar curvature field and its extremes on the region.
inline CurvatureReport covariant_curvature_norms(const MetricField& g, const Region& region, double r_scale = 1.0) {
    if (!(region.grid() == g.grid())) throw InvalidArgument("region and metric live on different grids");
    if (region.empty()) throw InvalidArgument("empty region");
    if (!(r_scale > 0.0)) throw InvalidArgument("r_scale must be positive");
    const std::size_t margin = region.boundary_margin();
    if (margin < kCovariantMargin) {
        throw DomainError("region lies within " + std::to_string(margin) +
                          " nodes of the box face; covariant curvature norms need " + std::to_string(kCovariantMargin));
    }
    CurvatureReport rep;
    rep.center.assign(region.center().begin(), region.center().end());
    rep.radius = region.radius();
    rep.region_nodes = region.nodes().size();
    rep.region_margin = margin;
    rep.r_scale = r_scale;
    if (g.dim() == 3) {
        detail::covariant_norms_impl<3>(g, region, rep);
    } else {
        detail::covariant_norms_impl<4>(g, region, rep);
    }
    rep.scalar = scalar_curvature(g);
    rep.scal_min = std::numeric_limits<double>::infinity();
    rep.scal_max = -std::numeric_limits<double>::infinity();
    for (std::size_t n : region.nodes()) {
        rep.scal_min = std::min(rep.scal_min, rep.scalar[n]);
        rep.scal_max = std::max(rep.scal_max, rep.scalar[n]);
    }
    rep.combined = rep.sup_rm + r_scale * rep.sup_grad_rm + r_scale * r_scale * rep.sup_hess_rm;
    return rep;
}

}  // namespace rdflab
