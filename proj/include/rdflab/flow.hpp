#pragma once

// Ricci-DeTurck flow against the Euclidean background, cutoff extension,
// lockstep pair evolution and the tracked-point ODE.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "rdflab/curvature.hpp"
#include "rdflab/detail/jet.hpp"
#include "rdflab/detail/linalg.hpp"
#include "rdflab/error.hpp"
#include "rdflab/field.hpp"
#include "rdflab/grid.hpp"
#include "rdflab/grid_calculus.hpp"
#include "rdflab/metrics_zoo.hpp"
#include "rdflab/parallel.hpp"
#include "rdflab/stencil.hpp"

namespace rdflab {

// ---------------------------------------------------------------------------
// Cutoff extension

namespace detail {

inline void check_extension_geometry(const GridSpec& grid, std::span<const double> center, double r_inner,
                                     double r_outer) {
    if (static_cast<int>(center.size()) != grid.dim()) throw InvalidArgument("centre has the wrong dimension");
    if (!(r_inner >= 0.0) || !(r_inner < r_outer)) throw InvalidArgument("need 0 <= r_inner < r_outer");
    for (int a = 0; a < grid.dim(); ++a) {
        if (std::abs(center[a]) + r_outer >= grid.half_width(a)) throw DomainError("outer ball leaves the grid box");
    }
}

}  // namespace detail

/// phi g + (1 - phi) g_euc with phi the radial smoothstep cutoff. Works on a
/// raw tensor so metrics that degenerate far outside the ball can be extended.
inline SymTensorField cutoff_extend(const SymTensorField& g, std::span<const double> center, double r_inner,
                                    double r_outer) {
    const GridSpec& grid = g.grid();
    detail::check_extension_geometry(grid, center, r_inner, r_outer);
    const int n = grid.dim();
    const CutoffSpec spec{std::vector<double>(center.begin(), center.end()), r_inner, r_outer};
    SymTensorField out(grid);
    for (std::size_t k = 0; k < grid.node_count(); ++k) {
        const auto x = grid.position(k);
        const double phi = cutoff_value(spec, std::span<const double>(x.data(), static_cast<std::size_t>(n)), n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j) {
                const int c = sym_index(i, j);
                const double e = i == j ? 1.0 : 0.0;
                // exact copies at phi = 1 and phi = 0
                out.at(c, k) = phi == 1.0 ? g.at(c, k) : phi == 0.0 ? e : phi * g.at(c, k) + (1.0 - phi) * e;
            }
    }
    return out;
}

inline MetricField cutoff_extend(const MetricField& g, std::span<const double> center, double r_inner, double r_outer) {
    return MetricField(cutoff_extend(g.tensor(), center, r_inner, r_outer));
}

/// Re-embeds a field into a larger box with the same spacing, filling new
/// nodes with `outside` per component (Euclidean for metrics).
template <FieldKind K>
Field<K> pad_field(const Field<K>& f, std::size_t pad, std::span<const double> outside) {
    const GridSpec& src = f.grid();
    std::array<std::size_t, kMaxDim> nodes{};
    for (int a = 0; a < src.dim(); ++a) nodes[a] = src.nodes(a) + 2 * pad;
    const GridSpec dst(std::span<const std::size_t>(nodes.data(), static_cast<std::size_t>(src.dim())), src.spacing());
    Field<K> out = [&] {
        if constexpr (K == FieldKind::general) {
            return Field<K>(dst, f.components());
        } else {
            return Field<K>(dst);
        }
    }();
    for (int c = 0; c < f.components(); ++c) {
        auto comp = out.component(c);
        std::fill(comp.begin(), comp.end(), outside.empty() ? 0.0 : outside[static_cast<std::size_t>(c)]);
    }
    for (std::size_t k = 0; k < src.node_count(); ++k) {
        auto m = src.multi_index(k);
        for (int a = 0; a < src.dim(); ++a) m[a] += pad;
        const std::size_t d = dst.index(m);
        for (int c = 0; c < f.components(); ++c) out.at(c, d) = f.at(c, k);
    }
    return out;
}

/// Metric padded with Euclidean nodes.
inline SymTensorField pad_metric(const SymTensorField& g, std::size_t pad) {
    std::vector<double> e(static_cast<std::size_t>(g.components()), 0.0);
    for (int i = 0; i < g.grid().dim(); ++i) e[static_cast<std::size_t>(sym_index(i, i))] = 1.0;
    return pad_field(g, pad, e);
}

// ---------------------------------------------------------------------------
// DeTurck vector and the flow right-hand side

namespace detail {

/// W_j = g^{ab} Gamma_{j ab} (lowered DeTurck vector).
template <int N>
Vec<N> deturck_lowered(const Jet<N>& J, const Connection<N>& C) noexcept {
    Vec<N> w{};
    for (int j = 0; j < N; ++j) {
        double acc = 0.0;
        for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b) acc += J.gi[a][b] * C.first[j][a][b];
        w[j] = acc;
    }
    return w;
}

/// W^k = g^{ij} Gamma^k_ij.
template <int N>
Vec<N> deturck_raised(const Jet<N>& J, const Connection<N>& C) noexcept {
    Vec<N> w{};
    for (int k = 0; k < N; ++k) {
        double acc = 0.0;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) acc += J.gi[i][j] * C.gamma[k][i][j];
        w[k] = acc;
    }
    return w;
}

/// -2 Ric + grad_i W_j + grad_j W_i, everything from the node jet.
template <int N>
Mat<N> rhs_geometric(const Jet<N>& J) noexcept {
    Connection<N> C;
    connection<N>(J, C);
    const Mat<N> ric = ricci_tensor<N>(C);
    const Vec<N> w = deturck_lowered<N>(J, C);
    // d_i g^{ab} = -g^{ac} d_i g_cd g^{db}
    T3<N> dgi{};
    for (int i = 0; i < N; ++i) {
        Mat<N> t{};
        for (int a = 0; a < N; ++a)
            for (int d = 0; d < N; ++d) {
                double acc = 0.0;
                for (int c = 0; c < N; ++c) acc += J.gi[a][c] * J.dg[i][c][d];
                t[a][d] = acc;
            }
        for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b) {
                double acc = 0.0;
                for (int d = 0; d < N; ++d) acc += t[a][d] * J.gi[d][b];
                dgi[i][a][b] = -acc;
            }
    }
    Mat<N> nw{};
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            double acc = 0.0;
            for (int a = 0; a < N; ++a)
                for (int b = 0; b < N; ++b) acc += dgi[i][a][b] * C.first[j][a][b] + J.gi[a][b] * C.dfirst[i][j][a][b];
            for (int k = 0; k < N; ++k) acc -= C.gamma[k][i][j] * w[k];
            nw[i][j] = acc;
        }
    Mat<N> out{};
    for (int i = 0; i < N; ++i)
        for (int j = 0; j <= i; ++j) out[i][j] = out[j][i] = -2.0 * ric[i][j] + nw[i][j] + nw[j][i];
    return out;
}

/// The same right-hand side expanded into first and second metric derivatives:
/// g^{ab} d_a d_b g_ij + 1/2 g^{ab} g^{pq} (d_i g_pa d_j g_qb + 2 d_a g_jp d_q g_ib
///   - 2 d_a g_jp d_b g_iq - 2 d_j g_pa d_b g_iq - 2 d_i g_pa d_b g_jq).
template <int N>
Mat<N> rhs_expanded(const Jet<N>& J) noexcept {
    T3<N> M{}, E{};
    for (int a = 0; a < N; ++a)
        for (int p = 0; p < N; ++p)
            for (int q = 0; q < N; ++q) {
                double m = 0.0, e = 0.0;
                for (int r = 0; r < N; ++r) {
                    m += J.gi[p][r] * J.dg[a][r][q];
                    e += J.gi[a][r] * J.dg[r][p][q];
                }
                M[a][p][q] = m;  // (g^-1 d_a g)^p_q
                E[a][p][q] = e;  // g^{ab} d_b g_pq
            }
    Mat<N> out{};
    for (int i = 0; i < N; ++i)
        for (int j = 0; j <= i; ++j) {
            double principal = 0.0;
            for (int a = 0; a < N; ++a)
                for (int b = 0; b < N; ++b) principal += J.gi[a][b] * J.ddg[a][b][i][j];
            double t1 = 0.0, t2 = 0.0, t3 = 0.0, t4 = 0.0, t5 = 0.0;
            for (int a = 0; a < N; ++a)
                for (int q = 0; q < N; ++q) {
                    t1 += M[i][a][q] * M[j][q][a];
                    t2 += M[a][q][j] * M[q][a][i];
                    t3 += M[a][q][j] * E[a][i][q];
                    t4 += M[j][q][a] * E[a][i][q];
                    t5 += M[i][q][a] * E[a][j][q];
                }
            out[i][j] = out[j][i] = principal + 0.5 * t1 + t2 - t3 - t4 - t5;
        }
    return out;
}

enum class RhsForm { geometric, expanded };

/// Fills out with the flow rhs at nodes at least `ring` from every face; zero elsewhere.
template <int N, StencilOrder O, RhsForm F>
void rhs_field(const SymTensorField& g, std::size_t ring, SymTensorField& out) {
    const SymView<N> view(g);
    std::array<double*, N*(N + 1) / 2> dst{};
    for (int c = 0; c < N * (N + 1) / 2; ++c) {
        auto comp = out.component(c);
        std::fill(comp.begin(), comp.end(), 0.0);
        dst[c] = comp.data();
    }
    for_each_interior(g.grid(), std::max(ring, halo_width(O)), [&](std::size_t n) {
        Jet<N> J;
        load_jet<N, O, true>(view, n, J);
        const Mat<N> r = F == RhsForm::geometric ? rhs_geometric<N>(J) : rhs_expanded<N>(J);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j <= i; ++j) dst[sym_index(i, j)][n] = r[i][j];
    });
}

inline void rhs_dispatch(const SymTensorField& g, StencilOrder order, RhsForm form, std::size_t ring,
                         SymTensorField& out) {
    detail::dispatch(g.grid().dim(), order, [&]<int N, StencilOrder O>() {
        if (form == RhsForm::geometric) {
            rhs_field<N, O, RhsForm::geometric>(g, ring, out);
        } else {
            rhs_field<N, O, RhsForm::expanded>(g, ring, out);
        }
    });
}

}  // namespace detail

/// W^k = g^{ij} Gamma^k_ij; zero on the stencil halo.
inline VectorField deturck_vector(const MetricField& g, StencilOrder order = StencilOrder::second) {
    VectorField out(g.grid());
    detail::dispatch(g.dim(), order, [&]<int N, StencilOrder O>() {
        detail::for_each_jet<N, O>(
            g.tensor(),
            [&](std::size_t node, const detail::Jet<N>& J) {
                detail::Connection<N> C;
                detail::connection<N, false>(J, C);
                const auto w = detail::deturck_raised<N>(J, C);
                for (int k = 0; k < N; ++k) out.at(k, node) = w[k];
            },
            false);
    });
    return out;
}

/// -2 Ric(g) + grad_i W_j + grad_j W_i with W lowered by g. Zero within
/// `ring` nodes of the faces (at least the stencil halo).
inline SymTensorField rdf_rhs(const MetricField& g, StencilOrder order = StencilOrder::second, std::size_t ring = 0) {
    SymTensorField out(g.grid());
    detail::rhs_dispatch(g.tensor(), order, detail::RhsForm::geometric, ring, out);
    return out;
}

/// Algebraically identical to rdf_rhs, evaluated from the expanded form; the integrator uses this one.
inline SymTensorField rdf_rhs_expanded(const MetricField& g, StencilOrder order = StencilOrder::second,
                                       std::size_t ring = 0) {
    SymTensorField out(g.grid());
    detail::rhs_dispatch(g.tensor(), order, detail::RhsForm::expanded, ring, out);
    return out;
}

// ---------------------------------------------------------------------------
// Time integration

enum class Integrator { rk2, rk4 };

struct FlowConfig {
    double end_time = 0.01;
    /// dt = cfl * h^2 / lambda_max(g^-1)
    double cfl = 0.1;
    Integrator integrator = Integrator::rk2;
    StencilOrder order = StencilOrder::second;
    /// Dirichlet ring held at g_euc
    std::size_t boundary_ring = 3;
    /// closeness bound; blow-up is declared beyond 2 * eps0
    double eps0 = 0.1;
    /// snapshot cadence: this many per decade of t, down to cadence_floor * end_time
    int snapshots_per_decade = 16;
    double cadence_floor = 1e-2;
    /// explicit snapshot times (override the cadence when non-empty)
    std::vector<double> snapshot_times;
};

/// Stability limit of dt * lambda_max / h^2 for the chosen integrator and stencil in n dimensions.
inline double cfl_limit(Integrator integ, int dim, StencilOrder order = StencilOrder::second) noexcept {
    // real-axis stability interval of the scheme over the spectral radius of the discrete
    // Laplacian: 4 per axis for the 3-point stencil, 16/3 for the 5-point one
    const double interval = integ == Integrator::rk2 ? 2.0 : 2.785;
    const double radius = order == StencilOrder::second ? 4.0 : 16.0 / 3.0;
    return interval / (radius * dim);
}

/// Heat-cone factor used for the flow time window.
inline constexpr double kHeatCone = 6.0;

/// Largest end time whose heat cone from a perturbation inside r_outer stays in the box.
inline double flow_window(const GridSpec& grid, double r_outer, double cone = kHeatCone) {
    const double room = grid.min_half_width() - r_outer;
    if (room <= 0.0) return 0.0;
    return std::min(1.0, (room / cone) * (room / cone));
}

struct FlowState {
    double t = 0.0;
    SymTensorField g;

    MetricField metric() const { return MetricField(g); }
};

struct Trajectory {
    std::vector<FlowState> states;
    /// tracked point at each snapshot time (filled by psi_track)
    std::vector<std::vector<double>> path;
    double dt = 0.0;
    std::size_t steps = 0;

    const GridSpec& grid() const { return states.front().g.grid(); }
    std::vector<double> times() const {
        std::vector<double> t;
        for (const auto& s : states) t.push_back(s.t);
        return t;
    }
    const FlowState& at_time(double t) const {
        for (const auto& s : states)
            if (s.t == t) return s;
        throw InvalidArgument("no snapshot at t = " + std::to_string(t));
    }
};

/// Snapshot times (excluding 0, including end_time), strictly increasing.
inline std::vector<double> snapshot_schedule(const FlowConfig& cfg) {
    std::vector<double> ts;
    if (!cfg.snapshot_times.empty()) {
        for (double t : cfg.snapshot_times) {
            if (!(t > 0.0) || t > cfg.end_time) throw InvalidArgument("snapshot times must lie in (0, end_time]");
            ts.push_back(t);
        }
        ts.push_back(cfg.end_time);
    } else {
        if (cfg.snapshots_per_decade <= 0) throw InvalidArgument("snapshots_per_decade must be positive");
        if (!(cfg.cadence_floor > 0.0 && cfg.cadence_floor <= 1.0)) throw InvalidArgument("cadence_floor must lie in (0, 1]");
        const double decades = -std::log10(cfg.cadence_floor);
        const int count = static_cast<int>(std::floor(decades * cfg.snapshots_per_decade + 1e-9));
        for (int k = count; k >= 0; --k) ts.push_back(cfg.end_time * std::pow(10.0, -static_cast<double>(k) / cfg.snapshots_per_decade));
        ts.back() = cfg.end_time;
    }
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
}

namespace detail {

/// Largest Frobenius distance to the identity over nodes.
inline double max_identity_distance(const SymTensorField& g) {
    const int n = g.grid().dim();
    return parallel_reduce(
        g.node_count(), 0.0,
        [&](std::size_t b, std::size_t e) {
            double m = 0.0;
            for (std::size_t k = b; k < e; ++k) {
                double s = 0.0;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        const double d = g.at(sym_index(i, j), k) - (i == j ? 1.0 : 0.0);
                        s += d * d;
                    }
                if (!std::isfinite(s)) return std::numeric_limits<double>::infinity();
                m = std::max(m, s);
            }
            return m;
        },
        [](double a, double b) { return std::max(a, b); });
}

/// Exact eigenvalue range over nodes: (min lambda, max lambda).
inline std::pair<double, double> eigen_range(const SymTensorField& g) {
    using P = std::pair<double, double>;
    const auto body = [&]<int N>(std::size_t b, std::size_t e) {
        P r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
        for (std::size_t k = b; k < e; ++k) {
            const auto ev = sym_eigenvalues<N>(node_matrix<N>(g, k));
            r.first = std::min(r.first, ev[0]);
            r.second = std::max(r.second, ev[N - 1]);
        }
        return r;
    };
    return parallel_reduce(
        g.node_count(), P{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()},
        [&](std::size_t b, std::size_t e) {
            return g.grid().dim() == 3 ? body.template operator()<3>(b, e) : body.template operator()<4>(b, e);
        },
        [](P a, P b) { return P{std::min(a.first, b.first), std::max(a.second, b.second)}; });
}

inline void require_euclidean_ring(const SymTensorField& g, std::size_t ring) {
    const GridSpec& grid = g.grid();
    const int n = grid.dim();
    for (std::size_t k = 0; k < grid.node_count(); ++k) {
        if (grid.boundary_distance(k) >= ring) continue;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j) {
                if (g.at(sym_index(i, j), k) != (i == j ? 1.0 : 0.0)) {
                    throw InvalidArgument("initial metric is not Euclidean on the boundary ring (node " +
                                          std::to_string(k) + "); apply cutoff_extend first");
                }
            }
    }
}

/// y = x + s * k over all components
inline void axpy(SymTensorField& y, const SymTensorField& x, double s, const SymTensorField& k) {
    auto yd = y.data();
    auto xd = x.data();
    auto kd = k.data();
    parallel_for(yd.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) yd[i] = xd[i] + s * kd[i];
    });
}

/// One explicit integrator step for a single metric.
class Stepper {
public:
    Stepper(const FlowConfig& cfg, const GridSpec& grid)
        : cfg_(cfg), k1_(grid), k2_(grid), k3_(grid), k4_(grid), tmp_(grid) {}

    void step(SymTensorField& g, double dt) {
        const auto f = [&](const SymTensorField& x, SymTensorField& out) {
            rhs_dispatch(x, cfg_.order, RhsForm::expanded, cfg_.boundary_ring, out);
        };
        if (cfg_.integrator == Integrator::rk2) {
            f(g, k1_);
            axpy(tmp_, g, 0.5 * dt, k1_);
            f(tmp_, k2_);
            axpy(g, g, dt, k2_);
            return;
        }
        f(g, k1_);
        axpy(tmp_, g, 0.5 * dt, k1_);
        f(tmp_, k2_);
        axpy(tmp_, g, 0.5 * dt, k2_);
        f(tmp_, k3_);
        axpy(tmp_, g, dt, k3_);
        f(tmp_, k4_);
        auto gd = g.data();
        const auto a = k1_.data(), b = k2_.data(), c = k3_.data(), d = k4_.data();
        parallel_for(gd.size(), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) gd[i] += dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]);
        });
    }

private:
    const FlowConfig& cfg_;
    SymTensorField k1_, k2_, k3_, k4_, tmp_;
};

inline double initial_dt(const SymTensorField& g, const FlowConfig& cfg) {
    const double lmin = eigen_range(g).first;
    const double h = g.grid().spacing();
    return cfg.cfl * h * h * (lmin);  // lambda_max(g^-1) = 1 / lambda_min(g)
}

/// Post-step health check: blow-up beyond 2 eps0 and the stability bound.
inline void check_state(const SymTensorField& g, double t, double dt, const FlowConfig& cfg) {
    const double frob = std::sqrt(max_identity_distance(g));
    if (!std::isfinite(frob)) throw BlowUpError(t, "non-finite metric entries");
    const double h2 = g.grid().spacing() * g.grid().spacing();
    const double limit = cfl_limit(cfg.integrator, g.grid().dim(), cfg.order);
    // Frobenius distance bounds every |lambda - 1|; only go exact when the bound is inconclusive
    if (frob <= 2.0 * cfg.eps0 && dt / (h2 * (1.0 - std::min(frob, 0.999))) <= limit) return;
    const auto [lo, hi] = eigen_range(g);
    if (lo < 1.0 - 2.0 * cfg.eps0 || hi > 1.0 + 2.0 * cfg.eps0) {
        throw BlowUpError(t, "eigenvalues [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                 "] left 1 +- 2 eps0");
    }
    if (dt / (h2 * lo) > limit) {
        throw CflError("time step exceeds the stability bound at t = " + std::to_string(t) + " (ratio " +
                       std::to_string(dt / (h2 * lo)) + " > " + std::to_string(limit) + ")");
    }
}

inline void validate_flow(const FlowConfig& cfg, const SymTensorField& g0) {
    if (!(cfg.end_time > 0.0)) throw InvalidArgument("end time must be positive");
    if (!(cfg.cfl > 0.0 && cfg.cfl <= 0.5)) throw InvalidArgument("cfl factor must lie in (0, 0.5]");
    if (!(cfg.eps0 > 0.0)) throw InvalidArgument("eps0 must be positive");
    if (cfg.boundary_ring < halo_width(cfg.order)) throw InvalidArgument("boundary ring narrower than the stencil halo");
    require_euclidean_ring(g0, cfg.boundary_ring);
    const MetricField m(g0);
    m.require_close(cfg.eps0, "initial metric");
    if (cfg.cfl > cfl_limit(cfg.integrator, g0.grid().dim(), cfg.order)) {
        throw CflError("cfl factor " + std::to_string(cfg.cfl) + " exceeds the stability bound " +
                       std::to_string(cfl_limit(cfg.integrator, g0.grid().dim(), cfg.order)));
    }
}

inline bool is_euclidean(const SymTensorField& g) {
    const int n = g.grid().dim();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            const double e = i == j ? 1.0 : 0.0;
            for (double v : g.component(sym_index(i, j)))
                if (v != e) return false;
        }
    return true;
}

/// Integrates any number of metrics in lockstep with one dt sequence.
inline std::vector<Trajectory> lockstep(std::vector<const SymTensorField*> inits, const FlowConfig& cfg) {
    const GridSpec& grid = inits.front()->grid();
    double dt = std::numeric_limits<double>::infinity();
    for (const auto* g : inits) {
        if (!(g->grid() == grid)) throw InvalidArgument("metrics live on different grids");
        validate_flow(cfg, *g);
        dt = std::min(dt, initial_dt(*g, cfg));
    }
    const auto schedule = snapshot_schedule(cfg);
    std::vector<Trajectory> out(inits.size());
    std::vector<SymTensorField> cur;
    std::vector<bool> frozen;
    std::vector<Stepper> steppers;
    steppers.reserve(inits.size());
    for (std::size_t m = 0; m < inits.size(); ++m) {
        cur.push_back(*inits[m]);
        // g_euc is an exact fixed point of the discrete flow
        frozen.push_back(is_euclidean(*inits[m]));
        out[m].states.push_back({0.0, cur.back()});
        out[m].dt = dt;
        steppers.emplace_back(cfg, grid);
    }
    double t = 0.0;
    std::size_t steps = 0;
    for (double target : schedule) {
        while (t < target) {
            double h = dt;
            bool land = false;
            if (target - t <= dt * (1.0 + 1e-9)) {
                h = target - t;
                land = true;
            }
            for (std::size_t m = 0; m < cur.size(); ++m) {
                if (frozen[m]) continue;
                steppers[m].step(cur[m], h);
            }
            t = land ? target : t + h;
            ++steps;
            for (std::size_t m = 0; m < cur.size(); ++m) {
                if (!frozen[m]) check_state(cur[m], t, dt, cfg);
            }
        }
        for (std::size_t m = 0; m < cur.size(); ++m) out[m].states.push_back({t, cur[m]});
    }
    for (auto& tr : out) tr.steps = steps;
    return out;
}

}  // namespace detail

/// Explicit RK2 (or RK4) integration of the flow with a fixed Euclidean ring.
inline Trajectory evolve(const MetricField& g0, const FlowConfig& cfg) {
    return std::move(detail::lockstep({&g0.tensor()}, cfg).front());
}

/// Two evolutions sharing one dt sequence (the smaller of the two CFL steps).
inline std::pair<Trajectory, Trajectory> pair_evolve(const MetricField& g0, const MetricField& h0, const FlowConfig& cfg) {
    auto v = detail::lockstep({&g0.tensor(), &h0.tensor()}, cfg);
    return {std::move(v[0]), std::move(v[1])};
}

// ---------------------------------------------------------------------------
// Tracked point

/// Velocity provider: W(x, t) written into out.
using VelocityField = std::function<void(std::span<const double> x, double t, std::span<double> out)>;

/// RK2 (midpoint) integration of dx/dt = -W(x, t), sampled at `times`
/// (times[0] is the start), `substeps` steps per sampling interval.
inline std::vector<std::vector<double>> integrate_path(const VelocityField& w, std::span<const double> times,
                                                        std::span<const double> x0, int substeps,
                                                        const GridSpec* box = nullptr) {
    if (times.empty()) throw InvalidArgument("no sampling times");
    if (substeps < 1) throw InvalidArgument("substeps must be positive");
    const std::size_t n = x0.size();
    std::vector<double> x(x0.begin(), x0.end()), mid(n), v(n);
    std::vector<std::vector<double>> path{x};
    auto inside = [&](const std::vector<double>& p) { return box == nullptr || box->contains(p); };
    if (!inside(x)) throw DomainError("tracked point starts outside the box");
    for (std::size_t s = 1; s < times.size(); ++s) {
        const double dt = (times[s] - times[s - 1]) / substeps;
        for (int k = 0; k < substeps; ++k) {
            const double t = times[s - 1] + k * dt;
            w(x, t, v);
            for (std::size_t a = 0; a < n; ++a) mid[a] = x[a] - 0.5 * dt * v[a];
            if (!inside(mid)) throw DomainError("tracked point left the box");
            w(mid, t + 0.5 * dt, v);
            for (std::size_t a = 0; a < n; ++a) x[a] -= dt * v[a];
            if (!inside(x)) throw DomainError("tracked point left the box");
        }
        path.push_back(x);
    }
    return path;
}

namespace detail {

template <int N>
void deturck_at_point(const SymTensorField& g, std::span<const double> x, std::span<double> out) {
    const auto st = interpolation_stencil(g.grid(), x);
    const SymView<N> view(g);
    for (int k = 0; k < N; ++k) out[k] = 0.0;
    for (int c = 0; c < st.count; ++c) {
        if (g.grid().boundary_distance(st.nodes[c]) < 1) throw DomainError("tracked point too close to the box face");
        Jet<N> J;
        load_jet<N, StencilOrder::second, false>(view, st.nodes[c], J);
        Connection<N> C;
        connection<N, false>(J, C);
        const auto w = deturck_raised<N>(J, C);
        for (int k = 0; k < N; ++k) out[k] += st.weights[c] * w[k];
    }
}

}  // namespace detail

/// W of the metric at an off-grid point (node values interpolated).
inline std::vector<double> deturck_at(const SymTensorField& g, std::span<const double> x) {
    std::vector<double> out(static_cast<std::size_t>(g.grid().dim()));
    if (g.grid().dim() == 3) {
        detail::deturck_at_point<3>(g, x, out);
    } else {
        detail::deturck_at_point<4>(g, x, out);
    }
    return out;
}

/// Integrates the tracked point through a trajectory, W linearly interpolated
/// in time between snapshots. Returns the path at snapshot times and stores it
/// in traj.path.
inline std::vector<std::vector<double>> psi_track(Trajectory& traj, std::span<const double> x0, int substeps = 8) {
    if (traj.states.empty()) throw InvalidArgument("empty trajectory");
    const GridSpec& grid = traj.grid();
    if (static_cast<int>(x0.size()) != grid.dim()) throw InvalidArgument("point has the wrong dimension");
    const auto times = traj.times();
    const VelocityField w = [&](std::span<const double> x, double t, std::span<double> out) {
        auto it = std::upper_bound(times.begin(), times.end(), t);
        std::size_t hi = static_cast<std::size_t>(it - times.begin());
        if (hi >= times.size()) hi = times.size() - 1;
        const std::size_t lo = hi == 0 ? 0 : hi - 1;
        const double span = times[hi] - times[lo];
        const double th = span > 0.0 ? std::clamp((t - times[lo]) / span, 0.0, 1.0) : 0.0;
        const auto a = deturck_at(traj.states[lo].g, x);
        const auto b = deturck_at(traj.states[hi].g, x);
        for (std::size_t k = 0; k < a.size(); ++k) out[k] = (1.0 - th) * a[k] + th * b[k];
    };
    traj.path = integrate_path(w, times, x0, substeps, &grid);
    return traj.path;
}

}  // namespace rdflab
