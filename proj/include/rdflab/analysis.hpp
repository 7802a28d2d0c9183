#pragma once

// Exponent fits, flow stability and decay checks, scalar persistence along
// the tracked point, curvature probes, the quantitative scalar-curvature
// bound pipeline and the conformal sharpness sweep.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rdflab/curvature.hpp"
#include "rdflab/error.hpp"
#include "rdflab/field.hpp"
#include "rdflab/flow.hpp"
#include "rdflab/grid.hpp"
#include "rdflab/grid_calculus.hpp"
#include "rdflab/metrics_zoo.hpp"

namespace rdflab {

// ---------------------------------------------------------------------------
// Fits

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t count = 0;
    /// (ln x, ln y) pairs actually fitted
    std::vector<std::array<double, 2>> points;
};

inline constexpr std::size_t kMinFitSamples = 4;

/// Least squares of ln y against ln x.
inline FitResult exponent_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidArgument("fit needs as many x as y values");
    if (x.size() < kMinFitSamples) throw InvalidArgument("fit needs at least 4 samples");
    FitResult f;
    f.count = x.size();
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(x[i]) || !std::isfinite(y[i])) {
            throw InvalidArgument("fit needs positive finite samples");
        }
        if (i > 0 && !(x[i] > x[i - 1])) throw InvalidArgument("fit needs strictly increasing x");
        f.points.push_back({std::log(x[i]), std::log(y[i])});
        sx += f.points.back()[0];
        sy += f.points.back()[1];
    }
    const double n = static_cast<double>(f.count);
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& p : f.points) {
        sxx += (p[0] - mx) * (p[0] - mx);
        sxy += (p[0] - mx) * (p[1] - my);
        syy += (p[1] - my) * (p[1] - my);
    }
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (syy == 0.0) {
        f.r2 = 1.0;
    } else {
        double ss = 0;
        for (const auto& p : f.points) {
            const double e = p[1] - (f.intercept + f.slope * p[0]);
            ss += e * e;
        }
        f.r2 = std::clamp(1.0 - ss / syy, 0.0, 1.0);
    }
    return f;
}

// ---------------------------------------------------------------------------
// Derivative norms of tensor fields

/// sup over nodes at least `margin` (>= 1) from the box of the Euclidean
/// Frobenius norm of d, its first and its second partial derivatives.
inline std::array<double, 3> derivative_sups(const SymTensorField& d, std::size_t margin = 1) {
    const GridSpec& grid = d.grid();
    const int n = grid.dim();
    const int comps = d.components();
    margin = std::max<std::size_t>(margin, 1);
    const double h = grid.spacing();
    const double i2h = 1.0 / (2.0 * h), ih2 = 1.0 / (h * h), i4h2 = 1.0 / (4.0 * h * h);
    std::array<double, 10> weight{};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) weight[static_cast<std::size_t>(sym_index(i, j))] = i == j ? 1.0 : 2.0;
    using S = std::array<double, 3>;
    S sq = parallel_reduce(
        grid.node_count(), S{},
        [&](std::size_t b, std::size_t e) {
            S s{};
            for (std::size_t k = b; k < e; ++k) {
                if (grid.boundary_distance(k) < margin) continue;
                double a0 = 0, a1 = 0, a2 = 0;
                for (int c = 0; c < comps; ++c) {
                    const double* f = d.component(c).data();
                    const double w = weight[static_cast<std::size_t>(c)];
                    a0 += w * f[k] * f[k];
                    for (int x = 0; x < n; ++x) {
                        const std::ptrdiff_t sx = grid.stride(x);
                        const double fx = (f[k + sx] - f[k - sx]) * i2h;
                        a1 += w * fx * fx;
                        const double fxx = (f[k + sx] - 2.0 * f[k] + f[k - sx]) * ih2;
                        a2 += w * fxx * fxx;
                        for (int y = x + 1; y < n; ++y) {
                            const std::ptrdiff_t sy = grid.stride(y);
                            const double fxy = (f[k + sx + sy] - f[k + sx - sy] - f[k - sx + sy] + f[k - sx - sy]) * i4h2;
                            a2 += 2.0 * w * fxy * fxy;
                        }
                    }
                }
                s[0] = std::max(s[0], a0);
                s[1] = std::max(s[1], a1);
                s[2] = std::max(s[2], a2);
            }
            return s;
        },
        [](S a, const S& b) {
            for (int i = 0; i < 3; ++i) a[i] = std::max(a[i], b[i]);
            return a;
        });
    for (double& v : sq) v = std::sqrt(v);
    return sq;
}

namespace detail {

inline void require_aligned(const Trajectory& a, const Trajectory& b) {
    if (a.states.empty() || b.states.empty()) throw InvalidArgument("empty trajectory");
    if (!(a.grid() == b.grid())) throw InvalidArgument("trajectories live on different grids");
    if (a.times() != b.times()) throw InvalidArgument("trajectories have misaligned snapshot times");
}

/// Indices of snapshots with t in [t_min, t_max].
inline std::vector<std::size_t> window(const Trajectory& a, double t_min, double t_max) {
    if (!(t_min > 0.0) || !(t_max >= t_min)) throw InvalidArgument("need 0 < t_min <= t_max");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < a.states.size(); ++i)
        if (a.states[i].t >= t_min && a.states[i].t <= t_max) idx.push_back(i);
    return idx;
}

}  // namespace detail

/// Smallest time at which a fit window may start: 4 h^2.
inline double resolved_time(const GridSpec& grid) { return 4.0 * grid.spacing() * grid.spacing(); }

// ---------------------------------------------------------------------------
// Stability of the flow under perturbation of the initial metric

struct StabilityRow {
    double t = 0.0;
    int k = 0;
    /// t^{k/2} sup|D^k (g - g_hat)| / sup|g_0 - g_hat_0|
    double ratio = 0.0;
};

struct StabilityReport {
    double initial_difference = 0.0;
    std::vector<StabilityRow> rows;
    std::array<double, 3> sup_ratio{};
    /// measured stability constant: largest ratio over k and t
    double c0 = 0.0;
    /// ln ratio against ln t, per k
    std::array<FitResult, 3> trend;
    bool bounded = false;
};

inline constexpr double kTrendTolerance = 0.15;

inline StabilityReport stability_check(const Trajectory& a, const Trajectory& b, double t_min, double t_max) {
    detail::require_aligned(a, b);
    const auto idx = detail::window(a, t_min, t_max);
    if (idx.size() < kMinFitSamples) throw InvalidArgument("fewer than 4 snapshots in the stability window");
    StabilityReport rep;
    rep.initial_difference = derivative_sups(a.states.front().g - b.states.front().g)[0];
    std::array<std::vector<double>, 3> ts, rs;
    for (std::size_t i : idx) {
        const double t = a.states[i].t;
        const auto s = derivative_sups(a.states[i].g - b.states[i].g);
        for (int k = 0; k < 3; ++k) {
            const double r = rep.initial_difference > 0.0 ? std::pow(t, 0.5 * k) * s[k] / rep.initial_difference : 0.0;
            rep.rows.push_back({t, k, r});
            rep.sup_ratio[k] = std::max(rep.sup_ratio[k], r);
            ts[k].push_back(t);
            rs[k].push_back(r);
        }
    }
    rep.c0 = *std::max_element(rep.sup_ratio.begin(), rep.sup_ratio.end());
    rep.bounded = std::isfinite(rep.c0);
    if (rep.initial_difference == 0.0) return rep;  // identical pair: all ratios 0, no trend
    for (int k = 0; k < 3; ++k) {
        rep.trend[k] = exponent_fit(ts[k], rs[k]);
        rep.bounded = rep.bounded && std::abs(rep.trend[k].slope) <= kTrendTolerance;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// L^p to L-infinity decay of the difference of two flows

struct DecayReport {
    double p = 0.0;
    double expected_slope = 0.0;
    double initial_lp = 0.0;
    std::vector<double> t;
    /// sup|g(t) - g_hat(t)| / |g_0 - g_hat_0|_{L^p}
    std::vector<double> ratio;
    FitResult fit;
};

inline DecayReport lp_decay_check(const Trajectory& a, const Trajectory& b, double p, double t_min, double t_max) {
    detail::require_aligned(a, b);
    if (!(p >= 1.0)) throw InvalidArgument("p must be at least 1");
    const auto idx = detail::window(a, t_min, t_max);
    if (idx.size() < kMinFitSamples) throw InvalidArgument("fewer than 4 snapshots in the decay window");
    const GridSpec& grid = a.grid();
    DecayReport rep;
    rep.p = p;
    rep.expected_slope = -grid.dim() / (2.0 * p);
    rep.initial_lp = norm(a.states.front().g - b.states.front().g, Region::whole(grid), p);
    if (rep.initial_lp == 0.0) throw InvalidArgument("initial difference vanishes");
    for (std::size_t i : idx) {
        rep.t.push_back(a.states[i].t);
        rep.ratio.push_back(norm(a.states[i].g - b.states[i].g, Region::whole(grid), kLinf) / rep.initial_lp);
    }
    rep.fit = exponent_fit(rep.t, rep.ratio);
    return rep;
}

/// Envelope of several decay runs with the same p and times: at each t the
/// largest ratio, refitted. The decay estimate is a sup over initial data, so
/// a family of bump widths probes it better than any single bump.
inline DecayReport decay_envelope(std::span<const DecayReport> runs) {
    if (runs.empty()) throw InvalidArgument("no decay runs");
    DecayReport env = runs.front();
    for (const auto& r : runs.subspan(1)) {
        if (r.t != env.t || r.p != env.p) throw InvalidArgument("decay runs have different times or p");
        for (std::size_t i = 0; i < env.ratio.size(); ++i) env.ratio[i] = std::max(env.ratio[i], r.ratio[i]);
    }
    env.initial_lp = 0.0;  // not meaningful for an envelope
    env.fit = exponent_fit(env.t, env.ratio);
    return env;
}

// ---------------------------------------------------------------------------
// Scalar persistence and curvature along the tracked point

inline constexpr double kPersistConstant = 10.0;

struct PersistenceReport {
    double kappa = 0.0;
    /// min of scal(g(0)) over the region
    double initial_min = 0.0;
    std::vector<double> t;
    std::vector<double> scal;
    /// (scal(x_t, t) - kappa) / t for t > 0
    std::vector<double> deficit_ratio;
    double min_ratio = std::numeric_limits<double>::infinity();
    double c_persist = kPersistConstant;
    bool pass = false;
};

/// traj.path must hold the tracked point (see psi_track).
inline PersistenceReport persistence_check(const Trajectory& traj, const Region& region, double kappa,
                                           double c_persist = kPersistConstant) {
    if (traj.path.size() != traj.states.size()) throw InvalidArgument("trajectory has no tracked path");
    if (!(region.grid() == traj.grid())) throw InvalidArgument("region and trajectory live on different grids");
    PersistenceReport rep;
    rep.kappa = kappa;
    rep.c_persist = c_persist;
    const ScalarField s0 = scalar_curvature(traj.states.front().metric());
    rep.initial_min = std::numeric_limits<double>::infinity();
    for (std::size_t k : region.nodes()) rep.initial_min = std::min(rep.initial_min, s0[k]);
    if (!(rep.initial_min >= kappa)) {
        throw DomainError("scal(g(0)) >= kappa fails on the region (min " + std::to_string(rep.initial_min) + " < " +
                          std::to_string(kappa) + ")");
    }
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const double t = traj.states[i].t;
        const double s = scalar_curvature_at(traj.states[i].metric(), traj.path[i]);
        rep.t.push_back(t);
        rep.scal.push_back(s);
        if (t > 0.0) {
            rep.deficit_ratio.push_back((s - kappa) / t);
            rep.min_ratio = std::min(rep.min_ratio, rep.deficit_ratio.back());
        }
    }
    rep.pass = rep.min_ratio >= -c_persist;
    return rep;
}

/// Distance of the tracked point from its start, against t (t > 0 only).
inline std::pair<std::vector<double>, std::vector<double>> tracked_drift(const Trajectory& traj) {
    if (traj.path.size() != traj.states.size()) throw InvalidArgument("trajectory has no tracked path");
    std::vector<double> t, d;
    for (std::size_t i = 1; i < traj.states.size(); ++i) {
        double s = 0;
        for (std::size_t a = 0; a < traj.path[i].size(); ++a) s += std::pow(traj.path[i][a] - traj.path[0][a], 2);
        t.push_back(traj.states[i].t);
        d.push_back(std::sqrt(s));
    }
    return {t, d};
}

struct PseudolocalityReport {
    std::vector<double> t;
    std::vector<CurvatureReport> reports;
    double initial_combined = 0.0;
    double sup_combined = 0.0;
    bool pass = false;
};

inline constexpr double kPseudolocalityFactor = 4.0;
inline constexpr double kPseudolocalityOffset = 1.0;

/// Covariant curvature norms on B(x_t, max(2h, r0 - sqrt t)) for every snapshot.
inline PseudolocalityReport pseudolocality_probe(const Trajectory& traj, double r0, double r_scale = 1.0) {
    if (traj.path.size() != traj.states.size()) throw InvalidArgument("trajectory has no tracked path");
    if (!(r0 > 0.0)) throw InvalidArgument("probe radius must be positive");
    const GridSpec& grid = traj.grid();
    PseudolocalityReport rep;
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const double t = traj.states[i].t;
        const Region ball(grid, traj.path[i], std::max(2.0 * grid.spacing(), r0 - std::sqrt(t)));
        auto cr = covariant_curvature_norms(traj.states[i].metric(), ball, r_scale);
        cr.scalar = ScalarField();  // keep reports small
        rep.t.push_back(t);
        rep.sup_combined = std::max(rep.sup_combined, cr.combined);
        if (i == 0) rep.initial_combined = cr.combined;
        rep.reports.push_back(std::move(cr));
    }
    rep.pass = rep.sup_combined <= kPseudolocalityFactor * rep.initial_combined + kPseudolocalityOffset;
    return rep;
}

// ---------------------------------------------------------------------------
// Quantitative bound pipeline

enum class BoundMode { linf, lp };

struct BoundConfig {
    BoundMode mode = BoundMode::linf;
    double p = 1.0;
    /// largest admissible initial distance
    double eps_n = 0.1;
    /// x0 (empty = origin) and the ball Omega = B(x0, omega_radius) on which kappa is taken
    std::vector<double> x0;
    double omega_radius = 0.1;
    /// scale in the curvature hypothesis sum_k r^k sup|D^k Rm| <= r^{-2}
    double r_scale = 1.0;
    /// refuse when the hypothesis is violated by more than this factor
    double hypothesis_slack = 100.0;
    /// cutoff extension to a globally Euclidean metric
    double ext_inner = 0.65;
    double ext_outer = 0.95;
    /// grow the box (same spacing) so the heat cone from ext_outer fits by t*
    bool pad = true;
    double cone = kHeatCone;
    /// hard cap on t* (the run is flagged as clamped when it bites)
    double t_cap = 1.0;
    FlowConfig flow;
    int snapshots = 8;
    int track_substeps = 8;
    double c_persist = kPersistConstant;
};

struct BoundReport {
    BoundMode mode = BoundMode::linf;
    double p = 0.0;
    double sigma = 0.0;
    /// t* = sigma^exponent
    double exponent = 0.0;
    double t_star = 0.0;
    bool clamped = false;
    /// min over Omega nodes of scal of the perturbed metric
    double kappa = 0.0;
    /// scal of the reference metric at x0
    double scal0 = 0.0;
    double gap = 0.0;
    std::vector<double> x0, x_t;
    double omega_radius = 0.0;
    std::size_t omega_nodes = 0;
    // curvature hypothesis on the reference metric
    CurvatureReport hypothesis;
    double hypothesis_ratio = 0.0;
    bool hypothesis_ok = false;
    // stages at (x_t, t*)
    double stage_persist = 0.0;  // scal of the perturbed flow
    double stage_compare = 0.0;  // its trace of the reference flow's Ricci
    double stage_final = 0.0;    // scal0
    // measured constants
    double c_persist = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda6 = 0.0;
    double term_t = 0.0;
    double term_sigma = 0.0;
    /// t-term over sigma-term, independent of lambda6
    double balance = 0.0;
    double rhs = 0.0;
    bool persist_ok = false;
    bool holds = false;
    // effective grid
    std::vector<std::size_t> grid_nodes;
    double spacing = 0.0;
    std::size_t pad = 0;
    double end_time = 0.0;
    std::size_t steps = 0;
};

namespace detail {

inline double sigma_weight(const BoundReport& r, double t, int n) {
    return r.mode == BoundMode::linf ? r.sigma / t : r.sigma * std::pow(t, -1.0 - n / (2.0 * r.p));
}

}  // namespace detail

/// Reference metric g0 (curvature bounded near x0) and perturbed metric
/// g0_hat; checks inf_Omega scal(g0_hat) <= scal_g0(x0) + L (t + sigma-term)
/// at the balancing time with every constant measured along the way.
inline BoundReport quantitative_bound(const MetricField& g0, const MetricField& g0_hat, const BoundConfig& cfg) {
    const GridSpec& grid = g0.grid();
    const int n = grid.dim();
    if (!(g0_hat.grid() == grid)) throw InvalidArgument("metrics live on different grids");
    if (cfg.mode == BoundMode::lp && !(cfg.p >= 1.0)) throw InvalidArgument("p must be at least 1");
    BoundReport rep;
    rep.mode = cfg.mode;
    rep.p = cfg.mode == BoundMode::lp ? cfg.p : 0.0;
    rep.x0 = cfg.x0.empty() ? std::vector<double>(static_cast<std::size_t>(n), 0.0) : cfg.x0;
    if (static_cast<int>(rep.x0.size()) != n) throw InvalidArgument("x0 has the wrong dimension");
    rep.omega_radius = cfg.omega_radius;
    rep.exponent = cfg.mode == BoundMode::linf ? 0.5 : 1.0 / (2.0 + n / (2.0 * cfg.p));

    // hypothesis and kappa on the unmodified metrics
    const Region omega(grid, rep.x0, cfg.omega_radius);
    rep.omega_nodes = omega.nodes().size();
    rep.hypothesis = covariant_curvature_norms(g0, omega, cfg.r_scale);
    rep.hypothesis.scalar = ScalarField();
    const double threshold = 1.0 / (cfg.r_scale * cfg.r_scale);
    rep.hypothesis_ratio = rep.hypothesis.combined / threshold;
    rep.hypothesis_ok = rep.hypothesis_ratio <= 1.0;
    if (rep.hypothesis_ratio > cfg.hypothesis_slack) {
        throw DomainError("curvature hypothesis violated by a factor " + std::to_string(rep.hypothesis_ratio));
    }
    const ScalarField scal_hat = scalar_curvature(g0_hat);
    rep.kappa = std::numeric_limits<double>::infinity();
    for (std::size_t k : omega.nodes()) rep.kappa = std::min(rep.kappa, scal_hat[k]);
    rep.scal0 = scalar_curvature_at(g0, rep.x0);
    rep.gap = rep.kappa - rep.scal0;
    rep.stage_final = rep.scal0;

    // extension and initial distance
    SymTensorField ext = cutoff_extend(g0.tensor(), rep.x0, cfg.ext_inner, cfg.ext_outer);
    SymTensorField ext_hat = cutoff_extend(g0_hat.tensor(), rep.x0, cfg.ext_inner, cfg.ext_outer);
    const SymTensorField diff = ext_hat - ext;
    rep.sigma = norm(diff, Region::whole(grid), cfg.mode == BoundMode::linf ? kLinf : cfg.p);
    if (rep.sigma > cfg.eps_n) {
        throw DomainError("initial distance " + std::to_string(rep.sigma) + " exceeds eps_n = " + std::to_string(cfg.eps_n));
    }
    rep.grid_nodes.assign(static_cast<std::size_t>(n), grid.nodes(0));
    for (int a = 0; a < n; ++a) rep.grid_nodes[static_cast<std::size_t>(a)] = grid.nodes(a);
    rep.spacing = grid.spacing();
    rep.x_t = rep.x0;
    if (rep.sigma == 0.0) {
        // nothing to flow: the bound reduces to kappa <= scal0
        rep.holds = rep.gap <= 0.0;
        rep.persist_ok = true;
        rep.stage_persist = rep.stage_compare = rep.scal0;
        return rep;
    }

    rep.t_star = std::pow(rep.sigma, rep.exponent);
    if (rep.t_star > cfg.t_cap) {
        rep.t_star = cfg.t_cap;
        rep.clamped = true;
    }
    if (cfg.pad) {
        const double need = cfg.ext_outer + cfg.cone * std::sqrt(rep.t_star);
        double have = grid.min_half_width();
        for (int a = 0; a < n; ++a) have = std::min(have, grid.half_width(a) - std::abs(rep.x0[static_cast<std::size_t>(a)]));
        if (need > have) rep.pad = static_cast<std::size_t>(std::ceil((need - have) / grid.spacing()));
        if (rep.pad > 0) {
            ext = pad_metric(ext, rep.pad);
            ext_hat = pad_metric(ext_hat, rep.pad);
        }
        for (int a = 0; a < n; ++a) rep.grid_nodes[static_cast<std::size_t>(a)] = ext.grid().nodes(a);
    } else {
        const double window_t = flow_window(ext.grid(), cfg.ext_outer, cfg.cone);
        if (rep.t_star > window_t) {
            rep.t_star = window_t;
            rep.clamped = true;
        }
    }
    if (!(rep.t_star > 0.0)) throw DomainError("no room for the flow inside the box");

    FlowConfig fc = cfg.flow;
    fc.end_time = rep.t_star;
    fc.snapshot_times.clear();
    for (int i = cfg.snapshots - 1; i >= 1; --i) fc.snapshot_times.push_back(rep.t_star * std::pow(2.0, -i));
    rep.end_time = rep.t_star;
    const MetricField m(std::move(ext)), m_hat(std::move(ext_hat));
    auto [traj, traj_hat] = pair_evolve(m, m_hat, fc);
    rep.steps = traj.steps;
    psi_track(traj_hat, rep.x0, cfg.track_substeps);
    rep.x_t = traj_hat.path.back();

    const MetricField g_t = traj.states.back().metric();
    const MetricField gh_t = traj_hat.states.back().metric();
    const double t = rep.t_star;
    rep.stage_persist = scalar_curvature_at(gh_t, rep.x_t);
    rep.stage_compare = ricci_trace_at(g_t, gh_t, rep.x_t);
    const double sw = detail::sigma_weight(rep, t, n);

    // kappa <= s1 + C t,  s1 <= s2 + L1 sw,  s2 <= scal0 + L2 (t + sw)
    rep.c_persist = std::max(0.0, (rep.kappa - rep.stage_persist) / t);
    rep.persist_ok = rep.c_persist <= cfg.c_persist;
    rep.lambda1 = std::max(0.0, (rep.stage_persist - rep.stage_compare) / sw);
    rep.lambda2 = std::max(0.0, (rep.stage_compare - rep.scal0) / (t + sw));
    rep.lambda6 = std::max(rep.c_persist, rep.lambda1) + rep.lambda2;
    rep.term_t = rep.lambda6 * t;
    rep.term_sigma = rep.lambda6 * sw;
    rep.balance = t / sw;
    rep.rhs = rep.scal0 + rep.term_t + rep.term_sigma;
    rep.holds = rep.kappa <= rep.rhs;
    return rep;
}

// ---------------------------------------------------------------------------
// Sharpness sweep over the conformal family

struct SharpnessConfig {
    std::vector<double> eps{0.01, 0.02, 0.04, 0.08, 0.16};
    double a = 0.01;
    int n = 3;
    std::vector<double> p{1.0, 2.0};
    double half_width = 1.25;
    /// nodes per bump radius: h <= r / points_per_radius (at least 8)
    double points_per_radius = 12.0;
    double eps_max = 0.2;
};

struct SharpnessRow {
    double eps = 0.0;
    double r = 0.0;
    std::size_t nodes = 0;
    double spacing = 0.0;
    double d_inf = 0.0;
    std::vector<double> d_p;
    /// min over B(r/2) of scal(g_eps) - scal(g_0)
    double s_min = 0.0;
    /// the same difference at the origin and its leading-order value 4(n-1)/(n-2) a sqrt(eps)
    double s_origin = 0.0;
    double s_origin_leading = 0.0;
};

struct SharpnessResult {
    std::vector<SharpnessRow> rows;
    FitResult s_vs_eps;
    FitResult s_vs_dinf;
    std::vector<FitResult> dp_vs_eps;
    std::vector<FitResult> s_vs_dp;
};

inline SharpnessRow sharpness_row(double eps, const SharpnessConfig& cfg) {
    if (!(cfg.points_per_radius >= 8.0)) throw InvalidArgument("points_per_radius must be at least 8");
    MYParams p{eps, cfg.a, cfg.n, cfg.eps_max};
    SharpnessRow row;
    row.eps = eps;
    row.r = p.r();
    // odd node count keeps the origin on a node
    std::size_t nodes = static_cast<std::size_t>(std::ceil(2.0 * cfg.half_width * cfg.points_per_radius / row.r)) + 1;
    if (nodes % 2 == 0) ++nodes;
    const GridSpec grid(cfg.n, nodes, cfg.half_width);
    row.nodes = nodes;
    row.spacing = grid.spacing();
    const auto [g0, ge] = my_pair(p, grid);
    const SymTensorField d = ge.tensor() - g0.tensor();
    row.d_inf = norm(d, Region::whole(grid), kLinf);
    for (double q : cfg.p) row.d_p.push_back(norm(d, Region::whole(grid), q));
    const ScalarField s0 = scalar_curvature(g0), se = scalar_curvature(ge);
    const std::vector<double> origin(static_cast<std::size_t>(cfg.n), 0.0);
    const Region inner(grid, origin, 0.5 * row.r);
    row.s_min = std::numeric_limits<double>::infinity();
    for (std::size_t k : inner.nodes()) row.s_min = std::min(row.s_min, se[k] - s0[k]);
    std::array<std::size_t, kMaxDim> mid{};
    for (int a = 0; a < cfg.n; ++a) mid[a] = nodes / 2;
    row.s_origin = se[grid.index(mid)] - s0[grid.index(mid)];
    row.s_origin_leading = 4.0 * (cfg.n - 1) / (cfg.n - 2) * cfg.a * std::sqrt(eps);
    return row;
}

inline SharpnessResult sharpness_experiment(const SharpnessConfig& cfg) {
    SharpnessResult res;
    for (double e : cfg.eps) res.rows.push_back(sharpness_row(e, cfg));
    std::vector<double> eps, dinf, s;
    for (const auto& r : res.rows) {
        eps.push_back(r.eps);
        dinf.push_back(r.d_inf);
        s.push_back(r.s_min);
    }
    res.s_vs_eps = exponent_fit(eps, s);
    res.s_vs_dinf = exponent_fit(dinf, s);
    for (std::size_t j = 0; j < cfg.p.size(); ++j) {
        std::vector<double> dp;
        for (const auto& r : res.rows) dp.push_back(r.d_p[j]);
        res.dp_vs_eps.push_back(exponent_fit(eps, dp));
        res.s_vs_dp.push_back(exponent_fit(dp, s));
    }
    return res;
}

}  // namespace rdflab
