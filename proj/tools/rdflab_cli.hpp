#pragma once

// Subcommands of the rdflab front-end. Each one reads its keys from the
// config, writes its files into the output directory and returns the exit
// status (0 pass, 2 check failure). Errors are thrown.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "rdflab/analysis.hpp"
#include "rdflab/curvature.hpp"
#include "rdflab/flow.hpp"
#include "rdflab/metrics_zoo.hpp"
#include "rdflab/parallel.hpp"
#include "rdflab_io.hpp"

namespace rdflab::cli {

namespace fs = std::filesystem;
using io::Config;
using io::Json;

inline constexpr int kExitPass = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitCheck = 2;

struct Context {
    const Config& cfg;
    fs::path out;
    std::ostream& log;
};

namespace detail {

inline GridSpec grid_from(const Config& c, std::size_t default_nodes = 65) {
    const int dim = static_cast<int>(c.get_int("dim", 3));
    const auto nodes = c.get_int("nodes", static_cast<long long>(default_nodes));
    if (nodes < 8) throw InvalidArgument("nodes must be at least 8");
    return GridSpec(dim, static_cast<std::size_t>(nodes), c.get_double("half_width", 1.25));
}

inline std::vector<double> point(const Config& c, const std::string& key, int dim) {
    auto x = c.get_list(key, std::vector<double>(static_cast<std::size_t>(dim), 0.0));
    if (static_cast<int>(x.size()) != dim) throw InvalidArgument("config key '" + key + "' needs " + std::to_string(dim) + " coordinates");
    return x;
}

inline MYParams my_params(const Config& c, int dim) {
    MYParams p;
    p.eps = c.get_double("eps", 0.04);
    p.a = c.get_double("a", 0.01);
    p.n = dim;
    p.eps_max = c.get_double("eps_max", 0.2);
    return p;
}

/// Zoo metric named by `metric`; conformal ones also return their factor.
struct ZooMetric {
    std::string name;
    MetricField g;
    ScalarField phi;  // empty unless conformal
    double expected_scal = std::numeric_limits<double>::quiet_NaN();
};

inline ZooMetric zoo_metric(const Config& c, const GridSpec& grid, const std::string& fallback = "euclidean") {
    ZooMetric z;
    z.name = c.get_string("metric", fallback);
    const int n = grid.dim();
    if (z.name == "euclidean") {
        z.g = MetricField::euclidean(grid);
        z.expected_scal = 0.0;
    } else if (z.name == "sphere") {
        const double rho = c.get_double("rho", 1.0);
        z.phi = sphere_conformal_factor(rho, grid);
        z.g = sphere_patch(rho, grid);
        z.expected_scal = n * (n - 1) / (rho * rho);
    } else if (z.name == "my" || z.name == "my0") {
        auto [phi0, phie] = my_conformal_factors(my_params(c, n), grid);
        z.phi = z.name == "my" ? std::move(phie) : std::move(phi0);
        z.g = conformal_metric(z.phi, n);
    } else if (z.name == "bump") {
        z.g = random_bump(static_cast<std::uint64_t>(c.get_int("seed", 1)), c.get_double("amplitude", 0.02),
                          c.get_double("width", std::max(0.25, 4.0 * grid.spacing())), grid, c.get_double("eps0", 0.1));
    } else {
        throw InvalidArgument("unknown metric '" + z.name + "' (euclidean, sphere, my, my0, bump)");
    }
    return z;
}

inline FlowConfig flow_config(const Config& c) {
    FlowConfig f;
    f.end_time = c.get_double("end_time", f.end_time);
    f.cfl = c.get_double("cfl", f.cfl);
    const std::string integ = c.get_string("integrator", "rk2");
    if (integ == "rk2") f.integrator = Integrator::rk2;
    else if (integ == "rk4") f.integrator = Integrator::rk4;
    else throw InvalidArgument("integrator must be rk2 or rk4");
    const auto order = c.get_int("order", 2);
    if (order == 2) f.order = StencilOrder::second;
    else if (order == 4) f.order = StencilOrder::fourth;
    else throw InvalidArgument("order must be 2 or 4");
    f.boundary_ring = static_cast<std::size_t>(c.get_int("boundary_ring", 3));
    f.eps0 = c.get_double("eps0", f.eps0);
    f.snapshots_per_decade = static_cast<int>(c.get_int("snapshots_per_decade", f.snapshots_per_decade));
    f.cadence_floor = c.get_double("cadence_floor", f.cadence_floor);
    if (c.has("snapshot_times")) f.snapshot_times = c.get_list("snapshot_times", {});
    return f;
}

inline Json flow_json(const FlowConfig& f) {
    Json j;
    j["end_time"] = f.end_time;
    j["cfl"] = f.cfl;
    j["integrator"] = f.integrator == Integrator::rk2 ? "rk2" : "rk4";
    j["order"] = static_cast<int>(f.order);
    j["boundary_ring"] = f.boundary_ring;
    j["eps0"] = f.eps0;
    return j;
}

inline Json region_json(const Region& r) {
    Json j;
    if (r.is_whole()) {
        j["kind"] = "whole_grid";
    } else {
        j["kind"] = "euclidean_ball";
        j["center"] = std::vector<double>(r.center().begin(), r.center().end());
        j["radius"] = r.radius();
    }
    j["nodes"] = r.nodes().size();
    return j;
}

inline Json ball_json(std::span<const double> c, double radius, const std::string& role) {
    Json j;
    j["kind"] = "euclidean_ball";
    j["center"] = std::vector<double>(c.begin(), c.end());
    j["radius"] = radius;
    j["role"] = role;
    return j;
}

inline Json fit_json(const FitResult& f) {
    Json j;
    j["slope"] = f.slope;
    j["intercept"] = f.intercept;
    j["r2"] = f.r2;
    j["count"] = f.count;
    return j;
}

inline Json curvature_json(const CurvatureReport& r) {
    Json j;
    j["center"] = r.center;
    j["radius"] = r.radius;
    j["region_nodes"] = r.region_nodes;
    j["region_margin"] = r.region_margin;
    j["r_scale"] = r.r_scale;
    j["sup_rm"] = r.sup_rm;
    j["sup_grad_rm"] = r.sup_grad_rm;
    j["sup_hess_rm"] = r.sup_hess_rm;
    j["scal_min"] = r.scal_min;
    j["scal_max"] = r.scal_max;
    j["combined"] = r.combined;
    return j;
}

/// Common envelope: config text, grid, regions.
inline Json envelope(const Context& ctx, const std::string& command, const GridSpec& grid) {
    Json j;
    j["command"] = command;
    j["config"] = ctx.cfg.text();
    j["grid"] = io::grid_json(grid);
    j["regions"] = Json::array();
    return j;
}

inline void emit(const Context& ctx, const std::string& name, const std::string& content) {
    io::write_text(ctx.out / name, content);
    ctx.log << "wrote " << (ctx.out / name).string() << "\n";
}

inline double interior_sup_abs(const ScalarField& f, std::size_t margin, double shift = 0.0) {
    double m = 0.0;
    for (std::size_t k = 0; k < f.node_count(); ++k)
        if (f.grid().boundary_distance(k) >= margin) m = std::max(m, std::abs(f[k] - shift));
    return m;
}

/// exponent_fit after ordering the samples by x.
inline FitResult sorted_fit(std::vector<double> x, std::vector<double> y) {
    std::vector<std::size_t> idx(x.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> xs, ys;
    for (std::size_t i : idx) {
        xs.push_back(x[i]);
        ys.push_back(y[i]);
    }
    return exponent_fit(xs, ys);
}

inline bool within(double v, double target, double tol) { return std::abs(v - target) <= tol; }

}  // namespace detail

// ---------------------------------------------------------------------------

inline int cmd_curvature(const Context& ctx) {
    const Config& c = ctx.cfg;
    const GridSpec grid = detail::grid_from(c);
    const auto z = detail::zoo_metric(c, grid);
    const auto center = detail::point(c, "center", grid.dim());
    const double radius = c.get_double("radius", 0.5);
    const double r_scale = c.get_double("r_scale", 1.0);
    c.require_all_used();

    const Region region(grid, center, radius);
    CurvatureReport rep = covariant_curvature_norms(z.g, region, r_scale);
    const ScalarField scal = scalar_curvature(z.g);
    const SymTensorField ric = ricci(z.g);

    Json j = detail::envelope(ctx, "curvature", grid);
    j["regions"].push_back(detail::region_json(region));
    j["metric"] = z.name;
    j["covariant"] = detail::curvature_json(rep);
    // sups over nodes at least one away from the faces
    j["sup_abs_scal"] = detail::interior_sup_abs(scal, 1);
    double ric_sup = 0.0;
    for (std::size_t k = 0; k < grid.node_count(); ++k)
        if (grid.boundary_distance(k) >= 1)
            for (int i = 0; i < ric.components(); ++i) ric_sup = std::max(ric_sup, std::abs(ric.at(i, k)));
    j["sup_abs_ricci_component"] = ric_sup;
    if (!std::isnan(z.expected_scal)) {
        j["expected_scal"] = z.expected_scal;
        double e = 0.0;
        for (std::size_t k : region.nodes()) e = std::max(e, std::abs(scal[k] - z.expected_scal));
        j["scal_error_region"] = e;
    }
    if (z.phi.node_count() > 0) {
        const ScalarField conf = conformal_scalar(z.phi, grid.dim());
        double e = 0.0;
        for (std::size_t k : region.nodes()) e = std::max(e, std::abs(scal[k] - conf[k]));
        j["conformal_difference_region"] = e;
    }
    detail::emit(ctx, "curvature.json", io::dump_json(j));
    return kExitPass;
}

inline int cmd_flow(const Context& ctx) {
    const Config& c = ctx.cfg;
    const GridSpec grid = detail::grid_from(c);
    const auto z = detail::zoo_metric(c, grid);
    const FlowConfig fc = detail::flow_config(c);
    const auto x0 = detail::point(c, "x0", grid.dim());
    const bool extend = c.get_bool("extend", z.name != "euclidean" && z.name != "bump");
    const double ext_inner = c.get_double("ext_inner", 0.65);
    const double ext_outer = c.get_double("ext_outer", 0.95);
    const bool track = c.get_bool("track", true);
    const int substeps = static_cast<int>(c.get_int("track_substeps", 8));
    const bool snapshots = c.get_bool("write_snapshots", true);
    c.require_all_used();

    Json j = detail::envelope(ctx, "flow", grid);
    j["metric"] = z.name;
    j["flow"] = detail::flow_json(fc);
    MetricField g0 = z.g;
    if (extend) {
        const std::vector<double> origin(static_cast<std::size_t>(grid.dim()), 0.0);
        g0 = cutoff_extend(z.g, origin, ext_inner, ext_outer);
        j["regions"].push_back(detail::ball_json(origin, ext_inner, "extension_inner"));
        j["regions"].push_back(detail::ball_json(origin, ext_outer, "extension_outer"));
        const double window = flow_window(grid, ext_outer);
        j["flow_window"] = window;
        j["beyond_window"] = fc.end_time > window;
    }
    Trajectory traj = evolve(g0, fc);
    if (track) {
        psi_track(traj, x0, substeps);
        j["regions"].push_back(detail::ball_json(x0, 0.0, "tracked_point"));
    }

    std::vector<std::string> cols{"t", "deviation", "scal_min", "scal_max"};
    if (track) {
        cols.push_back("scal_at_x");
        for (int a = 0; a < grid.dim(); ++a) cols.push_back("x" + std::to_string(a));
    }
    io::Csv csv(cols);
    if (snapshots) fs::create_directories(ctx.out / "snapshots");
    Json files = Json::array();
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const auto& s = traj.states[i];
        const MetricField m = s.metric();
        const ScalarField scal = scalar_curvature(m);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t k = 0; k < grid.node_count(); ++k)
            if (grid.boundary_distance(k) >= 1) {
                lo = std::min(lo, scal[k]);
                hi = std::max(hi, scal[k]);
            }
        std::vector<double> row{s.t, m.euclidean_deviation(), lo, hi};
        if (track) {
            row.push_back(scalar_curvature_at(m, traj.path[i]));
            for (double v : traj.path[i]) row.push_back(v);
        }
        csv.row(row);
        if (snapshots) {
            char name[32];
            std::snprintf(name, sizeof name, "snap_%04zu.bin", i);
            io::write_snapshot(ctx.out / "snapshots" / name, s.g, s.t);
            files.push_back(std::string("snapshots/") + name);
        }
    }
    j["dt"] = traj.dt;
    j["steps"] = traj.steps;
    j["snapshot_times"] = traj.times();
    j["snapshot_files"] = files;
    detail::emit(ctx, "flow.csv", csv.str());
    detail::emit(ctx, "flow.json", io::dump_json(j));
    return kExitPass;
}

inline int cmd_stability(const Context& ctx) {
    const Config& c = ctx.cfg;
    const GridSpec grid = detail::grid_from(c);
    const auto z = detail::zoo_metric(c, grid);
    FlowConfig fc = detail::flow_config(c);
    if (!c.has("end_time")) fc.end_time = 0.02;
    const auto center = detail::point(c, "pert_center", grid.dim());
    const double pert_radius = c.get_double("pert_radius", 0.6);
    const double pert_amp = c.get_double("pert_amplitude", 5e-3);
    const auto pert_seed = static_cast<std::uint64_t>(c.get_int("pert_seed", 1));
    const double ext_inner = c.get_double("ext_inner", 0.65);
    const double ext_outer = c.get_double("ext_outer", 0.95);
    const auto ps = c.get_list("p", {1.0, 2.0});
    const double t_min = c.get_double("t_min", resolved_time(grid));
    const double t_max = c.get_double("t_max", fc.end_time);
    c.require_all_used();

    const std::vector<double> origin(static_cast<std::size_t>(grid.dim()), 0.0);
    const MetricField base = z.name == "euclidean" || z.name == "bump" ? z.g : cutoff_extend(z.g, origin, ext_inner, ext_outer);
    const MetricField pert = ball_perturbation(base, center, pert_radius, pert_amp, random_direction(pert_seed, grid.dim()));
    const auto [a, b] = pair_evolve(base, pert, fc);
    const StabilityReport st = stability_check(a, b, t_min, t_max);

    Json j = detail::envelope(ctx, "stability", grid);
    j["metric"] = z.name;
    j["flow"] = detail::flow_json(fc);
    j["regions"].push_back(detail::ball_json(center, pert_radius, "perturbation_support"));
    j["regions"].push_back(detail::region_json(Region::whole(grid)));
    j["window"] = {t_min, t_max};
    j["initial_difference"] = st.initial_difference;
    j["sup_ratio"] = st.sup_ratio;
    j["c0"] = st.c0;
    j["trend"] = Json::array();
    for (const auto& f : st.trend) j["trend"].push_back(detail::fit_json(f));
    j["trend_tolerance"] = kTrendTolerance;
    j["bounded"] = st.bounded;

    io::Csv rows({"t", "k", "ratio"});
    for (const auto& r : st.rows) rows.row({r.t, static_cast<double>(r.k), r.ratio});
    io::Csv decay({"p", "t", "ratio"});
    Json dj = Json::array();
    for (double p : ps) {
        const DecayReport d = lp_decay_check(a, b, p, t_min, t_max);
        for (std::size_t i = 0; i < d.t.size(); ++i) decay.row({p, d.t[i], d.ratio[i]});
        Json e;
        e["p"] = p;
        e["expected_slope"] = d.expected_slope;
        e["initial_lp"] = d.initial_lp;
        e["fit"] = detail::fit_json(d.fit);
        dj.push_back(e);
    }
    j["decay"] = dj;
    detail::emit(ctx, "stability.csv", rows.str());
    detail::emit(ctx, "decay.csv", decay.str());
    detail::emit(ctx, "stability.json", io::dump_json(j));
    return st.bounded ? kExitPass : kExitCheck;
}

inline Json bound_json(const BoundReport& r) {
    Json j;
    j["mode"] = r.mode == BoundMode::linf ? "linf" : "lp";
    j["p"] = r.p;
    j["sigma"] = r.sigma;
    j["exponent"] = r.exponent;
    j["t_star"] = r.t_star;
    j["clamped"] = r.clamped;
    j["kappa"] = r.kappa;
    j["scal0"] = r.scal0;
    j["gap"] = r.gap;
    j["x0"] = r.x0;
    j["x_t"] = r.x_t;
    j["omega_radius"] = r.omega_radius;
    j["omega_nodes"] = r.omega_nodes;
    j["hypothesis"] = detail::curvature_json(r.hypothesis);
    j["hypothesis_ratio"] = r.hypothesis_ratio;
    j["hypothesis_ok"] = r.hypothesis_ok;
    j["stage_persist"] = r.stage_persist;
    j["stage_compare"] = r.stage_compare;
    j["stage_final"] = r.stage_final;
    j["c_persist"] = r.c_persist;
    j["lambda1"] = r.lambda1;
    j["lambda2"] = r.lambda2;
    j["lambda6"] = r.lambda6;
    j["term_t"] = r.term_t;
    j["term_sigma"] = r.term_sigma;
    j["balance"] = r.balance;
    j["rhs"] = r.rhs;
    j["persist_ok"] = r.persist_ok;
    j["verdict"] = r.holds;
    j["flow_grid_nodes"] = r.grid_nodes;
    j["spacing"] = r.spacing;
    j["pad"] = r.pad;
    j["end_time"] = r.end_time;
    j["steps"] = r.steps;
    return j;
}

/// Odd node count with h <= r / 8 on [-L, L].
inline std::size_t my_nodes(double eps, double half_width, double per_radius = 8.0) {
    std::size_t n = static_cast<std::size_t>(std::ceil(2.0 * half_width * per_radius / std::pow(eps, 0.25))) + 1;
    return n % 2 ? n : n + 1;
}

inline int cmd_quantbound(const Context& ctx) {
    const Config& c = ctx.cfg;
    const std::string pair = c.get_string("pair", "my");
    const int dim = static_cast<int>(c.get_int("dim", 3));
    const double eps_for_grid = c.get_double("eps", 0.04);
    const GridSpec grid = detail::grid_from(c, pair == "my" ? my_nodes(eps_for_grid, c.get_double("half_width", 1.25)) : 65);
    if (grid.dim() != dim) throw InvalidArgument("dimension mismatch");

    BoundConfig bc;
    const std::string mode = c.get_string("mode", "linf");
    if (mode == "linf") bc.mode = BoundMode::linf;
    else if (mode == "lp") bc.mode = BoundMode::lp;
    else throw InvalidArgument("mode must be linf or lp");
    bc.p = c.get_double("p", 1.0);
    bc.eps_n = c.get_double("eps_n", bc.eps_n);
    bc.x0 = detail::point(c, "x0", dim);
    bc.omega_radius = c.get_double("omega_radius", bc.omega_radius);
    bc.r_scale = c.get_double("r_scale", bc.r_scale);
    bc.hypothesis_slack = c.get_double("hypothesis_slack", bc.hypothesis_slack);
    bc.ext_inner = c.get_double("ext_inner", bc.ext_inner);
    bc.ext_outer = c.get_double("ext_outer", bc.ext_outer);
    bc.pad = c.get_bool("pad", bc.pad);
    bc.t_cap = c.get_double("t_cap", bc.t_cap);
    bc.c_persist = c.get_double("c_persist", bc.c_persist);
    bc.snapshots = static_cast<int>(c.get_int("snapshots", bc.snapshots));
    bc.track_substeps = static_cast<int>(c.get_int("track_substeps", bc.track_substeps));
    bc.flow = detail::flow_config(c);

    MetricField g0, g0_hat;
    std::string label;
    if (pair == "my") {
        auto [a, b] = my_pair(detail::my_params(c, dim), grid);
        g0 = std::move(a);
        g0_hat = std::move(b);
    } else if (pair == "identical") {
        auto z = detail::zoo_metric(c, grid);
        g0 = z.g;
        g0_hat = z.g;
        label = z.name;
    } else {
        throw InvalidArgument("pair must be my or identical");
    }
    c.require_all_used();

    const BoundReport r = quantitative_bound(g0, g0_hat, bc);
    Json j = detail::envelope(ctx, "quantbound", grid);
    j["pair"] = pair;
    if (!label.empty()) j["metric"] = label;
    j["flow"] = detail::flow_json(bc.flow);
    j["regions"].push_back(detail::ball_json(r.x0, bc.omega_radius, "omega"));
    j["regions"].push_back(detail::ball_json(r.x0, bc.ext_inner, "extension_inner"));
    j["regions"].push_back(detail::ball_json(r.x0, bc.ext_outer, "extension_outer"));
    j["report"] = bound_json(r);
    detail::emit(ctx, "quantbound.json", io::dump_json(j));
    return r.holds ? kExitPass : kExitCheck;
}

inline int cmd_sharpness(const Context& ctx) {
    const Config& c = ctx.cfg;
    SharpnessConfig sc;
    sc.eps = c.get_list("eps", sc.eps);
    sc.a = c.get_double("a", sc.a);
    sc.n = static_cast<int>(c.get_int("dim", sc.n));
    sc.p = c.get_list("p", sc.p);
    sc.half_width = c.get_double("half_width", sc.half_width);
    sc.points_per_radius = c.get_double("points_per_radius", sc.points_per_radius);
    sc.eps_max = c.get_double("eps_max", sc.eps_max);
    const bool check = c.get_bool("check", true);
    c.require_all_used();
    if (sc.n != 3) throw InvalidArgument("sharpness tolerances are pinned for dim = 3");
    if (!std::is_sorted(sc.eps.begin(), sc.eps.end())) throw InvalidArgument("eps list must be increasing");

    // rows are independent; each task writes only its own slot
    SharpnessResult res;
    res.rows.resize(sc.eps.size());
    parallel_for(sc.eps.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) res.rows[i] = sharpness_row(sc.eps[i], sc);
    });
    std::vector<double> eps, dinf, s;
    for (const auto& r : res.rows) {
        eps.push_back(r.eps);
        dinf.push_back(r.d_inf);
        s.push_back(r.s_min);
    }
    res.s_vs_eps = exponent_fit(eps, s);
    res.s_vs_dinf = exponent_fit(dinf, s);
    for (std::size_t k = 0; k < sc.p.size(); ++k) {
        std::vector<double> dp;
        for (const auto& r : res.rows) dp.push_back(r.d_p[k]);
        res.dp_vs_eps.push_back(exponent_fit(eps, dp));
        res.s_vs_dp.push_back(exponent_fit(dp, s));
    }

    std::vector<std::string> cols{"eps", "r", "nodes", "spacing", "d_inf"};
    for (double p : sc.p) cols.push_back("d_p" + io::format_double(p));
    for (const char* k : {"s_min", "s_origin", "s_origin_leading"}) cols.push_back(k);
    io::Csv csv(cols);
    for (const auto& r : res.rows) {
        std::vector<double> row{r.eps, r.r, static_cast<double>(r.nodes), r.spacing, r.d_inf};
        row.insert(row.end(), r.d_p.begin(), r.d_p.end());
        row.push_back(r.s_min);
        row.push_back(r.s_origin);
        row.push_back(r.s_origin_leading);
        csv.row(row);
    }

    const int n = sc.n;
    bool ok = detail::within(res.s_vs_eps.slope, 0.5, 0.1) && detail::within(res.s_vs_dinf.slope, 0.5, 0.1);
    Json j;
    j["command"] = "sharpness";
    j["config"] = c.text();
    Json grids = Json::array(), regions = Json::array();
    for (const auto& r : res.rows) {
        Json g = io::grid_json(GridSpec(n, r.nodes, sc.half_width));
        g["eps"] = r.eps;
        grids.push_back(g);
        Json reg = detail::ball_json(std::vector<double>(static_cast<std::size_t>(n), 0.0), 0.5 * r.r, "s_min_ball");
        reg["eps"] = r.eps;
        regions.push_back(reg);
    }
    j["grids"] = grids;
    j["regions"] = regions;
    j["slope_S_vs_eps"] = res.s_vs_eps.slope;
    j["slope_S_vs_Dinf"] = res.s_vs_dinf.slope;
    j["fit_S_vs_eps"] = detail::fit_json(res.s_vs_eps);
    j["fit_S_vs_Dinf"] = detail::fit_json(res.s_vs_dinf);
    for (std::size_t k = 0; k < sc.p.size(); ++k) {
        const double p = sc.p[k];
        const std::string tag = "p" + io::format_double(p);
        j["slope_Dp_vs_eps_" + tag] = res.dp_vs_eps[k].slope;
        j["slope_S_vs_Dp_" + tag] = res.s_vs_dp[k].slope;
        j["fit_Dp_vs_eps_" + tag] = detail::fit_json(res.dp_vs_eps[k]);
        j["fit_S_vs_Dp_" + tag] = detail::fit_json(res.s_vs_dp[k]);
        j["expected_Dp_vs_eps_" + tag] = 1.0 + n / (4.0 * p);
        j["expected_S_vs_Dp_" + tag] = 1.0 / (2.0 + n / (2.0 * p));
        ok = ok && detail::within(res.dp_vs_eps[k].slope, 1.0 + n / (4.0 * p), 0.1) &&
             detail::within(res.s_vs_dp[k].slope, 1.0 / (2.0 + n / (2.0 * p)), 0.08);
    }
    j["expected_S_vs_eps"] = 0.5;
    j["checks_pass"] = ok;
    detail::emit(ctx, "sharpness.csv", csv.str());
    detail::emit(ctx, "fits.json", io::dump_json(j));
    return !check || ok ? kExitPass : kExitCheck;
}

inline int cmd_convergence(const Context& ctx) {
    const Config& c = ctx.cfg;
    const std::string suite = c.get_string("suite", "sphere");
    const int dim = static_cast<int>(c.get_int("dim", 3));
    const double half = c.get_double("half_width", 1.25);
    const double radius = c.get_double("radius", 0.5);
    double expected = 2.0;
    io::Csv csv({"param", "h_or_dt", "error"});
    std::vector<double> xs, errs;
    Json j;
    j["command"] = "convergence";
    j["config"] = c.text();
    j["suite"] = suite;
    Json grids = Json::array();
    const std::vector<double> origin(static_cast<std::size_t>(dim), 0.0);

    if (suite == "sphere" || suite == "conformal") {
        const auto nodes = c.get_list("nodes", {33, 49, 65, 97, 129});
        const double rho = c.get_double("rho", 1.0);
        const MYParams mp = detail::my_params(c, dim);
        expected = c.get_double("expected_slope", 2.0);
        const double tol = c.get_double("slope_tolerance", suite == "sphere" ? 0.3 : 0.4);
        c.require_all_used();
        for (double nd : nodes) {
            const GridSpec grid(dim, static_cast<std::size_t>(nd), half);
            grids.push_back(io::grid_json(grid));
            const Region region(grid, origin, radius);
            double e = 0.0;
            if (suite == "sphere") {
                const ScalarField s = scalar_curvature(sphere_patch(rho, grid));
                for (std::size_t k : region.nodes()) e = std::max(e, std::abs(s[k] - dim * (dim - 1) / (rho * rho)));
            } else {
                const auto [phi0, phie] = my_conformal_factors(mp, grid);
                const ScalarField s = scalar_curvature(conformal_metric(phie, dim));
                const ScalarField o = conformal_scalar(phie, dim);
                for (std::size_t k : region.nodes()) e = std::max(e, std::abs(s[k] - o[k]));
            }
            csv.row({nd, grid.spacing(), e});
            xs.push_back(grid.spacing());
            errs.push_back(e);
        }
        j["regions"] = Json::array({detail::ball_json(origin, radius, "error_region")});
        j["slope_tolerance"] = tol;
        const FitResult f = detail::sorted_fit(xs, errs);
        j["fit"] = detail::fit_json(f);
        j["expected_slope"] = expected;
        j["grids"] = grids;
        const bool ok = detail::within(f.slope, expected, tol);
        j["checks_pass"] = ok;
        detail::emit(ctx, "convergence.csv", csv.str());
        detail::emit(ctx, "convergence.json", io::dump_json(j));
        return ok ? kExitPass : kExitCheck;
    }
    if (suite == "time") {
        const GridSpec grid = detail::grid_from(c, 25);
        const auto z = detail::zoo_metric(c, grid, "bump");
        FlowConfig fc = detail::flow_config(c);
        if (!c.has("end_time")) fc.end_time = 0.003;
        fc.snapshot_times.clear();
        fc.snapshots_per_decade = 1;
        fc.cadence_floor = 1.0;
        const auto cfls = c.get_list("cfl_list", {0.1, 0.05, 0.025, 0.0125, 0.00625});
        expected = c.get_double("expected_slope", fc.integrator == Integrator::rk2 ? 2.0 : 4.0);
        const double tol = c.get_double("slope_tolerance", 0.3);
        c.require_all_used();
        if (cfls.size() < kMinFitSamples + 1) throw InvalidArgument("cfl_list needs at least 5 entries");
        grids.push_back(io::grid_json(grid));
        // successive differences between consecutive dt
        SymTensorField prev;
        double prev_dt = 0.0;
        for (std::size_t i = 0; i < cfls.size(); ++i) {
            fc.cfl = cfls[i];
            const Trajectory tr = evolve(z.g, fc);
            if (i > 0) {
                const double d = norm(tr.states.back().g - prev, Region::whole(grid), kLinf);
                csv.row({cfls[i - 1], prev_dt, d});
                xs.push_back(prev_dt);
                errs.push_back(d);
            }
            prev = tr.states.back().g;
            prev_dt = tr.dt;
        }
        const FitResult f = detail::sorted_fit(xs, errs);
        j["regions"] = Json::array({detail::region_json(Region::whole(grid))});
        j["flow"] = detail::flow_json(fc);
        j["fit"] = detail::fit_json(f);
        j["expected_slope"] = expected;
        j["slope_tolerance"] = tol;
        j["grids"] = grids;
        const bool ok = detail::within(f.slope, expected, tol);
        j["checks_pass"] = ok;
        detail::emit(ctx, "convergence.csv", csv.str());
        detail::emit(ctx, "convergence.json", io::dump_json(j));
        return ok ? kExitPass : kExitCheck;
    }
    throw InvalidArgument("suite must be sphere, conformal or time");
}

inline const std::map<std::string, std::function<int(const Context&)>>& commands() {
    static const std::map<std::string, std::function<int(const Context&)>> table{
        {"curvature", cmd_curvature},   {"flow", cmd_flow},           {"stability", cmd_stability},
        {"quantbound", cmd_quantbound}, {"sharpness", cmd_sharpness}, {"convergence", cmd_convergence},
    };
    return table;
}

/// Runs one subcommand; errors propagate as exceptions.
inline int run(const std::string& command, const Config& cfg, const fs::path& out, std::ostream& log = std::cerr) {
    const auto& table = commands();
    auto it = table.find(command);
    if (it == table.end()) throw InvalidArgument("unknown subcommand '" + command + "'");
    fs::create_directories(out);
    return it->second(Context{cfg, out, log});
}

}  // namespace rdflab::cli
