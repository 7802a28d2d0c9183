// Acceptance suite: one PASS/FAIL line per criterion.
// usage: acceptance [criterion ...]   (no arguments runs all nine)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "rdflab/analysis.hpp"
#include "rdflab/curvature.hpp"
#include "rdflab/flow.hpp"
#include "rdflab/metrics_zoo.hpp"
#include "rdflab_cli.hpp"
#include "rdflab_io.hpp"
#include "test_support.hpp"

using namespace rdflab;
namespace fs = std::filesystem;

namespace {

// tolerances, pinned
constexpr double kEuclidScalTol = 1e-12;
constexpr double kSphereRelTol = 0.02;
constexpr double kRefineSlope = 2.0;
constexpr double kCurvSlopeTol = 0.3;
constexpr double kConformalSlopeTol = 0.4;
constexpr double kFixedPointDriftTol = 1e-12;
constexpr double kLinearisationSlope = 2.0;
constexpr double kLinearisationTol = 0.3;
constexpr double kStabilityTrendTol = 0.15;
constexpr double kStabilityAmpLo = 1e-3;
constexpr double kStabilityAmpHi = 1e-2;
constexpr double kDecaySlopeTol = 0.25;
constexpr double kPersistFloor = -10.0;
constexpr double kDriftSlopeMin = 0.45;
constexpr double kSharpSlopeTol = 0.1;
constexpr double kSharpDpTol = 0.08;
constexpr double kBalanceFactor = 4.0;

constexpr double kHalf = 1.25;
const std::vector<double> kOrigin{0.0, 0.0, 0.0};

struct Outcome {
    bool pass = false;
    std::string summary;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

void note(const std::string& s) { std::printf("    %s\n", s.c_str()); }

bool near(double v, double target, double tol) { return std::abs(v - target) <= tol; }

double sup_abs_diff(const SymTensorField& a, const SymTensorField& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

/// geometric times in [lo, hi) for explicit snapshots; end_time is appended by the flow
std::vector<double> geometric_times(double lo, double hi, int count) {
    std::vector<double> t;
    for (int i = 0; i < count - 1; ++i) t.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
    return t;
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
    // Euclidean scalar curvature on the 128-cell grid
    const GridSpec fine(3, 129, kHalf);
    const ScalarField se = scalar_curvature(MetricField::euclidean(fine));
    double euc = 0.0;
    for (std::size_t k = 0; k < fine.node_count(); ++k) euc = std::max(euc, std::abs(se[k]));
    note(fmt("sup |scal(g_euc)| = %.3e", euc));

    // unit sphere patch: constant scal n(n-1) = 6, interior nodes
    std::vector<double> hs, errs;
    double rel_fine = 0.0;
    for (std::size_t nodes : {33, 65, 129}) {
        const GridSpec g(3, nodes, kHalf);
        const ScalarField s = scalar_curvature(sphere_patch(1.0, g));
        double e = 0.0;
        for (std::size_t k = 0; k < g.node_count(); ++k)
            if (g.boundary_distance(k) >= 1) e = std::max(e, std::abs(s[k] - 6.0));
        hs.push_back(g.spacing());
        errs.push_back(e);
        note(fmt("sphere %zu^3 (h = %.4f): sup |scal - 6| = %.4e", nodes - 1, g.spacing(), e));
        rel_fine = e / 6.0;
    }
    const double slope = loglog_slope(hs, errs);
    note(fmt("relative error at 128^3 = %.4f, refinement slope = %.3f", rel_fine, slope));
    const bool ok = euc <= kEuclidScalTol && rel_fine <= kSphereRelTol && near(slope, kRefineSlope, kCurvSlopeTol);
    return {ok, fmt("euclid %.1e, sphere rel err %.2e, slope %.3f", euc, rel_fine, slope)};
}

Outcome criterion2() {
    const MYParams p{0.04, 0.01, 3};
    std::vector<double> hs, errs;
    for (std::size_t nodes : {65, 97, 129}) {
        const GridSpec g(3, nodes, kHalf);
        const auto [phi0, phie] = my_conformal_factors(p, g);
        const ScalarField tensor = scalar_curvature(conformal_metric(phie, 3));
        const ScalarField oracle = conformal_scalar(phie, 3);
        double e = 0.0;
        for (std::size_t k = 0; k < g.node_count(); ++k)
            if (g.boundary_distance(k) >= 1) e = std::max(e, std::abs(tensor[k] - oracle[k]));
        hs.push_back(g.spacing());
        errs.push_back(e);
        note(fmt("%zu^3: sup |tensor - conformal| = %.4e", nodes - 1, e));
    }
    const double slope = loglog_slope(hs, errs);
    return {near(slope, kRefineSlope, kConformalSlopeTol), fmt("refinement slope %.3f", slope)};
}

Outcome criterion3() {
    const GridSpec g(3, 65, kHalf);
    const MetricField euc = MetricField::euclidean(g);

    // fixed point: the rhs vanishes and explicit stepping keeps delta
    double rhs_sup = 0.0;
    for (auto order : {StencilOrder::second, StencilOrder::fourth}) {
        rhs_sup = std::max(rhs_sup, sup_abs_diff(rdf_rhs(euc, order), SymTensorField(g)));
        rhs_sup = std::max(rhs_sup, sup_abs_diff(rdf_rhs_expanded(euc, order), SymTensorField(g)));
    }
    const double dt = 0.1 * g.spacing() * g.spacing();
    SymTensorField cur = euc.tensor();
    double drift = 0.0;
    const int steps = 10;
    for (int s = 0; s < steps; ++s) {
        const SymTensorField k1 = rdf_rhs_expanded(MetricField(cur), StencilOrder::second, 3);
        const SymTensorField mid = cur + (0.5 * dt) * k1;
        const SymTensorField k2 = rdf_rhs_expanded(MetricField(mid), StencilOrder::second, 3);
        cur += dt * k2;
        drift = std::max(drift, sup_abs_diff(cur, euc.tensor()) / (s + 1));
    }
    FlowConfig flat;
    flat.end_time = 20 * dt;
    const Trajectory tr = evolve(euc, flat);
    for (const auto& st : tr.states) drift = std::max(drift, sup_abs_diff(st.g, euc.tensor()));
    note(fmt("rhs(g_euc) sup = %.3e, per-step drift = %.3e", rhs_sup, drift));

    // linearisation: g_euc + s h against the heat flow of s h
    FlowConfig fc;
    fc.end_time = 0.008;
    fc.integrator = Integrator::rk4;
    fc.order = StencilOrder::fourth;
    fc.cfl = 0.15;
    fc.snapshot_times = {};
    fc.snapshots_per_decade = 1;
    fc.cadence_floor = 1.0;
    std::vector<double> ss, res;
    for (double s : {0.02, 0.04, 0.08}) {
        const MetricField g0 = random_bump(7, s, 0.2, g);
        const SymTensorField pert = g0.tensor() - euc.tensor();
        const Trajectory t = evolve(g0, fc);
        const SymTensorField heat = heat_convolve(pert, fc.end_time);
        const SymTensorField flowed = t.states.back().g - euc.tensor();
        const double r = sup_abs_diff(flowed, heat);
        ss.push_back(s);
        res.push_back(r);
        note(fmt("s = %.2f: sup |g(T) - g_euc - heat_T(s h)| = %.4e (steps %zu)", s, r, t.steps));
    }
    const double slope = loglog_slope(ss, res);
    const bool ok = rhs_sup == 0.0 && drift <= kFixedPointDriftTol && near(slope, kLinearisationSlope, kLinearisationTol);
    return {ok, fmt("drift %.1e/step, residual slope %.3f", drift, slope)};
}

Outcome criterion4() {
    const GridSpec g(3, 65, kHalf);
    const double t_min = resolved_time(g), t_max = 0.02;
    FlowConfig fc;
    fc.end_time = t_max;
    fc.snapshot_times = geometric_times(t_min, t_max, 10);
    bool ok = true;
    double c0 = 0.0;
    for (int seed = 1; seed <= 5; ++seed) {
        const double amp = kStabilityAmpLo * std::pow(kStabilityAmpHi / kStabilityAmpLo, (seed - 1) / 4.0);
        const MetricField base = random_bump(static_cast<std::uint64_t>(100 + seed), 0.02, 0.25, g);
        const MetricField pert = ball_perturbation(base, kOrigin, 0.6, amp, random_direction(static_cast<std::uint64_t>(seed), 3));
        const auto [a, b] = pair_evolve(base, pert, fc);
        const StabilityReport r = stability_check(a, b, t_min, t_max);
        bool flat = std::isfinite(r.c0);
        for (const auto& f : r.trend) flat = flat && std::abs(f.slope) <= kStabilityTrendTol;
        ok = ok && flat && r.initial_difference >= kStabilityAmpLo * (1 - 1e-12) &&
             r.initial_difference <= kStabilityAmpHi * (1 + 1e-12);
        c0 = std::max(c0, r.c0);
        note(fmt("seed %d: |g0 - h0| = %.3e, sup ratios (%.3f, %.3f, %.3f), trends (%+.3f, %+.3f, %+.3f)", seed,
                 r.initial_difference, r.sup_ratio[0], r.sup_ratio[1], r.sup_ratio[2], r.trend[0].slope,
                 r.trend[1].slope, r.trend[2].slope));
    }
    return {ok, fmt("measured C0 = %.3f", c0)};
}

Outcome criterion5() {
    const GridSpec g(3, 65, kHalf);
    const double t_min = resolved_time(g), t_max = 0.02;
    FlowConfig fc;
    fc.end_time = t_max;
    fc.snapshot_times = geometric_times(t_min, t_max, 10);
    const auto dir = random_direction(5, 3);
    const MetricField flat = MetricField::euclidean(g);
    std::vector<DecayReport> p1, p2;
    for (double w : {0.04, 0.06, 0.08, 0.11, 0.15, 0.2, 0.28}) {
        const MetricField bump = gaussian_bump(g, kOrigin, w, 0.01, dir, 0.6);
        const auto [a, b] = pair_evolve(bump, flat, fc);
        p1.push_back(lp_decay_check(a, b, 1.0, t_min, t_max));
        p2.push_back(lp_decay_check(a, b, 2.0, t_min, t_max));
        note(fmt("width %.2f: single-bump slopes p=1 %.3f, p=2 %.3f", w, p1.back().fit.slope, p2.back().fit.slope));
    }
    const DecayReport e1 = decay_envelope(p1), e2 = decay_envelope(p2);
    note(fmt("envelope p=1: slope %.3f (expected %.3f)", e1.fit.slope, e1.expected_slope));
    note(fmt("envelope p=2: slope %.3f (expected %.3f)", e2.fit.slope, e2.expected_slope));
    const bool ok = near(e1.fit.slope, -1.5, kDecaySlopeTol) && near(e2.fit.slope, -0.75, kDecaySlopeTol);
    return {ok, fmt("p=1 slope %.3f, p=2 slope %.3f", e1.fit.slope, e2.fit.slope)};
}

Outcome criterion6() {
    const GridSpec g(3, 65, kHalf);
    FlowConfig fc;
    fc.end_time = 0.01;
    bool ok = true;
    std::string summary;

    auto run = [&](const char* name, const MetricField& g0, const std::vector<double>& x0, const Region& omega, double kappa) {
        Trajectory tr = evolve(g0, fc);
        psi_track(tr, x0);
        const PersistenceReport r = persistence_check(tr, omega, kappa);
        const auto [t, d] = tracked_drift(tr);
        const double drift_slope = loglog_slope(t, d);
        const bool pass = r.min_ratio >= kPersistFloor && drift_slope >= kDriftSlopeMin;
        ok = ok && pass;
        note(fmt("%s: kappa %.4f, min deficit ratio %.4f, drift slope %.3f, final drift %.3e", name, kappa, r.min_ratio,
                 drift_slope, d.back()));
        summary += fmt("%s ratio %.3f drift %.3f; ", name, r.min_ratio, drift_slope);
    };

    const double rho = 3.0;
    const MetricField sphere = cutoff_extend(sphere_patch(rho, g), kOrigin, 0.6, 0.9);
    const std::vector<double> xs{0.2, 0.0, 0.0};
    run("sphere", sphere, xs, Region(g, xs, 0.1), 0.5 * 6.0 / (rho * rho));

    const auto [g0, ge] = my_pair(MYParams{0.04, 0.01, 3}, g);
    const MetricField my = cutoff_extend(ge, kOrigin, 0.65, 0.95);
    // inside the bump, half a unit from the extension annulus
    const std::vector<double> xm{0.15, 0.0, 0.0};
    const Region omega(g, xm, 0.1);
    const ScalarField s = scalar_curvature(my);
    double kappa = std::numeric_limits<double>::infinity();
    for (std::size_t k : omega.nodes()) kappa = std::min(kappa, s[k]);
    run("MY eps=0.04", my, xm, omega, kappa);
    summary.resize(summary.size() - 2);
    return {ok, summary};
}

Outcome criterion7() {
    SharpnessConfig cfg;
    const SharpnessResult r = sharpness_experiment(cfg);
    for (const auto& row : r.rows)
        note(fmt("eps %.2f: %zu nodes per axis, D_inf %.4e, D_1 %.4e, D_2 %.4e, S %.5f (origin %.5f, leading %.5f)", row.eps,
                 row.nodes, row.d_inf, row.d_p[0], row.d_p[1], row.s_min, row.s_origin, row.s_origin_leading));
    bool ok = near(r.s_vs_eps.slope, 0.5, kSharpSlopeTol) && near(r.s_vs_dinf.slope, 0.5, kSharpSlopeTol);
    note(fmt("S vs eps %.4f, S vs D_inf %.4f", r.s_vs_eps.slope, r.s_vs_dinf.slope));
    for (std::size_t k = 0; k < cfg.p.size(); ++k) {
        const double p = cfg.p[k];
        const double dp_exp = 1.0 + 3.0 / (4.0 * p), s_exp = 1.0 / (2.0 + 3.0 / (2.0 * p));
        note(fmt("p = %g: D_p vs eps %.4f (expected %.4f), S vs D_p %.4f (expected %.4f)", p, r.dp_vs_eps[k].slope, dp_exp,
                 r.s_vs_dp[k].slope, s_exp));
        ok = ok && near(r.dp_vs_eps[k].slope, dp_exp, kSharpSlopeTol) && near(r.s_vs_dp[k].slope, s_exp, kSharpDpTol);
    }
    return {ok, fmt("S vs eps %.3f, S vs D_inf %.3f, D_1 %.3f, D_2 %.3f, S vs D_1 %.3f, S vs D_2 %.3f", r.s_vs_eps.slope,
                    r.s_vs_dinf.slope, r.dp_vs_eps[0].slope, r.dp_vs_eps[1].slope, r.s_vs_dp[0].slope, r.s_vs_dp[1].slope)};
}

Outcome criterion8() {
    bool ok = true;
    double worst = 1.0;
    for (double eps : {0.01, 0.02, 0.04, 0.08, 0.16}) {
        const GridSpec g(3, cli::my_nodes(eps, kHalf), kHalf);
        const auto [g0, ge] = my_pair(MYParams{eps, 0.01, 3}, g);
        BoundConfig cfg;
        cfg.r_scale = 0.5;
        const BoundReport r = quantitative_bound(g0, ge, cfg);
        const double factor = std::max(r.balance, 1.0 / r.balance);
        worst = std::max(worst, factor);
        ok = ok && r.holds && factor <= kBalanceFactor;
        note(fmt("eps %.2f: %zu^3 -> %zu^3, sigma %.3e, t* %.4f%s, kappa %.4f <= %.4f + %.4f + %.4f (L6 %.3f: C %.3f, "
                 "L1 %.3f, L2 %.3f), balance %.3f, hyp ratio %.2f, persist %s",
                 eps, g.nodes(0), r.grid_nodes[0], r.sigma, r.t_star, r.clamped ? " (clamped)" : "", r.kappa, r.scal0,
                 r.term_t, r.term_sigma, r.lambda6, r.c_persist, r.lambda1, r.lambda2, r.balance, r.hypothesis_ratio,
                 r.persist_ok ? "ok" : "over C_persist"));
    }
    return {ok, fmt("verdict true for every eps required; worst balance factor %.3f", worst)};
}

std::string read_all(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

Outcome criterion9() {
    const fs::path root = fs::temp_directory_path() / "rdflab_acceptance_9";
    fs::remove_all(root);
    const std::vector<std::pair<std::string, std::string>> runs{
        {"curvature", "metric = my\neps = 0.04\nnodes = 65\n"},
        {"flow", "metric = bump\nseed = 3\namplitude = 0.03\nnodes = 33\nend_time = 0.004\n"},
        {"stability", "metric = bump\nseed = 2\nnodes = 33\nend_time = 0.04\npert_radius = 0.5\n"},
        {"quantbound", "pair = my\neps = 0.16\nt_cap = 0.005\n"},
        {"sharpness", "points_per_radius = 8\n"},
        {"convergence", "suite = time\n"},
    };
    bool same = true;
    std::size_t files = 0;
    for (const auto& [cmd, text] : runs) {
        const auto cfg = io::Config::parse(text);
        std::ostringstream log;
        const fs::path a = root / (cmd + "_a"), b = root / (cmd + "_b");
        cli::run(cmd, cfg, a, log);
        cli::run(cmd, io::Config::parse(text), b, log);
        for (const auto& e : fs::recursive_directory_iterator(a)) {
            if (!e.is_regular_file()) continue;
            ++files;
            const bool eq = read_all(e.path()) == read_all(b / fs::relative(e.path(), a));
            if (!eq) note("differs: " + fs::relative(e.path(), root).string());
            same = same && eq;
        }
    }
    note(fmt("%zu content files compared across repeated runs", files));

    // snapshot round trip against the in-process trajectory
    const GridSpec g(3, 33, kHalf);
    FlowConfig fc;
    fc.end_time = 0.004;
    const Trajectory tr = evolve(random_bump(3, 0.03, std::max(0.25, 4.0 * g.spacing()), g), fc);
    bool exact = true;
    std::size_t i = 0;
    for (const auto& st : tr.states) {
        const fs::path p = root / ("snap_" + std::to_string(i++) + ".bin");
        io::write_snapshot(p, st.g, st.t);
        const auto s = io::read_snapshot(p);
        exact = exact && s.t == st.t && s.grid == g && io::to_field<FieldKind::sym_tensor>(s) == st.g &&
                io::encode_snapshot(io::to_field<FieldKind::sym_tensor>(s), s.t) == read_all(p);
    }
    // the CLI's snapshots match the library's flow bit for bit
    const fs::path flow_dir = root / "flow_a" / "snapshots";
    std::size_t matched = 0;
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "snap_%04zu.bin", k);
        const auto s = io::read_snapshot(flow_dir / name);
        matched += io::to_field<FieldKind::sym_tensor>(s) == tr.states[k].g;
    }
    exact = exact && matched == tr.states.size();
    note(fmt("%zu snapshots round-tripped, %zu CLI snapshots match the in-process flow", i, matched));
    fs::remove_all(root);
    return {same && exact, fmt("%zu files byte-identical: %s; snapshots bit-exact: %s", files, same ? "yes" : "no",
                               exact ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                         criterion6, criterion7, criterion8, criterion9};
    static const char* names[] = {"curvature correctness",     "conformal oracle agreement",  "flow fixed point and linearisation",
                                  "stability weighted ratios", "L^p to L^inf decay exponent", "persistence and tracked drift",
                                  "sharpness exponents",       "bound pipeline coherence",    "determinism and serialization"};
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
    if (which.empty())
        for (int c = 1; c <= 9; ++c) which.push_back(c);

    int failed = 0;
    for (int c : which) {
        if (c < 1 || c > 9) {
            std::fprintf(stderr, "no criterion %d\n", c);
            return 1;
        }
        std::printf("criterion %d (%s)\n", c, names[c - 1]);
        std::fflush(stdout);
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[static_cast<std::size_t>(c - 1)]();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %d: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c, o.summary.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
