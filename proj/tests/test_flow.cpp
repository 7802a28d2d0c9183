#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rdflab/flow.hpp"
#include "rdflab/metrics_zoo.hpp"
#include "test_support.hpp"

using namespace rdflab;

namespace {

double r2(std::span<const double> x) {
    double s = 0;
    for (double v : x) s += v * v;
    return s;
}

const std::vector<double> kOrigin{0, 0, 0};

// smooth symmetric perturbation supported in the unit ball
SymTensorField smooth_h(const GridSpec& g, double w2 = 0.02) {
    SymTensorField h(g);
    for (std::size_t k = 0; k < g.node_count(); ++k) {
        const auto x = g.position(k);
        const double rr = r2(std::span<const double>(x.data(), 3));
        const double b = rr < 0.36 ? std::exp(-rr / w2) * smoothstep_down((std::sqrt(rr) - 0.3) / 0.3) : 0.0;
        h.at(sym_index(0, 0), k) = b;
        h.at(sym_index(1, 0), k) = 0.5 * b * (1 + x[2]);
        h.at(sym_index(2, 2), k) = -0.7 * b;
        h.at(sym_index(2, 1), k) = 0.3 * b * x[0];
    }
    return h;
}

double sup_diff(const SymTensorField& a, const SymTensorField& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

}  // namespace

TEST(CutoffExtend, Properties) {
    const GridSpec g(3, 33, 1.25);
    const auto e = cutoff_extend(MetricField::euclidean(g), kOrigin, 0.3, 0.8);
    EXPECT_EQ(e, MetricField::euclidean(g));
    const auto s = sphere_patch(1.0, g);
    const auto x = cutoff_extend(s, kOrigin, 0.3, 0.8);
    double inside_dev = 0, out_dev = 0;
    for (std::size_t k = 0; k < g.node_count(); ++k) {
        const auto p = g.position(k);
        const double r = std::sqrt(r2(std::span<const double>(p.data(), 3)));
        for (int c = 0; c < 6; ++c) {
            const double eu = (c == 0 || c == 2 || c == 5) ? 1.0 : 0.0;
            if (r <= 0.3) {
                EXPECT_EQ(x.tensor().at(c, k), s.tensor().at(c, k));
            }
            if (r >= 0.8) {
                EXPECT_EQ(x.tensor().at(c, k), eu);
            }
            out_dev = std::max(out_dev, std::abs(x.tensor().at(c, k) - eu));
            if (r <= 0.8) inside_dev = std::max(inside_dev, std::abs(s.tensor().at(c, k) - eu));
        }
    }
    EXPECT_LE(out_dev, inside_dev);
    EXPECT_THROW(cutoff_extend(s, kOrigin, 0.8, 0.3), InvalidArgument);
    EXPECT_THROW(cutoff_extend(s, kOrigin, 0.3, 1.3), DomainError);
}

TEST(DeturckVector, FlatAndConformal) {
    const GridSpec g(3, 17, 1.0);
    const auto w0 = deturck_vector(MetricField::euclidean(g));
    for (double v : w0.data()) EXPECT_EQ(v, 0.0);
    SymTensorField c = 2.0 * euclidean_tensor(g);
    for (double& v : c.component(1)) v = 0.3;
    const auto wc = deturck_vector(MetricField(c));
    for (double v : wc.data()) EXPECT_EQ(v, 0.0);

    std::vector<double> hs, errs;
    for (std::size_t n : {17, 33, 65}) {
        const GridSpec gg(3, n, 1.0);
        SymTensorField t(gg);
        for (std::size_t k = 0; k < gg.node_count(); ++k) {
            const auto x = gg.position(k);
            const double psi = std::exp(0.2 * std::sin(x[0]) + 0.1 * x[1] * x[2]);
            for (int i = 0; i < 3; ++i) t.at(sym_index(i, i), k) = psi;
        }
        const auto w = deturck_vector(MetricField(t));
        double e = 0;
        for (std::size_t k = 0; k < gg.node_count(); ++k) {
            if (gg.boundary_distance(k) < 1) continue;
            const auto x = gg.position(k);
            const double psi = std::exp(0.2 * std::sin(x[0]) + 0.1 * x[1] * x[2]);
            const double du[3] = {0.2 * std::cos(x[0]), 0.1 * x[2], 0.1 * x[1]};
            for (int a = 0; a < 3; ++a) e = std::max(e, std::abs(w.at(a, k) - (1 - 1.5) / psi * du[a]));
        }
        hs.push_back(gg.spacing());
        errs.push_back(e);
    }
    EXPECT_NEAR(loglog_slope(hs, errs), 2.0, 0.3);
}

TEST(RdfRhs, FixedPointsAndFormsAgree) {
    const GridSpec g(3, 17, 1.0);
    for (const auto& m : {MetricField::euclidean(g), MetricField(4.0 * euclidean_tensor(g))}) {
        const auto r = rdf_rhs(m);
        const auto re = rdf_rhs_expanded(m);
        for (double v : r.data()) EXPECT_EQ(v, 0.0);
        for (double v : re.data()) EXPECT_EQ(v, 0.0);
    }
    for (int dim : {3, 4}) {
        const GridSpec gg(dim, dim == 3 ? 21 : 11, 1.0);
        SymTensorField t = euclidean_tensor(gg);
        for (std::size_t k = 0; k < gg.node_count(); ++k) {
            const auto x = gg.position(k);
            const double b = std::exp(-2 * r2(std::span<const double>(x.data(), dim)));
            t.at(sym_index(0, 0), k) += 0.2 * b * (1 + x[1]);
            t.at(sym_index(1, 0), k) += 0.15 * b * std::sin(3 * x[2]);
            t.at(sym_index(2, 1), k) += 0.1 * b * x[0];
            t.at(sym_index(2, 2), k) -= 0.1 * b;
            if (dim == 4) t.at(sym_index(3, 2), k) += 0.1 * b * x[3];
        }
        const MetricField m(t);
        for (auto order : {StencilOrder::second, StencilOrder::fourth}) {
            const auto a = rdf_rhs(m, order);
            const auto b = rdf_rhs_expanded(m, order);
            double scale = 0;
            for (double v : a.data()) scale = std::max(scale, std::abs(v));
            EXPECT_GT(scale, 0.1);
            EXPECT_LT(sup_diff(a, b), 1e-12 * scale) << "dim " << dim;
        }
    }
}

TEST(RdfRhs, LinearisationIsLaplacian) {
    const GridSpec g(3, 33, 1.0);
    const auto h = smooth_h(g);
    std::vector<double> ss, res;
    for (double s : {0.01, 0.02, 0.04, 0.08}) {
        const MetricField m(euclidean_tensor(g) + s * h);
        const auto r = rdf_rhs(m);
        double e = 0;
        for (int c = 0; c < 6; ++c) {
            ScalarField comp(g);
            std::copy(h.component(c).begin(), h.component(c).end(), comp.data().begin());
            const auto lap = laplacian(comp);
            for (std::size_t k = 0; k < g.node_count(); ++k)
                if (g.boundary_distance(k) >= 1) e = std::max(e, std::abs(r.at(c, k) - s * lap[k]));
        }
        ss.push_back(s);
        res.push_back(e);
    }
    EXPECT_NEAR(loglog_slope(ss, res), 2.0, 0.1);
}

TEST(Evolve, EuclideanFixedPoint) {
    const GridSpec g(3, 17, 1.0);
    FlowConfig cfg;
    cfg.end_time = 0.005;
    cfg.snapshots_per_decade = 4;
    const auto tr = evolve(MetricField::euclidean(g), cfg);
    EXPECT_GT(tr.steps, 1u);
    for (const auto& s : tr.states) EXPECT_EQ(s.g, euclidean_tensor(g));
    EXPECT_EQ(tr.states.front().t, 0.0);
    EXPECT_EQ(tr.states.back().t, cfg.end_time);
    for (std::size_t i = 1; i < tr.states.size(); ++i) EXPECT_GT(tr.states[i].t, tr.states[i - 1].t);
}

TEST(Evolve, PreconditionsAndErrors) {
    const GridSpec g(3, 25, 1.25);
    FlowConfig cfg;
    cfg.end_time = 0.001;
    // not Euclidean on the ring
    EXPECT_THROW(evolve(sphere_patch(3.0, g), cfg), InvalidArgument);
    // not eps0-close
    const auto far = cutoff_extend(sphere_patch(1.0, g), kOrigin, 0.5, 0.9);
    EXPECT_THROW(evolve(far, cfg), DomainError);
    FlowConfig bad = cfg;
    bad.cfl = 0.4;
    EXPECT_THROW(evolve(MetricField::euclidean(g), bad), CflError);
    bad.cfl = 0.0;
    EXPECT_THROW(evolve(MetricField::euclidean(g), bad), InvalidArgument);
}

TEST(Evolve, InstabilityReported) {
    const GridSpec g(3, 25, 1.0);
    // an odd-even checkerboard, legal at t = 0, amplified by a scheme run past its stability bound
    SymTensorField cb = euclidean_tensor(g);
    for (std::size_t k = 0; k < g.node_count(); ++k) {
        if (g.boundary_distance(k) < 4) continue;
        const auto mi = g.multi_index(k);
        cb.at(0, k) += ((mi[0] + mi[1] + mi[2]) % 2 ? 0.04 : -0.04);
    }
    FlowConfig cfg;
    cfg.end_time = 0.05;
    cfg.cfl = 0.3;
    cfg.integrator = Integrator::rk4;
    EXPECT_THROW(evolve(MetricField(cb), cfg), CflError);
    // the same state integrated legally decays
    cfg.cfl = 0.1;
    cfg.end_time = 0.005;
    EXPECT_NO_THROW(evolve(MetricField(cb), cfg));
}

TEST(Evolve, CflBoundFollowsStencil) {
    // largest |symbol| of each second-difference stencil, sampled over the Nyquist band
    auto radius = [](bool fourth) {
        double m = 0;
        for (int i = 0; i <= 1000; ++i) {
            const double th = 3.141592653589793 * i / 1000;
            const double s = fourth ? (32 * std::cos(th) - 2 * std::cos(2 * th) - 30) / 12 : 2 * std::cos(th) - 2;
            m = std::max(m, std::abs(s));
        }
        return m;
    };
    EXPECT_NEAR(cfl_limit(Integrator::rk2, 3), 2.0 / (3 * radius(false)), 1e-12);
    EXPECT_NEAR(cfl_limit(Integrator::rk4, 3, StencilOrder::fourth), 2.785 / (3 * radius(true)), 1e-12);

    const GridSpec g(3, 33, 1.0);
    FlowConfig cfg;
    cfg.end_time = 0.001;
    cfg.integrator = Integrator::rk4;
    cfg.order = StencilOrder::fourth;
    cfg.cfl = 0.2;  // legal for the 3-point stencil, not for the 5-point one
    EXPECT_THROW(evolve(random_bump(1, 0.01, 0.25, g), cfg), CflError);
    cfg.order = StencilOrder::second;
    EXPECT_NO_THROW(evolve(random_bump(1, 0.01, 0.25, g), cfg));
}

TEST(Evolve, HeatLikeDecayAndLinearisation) {
    const GridSpec g(3, 49, 1.25);
    const auto h = smooth_h(g, 0.06);
    FlowConfig cfg;
    cfg.end_time = 0.008;
    cfg.order = StencilOrder::fourth;
    cfg.snapshot_times = {0.002, 0.004, 0.006};
    const auto hc = heat_convolve(h, cfg.end_time);
    std::vector<double> ss, res;
    for (double s : {0.02, 0.04, 0.08}) {
        const MetricField g0(euclidean_tensor(g) + s * h);
        const auto tr = evolve(g0, cfg);
        // sup |g - g_euc| non-increasing within 1%
        double prev = std::numeric_limits<double>::infinity();
        for (const auto& st : tr.states) {
            const double d = sup_diff(st.g, euclidean_tensor(g));
            EXPECT_LE(d, prev * 1.01);
            prev = d;
        }
        SymTensorField diff = tr.states.back().g - euclidean_tensor(g);
        diff -= s * hc;
        double e = 0;
        for (std::size_t k = 0; k < g.node_count(); ++k)
            if (g.boundary_distance(k) >= 3)
                for (int c = 0; c < 6; ++c) e = std::max(e, std::abs(diff.at(c, k)));
        ss.push_back(s);
        res.push_back(e);
    }
    // 4th-order stencils keep the O(s h^4) discretisation part below the quadratic term
    EXPECT_NEAR(loglog_slope(ss, res), 2.0, 0.3);
}

TEST(Evolve, TimeRefinementOrder) {
    const GridSpec g(3, 21, 1.0);
    const MetricField g0(euclidean_tensor(g) + 0.05 * smooth_h(g));
    FlowConfig cfg;
    cfg.end_time = 0.003;
    cfg.snapshots_per_decade = 1;
    cfg.cadence_floor = 1.0;
    // successive differences |g(dt) - g(dt/2)| shrink like dt^2
    std::vector<double> dts, diffs;
    SymTensorField prev;
    double prev_dt = 0;
    for (double c : {0.1, 0.05, 0.025, 0.0125}) {
        cfg.cfl = c;
        const auto tr = evolve(g0, cfg);
        if (c < 0.1) {
            dts.push_back(prev_dt);
            diffs.push_back(sup_diff(prev, tr.states.back().g));
        }
        prev = tr.states.back().g;
        prev_dt = tr.dt;
    }
    EXPECT_NEAR(loglog_slope(dts, diffs), 2.0, 0.3);
}

TEST(PairEvolve, IdenticalAndSwapSymmetric) {
    const GridSpec g(3, 33, 1.0);
    const MetricField a(euclidean_tensor(g) + 0.03 * smooth_h(g));
    const MetricField b = random_bump(7, 0.02, 0.25, g);
    FlowConfig cfg;
    cfg.end_time = 0.002;
    cfg.snapshot_times = {0.0005, 0.001};
    const auto [x, y] = pair_evolve(a, a, cfg);
    for (std::size_t i = 0; i < x.states.size(); ++i) EXPECT_EQ(x.states[i].g, y.states[i].g);
    const auto [p, q] = pair_evolve(a, b, cfg);
    const auto [q2, p2] = pair_evolve(b, a, cfg);
    ASSERT_EQ(p.states.size(), p2.states.size());
    for (std::size_t i = 0; i < p.states.size(); ++i) {
        EXPECT_EQ(p.states[i].g, p2.states[i].g);
        EXPECT_EQ(q.states[i].g, q2.states[i].g);
        EXPECT_EQ(p.states[i].t, q.states[i].t);
    }
    // pairing with the exact fixed point uses the same dt as the solo run would
    const auto [e, r] = pair_evolve(MetricField::euclidean(g), b, cfg);
    EXPECT_EQ(e.states.back().g, euclidean_tensor(g));
}

TEST(Evolve, BoundaryPolicySoundness) {
    const GridSpec g(3, 41, 1.25);
    const double r_outer = 0.45;
    const double T = 0.004;
    ASSERT_LT(r_outer + 6 * std::sqrt(T), 1.25);
    const auto m = cutoff_extend(MetricField(euclidean_tensor(g) + 0.05 * smooth_h(g)), kOrigin, 0.3, r_outer);
    FlowConfig cfg;
    cfg.end_time = T;
    cfg.snapshot_times = {0.001};
    const auto tr = evolve(m, cfg);
    double worst = 0;
    for (std::size_t k = 0; k < g.node_count(); ++k) {
        const auto x = g.position(k);
        if (std::sqrt(r2(std::span<const double>(x.data(), 3))) < r_outer + 6 * std::sqrt(T)) continue;
        for (int c = 0; c < 6; ++c) {
            const double eu = (c == 0 || c == 2 || c == 5) ? 1.0 : 0.0;
            worst = std::max(worst, std::abs(tr.states.back().g.at(c, k) - eu));
        }
    }
    EXPECT_LE(worst, 1e-8);
}

TEST(PsiTrack, StaticAndSynthetic) {
    const GridSpec g(3, 17, 1.0);
    FlowConfig cfg;
    cfg.end_time = 0.004;
    cfg.snapshot_times = {0.001, 0.002};
    auto tr = evolve(MetricField::euclidean(g), cfg);
    const std::vector<double> x0{0.1, -0.2, 0.3};
    const auto path = psi_track(tr, x0);
    for (const auto& p : path) EXPECT_EQ(p, x0);

    const VelocityField w = [](std::span<const double>, double t, std::span<double> out) {
        out[0] = t;
        out[1] = 0;
        out[2] = 0;
    };
    const std::vector<double> times{0.0, 0.1, 0.25, 0.5};
    const auto p = integrate_path(w, times, x0, 3);
    for (std::size_t i = 0; i < times.size(); ++i) {
        EXPECT_NEAR(p[i][0], x0[0] - 0.5 * times[i] * times[i], 1e-15);
        EXPECT_EQ(p[i][1], x0[1]);
    }
    const VelocityField fast = [](std::span<const double>, double, std::span<double> out) {
        out[0] = 100.0;
        out[1] = out[2] = 0;
    };
    EXPECT_THROW(integrate_path(fast, times, x0, 3, &g), DomainError);
}
