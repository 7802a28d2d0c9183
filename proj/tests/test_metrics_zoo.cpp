#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rdflab/curvature.hpp"
#include "rdflab/metrics_zoo.hpp"
#include "test_support.hpp"

using namespace rdflab;

namespace {

double radius(const GridSpec& g, std::size_t k) {
    const auto x = g.position(k);
    double s = 0;
    for (int a = 0; a < g.dim(); ++a) s += x[a] * x[a];
    return std::sqrt(s);
}

// 1-D oracle for the cutoff constant: for eta(r) = S((r - a)/w) the gradient
// has size S'/w and the Hessian has eigenvalue S''/w^2 (radial) and
// S'/(w r) (tangential, n - 1 times).
double cutoff_constant_oracle(double inner, double outer, int n) {
    const double w = outer - inner;
    double best = 0;
    for (int i = 0; i <= 200000; ++i) {
        const double s = i / 200000.0;
        const double d1 = 30 * s * s * (1 - s) * (1 - s);
        const double d2 = 60 * s * (1 - s) * (1 - 2 * s);
        const double r = inner + s * w;
        const double tang = r > 0 ? d1 * w / r : 0.0;
        best = std::max(best, d1 * d1 + std::sqrt(d2 * d2 + (n - 1) * tang * tang));
    }
    return best;
}

}  // namespace

TEST(Cutoff, ExactPlateausAndRange) {
    const GridSpec g(3, 41, 1.0);
    const CutoffSpec spec{{0.1, -0.05, 0.0}, 0.3, 0.6};
    const auto eta = cutoff(spec, g);
    int ones = 0, zeros = 0;
    for (std::size_t k = 0; k < g.node_count(); ++k) {
        const auto x = g.position(k);
        const double d = std::hypot(x[0] - 0.1, x[1] + 0.05, x[2]);
        EXPECT_GE(eta[k], 0.0);
        EXPECT_LE(eta[k], 1.0);
        if (d <= 0.3 - 1e-12) {
            EXPECT_EQ(eta[k], 1.0);
            ++ones;
        }
        if (d >= 0.6 + 1e-12) {
            EXPECT_EQ(eta[k], 0.0);
            ++zeros;
        }
    }
    EXPECT_GT(ones, 0);
    EXPECT_GT(zeros, 0);
}

TEST(Cutoff, DerivativeConstantMatchesOracle) {
    const GridSpec g(3, 129, 1.0);
    for (auto [inner, outer] : {std::pair{0.3, 0.6}, std::pair{0.0, 0.5}, std::pair{0.4, 0.8}}) {
        const CutoffSpec spec{{}, inner, outer};
        const double measured = cutoff_derivative_constant(spec, g);
        const double oracle = cutoff_constant_oracle(inner, outer, 3);
        EXPECT_LE(measured, 60.0);
        EXPECT_NEAR(measured, oracle, 0.05 * oracle) << inner << " " << outer;
    }
}

TEST(Cutoff, Errors) {
    const GridSpec g(3, 17, 1.0);
    EXPECT_THROW(cutoff({{}, 0.5, 0.5}, g), InvalidArgument);
    EXPECT_THROW(cutoff({{}, -0.1, 0.5}, g), InvalidArgument);
    EXPECT_THROW(cutoff({{}, 0.5, 1.2}, g), DomainError);
    EXPECT_THROW(cutoff({{0.6, 0, 0}, 0.2, 0.5}, g), DomainError);
    EXPECT_THROW(cutoff({{0, 0}, 0.2, 0.5}, g), InvalidArgument);
}

TEST(ConformalMetric, ConstantsAndErrors) {
    const GridSpec g(3, 9, 1.0);
    ScalarField one(g);
    for (std::size_t k = 0; k < g.node_count(); ++k) one[k] = 1.0;
    EXPECT_TRUE(conformal_metric(one, 3) == MetricField::euclidean(g));
    ScalarField c(g);
    for (std::size_t k = 0; k < g.node_count(); ++k) c[k] = 1.5;
    const auto m = conformal_metric(c, 3);
    for (std::size_t k = 0; k < g.node_count(); ++k)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) EXPECT_EQ(m(i, j, k), i == j ? std::pow(1.5, 4.0) : 0.0);
    c[17] = 0.0;
    EXPECT_THROW(conformal_metric(c, 3), DomainError);
    EXPECT_THROW(conformal_metric(one, 4), InvalidArgument);
}

TEST(SpherePatch, ScalarIsConstantToSecondOrder) {
    std::vector<double> hs, errs;
    for (std::size_t nodes : {17, 33, 65}) {
        const GridSpec g(3, nodes, 0.8);
        const auto scal = scalar_curvature(sphere_patch(1.0, g));
        double e = 0;
        for (std::size_t k = 0; k < g.node_count(); ++k)
            if (g.boundary_distance(k) >= 2) e = std::max(e, std::abs(scal[k] - 6.0));
        hs.push_back(g.spacing());
        errs.push_back(e);
    }
    EXPECT_LT(errs.back(), 1e-2);
    EXPECT_NEAR(loglog_slope(hs, errs), 2.0, 0.3);
}

TEST(MYPair, OriginValuesAndSymmetry) {
    const GridSpec g(3, 65, 1.25);
    const MYParams p{0.04, 0.01, 3};
    const auto [phi0, phie] = my_conformal_factors(p, g);
    const std::size_t origin = g.index({32, 32, 32, 0});
    EXPECT_EQ(phi0[origin], 1.0);
    EXPECT_NEAR(phie[origin] - phi0[origin], p.a * p.eps / 6.0, 1e-16);

    const auto [g0, ge] = my_pair(p, g);
    std::size_t mismatches = 0, below = 0;
    for (std::size_t k = 0; k < g.node_count(); ++k) {
        const auto m = g.multi_index(k);
        // reflection through each axis and the cyclic and swap permutations
        const std::array<std::array<std::size_t, 4>, 5> images{{
            {64 - m[0], m[1], m[2], 0},
            {m[0], 64 - m[1], m[2], 0},
            {m[0], m[1], 64 - m[2], 0},
            {m[1], m[2], m[0], 0},
            {m[1], m[0], m[2], 0},
        }};
        for (const auto& im : images) {
            const std::size_t j = g.index(im);
            for (int c = 0; c < 6; ++c) {
                mismatches += g0.tensor().at(c, k) != g0.tensor().at(c, j);
                mismatches += ge.tensor().at(c, k) != ge.tensor().at(c, j);
            }
        }
        // eta v >= 0 wherever |x| <= r, so g_eps >= g_0 there
        if (radius(g, k) <= p.r()) {
            for (int i = 0; i < 3; ++i) below += ge(i, i, k) < g0(i, i, k);
        } else {
            for (int c = 0; c < 6; ++c) EXPECT_EQ(ge.tensor().at(c, k), g0.tensor().at(c, k));
        }
    }
    EXPECT_EQ(mismatches, 0u);
    EXPECT_EQ(below, 0u);
}

TEST(MYPair, DifferenceExponents) {
    const GridSpec g(3, 81, 1.25);
    std::vector<double> eps, linf, l2;
    for (double e : {0.01, 0.02, 0.04, 0.08, 0.16}) {
        const auto [g0, ge] = my_pair(MYParams{e, 0.01, 3}, g);
        SymTensorField d = ge.tensor() - g0.tensor();
        eps.push_back(e);
        linf.push_back(norm(d, Region::whole(g), kLinf));
        l2.push_back(norm(d, Region::whole(g), 2.0));
    }
    EXPECT_NEAR(loglog_slope(eps, linf), 1.0, 0.1);
    EXPECT_NEAR(loglog_slope(eps, l2), 1.0 + 3.0 / 8.0, 0.1);
    // the peak sits at the origin: |phi_eps^4 - phi_0^4| with the diagonal counted three times
    const double peak = std::pow(1.0 + 0.01 * 0.16 / 6.0, 4) - 1.0;
    EXPECT_NEAR(linf.back(), std::sqrt(3.0) * peak, 1e-12);
}

TEST(MYPair, Preconditions) {
    const GridSpec g(3, 65, 1.25);
    EXPECT_THROW(my_pair(MYParams{0.005, 0.01, 3}, g), InvalidArgument);  // h > r/8
    MYParams big{0.25, 0.01, 3};
    big.eps_max = 1.0;
    EXPECT_THROW(my_pair(big, g), InvalidArgument);  // r > 0.67
    EXPECT_THROW(my_pair(MYParams{0.19, 0.01, 3}, GridSpec(3, 65, 1.0)), DomainError);
    EXPECT_THROW(my_pair(MYParams{-0.1, 0.01, 3}, g), InvalidArgument);
    EXPECT_THROW(my_pair(MYParams{0.04, 0.01, 4}, g), InvalidArgument);
}

TEST(RandomBump, DeterministicAndScaled) {
    const GridSpec g(3, 33, 1.0);
    const auto a = random_bump(11, 0.05, 0.25, g);
    const auto b = random_bump(11, 0.05, 0.25, g);
    const auto c = random_bump(12, 0.05, 0.25, g);
    EXPECT_TRUE(a == b);
    EXPECT_FALSE(a == c);
    SymTensorField d = a.tensor() - euclidean_tensor(g);
    EXPECT_NEAR(norm(d, Region::whole(g), kLinf), 0.05, 1e-15);
    for (std::size_t k = 0; k < g.node_count(); ++k)
        if (radius(g, k) >= kBumpOuter + 1e-12)
            for (int i = 0; i < 6; ++i) EXPECT_EQ(d.at(i, k), 0.0);
    EXPECT_TRUE(random_bump(11, 0.0, 0.25, g) == MetricField::euclidean(g));
    EXPECT_LE(a.euclidean_deviation(), 0.05 + 1e-15);
}

TEST(RandomBump, Errors) {
    const GridSpec g(3, 33, 1.0);
    EXPECT_THROW(random_bump(1, 0.2, 0.25, g), InvalidArgument);
    EXPECT_THROW(random_bump(1, -0.01, 0.25, g), InvalidArgument);
    EXPECT_THROW(random_bump(1, 0.05, 0.2, g), InvalidArgument);  // width < 4h
    EXPECT_NO_THROW(random_bump(1, 0.15, 0.25, g, 0.2));
}

TEST(Perturbations, GaussianAndBall) {
    const GridSpec g(3, 33, 1.0);
    const std::vector<double> c{0.0, 0.0, 0.0};
    const auto dir = random_direction(5, 3);
    EXPECT_EQ(dir, random_direction(5, 3));
    const auto gb = gaussian_bump(g, c, 0.15, 0.03, dir, 0.6);
    EXPECT_NEAR(norm(gb.tensor() - euclidean_tensor(g), Region::whole(g), kLinf), 0.03, 1e-15);

    const auto base = sphere_patch(3.0, g);
    const auto bp = ball_perturbation(base, c, 0.5, 0.02, dir);
    SymTensorField d = bp.tensor() - base.tensor();
    EXPECT_NEAR(norm(d, Region::whole(g), kLinf), 0.02, 1e-15);
    for (std::size_t k = 0; k < g.node_count(); ++k)
        if (radius(g, k) > 0.5 + 1e-12)
            for (int i = 0; i < 6; ++i) EXPECT_EQ(d.at(i, k), 0.0);
    EXPECT_THROW(ball_perturbation(base, c, 0.5, 0.02, std::vector<double>(6, 0.0)), InvalidArgument);
}
