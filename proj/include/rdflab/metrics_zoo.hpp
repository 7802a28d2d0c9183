#pragma once

// Test metric families: cutoffs, conformal metrics, sphere patches, seeded
// random bumps and the conformal sharpness family.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "rdflab/curvature.hpp"
#include "rdflab/error.hpp"
#include "rdflab/field.hpp"
#include "rdflab/grid.hpp"
#include "rdflab/grid_calculus.hpp"

namespace rdflab {

// ---------------------------------------------------------------------------
// Cutoffs

/// Radial cutoff: 1 inside `inner`, 0 outside `outer`, quintic smoothstep between.
struct CutoffSpec {
    std::vector<double> center;  // empty = origin
    double inner = 0.0;
    double outer = 0.0;
};

/// 1 - (10 s^3 - 15 s^4 + 6 s^5), clamped; C^2 at both seams.
/// Evaluated as the rising polynomial at 1 - s, which stays in [0, 1] in floating point.
inline double smoothstep_down(double s) noexcept {
    if (s <= 0.0) return 1.0;
    if (s >= 1.0) return 0.0;
    const double u = 1.0 - s;
    return std::min(1.0, u * u * u * (10.0 + u * (-15.0 + 6.0 * u)));
}

namespace detail {

/// |x - c|^2 summed in ascending order, so axis permutations give identical bits.
inline double squared_distance(std::span<const double> x, std::span<const double> c, int dim) noexcept {
    std::array<double, kMaxDim> sq{};
    for (int a = 0; a < dim; ++a) {
        const double d = x[a] - (c.empty() ? 0.0 : c[static_cast<std::size_t>(a)]);
        sq[a] = d * d;
    }
    std::sort(sq.begin(), sq.begin() + dim);
    double s = 0.0;
    for (int a = 0; a < dim; ++a) s += sq[a];
    return s;
}

}  // namespace detail

inline double cutoff_value(const CutoffSpec& spec, std::span<const double> x, int dim) noexcept {
    const double d = std::sqrt(detail::squared_distance(x, spec.center, dim));
    if (d <= spec.inner) return 1.0;
    if (d >= spec.outer) return 0.0;
    return smoothstep_down((d - spec.inner) / (spec.outer - spec.inner));
}

inline void check_cutoff(const CutoffSpec& spec, const GridSpec& grid) {
    if (!spec.center.empty() && static_cast<int>(spec.center.size()) != grid.dim()) {
        throw InvalidArgument("cutoff centre has the wrong dimension");
    }
    if (!(spec.inner >= 0.0) || !(spec.outer > spec.inner)) throw InvalidArgument("cutoff radii must satisfy 0 <= inner < outer");
    for (int a = 0; a < grid.dim(); ++a) {
        const double c = spec.center.empty() ? 0.0 : spec.center[static_cast<std::size_t>(a)];
        if (std::abs(c) + spec.outer > grid.half_width(a)) throw DomainError("cutoff outer ball leaves the grid box");
    }
}

inline ScalarField cutoff(const CutoffSpec& spec, const GridSpec& grid) {
    check_cutoff(spec, grid);
    return sample(grid, [&](std::span<const double> x) { return cutoff_value(spec, x, grid.dim()); });
}

/// sup over interior nodes of (|grad eta|^2 + |hess eta|) * (outer - inner)^2,
/// measured with central differences.
inline double cutoff_derivative_constant(const CutoffSpec& spec, const GridSpec& grid) {
    const ScalarField eta = cutoff(spec, grid);
    const int n = grid.dim();
    std::vector<ScalarField> d1;
    for (int a = 0; a < n; ++a) d1.push_back(partial_derivative(eta, a, 1));
    std::vector<std::vector<ScalarField>> d2(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            d2[static_cast<std::size_t>(a)].push_back(a == b ? partial_derivative(eta, a, 2) : partial_derivative(d1[static_cast<std::size_t>(a)], b, 1));
        }
    double best = 0.0;
    const double w2 = (spec.outer - spec.inner) * (spec.outer - spec.inner);
    for (std::size_t k = 0; k < grid.node_count(); ++k) {
        if (grid.boundary_distance(k) < 2) continue;
        double g2 = 0.0, h2 = 0.0;
        for (int a = 0; a < n; ++a) {
            g2 += d1[static_cast<std::size_t>(a)][k] * d1[static_cast<std::size_t>(a)][k];
            for (int b = 0; b < n; ++b) {
                const double v = d2[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)][k];
                h2 += v * v;
            }
        }
        best = std::max(best, (g2 + std::sqrt(h2)) * w2);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Conformal metrics

/// phi^{4/(n-2)} g_euc.
inline MetricField conformal_metric(const ScalarField& phi, int n) {
    if (n < 3) throw InvalidArgument("conformal metric needs n >= 3");
    if (n != phi.grid().dim()) throw InvalidArgument("dimension does not match the grid");
    SymTensorField g(phi.grid());
    const double e = 4.0 / (n - 2);
    for (std::size_t k = 0; k < phi.node_count(); ++k) {
        if (!(phi[k] > 0.0)) throw DomainError("conformal factor must be positive (node " + std::to_string(k) + ")");
        const double v = std::pow(phi[k], e);
        for (int i = 0; i < n; ++i) g.at(sym_index(i, i), k) = v;
    }
    return MetricField(std::move(g));
}

/// Stereographic chart of the round sphere of radius rho:
/// (1 + |x|^2 / (4 rho^2))^{-2} g_euc, scalar curvature n(n-1)/rho^2.
inline MetricField sphere_patch(double rho, const GridSpec& grid) {
    if (!(rho > 0.0)) throw InvalidArgument("sphere radius must be positive");
    const int n = grid.dim();
    SymTensorField g(grid);
    for (std::size_t k = 0; k < grid.node_count(); ++k) {
        const auto x = grid.position(k);
        double r2 = 0.0;
        for (int a = 0; a < n; ++a) r2 += x[a] * x[a];
        const double f = 1.0 + r2 / (4.0 * rho * rho);
        const double v = 1.0 / (f * f);
        for (int i = 0; i < n; ++i) g.at(sym_index(i, i), k) = v;
    }
    return MetricField(std::move(g));
}

/// Conformal factor of the same sphere, for conformal_scalar:
/// (1 + |x|^2/(4 rho^2))^{-(n-2)/2}.
inline ScalarField sphere_conformal_factor(double rho, const GridSpec& grid) {
    const int n = grid.dim();
    return sample(grid, [&](std::span<const double> x) {
        double r2 = 0.0;
        for (int a = 0; a < n; ++a) r2 += x[a] * x[a];
        return std::pow(1.0 + r2 / (4.0 * rho * rho), -0.5 * (n - 2));
    });
}

// ---------------------------------------------------------------------------
// Sharpness family

struct MYParams {
    double eps = 0.01;
    double a = 0.01;
    int n = 3;
    /// largest admissible eps
    double eps_max = 0.2;

    double r() const noexcept { return std::pow(eps, 0.25); }
};

inline void validate(const MYParams& p, const GridSpec& grid) {
    if (!(p.eps > 0.0)) throw InvalidArgument("eps must be positive");
    if (!(p.a > 0.0)) throw InvalidArgument("amplitude a must be positive");
    if (p.n != grid.dim()) throw InvalidArgument("dimension does not match the grid");
    if (p.eps > p.eps_max) throw InvalidArgument("eps exceeds the configured maximum");
    if (p.r() > 0.67) throw InvalidArgument("bump radius eps^(1/4) exceeds 0.67");
    if (grid.min_half_width() <= 1.0) throw DomainError("grid box must contain the unit ball");
    if (grid.spacing() > p.r() / 8.0) {
        throw InvalidArgument("grid under-resolves the bump: h = " + std::to_string(grid.spacing()) +
                              " > r/8 = " + std::to_string(p.r() / 8.0));
    }
}

/// Conformal factors (phi_0, phi_eps):
/// phi_0 = 1 - |x|^2/(4(2+n)), phi_eps = phi_0 + a sqrt(eps) eta v,
/// v = (r^2 - |x|^2)/(2n), eta cut off between r/2 and r.
inline std::pair<ScalarField, ScalarField> my_conformal_factors(const MYParams& p, const GridSpec& grid) {
    validate(p, grid);
    const int n = p.n;
    const double r = p.r();
    const CutoffSpec eta{{}, 0.5 * r, r};
    const double amp = p.a * std::sqrt(p.eps);
    ScalarField phi0(grid), phie(grid);
    for (std::size_t k = 0; k < grid.node_count(); ++k) {
        const auto x = grid.position(k);
        const double r2 = detail::squared_distance(std::span<const double>(x.data(), static_cast<std::size_t>(n)), {}, n);
        const double base = 1.0 - r2 / (4.0 * (2 + n));
        phi0[k] = base;
        const double e = cutoff_value(eta, std::span<const double>(x.data(), static_cast<std::size_t>(n)), n);
        phie[k] = e == 0.0 ? base : base + amp * e * (r * r - r2) / (2.0 * n);
    }
    return {std::move(phi0), std::move(phie)};
}

inline std::pair<MetricField, MetricField> my_pair(const MYParams& p, const GridSpec& grid) {
    auto [phi0, phie] = my_conformal_factors(p, grid);
    return {conformal_metric(phi0, p.n), conformal_metric(phie, p.n)};
}

// ---------------------------------------------------------------------------
// Perturbations

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits; platform independent.
inline double uniform01(std::mt19937_64& rng) noexcept {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(rng); }

/// Rescales a perturbation so its sup Frobenius norm is `amplitude`, adds g_euc.
inline SymTensorField normalise_perturbation(SymTensorField pert, double amplitude) {
    const double sup = norm(pert, Region::whole(pert.grid()), kLinf);
    if (sup == 0.0) throw InvalidArgument("perturbation vanishes on the grid");
    pert *= amplitude / sup;
    for (int i = 0; i < pert.grid().dim(); ++i) {
        for (double& v : pert.component(sym_index(i, i))) v += 1.0;
    }
    return pert;
}

}  // namespace detail

/// Support geometry of random_bump: centres within kBumpCentreRadius, blended
/// to zero between kBumpInner and kBumpOuter.
inline constexpr double kBumpCentreRadius = 0.25;
inline constexpr double kBumpInner = 0.55;
inline constexpr double kBumpOuter = 0.85;
inline constexpr int kBumpCount = 4;

/// g_euc plus a compactly supported sum of seeded Gaussian bumps with random
/// symmetric coefficients, scaled to sup Frobenius norm `amplitude`.
inline MetricField random_bump(std::uint64_t seed, double amplitude, double width, const GridSpec& grid,
                               double eps0 = 0.1) {
    if (!(amplitude >= 0.0) || amplitude > eps0) throw InvalidArgument("bump amplitude must lie in [0, eps0]");
    if (!(width >= 4.0 * grid.spacing())) throw InvalidArgument("bump width must be at least 4h");
    if (amplitude == 0.0) return MetricField::euclidean(grid);
    const int n = grid.dim();
    const CutoffSpec support{{}, kBumpInner, kBumpOuter};
    check_cutoff(support, grid);

    std::mt19937_64 rng(seed);
    struct Bump {
        std::array<double, kMaxDim> c{};
        double w = 0.0;
        std::array<double, 10> coef{};
    };
    std::vector<Bump> bumps(kBumpCount);
    for (auto& b : bumps) {
        // centre uniform in the ball by rejection
        double r2;
        do {
            r2 = 0.0;
            for (int a = 0; a < n; ++a) {
                b.c[a] = detail::uniform(rng, -kBumpCentreRadius, kBumpCentreRadius);
                r2 += b.c[a] * b.c[a];
            }
        } while (r2 > kBumpCentreRadius * kBumpCentreRadius);
        b.w = width * std::exp(std::log(2.0) * detail::uniform01(rng));
        for (int c = 0; c < sym_components(n); ++c) b.coef[c] = detail::uniform(rng, -1.0, 1.0);
    }
    SymTensorField pert(grid);
    for (std::size_t k = 0; k < grid.node_count(); ++k) {
        const auto x = grid.position(k);
        const double eta = cutoff_value(support, std::span<const double>(x.data(), static_cast<std::size_t>(n)), n);
        if (eta == 0.0) continue;
        for (const auto& b : bumps) {
            double d2 = 0.0;
            for (int a = 0; a < n; ++a) d2 += (x[a] - b.c[a]) * (x[a] - b.c[a]);
            const double v = eta * std::exp(-d2 / (2.0 * b.w * b.w));
            for (int c = 0; c < sym_components(n); ++c) pert.at(c, k) += v * b.coef[c];
        }
    }
    return MetricField(detail::normalise_perturbation(std::move(pert), amplitude));
}

/// Symmetric matrix with entries in [-1, 1] drawn from a seed (for perturbation directions).
inline std::vector<double> random_direction(std::uint64_t seed, int n) {
    std::mt19937_64 rng(seed);
    std::vector<double> d(static_cast<std::size_t>(sym_components(n)));
    for (double& v : d) v = detail::uniform(rng, -1.0, 1.0);
    return d;
}

/// g_euc + amplitude * exp(-|x-c|^2 / (2 w^2)) * D with D a symmetric direction
/// of unit Frobenius norm, multiplied by a cutoff so the perturbation vanishes
/// outside `support`. Sup Frobenius norm of the perturbation equals amplitude
/// (attained at c).
inline MetricField gaussian_bump(const GridSpec& grid, std::span<const double> center, double width, double amplitude,
                                 std::span<const double> direction, double support) {
    const int n = grid.dim();
    if (static_cast<int>(direction.size()) != sym_components(n)) throw InvalidArgument("direction has wrong size");
    if (!(width > 0.0) || !(support > 0.0)) throw InvalidArgument("width and support must be positive");
    const CutoffSpec cut{std::vector<double>(center.begin(), center.end()), 0.5 * support, support};
    check_cutoff(cut, grid);
    SymTensorField pert(grid);
    for (std::size_t k = 0; k < grid.node_count(); ++k) {
        const auto x = grid.position(k);
        const double eta = cutoff_value(cut, std::span<const double>(x.data(), static_cast<std::size_t>(n)), n);
        if (eta == 0.0) continue;
        double d2 = 0.0;
        for (int a = 0; a < n; ++a) d2 += (x[a] - center[a]) * (x[a] - center[a]);
        const double v = eta * std::exp(-d2 / (2.0 * width * width));
        for (int c = 0; c < sym_components(n); ++c) pert.at(c, k) = v * direction[static_cast<std::size_t>(c)];
    }
    return MetricField(detail::normalise_perturbation(std::move(pert), amplitude));
}

/// base + amplitude * D on the closed coordinate ball, base elsewhere.
/// D is rescaled to unit Frobenius norm, so the L-infinity distance is amplitude.
inline MetricField ball_perturbation(const MetricField& base, std::span<const double> center, double radius,
                                     double amplitude, std::span<const double> direction) {
    const GridSpec& grid = base.grid();
    const int n = grid.dim();
    if (static_cast<int>(direction.size()) != sym_components(n)) throw InvalidArgument("direction has wrong size");
    const Region ball(grid, center, radius);
    double f2 = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double v = direction[static_cast<std::size_t>(sym_index(i, j))];
            f2 += v * v;
        }
    if (f2 == 0.0) throw InvalidArgument("direction must be nonzero");
    const double s = amplitude / std::sqrt(f2);
    SymTensorField g = base.tensor();
    for (std::size_t k : ball.nodes()) {
        for (int c = 0; c < sym_components(n); ++c) g.at(c, k) += s * direction[static_cast<std::size_t>(c)];
    }
    return MetricField(std::move(g));
}

}  // namespace rdflab
