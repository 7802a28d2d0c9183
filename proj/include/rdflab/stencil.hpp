#pragma once

#include <cstddef>

#include "rdflab/error.hpp"
#include "rdflab/grid.hpp"
#include "rdflab/parallel.hpp"

namespace rdflab {

/// Accuracy order of the central-difference stencils.
enum class StencilOrder { second = 2, fourth = 4 };

/// Nodes needed on each side of a point by one application of a stencil.
constexpr std::size_t halo_width(StencilOrder o) noexcept { return o == StencilOrder::second ? 1 : 2; }

namespace detail {

template <StencilOrder O>
inline double diff1(const double* p, std::ptrdiff_t s, double inv_h) noexcept {
    if constexpr (O == StencilOrder::second) {
        return 0.5 * (p[s] - p[-s]) * inv_h;
    } else {
        return (8.0 * (p[s] - p[-s]) - (p[2 * s] - p[-2 * s])) * (inv_h / 12.0);
    }
}

template <StencilOrder O>
inline double diff2(const double* p, std::ptrdiff_t s, double inv_h2) noexcept {
    if constexpr (O == StencilOrder::second) {
        return (p[s] - 2.0 * p[0] + p[-s]) * inv_h2;
    } else {
        return (16.0 * (p[s] + p[-s]) - (p[2 * s] + p[-2 * s]) - 30.0 * p[0]) * (inv_h2 / 12.0);
    }
}

/// Mixed second derivative as the composition of two first-difference stencils.
template <StencilOrder O>
inline double diff11(const double* p, std::ptrdiff_t sa, std::ptrdiff_t sb, double inv_h2) noexcept {
    if constexpr (O == StencilOrder::second) {
        return 0.25 * ((p[sa + sb] - p[sa - sb]) - (p[-sa + sb] - p[-sa - sb])) * inv_h2;
    } else {
        auto row = [&](std::ptrdiff_t off) {
            return 8.0 * (p[off + sb] - p[off - sb]) - (p[off + 2 * sb] - p[off - 2 * sb]);
        };
        return (8.0 * (row(sa) - row(-sa)) - (row(2 * sa) - row(-2 * sa))) * (inv_h2 / 144.0);
    }
}

}  // namespace detail

/// Calls body(node) for every node at least `margin` nodes from each face.
/// Work is split across threads along axis 0; body must only write per-node data.
template <class Body>
void for_each_interior(const GridSpec& grid, std::size_t margin, Body&& body) {
    const int dim = grid.dim();
    std::size_t lo[kMaxDim]{}, hi[kMaxDim]{};
    for (int a = 0; a < dim; ++a) {
        lo[a] = margin;
        hi[a] = grid.nodes(a) > margin ? grid.nodes(a) - margin : 0;
        if (lo[a] >= hi[a]) return;
    }
    parallel_for(hi[0] - lo[0], [&](std::size_t b, std::size_t e) {
        for (std::size_t i0 = lo[0] + b; i0 < lo[0] + e; ++i0) {
            for (std::size_t i1 = lo[1]; i1 < hi[1]; ++i1) {
                for (std::size_t i2 = lo[2]; i2 < hi[2]; ++i2) {
                    std::size_t base = (i0 * grid.nodes(1) + i1) * grid.nodes(2) + i2;
                    if (dim == 3) {
                        body(base);
                    } else {
                        base *= grid.nodes(3);
                        for (std::size_t i3 = lo[3]; i3 < hi[3]; ++i3) body(base + i3);
                    }
                }
            }
        }
    });
}

}  // namespace rdflab
