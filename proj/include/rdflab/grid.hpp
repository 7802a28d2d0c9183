#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rdflab/error.hpp"

namespace rdflab {

inline constexpr int kMaxDim = 4;

/// Uniform isotropic grid over a box centred at the origin.
///
/// Node i on axis a sits at x_a = -L_a + i*h, where L_a = h*(nodes_a - 1)/2.
/// Nodes are stored row-major with axis 0 slowest.
class GridSpec {
public:
    GridSpec() = default;

    /// Cube [-L, L]^dim with `nodes` nodes per axis.
    GridSpec(int dim, std::size_t nodes, double half_width) {
        if (dim != 3 && dim != 4) throw InvalidArgument("grid dimension must be 3 or 4");
        if (nodes < 8) throw InvalidArgument("grid needs at least 8 nodes per axis");
        if (!(half_width > 0.0) || !std::isfinite(half_width)) {
            throw InvalidArgument("grid half-width must be positive");
        }
        dim_ = dim;
        spacing_ = 2.0 * half_width / static_cast<double>(nodes - 1);
        for (int a = 0; a < dim; ++a) {
            nodes_[a] = nodes;
            half_[a] = half_width;
        }
        finish();
    }

    /// Box with per-axis node counts sharing one spacing.
    GridSpec(std::span<const std::size_t> nodes, double spacing) {
        if (nodes.size() != 3 && nodes.size() != 4) throw InvalidArgument("grid dimension must be 3 or 4");
        if (!(spacing > 0.0) || !std::isfinite(spacing)) throw InvalidArgument("grid spacing must be positive");
        dim_ = static_cast<int>(nodes.size());
        spacing_ = spacing;
        for (int a = 0; a < dim_; ++a) {
            if (nodes[a] < 8) throw InvalidArgument("grid needs at least 8 nodes per axis");
            nodes_[a] = nodes[a];
            half_[a] = 0.5 * spacing * static_cast<double>(nodes[a] - 1);
        }
        finish();
    }

    int dim() const noexcept { return dim_; }
    std::size_t nodes(int axis) const noexcept { return nodes_[axis]; }
    std::size_t node_count() const noexcept { return count_; }
    double spacing() const noexcept { return spacing_; }
    double half_width(int axis) const noexcept { return half_[axis]; }
    double min_half_width() const noexcept {
        double m = half_[0];
        for (int a = 1; a < dim_; ++a) m = std::min(m, half_[a]);
        return m;
    }
    std::ptrdiff_t stride(int axis) const noexcept { return stride_[axis]; }
    double cell_volume() const noexcept { return std::pow(spacing_, dim_); }

    // mirrored so that coord(N-1-i) == -coord(i) exactly
    double coord(int axis, std::size_t i) const noexcept {
        const std::size_t last = nodes_[axis] - 1;
        if (2 * i == last) return 0.0;
        if (2 * i < last) return -half_[axis] + static_cast<double>(i) * spacing_;
        return half_[axis] - static_cast<double>(last - i) * spacing_;
    }

    std::array<std::size_t, kMaxDim> multi_index(std::size_t idx) const noexcept {
        std::array<std::size_t, kMaxDim> m{};
        for (int a = dim_ - 1; a >= 0; --a) {
            m[a] = idx % nodes_[a];
            idx /= nodes_[a];
        }
        return m;
    }

    std::size_t index(const std::array<std::size_t, kMaxDim>& m) const noexcept {
        std::size_t idx = 0;
        for (int a = 0; a < dim_; ++a) idx = idx * nodes_[a] + m[a];
        return idx;
    }

    std::array<double, kMaxDim> position(std::size_t idx) const noexcept {
        const auto m = multi_index(idx);
        std::array<double, kMaxDim> x{};
        for (int a = 0; a < dim_; ++a) x[a] = coord(a, m[a]);
        return x;
    }

    /// Distance (in nodes) from node idx to the nearest box face.
    std::size_t boundary_distance(std::size_t idx) const noexcept {
        const auto m = multi_index(idx);
        std::size_t d = static_cast<std::size_t>(-1);
        for (int a = 0; a < dim_; ++a) {
            d = std::min(d, std::min(m[a], nodes_[a] - 1 - m[a]));
        }
        return d;
    }

    bool contains(std::span<const double> x, double margin = 0.0) const noexcept {
        for (int a = 0; a < dim_; ++a) {
            if (std::abs(x[a]) > half_[a] - margin) return false;
        }
        return true;
    }

    friend bool operator==(const GridSpec& a, const GridSpec& b) noexcept {
        if (a.dim_ != b.dim_ || a.spacing_ != b.spacing_) return false;
        for (int i = 0; i < a.dim_; ++i) {
            if (a.nodes_[i] != b.nodes_[i]) return false;
        }
        return true;
    }

private:
    void finish() {
        count_ = 1;
        for (int a = dim_ - 1; a >= 0; --a) {
            stride_[a] = static_cast<std::ptrdiff_t>(count_);
            count_ *= nodes_[a];
        }
    }

    int dim_ = 0;
    std::array<std::size_t, kMaxDim> nodes_{};
    std::array<double, kMaxDim> half_{};
    std::array<std::ptrdiff_t, kMaxDim> stride_{};
    std::size_t count_ = 0;
    double spacing_ = 0.0;
};

/// Number of independent components of a symmetric 2-tensor.
constexpr int sym_components(int dim) noexcept { return dim * (dim + 1) / 2; }

/// Lower-triangular storage slot of (i, j): (0,0),(1,0),(1,1),(2,0),...
constexpr int sym_index(int i, int j) noexcept {
    return i >= j ? i * (i + 1) / 2 + j : j * (j + 1) / 2 + i;
}

}  // namespace rdflab
