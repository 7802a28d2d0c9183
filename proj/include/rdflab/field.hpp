#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "rdflab/error.hpp"
#include "rdflab/grid.hpp"

namespace rdflab {

enum class FieldKind { scalar, vector, sym_tensor, general };

/// Node data on a grid, stored component-major: component c occupies
/// [c*N, (c+1)*N) with N the node count, nodes in row-major order.
template <FieldKind Kind>
class Field {
public:
    Field() = default;

    explicit Field(GridSpec grid, double fill = 0.0)
        requires(Kind != FieldKind::general)
        : grid_(std::move(grid)), comps_(default_components(grid_.dim())),
          data_(static_cast<std::size_t>(comps_) * grid_.node_count(), fill) {}

    Field(GridSpec grid, int components, double fill = 0.0)
        requires(Kind == FieldKind::general)
        : grid_(std::move(grid)), comps_(components),
          data_(static_cast<std::size_t>(comps_) * grid_.node_count(), fill) {}

    static constexpr int default_components(int dim) noexcept {
        switch (Kind) {
            case FieldKind::scalar: return 1;
            case FieldKind::vector: return dim;
            case FieldKind::sym_tensor: return sym_components(dim);
            default: return 1;
        }
    }

    const GridSpec& grid() const noexcept { return grid_; }
    int components() const noexcept { return comps_; }
    std::size_t node_count() const noexcept { return grid_.node_count(); }

    std::span<double> component(int c) noexcept {
        return {data_.data() + static_cast<std::size_t>(c) * node_count(), node_count()};
    }
    std::span<const double> component(int c) const noexcept {
        return {data_.data() + static_cast<std::size_t>(c) * node_count(), node_count()};
    }

    double& at(int c, std::size_t node) noexcept { return data_[static_cast<std::size_t>(c) * node_count() + node]; }
    double at(int c, std::size_t node) const noexcept {
        return data_[static_cast<std::size_t>(c) * node_count() + node];
    }

    /// Symmetric-tensor accessor (i, j in either order).
    double operator()(int i, int j, std::size_t node) const noexcept
        requires(Kind == FieldKind::sym_tensor)
    {
        return at(sym_index(i, j), node);
    }

    double operator[](std::size_t node) const noexcept
        requires(Kind == FieldKind::scalar)
    {
        return data_[node];
    }
    double& operator[](std::size_t node) noexcept
        requires(Kind == FieldKind::scalar)
    {
        return data_[node];
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool all_finite() const noexcept {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    Field& operator+=(const Field& o) {
        check_same(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Field& operator-=(const Field& o) {
        check_same(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Field& operator*=(double s) noexcept {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(double s, Field a) { return a *= s; }

    friend bool operator==(const Field& a, const Field& b) noexcept {
        return a.grid_ == b.grid_ && a.comps_ == b.comps_ && a.data_ == b.data_;
    }

    void check_same(const Field& o) const {
        if (!(grid_ == o.grid_) || comps_ != o.comps_) {
            throw InvalidArgument("field shape mismatch");
        }
    }

private:
    GridSpec grid_;
    int comps_ = 0;
    std::vector<double> data_;
};

using ScalarField = Field<FieldKind::scalar>;
using VectorField = Field<FieldKind::vector>;
using SymTensorField = Field<FieldKind::sym_tensor>;
using GeneralField = Field<FieldKind::general>;

/// Euclidean metric delta_ij on a grid.
inline SymTensorField euclidean_tensor(const GridSpec& grid) {
    SymTensorField g(grid, 0.0);
    for (int i = 0; i < grid.dim(); ++i) {
        auto c = g.component(sym_index(i, i));
        std::fill(c.begin(), c.end(), 1.0);
    }
    return g;
}

/// Fills a scalar field from f(x) evaluated at every node.
template <class F>
ScalarField sample(const GridSpec& grid, F&& f) {
    ScalarField out(grid);
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
        const auto x = grid.position(n);
        out[n] = f(std::span<const double>(x.data(), static_cast<std::size_t>(grid.dim())));
    }
    return out;
}

}  // namespace rdflab
