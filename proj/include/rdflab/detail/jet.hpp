#pragma once

// Node-local derivative jets of a metric and the quantities built from them.
// Everything here works on one node at a time with compact stencils, so the
// curvature and flow kernels need a halo of one stencil width only.

#include <array>
#include <cstddef>

#include "rdflab/detail/linalg.hpp"
#include "rdflab/field.hpp"
#include "rdflab/grid.hpp"
#include "rdflab/stencil.hpp"

namespace rdflab::detail {

template <int N>
using Vec = std::array<double, N>;
template <int N>
using T3 = std::array<Mat<N>, N>;
template <int N>
using T4 = std::array<T3<N>, N>;

template <int N>
struct Jet {
    Mat<N> g{};
    Mat<N> gi{};
    double det = 0.0;
    T3<N> dg{};   // dg[a][i][j] = d_a g_ij
    T4<N> ddg{};  // ddg[a][b][i][j] = d_a d_b g_ij
};

/// Raw component pointers of a symmetric tensor field plus strides.
template <int N>
struct SymView {
    std::array<const double*, N*(N + 1) / 2> comp{};
    std::array<std::ptrdiff_t, N> stride{};
    double inv_h = 0.0;
    double inv_h2 = 0.0;

    explicit SymView(const SymTensorField& f) {
        for (int c = 0; c < N * (N + 1) / 2; ++c) comp[c] = f.component(c).data();
        for (int a = 0; a < N; ++a) stride[a] = f.grid().stride(a);
        inv_h = 1.0 / f.grid().spacing();
        inv_h2 = inv_h * inv_h;
    }
};

template <int N>
void load_values(const SymView<N>& v, std::size_t n, Mat<N>& g) noexcept {
    for (int i = 0; i < N; ++i)
        for (int j = 0; j <= i; ++j) {
            const double x = v.comp[sym_index(i, j)][n];
            g[i][j] = x;
            g[j][i] = x;
        }
}

/// Values, first and second derivatives and inverse at node n.
template <int N, StencilOrder O, bool Second = true>
void load_jet(const SymView<N>& v, std::size_t n, Jet<N>& J) noexcept {
    for (int i = 0; i < N; ++i)
        for (int j = 0; j <= i; ++j) {
            const double* p = v.comp[sym_index(i, j)] + n;
            J.g[i][j] = J.g[j][i] = p[0];
            for (int a = 0; a < N; ++a) {
                const double d = diff1<O>(p, v.stride[a], v.inv_h);
                J.dg[a][i][j] = J.dg[a][j][i] = d;
            }
            if constexpr (Second) {
                for (int a = 0; a < N; ++a) {
                    const double daa = diff2<O>(p, v.stride[a], v.inv_h2);
                    J.ddg[a][a][i][j] = J.ddg[a][a][j][i] = daa;
                    for (int b = 0; b < a; ++b) {
                        const double dab = diff11<O>(p, v.stride[a], v.stride[b], v.inv_h2);
                        J.ddg[a][b][i][j] = J.ddg[a][b][j][i] = dab;
                        J.ddg[b][a][i][j] = J.ddg[b][a][j][i] = dab;
                    }
                }
            }
        }
    invert<N>(J.g, J.gi, J.det);
}

/// Christoffel symbols and their first derivatives at a node.
template <int N>
struct Connection {
    T3<N> first{};  // first[l][i][j] = Gamma_{l ij}
    T3<N> gamma{};  // gamma[k][i][j] = Gamma^k_ij
    T4<N> dgamma{}; // dgamma[m][k][i][j] = d_m Gamma^k_ij
    T4<N> dfirst{}; // dfirst[m][l][i][j] = d_m Gamma_{l ij}
};

template <int N, bool Derivs = true>
void connection(const Jet<N>& J, Connection<N>& C) noexcept {
    for (int l = 0; l < N; ++l)
        for (int i = 0; i < N; ++i)
            for (int j = 0; j <= i; ++j) {
                const double v = 0.5 * (J.dg[i][j][l] + J.dg[j][i][l] - J.dg[l][i][j]);
                C.first[l][i][j] = C.first[l][j][i] = v;
            }
    for (int k = 0; k < N; ++k)
        for (int i = 0; i < N; ++i)
            for (int j = 0; j <= i; ++j) {
                double acc = 0.0;
                for (int l = 0; l < N; ++l) acc += J.gi[k][l] * C.first[l][i][j];
                C.gamma[k][i][j] = C.gamma[k][j][i] = acc;
            }
    if constexpr (Derivs) {
        for (int m = 0; m < N; ++m)
            for (int l = 0; l < N; ++l)
                for (int i = 0; i < N; ++i)
                    for (int j = 0; j <= i; ++j) {
                        const double v = 0.5 * (J.ddg[m][i][j][l] + J.ddg[m][j][i][l] - J.ddg[m][l][i][j]);
                        C.dfirst[m][l][i][j] = C.dfirst[m][l][j][i] = v;
                    }
        // d_m Gamma^k_ij = g^{kl} (d_m Gamma_{l ij} - d_m g_{lb} Gamma^b_ij)
        for (int m = 0; m < N; ++m)
            for (int i = 0; i < N; ++i)
                for (int j = 0; j <= i; ++j) {
                    Vec<N> t{};
                    for (int l = 0; l < N; ++l) {
                        double acc = C.dfirst[m][l][i][j];
                        for (int b = 0; b < N; ++b) acc -= J.dg[m][l][b] * C.gamma[b][i][j];
                        t[l] = acc;
                    }
                    for (int k = 0; k < N; ++k) {
                        double acc = 0.0;
                        for (int l = 0; l < N; ++l) acc += J.gi[k][l] * t[l];
                        C.dgamma[m][k][i][j] = C.dgamma[m][k][j][i] = acc;
                    }
                }
    }
}

/// R^l_ijk = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik
template <int N>
double riemann_component(const Connection<N>& C, int l, int i, int j, int k) noexcept {
    double v = C.dgamma[i][l][j][k] - C.dgamma[j][l][i][k];
    for (int m = 0; m < N; ++m) v += C.gamma[l][i][m] * C.gamma[m][j][k] - C.gamma[l][j][m] * C.gamma[m][i][k];
    return v;
}

/// Ricci R_jk = R^i_ijk.
template <int N>
Mat<N> ricci_tensor(const Connection<N>& C) noexcept {
    Mat<N> r{};
    for (int j = 0; j < N; ++j)
        for (int k = 0; k <= j; ++k) {
            double v = 0.0;
            for (int i = 0; i < N; ++i) v += riemann_component<N>(C, i, i, j, k);
            r[j][k] = r[k][j] = v;
        }
    return r;
}

template <int N>
double trace(const Mat<N>& gi, const Mat<N>& t) noexcept {
    double s = 0.0;
    for (int j = 0; j < N; ++j)
        for (int k = 0; k < N; ++k) s += gi[j][k] * t[j][k];
    return s;
}

/// Fully covariant curvature R_ijkl = g_km R^m_ijl, flattened (((i*N+j)*N+k)*N+l).
template <int N>
void riemann_lowered(const Jet<N>& J, const Connection<N>& C, double* out) noexcept {
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int l = 0; l < N; ++l) {
                Vec<N> up{};
                for (int m = 0; m < N; ++m) up[m] = riemann_component<N>(C, m, i, j, l);
                for (int k = 0; k < N; ++k) {
                    double acc = 0.0;
                    for (int m = 0; m < N; ++m) acc += J.g[k][m] * up[m];
                    out[((i * N + j) * N + k) * N + l] = acc;
                }
            }
}

constexpr int ipow(int b, int e) noexcept {
    int r = 1;
    while (e-- > 0) r *= b;
    return r;
}

/// |T|^2 with every index raised by gi; T is a flattened rank-R covariant tensor.
template <int N, int R>
double squared_norm(const double* t, const Mat<N>& gi) noexcept {
    constexpr int size = ipow(N, R);
    std::array<double, size> a{}, b{};
    for (int q = 0; q < size; ++q) a[q] = t[q];
    // raise one index position per pass
    for (int pos = 0; pos < R; ++pos) {
        const int inner = ipow(N, R - 1 - pos);
        for (int q = 0; q < size; ++q) {
            const int idx = (q / inner) % N;
            const int base = q - idx * inner;
            double acc = 0.0;
            for (int m = 0; m < N; ++m) acc += gi[idx][m] * a[base + m * inner];
            b[q] = acc;
        }
        a = b;
    }
    double s = 0.0;
    for (int q = 0; q < size; ++q) s += a[q] * t[q];
    return s;
}

/// Covariant derivative of a rank-R covariant tensor given its partials:
/// out[a, I] = dT[a, I] - sum_s Gamma^b_{a i_s} T[I with i_s -> b].
template <int N, int R>
void covariant_derivative(const double* dT, const double* t, const T3<N>& gamma, double* out) noexcept {
    constexpr int size = ipow(N, R);
    for (int a = 0; a < N; ++a)
        for (int q = 0; q < size; ++q) {
            double v = dT[a * size + q];
            for (int pos = 0; pos < R; ++pos) {
                const int inner = ipow(N, R - 1 - pos);
                const int idx = (q / inner) % N;
                const int base = q - idx * inner;
                for (int b = 0; b < N; ++b) v -= gamma[b][a][idx] * t[base + b * inner];
            }
            out[a * size + q] = v;
        }
}

}  // namespace rdflab::detail
