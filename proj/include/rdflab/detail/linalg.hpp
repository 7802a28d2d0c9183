#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <utility>

namespace rdflab::detail {

template <int N>
using Mat = std::array<std::array<double, N>, N>;

/// Inverse and determinant by Gauss-Jordan elimination with partial pivoting.
/// Returns false for an exactly singular matrix. Scaling the input by a power
/// of two scales the inverse by the reciprocal power exactly.
template <int N>
bool invert(const Mat<N>& m, Mat<N>& inv, double& det) noexcept {
    if constexpr (N == 3) {
        // cofactors of the symmetric matrix; same power-of-two scaling property
        const double c00 = m[1][1] * m[2][2] - m[1][2] * m[1][2];
        const double c01 = m[1][2] * m[0][2] - m[0][1] * m[2][2];
        const double c02 = m[0][1] * m[1][2] - m[1][1] * m[0][2];
        det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
        if (det == 0.0 || !std::isfinite(det)) return false;
        const double r = 1.0 / det;
        inv[0][0] = c00 * r;
        inv[0][1] = inv[1][0] = c01 * r;
        inv[0][2] = inv[2][0] = c02 * r;
        inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[0][2]) * r;
        inv[1][2] = inv[2][1] = (m[0][1] * m[0][2] - m[0][0] * m[1][2]) * r;
        inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[0][1]) * r;
        return true;
    }
    Mat<N> a = m;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) inv[i][j] = (i == j) ? 1.0 : 0.0;
    det = 1.0;
    for (int c = 0; c < N; ++c) {
        int piv = c;
        for (int r = c + 1; r < N; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        if (a[piv][c] == 0.0) {
            det = 0.0;
            return false;
        }
        if (piv != c) {
            std::swap(a[piv], a[c]);
            std::swap(inv[piv], inv[c]);
            det = -det;
        }
        const double p = a[c][c];
        det *= p;
        for (int j = 0; j < N; ++j) {
            a[c][j] /= p;
            inv[c][j] /= p;
        }
        for (int r = 0; r < N; ++r) {
            if (r == c) continue;
            const double f = a[r][c];
            if (f == 0.0) continue;
            for (int j = 0; j < N; ++j) {
                a[r][j] -= f * a[c][j];
                inv[r][j] -= f * inv[c][j];
            }
        }
    }
    // symmetrise: the inverse of a symmetric matrix is symmetric
    for (int i = 0; i < N; ++i)
        for (int j = i + 1; j < N; ++j) {
            const double s = 0.5 * (inv[i][j] + inv[j][i]);
            inv[i][j] = s;
            inv[j][i] = s;
        }
    return true;
}

template <int N>
double determinant(const Mat<N>& m) noexcept {
    Mat<N> inv;
    double det = 0.0;
    invert<N>(m, inv, det);
    return det;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations (ascending).
template <int N>
std::array<double, N> sym_eigenvalues(Mat<N> a) noexcept {
    for (int sweep = 0; sweep < 50; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < N; ++p)
            for (int q = p + 1; q < N; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-300) break;
        for (int p = 0; p < N; ++p) {
            for (int q = p + 1; q < N; ++q) {
                if (a[p][q] == 0.0) continue;
                const double theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < N; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < N; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::array<double, N> ev{};
    for (int i = 0; i < N; ++i) ev[i] = a[i][i];
    for (int i = 1; i < N; ++i)
        for (int j = i; j > 0 && ev[j] < ev[j - 1]; --j) std::swap(ev[j], ev[j - 1]);
    return ev;
}

/// Frobenius distance to the identity; bounds |lambda - 1| for every eigenvalue.
template <int N>
double identity_distance(const Mat<N>& a) noexcept {
    double s = 0.0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const double d = a[i][j] - (i == j ? 1.0 : 0.0);
            s += d * d;
        }
    return std::sqrt(s);
}

}  // namespace rdflab::detail
