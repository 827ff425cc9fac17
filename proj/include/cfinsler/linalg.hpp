#pragma once

// Small dense complex linear algebra for n <= 8: LU with partial pivoting
// and a Jacobi eigenvalue sweep on the realified form of a hermitian matrix.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "cfinsler/expr.hpp"

namespace cfinsler {

struct CMatrix {
    int n = 0;
    std::vector<complexd> a;

    CMatrix() = default;
    explicit CMatrix(int n) : n(n), a(static_cast<std::size_t>(n) * n, complexd(0.0, 0.0)) {}

    complexd& at(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
    const complexd& at(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
};

inline CMatrix matmul(const CMatrix& x, const CMatrix& y) {
    CMatrix r(x.n);
    for (int i = 0; i < x.n; ++i)
        for (int k = 0; k < x.n; ++k) {
            complexd xik = x.at(i, k);
            if (xik == complexd(0.0, 0.0)) continue;
            for (int j = 0; j < x.n; ++j) r.at(i, j) += xik * y.at(k, j);
        }
    return r;
}

// Inverse by LU with partial pivoting. Throws std::runtime_error on a pivot
// collapse; callers translate into SingularLevi where appropriate.
inline CMatrix lu_inverse(const CMatrix& m) {
    const int n = m.n;
    CMatrix lu = m;
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        double best = std::abs(lu.at(col, col));
        for (int r = col + 1; r < n; ++r) {
            double v = std::abs(lu.at(r, col));
            if (v > best) { best = v; piv = r; }
        }
        if (best == 0.0) throw std::runtime_error("singular matrix in LU factorization");
        if (piv != col) {
            for (int j = 0; j < n; ++j) std::swap(lu.at(piv, j), lu.at(col, j));
            std::swap(perm[piv], perm[col]);
        }
        const complexd d = lu.at(col, col);
        for (int r = col + 1; r < n; ++r) {
            complexd f = lu.at(r, col) / d;
            lu.at(r, col) = f;
            for (int j = col + 1; j < n; ++j) lu.at(r, j) -= f * lu.at(col, j);
        }
    }
    CMatrix inv(n);
    std::vector<complexd> x(n);
    for (int rhs = 0; rhs < n; ++rhs) {
        for (int i = 0; i < n; ++i) x[i] = perm[i] == rhs ? complexd(1.0, 0.0) : complexd(0.0, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < i; ++j) x[i] -= lu.at(i, j) * x[j];
        for (int i = n - 1; i >= 0; --i) {
            for (int j = i + 1; j < n; ++j) x[i] -= lu.at(i, j) * x[j];
            x[i] /= lu.at(i, i);
        }
        for (int i = 0; i < n; ++i) inv.at(i, rhs) = x[i];
    }
    return inv;
}

// Minimum eigenvalue of a hermitian matrix via cyclic Jacobi on the
// realification [[B, -C], [C, B]] of A = B + iC.
inline double hermitian_min_eigenvalue(const CMatrix& m) {
    const int n = m.n;
    const int N = 2 * n;
    std::vector<double> s(static_cast<std::size_t>(N) * N, 0.0);
    auto at = [&](int i, int j) -> double& { return s[static_cast<std::size_t>(i) * N + j]; };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double b = m.at(i, j).real();
            double c = m.at(i, j).imag();
            at(i, j) = b;
            at(n + i, n + j) = b;
            at(i, n + j) = -c;
            at(n + i, j) = c;
        }
    double scale = 0.0;
    for (int i = 0; i < N; ++i) scale = std::max(scale, std::abs(at(i, i)));
    scale = std::max(scale, 1e-300);
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < N; ++i)
            for (int j = i + 1; j < N; ++j) off += at(i, j) * at(i, j);
        if (std::sqrt(off) < 1e-15 * scale * N) break;
        for (int p = 0; p < N - 1; ++p)
            for (int q = p + 1; q < N; ++q) {
                double apq = at(p, q);
                if (std::abs(apq) < 1e-18 * scale) continue;
                double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double sn = t * c;
                for (int k = 0; k < N; ++k) {
                    double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - sn * akq;
                    at(k, q) = sn * akp + c * akq;
                }
                for (int k = 0; k < N; ++k) {
                    double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - sn * aqk;
                    at(q, k) = sn * apk + c * aqk;
                }
            }
    }
    double mn = at(0, 0);
    for (int i = 1; i < N; ++i) mn = std::min(mn, at(i, i));
    return mn;
}

}  // namespace cfinsler
