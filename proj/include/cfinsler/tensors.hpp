#pragma once

// Pointwise tensors of a strongly pseudoconvex metric: Levi matrix and
// inverse, connection coefficients Gamma^a_{;i} and their v-, vbar- and
// zbar-derivatives, holomorphic curvature, the Kahler residual, the torsion
// contraction, the curvature-torsion contraction H_a(v), and the residual of
// the complex-geodesic existence condition
//   [Gamma^a_{;i jbar} - Gamma^a_{mubar;i} Gamma^mubar_{;jbar}] v^i vbar^j = 2 G v^a.
//
// Index conventions: for arrays named gamma_* the superscript index comes
// first, then lower v/vbar indices, then z/zbar indices. G^{a bbar} is the
// matrix W with sum_mu W[a][mu] G[c][mu-bar] = delta_{ac}.

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cfinsler/fd.hpp"
#include "cfinsler/linalg.hpp"

namespace cfinsler {

struct TensorOptions {
    bool with_h = true;
    bool crosscheck_curvature = true;
    double pseudoconvex_rtol = 1e-8;     // min eigenvalue threshold, relative to trace/n
    double curvature_route_rtol = 1e-8;  // the two curvature routes must agree this well
};

struct TensorPack {
    TangentPoint site;
    int n = 0;
    CMatrix levi;              // G_{a bbar}
    CMatrix levi_inverse;      // G^{a bbar}
    double min_levi_eigenvalue = 0.0;
    std::vector<complexd> gamma;        // [a][i]       Gamma^a_{;i}
    std::vector<complexd> gamma_dzbar;  // [a][i][j]    Gamma^a_{;i jbar}
    std::vector<complexd> gamma_dv;     // [a][b][i]    Gamma^a_{b;i}
    std::vector<complexd> gamma_dvbar;  // [a][b][i]    Gamma^a_{bbar;i}
    std::vector<complexd> sigma;        // [a][i][j]    Sigma^a_{;i jbar}
    double curvature = 0.0;             // K_F
    double curvature_crosscheck = 0.0;  // second route, at the unit vector
    std::vector<complexd> kahler_residual;
    std::vector<complexd> torsion_contracted;
    std::vector<complexd> h_contracted;
    std::vector<complexd> geodesic_condition_residual;
    bool has_h = false;

    complexd& g3(std::vector<complexd>& t, int a, int b, int c) {
        return t[(static_cast<std::size_t>(a) * n + b) * n + c];
    }
    const complexd& at3(const std::vector<complexd>& t, int a, int b, int c) const {
        return t[(static_cast<std::size_t>(a) * n + b) * n + c];
    }
};

namespace detail {

struct JetSet {
    int n = 0;
    complexd G;
    std::vector<complexd> Gv, Gz;                  // n
    CMatrix M;                                     // G_{a bbar}
    std::vector<complexd> Gvv;                     // n^2      G_{ab}
    std::vector<complexd> Gvz, Gvbz, Gvzb, Gzzb;   // n^2
    std::vector<complexd> Gvvv;                    // n^3      G_{abc}
    std::vector<complexd> Gvvvb;                   // n^3      G_{ab cbar}
    std::vector<complexd> Gvvbz;                   // n^3      G_{a bbar ;i}
    std::vector<complexd> Gvvzb;                   // n^3      G_{ab ;jbar}
    std::vector<complexd> Gvbvbz;                  // n^3      G_{abar bbar ;i}
    std::vector<complexd> Gvbzzb;                  // n^3      G_{abar ;i jbar}
    std::vector<complexd> Gvvbzzb;                 // n^4      G_{a bbar ;i jbar}
    std::vector<complexd> Gvvvbzb;                 // n^4      G_{ab cbar ;jbar}
    bool with_h = false;

    std::size_t i2(int a, int b) const { return static_cast<std::size_t>(a) * n + b; }
    std::size_t i3(int a, int b, int c) const { return (static_cast<std::size_t>(a) * n + b) * n + c; }
    std::size_t i4(int a, int b, int c, int d) const {
        return ((static_cast<std::size_t>(a) * n + b) * n + c) * n + d;
    }
};

inline MultiIndex mi_of(std::vector<std::pair<VarKind, int>> parts) {
    return MultiIndex::of(std::move(parts));
}

// Evaluates the jets the tensor formulas consume, at a diagonal site.
// Conjugate-symmetric partners are filled by conjugation.
inline JetSet gather_jets(const CompiledMetric& metric, const FormalPoint& fp, bool with_h) {
    const int n = metric.dim();
    JetSet js;
    js.n = n;
    js.with_h = with_h;
    const EvalPoint pt = fp.view();
    metric.check_domain(fp.z, fp.zbar);
    auto ev = [&](std::vector<std::pair<VarKind, int>> parts) {
        return metric.derivative_tape(mi_of(std::move(parts))).eval(pt);
    };
    using VK = VarKind;

    js.G = ev({});
    js.Gv.resize(n);
    js.Gz.resize(n);
    for (int a = 0; a < n; ++a) js.Gv[a] = ev({{VK::V, a}});
    for (int i = 0; i < n; ++i) js.Gz[i] = ev({{VK::Z, i}});

    js.M = CMatrix(n);
    js.Gvv.assign(static_cast<std::size_t>(n) * n, {});
    js.Gvz.assign(static_cast<std::size_t>(n) * n, {});
    js.Gvbz.assign(static_cast<std::size_t>(n) * n, {});
    js.Gvzb.assign(static_cast<std::size_t>(n) * n, {});
    js.Gzzb.assign(static_cast<std::size_t>(n) * n, {});
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            js.M.at(a, b) = ev({{VK::V, a}, {VK::VBar, b}});
            js.Gvz[js.i2(a, b)] = ev({{VK::V, a}, {VK::Z, b}});
            js.Gvbz[js.i2(a, b)] = ev({{VK::VBar, a}, {VK::Z, b}});
            js.Gzzb[js.i2(a, b)] = ev({{VK::Z, a}, {VK::ZBar, b}});
            js.Gvzb[js.i2(a, b)] = std::conj(js.Gvbz[js.i2(a, b)]);
            if (a <= b) js.Gvv[js.i2(a, b)] = ev({{VK::V, a}, {VK::V, b}});
        }
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < a; ++b) js.Gvv[js.i2(a, b)] = js.Gvv[js.i2(b, a)];

    const std::size_t n3 = static_cast<std::size_t>(n) * n * n;
    js.Gvvv.assign(n3, {});
    js.Gvvvb.assign(n3, {});
    js.Gvvbz.assign(n3, {});
    js.Gvvzb.assign(n3, {});
    js.Gvbvbz.assign(n3, {});
    js.Gvbzzb.assign(n3, {});
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) {
                if (a <= b && b <= c) js.Gvvv[js.i3(a, b, c)] = ev({{VK::V, a}, {VK::V, b}, {VK::V, c}});
                if (a <= b) {
                    js.Gvvvb[js.i3(a, b, c)] = ev({{VK::V, a}, {VK::V, b}, {VK::VBar, c}});
                    js.Gvvzb[js.i3(a, b, c)] = ev({{VK::V, a}, {VK::V, b}, {VK::ZBar, c}});
                }
                js.Gvvbz[js.i3(a, b, c)] = ev({{VK::V, a}, {VK::VBar, b}, {VK::Z, c}});
                js.Gvbzzb[js.i3(a, b, c)] = ev({{VK::VBar, a}, {VK::Z, b}, {VK::ZBar, c}});
            }
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) {
                if (!(a <= b && b <= c)) {
                    int s[3] = {a, b, c};
                    std::sort(s, s + 3);
                    js.Gvvv[js.i3(a, b, c)] = js.Gvvv[js.i3(s[0], s[1], s[2])];
                }
                if (a > b) {
                    js.Gvvvb[js.i3(a, b, c)] = js.Gvvvb[js.i3(b, a, c)];
                    js.Gvvzb[js.i3(a, b, c)] = js.Gvvzb[js.i3(b, a, c)];
                }
                // G_{abar bbar ;i} = conj(G_{ab ;ibar})
                js.Gvbvbz[js.i3(a, b, c)] = std::conj(js.Gvvzb[js.i3(a, b, c)]);
            }

    if (with_h) {
        const std::size_t n4 = n3 * n;
        js.Gvvbzzb.assign(n4, {});
        js.Gvvvbzb.assign(n4, {});
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = 0; c < n; ++c)
                    for (int d = 0; d < n; ++d) {
                        js.Gvvbzzb[js.i4(a, b, c, d)] =
                            ev({{VK::V, a}, {VK::VBar, b}, {VK::Z, c}, {VK::ZBar, d}});
                        if (a <= b)
                            js.Gvvvbzb[js.i4(a, b, c, d)] =
                                ev({{VK::V, a}, {VK::V, b}, {VK::VBar, c}, {VK::ZBar, d}});
                    }
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < a; ++b)
                for (int c = 0; c < n; ++c)
                    for (int d = 0; d < n; ++d)
                        js.Gvvvbzb[js.i4(a, b, c, d)] = js.Gvvvbzb[js.i4(b, a, c, d)];
    }
    return js;
}

// The multi-indices gather_jets evaluates directly (no conjugate fills);
// this is the contract the finite-difference oracle sweep checks.
inline std::vector<MultiIndex> used_jet_indices(int n, bool with_h) {
    using VK = VarKind;
    std::vector<MultiIndex> out;
    auto push = [&](std::vector<std::pair<VarKind, int>> parts) {
        out.push_back(mi_of(std::move(parts)));
    };
    push({});
    for (int a = 0; a < n; ++a) push({{VK::V, a}});
    for (int i = 0; i < n; ++i) push({{VK::Z, i}});
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            push({{VK::V, a}, {VK::VBar, b}});
            push({{VK::V, a}, {VK::Z, b}});
            push({{VK::VBar, a}, {VK::Z, b}});
            push({{VK::Z, a}, {VK::ZBar, b}});
            if (a <= b) push({{VK::V, a}, {VK::V, b}});
        }
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) {
                if (a <= b && b <= c) push({{VK::V, a}, {VK::V, b}, {VK::V, c}});
                if (a <= b) {
                    push({{VK::V, a}, {VK::V, b}, {VK::VBar, c}});
                    push({{VK::V, a}, {VK::V, b}, {VK::ZBar, c}});
                }
                push({{VK::V, a}, {VK::VBar, b}, {VK::Z, c}});
                push({{VK::VBar, a}, {VK::Z, b}, {VK::ZBar, c}});
            }
    if (with_h)
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = 0; c < n; ++c)
                    for (int d = 0; d < n; ++d) {
                        push({{VK::V, a}, {VK::VBar, b}, {VK::Z, c}, {VK::ZBar, d}});
                        if (a <= b) push({{VK::V, a}, {VK::V, b}, {VK::VBar, c}, {VK::ZBar, d}});
                    }
    return out;
}

// G^{a bbar}: sum_mu W[a][mu] M[c][mu] = delta_{ac}.
inline CMatrix levi_inverse_of(const CMatrix& m) {
    CMatrix mt(m.n);
    for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j) mt.at(i, j) = m.at(j, i);
    return lu_inverse(mt);
}

// d/dzbar^j of G^{a bbar}: -G^{a nubar} G^{b mubar}... assembled from the
// derivative-of-inverse rule; DM[b][nu] is the zbar_j derivative of the Levi
// matrix, i.e. G_{b nubar ;jbar}.
inline CMatrix inverse_derivative(const CMatrix& w, const std::function<complexd(int, int)>& dm) {
    const int n = w.n;
    CMatrix dw(n);
    for (int a = 0; a < n; ++a)
        for (int m = 0; m < n; ++m) {
            complexd acc(0.0, 0.0);
            for (int nu = 0; nu < n; ++nu)
                for (int b = 0; b < n; ++b) acc += w.at(a, nu) * w.at(b, m) * dm(b, nu);
            dw.at(a, m) = -acc;
        }
    return dw;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Levi matrix op
// ---------------------------------------------------------------------------

struct LeviResult {
    CMatrix matrix;
    CMatrix inverse;
    double min_eigenvalue;
};

inline LeviResult levi(const CompiledMetric& metric, const TangentPoint& site,
                       double pseudoconvex_rtol = 1e-8) {
    const int n = metric.dim();
    bool vzero = true;
    for (auto c : site.v)
        if (c != complexd(0.0, 0.0)) vzero = false;
    if (vzero) throw PreconditionError("tensor evaluation requires v != 0");
    FormalPoint fp = FormalPoint::diagonal(site);
    metric.check_domain(fp.z, fp.zbar);
    CMatrix m(n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            m.at(a, b) = metric.eval_formal(MultiIndex{{VarKind::V, a}, {VarKind::VBar, b}}, fp);
    double mineig = hermitian_min_eigenvalue(m);
    double trace = 0.0;
    for (int a = 0; a < n; ++a) trace += m.at(a, a).real();
    double threshold = pseudoconvex_rtol * trace / n;
    if (mineig <= threshold)
        throw SingularLevi("Levi matrix not positive definite at site (min eigenvalue " +
                               format_double(mineig) + ")",
                           mineig);
    LeviResult r{m, detail::levi_inverse_of(m), mineig};
    return r;
}

// ---------------------------------------------------------------------------
// Full tensor pack
// ---------------------------------------------------------------------------

inline TensorPack evaluate_tensors(const CompiledMetric& metric, const TangentPoint& site,
                                   const TensorOptions& opts = {}) {
    const int n = metric.dim();
    LeviResult lv = levi(metric, site, opts.pseudoconvex_rtol);
    detail::JetSet js = detail::gather_jets(metric, FormalPoint::diagonal(site), opts.with_h);
    const CMatrix& W = lv.inverse;

    TensorPack tp;
    tp.site = site;
    tp.n = n;
    tp.levi = lv.matrix;
    tp.levi_inverse = W;
    tp.min_levi_eigenvalue = lv.min_eigenvalue;
    tp.has_h = opts.with_h;

    const std::size_t n2 = static_cast<std::size_t>(n) * n;
    const std::size_t n3 = n2 * n;
    tp.gamma.assign(n2, {});
    tp.gamma_dzbar.assign(n3, {});
    tp.gamma_dv.assign(n3, {});
    tp.gamma_dvbar.assign(n3, {});
    tp.sigma.assign(n3, {});
    tp.kahler_residual.assign(n, {});
    tp.torsion_contracted.assign(n, {});
    tp.geodesic_condition_residual.assign(n, {});

    // Gamma^a_{;i} = G^{a mubar} G_{mubar;i}
    for (int a = 0; a < n; ++a)
        for (int i = 0; i < n; ++i) {
            complexd acc(0.0, 0.0);
            for (int m = 0; m < n; ++m) acc += W.at(a, m) * js.Gvbz[js.i2(m, i)];
            tp.gamma[js.i2(a, i)] = acc;
        }

    // zbar_j derivatives of the inverse
    std::vector<CMatrix> dW(n);
    for (int j = 0; j < n; ++j) {
        dW[j] = detail::inverse_derivative(W, [&](int b, int nu) {
            // G_{b nubar ;jbar} = conj(G_{nu bbar ;j})
            return std::conj(js.Gvvbz[js.i3(nu, b, j)]);
        });
    }

    // Gamma^a_{;i jbar}
    for (int a = 0; a < n; ++a)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                complexd acc(0.0, 0.0);
                for (int m = 0; m < n; ++m) {
                    acc += W.at(a, m) * js.Gvbzzb[js.i3(m, i, j)];
                    acc += dW[j].at(a, m) * js.Gvbz[js.i2(m, i)];
                }
                tp.g3(tp.gamma_dzbar, a, i, j) = acc;
            }

    // Gamma^a_{b;i} and Gamma^a_{bbar;i}
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int i = 0; i < n; ++i) {
                complexd accv(0.0, 0.0), accvb(0.0, 0.0);
                for (int m = 0; m < n; ++m) {
                    accv += W.at(a, m) * js.Gvvbz[js.i3(b, m, i)];
                    accvb += W.at(a, m) * js.Gvbvbz[js.i3(m, b, i)];
                }
                for (int g = 0; g < n; ++g)
                    for (int m = 0; m < n; ++m)
                        for (int nu = 0; nu < n; ++nu) {
                            const complexd ww = W.at(g, m) * W.at(a, nu) * js.Gvbz[js.i2(m, i)];
                            accv -= ww * js.Gvvvb[js.i3(g, b, nu)];
                            // G_{g nubar bbar} = conj(G_{nu b gbar})
                            accvb -= ww * std::conj(js.Gvvvb[js.i3(nu, b, g)]);
                        }
                tp.g3(tp.gamma_dv, a, b, i) = accv;
                tp.g3(tp.gamma_dvbar, a, b, i) = accvb;
            }

    // Sigma^a_{;i jbar} = Gamma^a_{;i jbar} - Gamma^a_{mubar;i} Gamma^mubar_{;jbar}
    for (int a = 0; a < n; ++a)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                complexd acc = tp.at3(tp.gamma_dzbar, a, i, j);
                for (int m = 0; m < n; ++m)
                    acc -= tp.at3(tp.gamma_dvbar, a, m, i) * std::conj(tp.gamma[js.i2(m, j)]);
                tp.g3(tp.sigma, a, i, j) = acc;
            }

    const std::vector<complexd>& v = site.v;
    auto vbar = [&](int i) { return std::conj(v[i]); };

    // K_F = -(2/G^2) G_a Gamma^a_{;i jbar} v^i vbar^j, checked against the
    // route through the second z-derivatives at the unit vector.
    {
        complexd acc(0.0, 0.0);
        for (int a = 0; a < n; ++a)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    acc += js.Gv[a] * tp.at3(tp.gamma_dzbar, a, i, j) * v[i] * vbar(j);
        const double g = js.G.real();
        complexd k = -2.0 * acc / (g * g);
        if (std::abs(k.imag()) > 1e-10 * (1.0 + std::abs(k.real())))
            throw InternalCheckError("holomorphic curvature has a non-negligible imaginary part");
        tp.curvature = k.real();
    }
    if (opts.crosscheck_curvature) {
        TangentPoint unit = site;
        const double f = metric.norm_f(site);
        for (auto& c : unit.v) c /= f;
        detail::JetSet uj;
        {
            FormalPoint ufp = FormalPoint::diagonal(unit);
            const EvalPoint upt = ufp.view();
            metric.check_domain(ufp.z, ufp.zbar);
            uj.n = n;
            uj.M = CMatrix(n);
            uj.Gvbz.assign(n2, {});
            uj.Gzzb.assign(n2, {});
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    uj.M.at(a, b) = metric.derivative_tape(
                        MultiIndex{{VarKind::V, a}, {VarKind::VBar, b}}).eval(upt);
                    uj.Gvbz[uj.i2(a, b)] = metric.derivative_tape(
                        MultiIndex{{VarKind::VBar, a}, {VarKind::Z, b}}).eval(upt);
                    uj.Gzzb[uj.i2(a, b)] = metric.derivative_tape(
                        MultiIndex{{VarKind::Z, a}, {VarKind::ZBar, b}}).eval(upt);
                }
            CMatrix uw = detail::levi_inverse_of(uj.M);
            complexd acc(0.0, 0.0);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    complexd term = uj.Gzzb[uj.i2(i, j)];
                    for (int a = 0; a < n; ++a)
                        for (int b = 0; b < n; ++b)
                            term -= uw.at(a, b) * std::conj(uj.Gvbz[uj.i2(a, j)]) *
                                    uj.Gvbz[uj.i2(b, i)];
                    acc += term * unit.v[i] * std::conj(unit.v[j]);
                }
            tp.curvature_crosscheck = (-2.0 * acc).real();
        }
        double dis = std::abs(tp.curvature - tp.curvature_crosscheck) /
                     (1.0 + std::abs(tp.curvature));
        if (dis > opts.curvature_route_rtol)
            throw InternalCheckError("holomorphic curvature routes disagree by " +
                                     format_double(dis));
    } else {
        tp.curvature_crosscheck = tp.curvature;
    }

    // Kahler residual [G_{i;a} - G_{a;i} + G_{ab} Gamma^b_{;i}] v^i
    for (int a = 0; a < n; ++a) {
        complexd acc(0.0, 0.0);
        for (int i = 0; i < n; ++i) {
            complexd term = js.Gvz[js.i2(i, a)] - js.Gvz[js.i2(a, i)];
            for (int b = 0; b < n; ++b) term += js.Gvv[js.i2(a, b)] * tp.gamma[js.i2(b, i)];
            acc += term * v[i];
        }
        tp.kahler_residual[a] = acc;
    }

    // T_{a i mubar} vbar^mu v^i with T_{a i mubar} = G_{b mubar}(Gamma^b_{i;a} - Gamma^b_{a;i})
    for (int a = 0; a < n; ++a) {
        complexd acc(0.0, 0.0);
        for (int b = 0; b < n; ++b)
            for (int m = 0; m < n; ++m)
                for (int i = 0; i < n; ++i)
                    acc += lv.matrix.at(b, m) * vbar(m) *
                           (tp.at3(tp.gamma_dv, b, i, a) - tp.at3(tp.gamma_dv, b, a, i)) * v[i];
        tp.torsion_contracted[a] = acc;
    }

    // Existence condition residual Sigma^a_{;i jbar} v^i vbar^j - 2 G v^a
    for (int a = 0; a < n; ++a) {
        complexd acc(0.0, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) acc += tp.at3(tp.sigma, a, i, j) * v[i] * vbar(j);
        tp.geodesic_condition_residual[a] = acc - 2.0 * js.G.real() * v[a];
    }

    if (opts.with_h) {
        tp.h_contracted.assign(n, {});
        // (Gamma^t_{b;a})_{;jbar}
        std::vector<complexd> dzb_gamma_dv(static_cast<std::size_t>(n) * n3, complexd(0.0, 0.0));
        auto dg = [&](int t, int b, int a, int j) -> complexd& {
            return dzb_gamma_dv[((static_cast<std::size_t>(t) * n + b) * n + a) * n + j];
        };
        for (int t = 0; t < n; ++t)
            for (int b = 0; b < n; ++b)
                for (int a = 0; a < n; ++a)
                    for (int j = 0; j < n; ++j) {
                        complexd acc(0.0, 0.0);
                        for (int m = 0; m < n; ++m) {
                            acc += dW[j].at(t, m) * js.Gvvbz[js.i3(b, m, a)];
                            acc += W.at(t, m) * js.Gvvbzzb[js.i4(b, m, a, j)];
                        }
                        for (int g = 0; g < n; ++g)
                            for (int m = 0; m < n; ++m)
                                for (int nu = 0; nu < n; ++nu) {
                                    acc -= dW[j].at(g, m) * W.at(t, nu) * js.Gvvvb[js.i3(g, b, nu)] *
                                           js.Gvbz[js.i2(m, a)];
                                    acc -= W.at(g, m) * dW[j].at(t, nu) * js.Gvvvb[js.i3(g, b, nu)] *
                                           js.Gvbz[js.i2(m, a)];
                                    acc -= W.at(g, m) * W.at(t, nu) * js.Gvvvbzb[js.i4(g, b, nu, j)] *
                                           js.Gvbz[js.i2(m, a)];
                                    acc -= W.at(g, m) * W.at(t, nu) * js.Gvvvb[js.i3(g, b, nu)] *
                                           js.Gvbzzb[js.i3(m, a, j)];
                                }
                        dg(t, b, a, j) = acc;
                    }
        // H_a(v) = [G_t (Gamma^t_{i;a} - Gamma^t_{a;i})_{;jbar} - G_{ta} Gamma^t_{;i jbar}] v^i vbar^j
        for (int a = 0; a < n; ++a) {
            complexd acc(0.0, 0.0);
            for (int t = 0; t < n; ++t)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        acc += js.Gv[t] * (dg(t, i, a, j) - dg(t, a, i, j)) * v[i] * vbar(j);
                        acc -= js.Gvv[js.i2(t, a)] * tp.at3(tp.gamma_dzbar, t, i, j) * v[i] * vbar(j);
                    }
            tp.h_contracted[a] = acc;
        }
    }
    return tp;
}

// ---------------------------------------------------------------------------
// Thin per-tensor wrappers
// ---------------------------------------------------------------------------

inline std::vector<complexd> gamma_coefficients(const CompiledMetric& m, const TangentPoint& s) {
    TensorOptions o;
    o.with_h = false;
    o.crosscheck_curvature = false;
    return evaluate_tensors(m, s, o).gamma;
}

inline double holomorphic_curvature(const CompiledMetric& m, const TangentPoint& s) {
    TensorOptions o;
    o.with_h = false;
    return evaluate_tensors(m, s, o).curvature;
}

inline std::vector<complexd> kahler_residual(const CompiledMetric& m, const TangentPoint& s) {
    TensorOptions o;
    o.with_h = false;
    o.crosscheck_curvature = false;
    return evaluate_tensors(m, s, o).kahler_residual;
}

inline std::vector<complexd> torsion_T_contracted(const CompiledMetric& m, const TangentPoint& s) {
    TensorOptions o;
    o.with_h = false;
    o.crosscheck_curvature = false;
    return evaluate_tensors(m, s, o).torsion_contracted;
}

inline std::vector<complexd> tensor_H_contracted(const CompiledMetric& m, const TangentPoint& s) {
    TensorOptions o;
    o.with_h = true;
    o.crosscheck_curvature = false;
    return evaluate_tensors(m, s, o).h_contracted;
}

inline std::vector<complexd> geodesic_condition_residual(const CompiledMetric& m,
                                                         const TangentPoint& s) {
    TensorOptions o;
    o.with_h = false;
    o.crosscheck_curvature = false;
    return evaluate_tensors(m, s, o).geodesic_condition_residual;
}

inline double max_abs(const std::vector<complexd>& xs) {
    double m = 0.0;
    for (auto c : xs) m = std::max(m, std::abs(c));
    return m;
}

// ---------------------------------------------------------------------------
// Identity suite: homogeneity contractions, inverse-matrix identities, the
// torsion route match, and the two curvature routes, each as a max residual
// normalized by 1 + |reference|.
// ---------------------------------------------------------------------------

struct IdentityRow {
    std::string name;
    double residual;
};

struct IdentityReport {
    std::vector<IdentityRow> rows;
    double max_residual = 0.0;

    void add(std::string name, double r) {
        rows.push_back({std::move(name), r});
        max_residual = std::max(max_residual, r);
    }
};

inline IdentityReport identity_suite(const CompiledMetric& metric, const TangentPoint& site) {
    const int n = metric.dim();
    TensorOptions opts;
    opts.with_h = false;
    TensorPack tp = evaluate_tensors(metric, site, opts);
    detail::JetSet js = detail::gather_jets(metric, FormalPoint::diagonal(site), false);
    const CMatrix& W = tp.levi_inverse;
    const std::vector<complexd>& v = site.v;
    auto vbar = [&](int i) { return std::conj(v[i]); };
    auto rel = [](complexd lhs, complexd rhs) {
        return std::abs(lhs - rhs) / (1.0 + std::abs(rhs));
    };

    IdentityReport rep;
    double r;

    // G_{a bbar} vbar^b = G_a ; G_{ab} v^b = 0
    r = 0.0;
    for (int a = 0; a < n; ++a) {
        complexd acc(0.0, 0.0);
        for (int b = 0; b < n; ++b) acc += tp.levi.at(a, b) * vbar(b);
        r = std::max(r, rel(acc, js.Gv[a]));
    }
    rep.add("hom_levi_vbar", r);
    r = 0.0;
    for (int a = 0; a < n; ++a) {
        complexd acc(0.0, 0.0);
        for (int b = 0; b < n; ++b) acc += js.Gvv[js.i2(a, b)] * v[b];
        r = std::max(r, rel(acc, 0.0));
    }
    rep.add("hom_vv_v", r);

    // G_{abc} v^c = -G_{ab} ; G_{ab cbar} vbar^c = G_{ab} ; G_{a bbar c} v^c = 0
    double r1 = 0.0, r2 = 0.0, r3 = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            complexd s1(0.0, 0.0), s2(0.0, 0.0), s3(0.0, 0.0);
            for (int c = 0; c < n; ++c) {
                s1 += js.Gvvv[js.i3(a, b, c)] * v[c];
                s2 += js.Gvvvb[js.i3(a, b, c)] * vbar(c);
                // G_{a bbar c} = G_{ac bbar}
                s3 += js.Gvvvb[js.i3(a, c, b)] * v[c];
            }
            r1 = std::max(r1, rel(s1, -js.Gvv[js.i2(a, b)]));
            r2 = std::max(r2, rel(s2, js.Gvv[js.i2(a, b)]));
            r3 = std::max(r3, rel(s3, 0.0));
        }
    rep.add("hom_vvv_v", r1);
    rep.add("hom_vvvb_vb", r2);
    rep.add("hom_vvbv_v", r3);

    // Euler relations: G_a v^a = G ; G_{ab} v^a v^b = 0 ; G_{a bbar} v^a vbar^b = G
    {
        complexd s1(0.0, 0.0), s2(0.0, 0.0), s3(0.0, 0.0);
        for (int a = 0; a < n; ++a) {
            s1 += js.Gv[a] * v[a];
            for (int b = 0; b < n; ++b) {
                s2 += js.Gvv[js.i2(a, b)] * v[a] * v[b];
                s3 += tp.levi.at(a, b) * v[a] * vbar(b);
            }
        }
        rep.add("euler_value", rel(s1, js.G));
        rep.add("euler_vv", rel(s2, 0.0));
        rep.add("euler_levi", rel(s3, js.G));
    }

    // G_{abar;i} vbar^a = G_{;i}
    r = 0.0;
    for (int i = 0; i < n; ++i) {
        complexd acc(0.0, 0.0);
        for (int a = 0; a < n; ++a) acc += js.Gvbz[js.i2(a, i)] * vbar(a);
        r = std::max(r, rel(acc, js.Gz[i]));
    }
    rep.add("hom_mixed_z", r);

    // G^{a bbar} G_a = vbar^b
    r = 0.0;
    for (int b = 0; b < n; ++b) {
        complexd acc(0.0, 0.0);
        for (int a = 0; a < n; ++a) acc += W.at(a, b) * js.Gv[a];
        r = std::max(r, rel(acc, vbar(b)));
    }
    rep.add("inv_contract_grad", r);

    // G_{bbar;i} G^{a bbar} G_a = G_{;i}
    r = 0.0;
    for (int i = 0; i < n; ++i) {
        complexd acc(0.0, 0.0);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) acc += js.Gvbz[js.i2(b, i)] * W.at(a, b) * js.Gv[a];
        r = std::max(r, rel(acc, js.Gz[i]));
    }
    rep.add("inv_grad_z", r);

    // Derivative-of-inverse rule: for D in {d/dv^g, d/dz^i},
    // (DW) M^T + W (DM)^T = 0 with DW from the rule itself.
    r = 0.0;
    for (int dir = 0; dir < 2 * n; ++dir) {
        const bool vdir = dir < n;
        const int g = vdir ? dir : dir - n;
        auto dm = [&](int b, int nu) {
            return vdir ? js.Gvvvb[js.i3(b, g, nu)] : js.Gvvbz[js.i3(b, nu, g)];
        };
        CMatrix dw = detail::inverse_derivative(W, dm);
        double scale = 0.0;
        CMatrix resid(n);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                complexd acc(0.0, 0.0);
                for (int m = 0; m < n; ++m)
                    acc += dw.at(a, m) * tp.levi.at(b, m) + W.at(a, m) * dm(b, m);
                resid.at(a, b) = acc;
                scale = std::max(scale, std::abs(dw.at(a, b)));
            }
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                r = std::max(r, std::abs(resid.at(a, b)) / (1.0 + scale));
    }
    rep.add("inverse_derivative", r);

    // G^{a bbar}_{sbar} vbar^s = 0, via the derivative rule and homogeneity
    r = 0.0;
    {
        CMatrix acc(n);
        for (int s = 0; s < n; ++s) {
            auto dm = [&](int b, int nu) {
                // G_{b nubar sbar} = conj(G_{nu s bbar})
                return std::conj(js.Gvvvb[js.i3(nu, s, b)]);
            };
            CMatrix dw = detail::inverse_derivative(W, dm);
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) acc.at(a, b) += dw.at(a, b) * vbar(s);
        }
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) r = std::max(r, rel(acc.at(a, b), 0.0));
    }
    rep.add("inv_vbar_contract", r);

    // G_{bbar} G^{a bbar}_g = 0
    r = 0.0;
    for (int g = 0; g < n; ++g) {
        auto dm = [&](int b, int nu) { return js.Gvvvb[js.i3(b, g, nu)]; };
        CMatrix dw = detail::inverse_derivative(W, dm);
        for (int a = 0; a < n; ++a) {
            complexd acc(0.0, 0.0);
            for (int b = 0; b < n; ++b) acc += std::conj(js.Gv[b]) * dw.at(a, b);
            r = std::max(r, rel(acc, 0.0));
        }
    }
    rep.add("inv_v_contract", r);

    // Torsion route match: the Kahler-residual form equals the torsion form
    r = 0.0;
    for (int a = 0; a < n; ++a)
        r = std::max(r, rel(tp.torsion_contracted[a], tp.kahler_residual[a]));
    rep.add("torsion_route_match", r);

    // Gamma^a_{bbar;i} vbar^b = 0
    r = 0.0;
    for (int a = 0; a < n; ++a)
        for (int i = 0; i < n; ++i) {
            complexd acc(0.0, 0.0);
            for (int b = 0; b < n; ++b) acc += tp.at3(tp.gamma_dvbar, a, b, i) * vbar(b);
            r = std::max(r, rel(acc, 0.0));
        }
    rep.add("gamma_vbar_contract", r);

    // Curvature bridge: G_a Gamma^a_{;i jbar} = G_{;i jbar} - G^{b mubar} G_{b;jbar} G_{mubar;i}
    r = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            complexd lhs(0.0, 0.0);
            for (int a = 0; a < n; ++a) lhs += js.Gv[a] * tp.at3(tp.gamma_dzbar, a, i, j);
            complexd rhs = js.Gzzb[js.i2(i, j)];
            for (int b = 0; b < n; ++b)
                for (int m = 0; m < n; ++m)
                    rhs -= W.at(b, m) * js.Gvzb[js.i2(b, j)] * js.Gvbz[js.i2(m, i)];
            r = std::max(r, rel(lhs, rhs));
        }
    rep.add("curvature_bridge", r);

    rep.add("curvature_route_match",
            std::abs(tp.curvature - tp.curvature_crosscheck) / (1.0 + std::abs(tp.curvature)));
    return rep;
}

// ---------------------------------------------------------------------------
// Torsion contraction at a formal point (used to differentiate T along the
// conjugate flow direction) and the flow-derivative identity check
//   H_a(v) = Xbar(T_a(v)) - G_{as} Sigma^s_{;i jbar} v^i vbar^j.
// ---------------------------------------------------------------------------

inline std::vector<complexd> torsion_contracted_formal(const CompiledMetric& metric,
                                                       const FormalPoint& fp) {
    const int n = metric.dim();
    const EvalPoint pt = fp.view();
    metric.check_domain(fp.z, fp.zbar);
    using VK = VarKind;
    auto ev = [&](std::vector<std::pair<VarKind, int>> parts) {
        return metric.derivative_tape(MultiIndex::of(std::move(parts))).eval(pt);
    };
    CMatrix m(n);
    std::vector<complexd> gvbz(static_cast<std::size_t>(n) * n);
    std::vector<complexd> gvvbz(static_cast<std::size_t>(n) * n * n);
    std::vector<complexd> gvvvb(static_cast<std::size_t>(n) * n * n);
    auto i2 = [&](int a, int b) { return static_cast<std::size_t>(a) * n + b; };
    auto i3 = [&](int a, int b, int c) { return (static_cast<std::size_t>(a) * n + b) * n + c; };
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            m.at(a, b) = ev({{VK::V, a}, {VK::VBar, b}});
            gvbz[i2(a, b)] = ev({{VK::VBar, a}, {VK::Z, b}});
        }
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) {
                gvvbz[i3(a, b, c)] = ev({{VK::V, a}, {VK::VBar, b}, {VK::Z, c}});
                gvvvb[i3(a, b, c)] = ev({{VK::V, a}, {VK::V, b}, {VK::VBar, c}});
            }
    CMatrix w;
    try {
        w = detail::levi_inverse_of(m);
    } catch (const std::runtime_error&) {
        throw SingularLevi("Levi matrix singular at formal evaluation point",
                           std::numeric_limits<double>::quiet_NaN());
    }
    // Gamma^a_{b;i}
    std::vector<complexd> gdv(static_cast<std::size_t>(n) * n * n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int i = 0; i < n; ++i) {
                complexd acc(0.0, 0.0);
                for (int mu = 0; mu < n; ++mu) acc += w.at(a, mu) * gvvbz[i3(b, mu, i)];
                for (int g = 0; g < n; ++g)
                    for (int mu = 0; mu < n; ++mu)
                        for (int nu = 0; nu < n; ++nu)
                            acc -= w.at(g, mu) * w.at(a, nu) * gvvvb[i3(g, b, nu)] *
                                   gvbz[i2(mu, i)];
                gdv[i3(a, b, i)] = acc;
            }
    std::vector<complexd> t(n);
    for (int a = 0; a < n; ++a) {
        complexd acc(0.0, 0.0);
        for (int b = 0; b < n; ++b)
            for (int mu = 0; mu < n; ++mu)
                for (int i = 0; i < n; ++i)
                    acc += m.at(b, mu) * fp.vbar[mu] * (gdv[i3(b, i, a)] - gdv[i3(b, a, i)]) *
                           fp.v[i];
        t[a] = acc;
    }
    return t;
}

inline double flow_identity_residual(const CompiledMetric& metric, const TangentPoint& site,
                                     double fd_step = 1e-3) {
    const int n = metric.dim();
    TensorPack tp = evaluate_tensors(metric, site, {});
    FormalPoint base = FormalPoint::diagonal(site);

    // Conjugate flow direction: zbar moves along vbar, vbar along
    // -conj(Gamma^g_{;j} v^j).
    FormalPoint delta;
    delta.z.assign(n, complexd(0.0, 0.0));
    delta.v.assign(n, complexd(0.0, 0.0));
    delta.zbar = base.vbar;
    delta.vbar.assign(n, complexd(0.0, 0.0));
    for (int g = 0; g < n; ++g) {
        complexd acc(0.0, 0.0);
        for (int j = 0; j < n; ++j)
            acc += tp.gamma[static_cast<std::size_t>(g) * n + j] * site.v[j];
        delta.vbar[g] = -std::conj(acc);
    }

    detail::JetSet js = detail::gather_jets(metric, base, false);
    // Sigma^s_{;i jbar} v^i vbar^j per superscript s
    std::vector<complexd> sig_v(n);
    for (int s = 0; s < n; ++s) {
        complexd c(0.0, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                c += tp.at3(tp.sigma, s, i, j) * site.v[i] * std::conj(site.v[j]);
        sig_v[s] = c;
    }

    double worst = 0.0;
    for (int a = 0; a < n; ++a) {
        complexd xbar_t = fd_directional(
            [&](const FormalPoint& fp) { return torsion_contracted_formal(metric, fp)[a]; }, base,
            delta, fd_step);
        complexd sig(0.0, 0.0);
        for (int s = 0; s < n; ++s) sig += js.Gvv[js.i2(a, s)] * sig_v[s];
        complexd lhs = tp.h_contracted[a];
        complexd rhs = xbar_t - sig;
        worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(lhs)));
    }
    return worst;
}

}  // namespace cfinsler
