#pragma once

// Finite-difference oracle for Wirtinger jets, independent of the symbolic
// path. Each complex variable splits into two real axes; a holomorphic slot
// contributes (1/2)(d/dx - i d/dy), an anti-holomorphic slot
// (1/2)(d/dx + i d/dy). Real mixed partials use tensor-product central
// stencils; one Richardson step (h, h/2) removes the leading h^2 error.

#include <functional>
#include <map>
#include <vector>

#include "cfinsler/metric.hpp"

namespace cfinsler {

namespace detail {

// Central-difference stencils for pure derivatives of order 1..4, all O(h^2).
// Entries are (offset, weight); weights are divided by h^order by the caller.
inline const std::vector<std::pair<int, double>>& central_stencil(int order) {
    static const std::vector<std::pair<int, double>> s1 = {{-1, -0.5}, {1, 0.5}};
    static const std::vector<std::pair<int, double>> s2 = {{-1, 1.0}, {0, -2.0}, {1, 1.0}};
    static const std::vector<std::pair<int, double>> s3 = {{-2, -0.5}, {-1, 1.0}, {1, -1.0}, {2, 0.5}};
    static const std::vector<std::pair<int, double>> s4 = {
        {-2, 1.0}, {-1, -4.0}, {0, 6.0}, {1, -4.0}, {2, 1.0}};
    switch (order) {
        case 1: return s1;
        case 2: return s2;
        case 3: return s3;
        default: return s4;
    }
}

struct RealAxisTerm {
    std::vector<int> axes;  // sorted real-axis ids, with multiplicity
    complexd coeff;
};

}  // namespace detail

// One finite-difference estimate of a Wirtinger jet with real step h per
// unit coordinate scale (no Richardson).
inline complexd fd_jet_single(const CompiledMetric& metric, const TangentPoint& site,
                              const MultiIndex& mi, double h) {
    const int n = metric.dim();
    // Real axis ids: coordinate c in [0, 2n) (z block then v block);
    // axis 2c is the real part, 2c+1 the imaginary part.
    std::map<std::vector<int>, complexd> terms;
    terms[{}] = complexd(1.0, 0.0);
    for (auto [kind, idx] : mi.parts()) {
        int c = (kind == VarKind::Z || kind == VarKind::ZBar) ? idx : n + idx;
        double sgn = is_barred(kind) ? 1.0 : -1.0;
        std::map<std::vector<int>, complexd> next;
        for (const auto& [axes, coeff] : terms) {
            std::vector<int> ax = axes;
            ax.push_back(2 * c);
            std::sort(ax.begin(), ax.end());
            next[ax] += coeff * 0.5;
            std::vector<int> ay = axes;
            ay.push_back(2 * c + 1);
            std::sort(ay.begin(), ay.end());
            next[ay] += coeff * complexd(0.0, sgn * 0.5);
        }
        terms = std::move(next);
    }

    // Per-coordinate steps scaled by (1 + |coordinate|).
    std::vector<double> step(2 * static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) step[i] = h * (1.0 + std::abs(site.p[i]));
    for (int i = 0; i < n; ++i) step[n + i] = h * (1.0 + std::abs(site.v[i]));

    const FormalPoint base = FormalPoint::diagonal(site);
    std::map<std::vector<std::pair<int, int>>, complexd> point_cache;
    auto value_at = [&](const std::vector<std::pair<int, int>>& offsets) -> complexd {
        auto it = point_cache.find(offsets);
        if (it != point_cache.end()) return it->second;
        FormalPoint fp = base;
        for (auto [axis, k] : offsets) {
            int c = axis / 2;
            double d = k * step[c];
            bool imag_axis = axis % 2 == 1;
            complexd dz = imag_axis ? complexd(0.0, d) : complexd(d, 0.0);
            if (c < n) {
                fp.z[c] += dz;
                fp.zbar[c] += std::conj(dz);
            } else {
                fp.v[c - n] += dz;
                fp.vbar[c - n] += std::conj(dz);
            }
        }
        complexd val = metric.eval_formal(MultiIndex{}, fp);
        point_cache.emplace(offsets, val);
        return val;
    };

    complexd total(0.0, 0.0);
    for (const auto& [axes, coeff] : terms) {
        if (std::abs(coeff.real()) + std::abs(coeff.imag()) == 0.0) continue;
        // Group the axis multiset into (axis, multiplicity) pairs.
        std::vector<std::pair<int, int>> groups;
        for (std::size_t i = 0; i < axes.size();) {
            std::size_t j = i;
            while (j < axes.size() && axes[j] == axes[i]) ++j;
            groups.emplace_back(axes[i], static_cast<int>(j - i));
            i = j;
        }
        // Tensor product of the per-axis stencils.
        std::vector<std::pair<std::vector<std::pair<int, int>>, double>> stencil = {{{}, 1.0}};
        double denom = 1.0;
        for (auto [axis, mult] : groups) {
            denom *= fold_ipow(step[axis / 2], mult);
            const auto& st = detail::central_stencil(mult);
            std::vector<std::pair<std::vector<std::pair<int, int>>, double>> grown;
            grown.reserve(stencil.size() * st.size());
            for (const auto& [offs, w] : stencil)
                for (const auto& [o, sw] : st) {
                    auto offs2 = offs;
                    if (o != 0) offs2.emplace_back(axis, o);
                    grown.emplace_back(std::move(offs2), w * sw);
                }
            stencil = std::move(grown);
        }
        complexd acc(0.0, 0.0);
        for (auto& [offs, w] : stencil) {
            std::sort(offs.begin(), offs.end());
            acc += w * value_at(offs);
        }
        total += coeff * (acc / denom);
    }
    return total;
}

// Central differences with one Richardson extrapolation step (h, h/2).
// Sensible steps depend on the total order: noise grows like eps/h^order,
// so order-4 jets want h around 1e-2 while the 1e-3 default fits orders <= 2.
inline complexd fd_jet(const CompiledMetric& metric, const TangentPoint& site,
                       const MultiIndex& mi, double h = 1e-3) {
    if (mi.order() > kMaxDerivOrder)
        throw PreconditionError("finite differences support order <= 4");
    if (mi.order() == 0) return metric.jet(mi, site);
    complexd coarse = fd_jet_single(metric, site, mi, h);
    complexd fine = fd_jet_single(metric, site, mi, h / 2.0);
    return (4.0 * fine - coarse) / 3.0;
}

// Recommended oracle step per total derivative order: noise grows like
// eps/h^order while the post-Richardson truncation grows like h^4, so
// orders 3 and 4 balance near 8e-3.
inline double fd_default_step(int order) {
    return order >= 3 ? 8e-3 : 1e-3;
}

// Directional derivative of a scalar field on formal points along a fixed
// shift of the (z, zbar, v, vbar) slots, central differences plus one
// Richardson step. Used to apply first-order flow operators.
inline complexd fd_directional(const std::function<complexd(const FormalPoint&)>& f,
                               const FormalPoint& base, const FormalPoint& delta, double h) {
    auto shifted = [&](double s) {
        FormalPoint fp = base;
        for (std::size_t i = 0; i < fp.z.size(); ++i) {
            fp.z[i] += s * (i < delta.z.size() ? delta.z[i] : complexd(0.0));
            fp.zbar[i] += s * (i < delta.zbar.size() ? delta.zbar[i] : complexd(0.0));
        }
        for (std::size_t i = 0; i < fp.v.size(); ++i) {
            fp.v[i] += s * (i < delta.v.size() ? delta.v[i] : complexd(0.0));
            fp.vbar[i] += s * (i < delta.vbar.size() ? delta.vbar[i] : complexd(0.0));
        }
        return f(fp);
    };
    auto central = [&](double step) { return (shifted(step) - shifted(-step)) / (2.0 * step); };
    complexd coarse = central(h);
    complexd fine = central(h / 2.0);
    return (4.0 * fine - coarse) / 3.0;
}

}  // namespace cfinsler
