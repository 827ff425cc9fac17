#pragma once

// Compiled metrics: an expression tree for G = F^2 together with a lazily
// filled, memoized cache of symbolic Wirtinger derivatives up to total
// order 4, evaluated through flat tapes.

#include <array>
#include <initializer_list>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cfinsler/parser.hpp"

namespace cfinsler {

constexpr int kMaxDimension = 8;
constexpr int kMaxDerivOrder = 4;

// A derivative multi-index: a sorted multiset of (variable group, index)
// pairs. Mixed partials commute, so the sorted form is the cache key.
class MultiIndex {
public:
    MultiIndex() = default;

    MultiIndex(std::initializer_list<std::pair<VarKind, int>> parts)
        : parts_(parts) {
        normalize();
    }

    static MultiIndex of(std::vector<std::pair<VarKind, int>> parts) {
        MultiIndex m;
        m.parts_ = std::move(parts);
        m.normalize();
        return m;
    }

    MultiIndex extended(VarKind k, int idx) const {
        MultiIndex m = *this;
        m.parts_.emplace_back(k, idx);
        m.normalize();
        return m;
    }

    int order() const { return static_cast<int>(parts_.size()); }
    bool empty() const { return parts_.empty(); }
    const std::vector<std::pair<VarKind, int>>& parts() const { return parts_; }

    // Sorted-last entry and the index with it removed; used to walk the
    // derivative cache parent chain deterministically.
    std::pair<VarKind, int> last() const { return parts_.back(); }

    MultiIndex parent() const {
        MultiIndex m = *this;
        m.parts_.pop_back();
        return m;
    }

    MultiIndex conj_swapped() const {
        MultiIndex m;
        m.parts_.reserve(parts_.size());
        for (auto [k, i] : parts_) m.parts_.emplace_back(bar_partner(k), i);
        m.normalize();
        return m;
    }

    std::uint64_t key() const {
        std::uint64_t k = 0;
        for (auto [kind, idx] : parts_)
            k = (k << 8) | (static_cast<std::uint64_t>(kind) << 4 | static_cast<std::uint64_t>(idx + 1));
        return k;
    }

    std::string name() const {
        if (parts_.empty()) return "G";
        std::string s = "G[";
        for (std::size_t i = 0; i < parts_.size(); ++i) {
            if (i) s += ' ';
            switch (parts_[i].first) {
                case VarKind::Z: s += 'z'; break;
                case VarKind::ZBar: s += "zb"; break;
                case VarKind::V: s += 'v'; break;
                case VarKind::VBar: s += "vb"; break;
            }
            s += std::to_string(parts_[i].second + 1);
        }
        return s + ']';
    }

private:
    void normalize() {
        std::sort(parts_.begin(), parts_.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return static_cast<int>(a.first) < static_cast<int>(b.first);
            return a.second < b.second;
        });
    }

    std::vector<std::pair<VarKind, int>> parts_;
};

// Evaluation sites. TangentPoint is a genuine point of the chart: the barred
// slots are the conjugates. FormalPoint carries all four slots independently,
// which the finite-difference machinery and the flow-direction derivative use.
struct TangentPoint {
    std::vector<complexd> p, v;
};

struct FormalPoint {
    std::vector<complexd> z, zbar, v, vbar;

    static FormalPoint diagonal(const TangentPoint& s) {
        FormalPoint f;
        f.z = s.p;
        f.v = s.v;
        f.zbar.reserve(s.p.size());
        f.vbar.reserve(s.v.size());
        for (auto c : s.p) f.zbar.push_back(std::conj(c));
        for (auto c : s.v) f.vbar.push_back(std::conj(c));
        return f;
    }

    EvalPoint view() const { return EvalPoint{z, zbar, v, vbar}; }
};

struct JetTable {
    TangentPoint site;
    std::unordered_map<std::uint64_t, complexd> values;

    complexd at(const MultiIndex& mi) const {
        auto it = values.find(mi.key());
        if (it == values.end())
            throw PreconditionError("jet table does not contain " + mi.name());
        return it->second;
    }
};

// Arity and index validation for expression trees that did not come through
// the parser (catalog code or tests may build them directly).
inline void validate_expr(const Expr& e, int n) {
    switch (e.op) {
        case ExprOp::Const:
            if (!e.args.empty() || !std::isfinite(e.cval))
                throw PreconditionError("invalid constant node");
            return;
        case ExprOp::Var:
            if (!e.args.empty() || e.index < 0 || e.index >= n)
                throw PreconditionError("variable index out of range 1.." + std::to_string(n));
            return;
        case ExprOp::Add:
        case ExprOp::Mul:
            if (e.args.empty()) throw PreconditionError("empty n-ary node");
            break;
        case ExprOp::Div:
            if (e.args.size() != 2) throw PreconditionError("division takes two operands");
            break;
        case ExprOp::Pow:
        case ExprOp::Sqrt:
        case ExprOp::Exp:
        case ExprOp::Log:
        case ExprOp::Conj:
            if (e.args.size() != 1) throw PreconditionError("unary node arity mismatch");
            break;
    }
    for (const auto& a : e.args) {
        if (!a) throw PreconditionError("null child in expression tree");
        validate_expr(*a, n);
    }
}

class CompiledMetric {
public:
    CompiledMetric(MetricAst ast, MetricDomain domain = {}, std::string name = "metric",
                   bool complete_declared = false)
        : ast_(std::move(ast)), domain_(domain), name_(std::move(name)),
          complete_(complete_declared) {
        if (ast_.dimension < 1 || ast_.dimension > kMaxDimension)
            throw PreconditionError("metric dimension must lie in 1.." +
                                    std::to_string(kMaxDimension));
        if (!ast_.root) throw PreconditionError("metric expression missing");
        validate_expr(*ast_.root, ast_.dimension);
    }

    CompiledMetric(const CompiledMetric&) = delete;
    CompiledMetric& operator=(const CompiledMetric&) = delete;

    int dim() const { return ast_.dimension; }
    const MetricDomain& domain() const { return domain_; }
    const std::string& name() const { return name_; }
    bool complete_declared() const { return complete_; }
    const MetricAst& ast() const { return ast_; }

    void check_domain(std::span<const complexd> z, std::span<const complexd> zbar) const {
        if (domain_.kind == DomainKind::All) return;
        double r2 = domain_.radius * domain_.radius;
        double nz = 0.0, nzb = 0.0;
        for (auto c : z) nz += std::norm(c);
        for (auto c : zbar) nzb += std::norm(c);
        if (nz >= r2 || nzb >= r2)
            throw DomainError("point outside the metric domain (ball of radius " +
                              format_double(domain_.radius) + ")");
    }

    complexd eval_formal(const MultiIndex& mi, const FormalPoint& fp) const {
        check_domain(fp.z, fp.zbar);
        return derivative_tape(mi).eval(fp.view());
    }

    complexd jet(const MultiIndex& mi, const TangentPoint& site) const {
        return eval_formal(mi, FormalPoint::diagonal(site));
    }

    // G at a chart point; the value is real for well-formed metrics.
    double value(const TangentPoint& site) const { return jet(MultiIndex{}, site).real(); }

    double norm_f(const TangentPoint& site) const { return std::sqrt(std::max(0.0, value(site))); }

    // Requested jets plus the conjugate-swapped closure.
    JetTable eval_jet(const TangentPoint& site, const std::vector<MultiIndex>& orders) const {
        JetTable table;
        table.site = site;
        FormalPoint fp = FormalPoint::diagonal(site);
        for (const auto& mi : orders) {
            complexd val = eval_formal(mi, fp);
            table.values[mi.key()] = val;
            MultiIndex sw = mi.conj_swapped();
            if (table.values.find(sw.key()) == table.values.end())
                table.values[sw.key()] = std::conj(val);
        }
        return table;
    }

    const ExprPtr& derivative_ast(const MultiIndex& mi) const { return entry(mi).ast; }
    const Tape& derivative_tape(const MultiIndex& mi) const { return entry(mi).tape; }

    std::size_t cache_size() const {
        std::shared_lock lk(mu_);
        return cache_.size();
    }

private:
    struct DerivEntry {
        ExprPtr ast;
        Tape tape;
    };

    const DerivEntry& entry(const MultiIndex& mi) const {
        if (mi.order() > kMaxDerivOrder)
            throw PreconditionError("derivative order above " + std::to_string(kMaxDerivOrder) +
                                    " rejected: " + mi.name());
        const std::uint64_t key = mi.key();
        {
            std::shared_lock lk(mu_);
            auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        ExprPtr d;
        if (mi.empty()) {
            d = ast_.root;
        } else {
            auto [k, idx] = mi.last();
            const DerivEntry& parent = entry(mi.parent());
            d = differentiate(parent.ast, k, idx);
        }
        std::unique_lock lk(mu_);
        auto [it, inserted] = cache_.try_emplace(key);
        if (inserted) {
            it->second.ast = std::move(d);
            it->second.tape = Tape(it->second.ast);
        }
        return it->second;
    }

    MetricAst ast_;
    MetricDomain domain_;
    std::string name_;
    bool complete_;
    mutable std::shared_mutex mu_;
    mutable std::unordered_map<std::uint64_t, DerivEntry> cache_;
};

inline CompiledMetric compile(MetricAst ast) { return CompiledMetric(std::move(ast)); }

// ---------------------------------------------------------------------------
// (1,1)-homogeneity check: G(z; t v) = |t|^2 G(z; v)
// ---------------------------------------------------------------------------

struct HomogeneitySample {
    TangentPoint site;
    complexd lambda;
};

struct HomogeneityReport {
    struct Row {
        complexd lambda;
        double residual;
    };
    std::vector<Row> rows;
    double max_residual = 0.0;
};

inline HomogeneityReport check_homogeneity(const CompiledMetric& metric,
                                           const std::vector<HomogeneitySample>& samples) {
    HomogeneityReport rep;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.lambda == complexd(0.0, 0.0))
            throw PreconditionError("homogeneity sample requires lambda != 0");
        TangentPoint scaled = s.site;
        for (auto& c : scaled.v) c *= s.lambda;
        try {
            double g = metric.value(s.site);
            double gs = metric.value(scaled);
            double l2 = std::norm(s.lambda);
            double res = std::abs(gs - l2 * g) / std::max(1.0, l2 * std::abs(g));
            rep.rows.push_back({s.lambda, res});
            rep.max_residual = std::max(rep.max_residual, res);
        } catch (const DomainError& e) {
            throw DomainError("homogeneity sample " + std::to_string(i) + " (lambda = " +
                              format_double(s.lambda.real()) + (s.lambda.imag() < 0 ? "" : "+") +
                              format_double(s.lambda.imag()) + "i): " + e.what());
        }
    }
    return rep;
}

}  // namespace cfinsler
