#pragma once

// Expression trees for Finsler metric definitions G(z, zbar, v, vbar).
//
// zbar_i and vbar_a are independent formal variables (the Wirtinger
// viewpoint), so symbolic differentiation is exact for real-analytic,
// non-holomorphic functions like G. conj() rewrites variables to their
// bar-partner; on composite subexpressions it is kept as a node and
// differentiated by d(conj e)/dw = conj(de/dwbar).

#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cfinsler/errors.hpp"

namespace cfinsler {

using complexd = std::complex<double>;

enum class VarKind : std::uint8_t { Z = 0, ZBar = 1, V = 2, VBar = 3 };

inline VarKind bar_partner(VarKind k) {
    switch (k) {
        case VarKind::Z: return VarKind::ZBar;
        case VarKind::ZBar: return VarKind::Z;
        case VarKind::V: return VarKind::VBar;
        case VarKind::VBar: return VarKind::V;
    }
    return VarKind::Z;
}

inline bool is_barred(VarKind k) { return k == VarKind::ZBar || k == VarKind::VBar; }

enum class ExprOp : std::uint8_t { Const, Var, Add, Mul, Div, Pow, Sqrt, Exp, Log, Conj };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    ExprOp op = ExprOp::Const;
    double cval = 0.0;             // Const
    VarKind var = VarKind::Z;      // Var
    int index = 0;                 // Var, 0-based
    int exponent = 0;              // Pow
    std::vector<ExprPtr> args;
};

// ---------------------------------------------------------------------------
// Smart constructors; they normalize as they build (flat add/mul, constant
// folding, neutral-element removal) and nothing deeper.
// ---------------------------------------------------------------------------

inline ExprPtr make_constant(double c) {
    auto e = std::make_shared<Expr>();
    e->op = ExprOp::Const;
    e->cval = c;
    return e;
}

inline ExprPtr make_variable(VarKind k, int index0) {
    auto e = std::make_shared<Expr>();
    e->op = ExprOp::Var;
    e->var = k;
    e->index = index0;
    return e;
}

inline bool is_const(const ExprPtr& e) { return e->op == ExprOp::Const; }
inline bool is_const(const ExprPtr& e, double c) { return e->op == ExprOp::Const && e->cval == c; }

inline ExprPtr make_add(std::vector<ExprPtr> xs) {
    std::vector<ExprPtr> flat;
    double csum = 0.0;
    bool have_const = false;
    for (auto& x : xs) {
        if (x->op == ExprOp::Add) {
            for (auto& a : x->args) {
                if (is_const(a)) { csum += a->cval; have_const = true; }
                else flat.push_back(a);
            }
        } else if (is_const(x)) {
            csum += x->cval;
            have_const = true;
        } else {
            flat.push_back(std::move(x));
        }
    }
    if (have_const && csum != 0.0) flat.push_back(make_constant(csum));
    if (flat.empty()) return make_constant(have_const ? csum : 0.0);
    if (flat.size() == 1) return flat[0];
    auto e = std::make_shared<Expr>();
    e->op = ExprOp::Add;
    e->args = std::move(flat);
    return e;
}

inline ExprPtr make_mul(std::vector<ExprPtr> xs) {
    std::vector<ExprPtr> flat;
    double cprod = 1.0;
    bool have_const = false;
    for (auto& x : xs) {
        if (x->op == ExprOp::Mul) {
            for (auto& a : x->args) {
                if (is_const(a)) { cprod *= a->cval; have_const = true; }
                else flat.push_back(a);
            }
        } else if (is_const(x)) {
            cprod *= x->cval;
            have_const = true;
        } else {
            flat.push_back(std::move(x));
        }
    }
    if (have_const && cprod == 0.0) return make_constant(0.0);
    if (flat.empty()) return make_constant(have_const ? cprod : 1.0);
    if (have_const && cprod != 1.0) flat.insert(flat.begin(), make_constant(cprod));
    if (flat.size() == 1) return flat[0];
    auto e = std::make_shared<Expr>();
    e->op = ExprOp::Mul;
    e->args = std::move(flat);
    return e;
}

inline ExprPtr make_div(ExprPtr a, ExprPtr b) {
    if (is_const(a, 0.0)) return a;
    if (is_const(b, 1.0)) return a;
    if (is_const(a) && is_const(b) && b->cval != 0.0) return make_constant(a->cval / b->cval);
    auto e = std::make_shared<Expr>();
    e->op = ExprOp::Div;
    e->args = {std::move(a), std::move(b)};
    return e;
}

inline double fold_ipow(double x, int k) {
    if (k < 0) return 1.0 / fold_ipow(x, -k);
    double r = 1.0, base = x;
    for (int e = k; e > 0; e >>= 1) {
        if (e & 1) r *= base;
        base *= base;
    }
    return r;
}

inline ExprPtr make_pow(ExprPtr a, int k) {
    if (k == 0) return make_constant(1.0);
    if (k == 1) return a;
    if (is_const(a)) return make_constant(fold_ipow(a->cval, k));
    if (a->op == ExprOp::Pow) {
        int merged = a->exponent * k;
        return make_pow(a->args[0], merged);
    }
    auto e = std::make_shared<Expr>();
    e->op = ExprOp::Pow;
    e->exponent = k;
    e->args = {std::move(a)};
    return e;
}

inline ExprPtr make_call(ExprOp op, ExprPtr a) {
    auto e = std::make_shared<Expr>();
    e->op = op;
    e->args = {std::move(a)};
    return e;
}

inline ExprPtr make_sqrt(ExprPtr a) { return make_call(ExprOp::Sqrt, std::move(a)); }
inline ExprPtr make_exp(ExprPtr a) { return make_call(ExprOp::Exp, std::move(a)); }
inline ExprPtr make_log(ExprPtr a) { return make_call(ExprOp::Log, std::move(a)); }

inline ExprPtr make_conj(ExprPtr a) {
    if (is_const(a)) return a;  // constants are real
    if (a->op == ExprOp::Var) return make_variable(bar_partner(a->var), a->index);
    if (a->op == ExprOp::Conj) return a->args[0];
    return make_call(ExprOp::Conj, std::move(a));
}

inline ExprPtr make_neg(ExprPtr a) { return make_mul({make_constant(-1.0), std::move(a)}); }
inline ExprPtr make_sub(ExprPtr a, ExprPtr b) { return make_add({std::move(a), make_neg(std::move(b))}); }

// ---------------------------------------------------------------------------
// Structural equality, printing
// ---------------------------------------------------------------------------

inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
    if (a.get() == b.get()) return true;
    if (a->op != b->op) return false;
    switch (a->op) {
        case ExprOp::Const: return a->cval == b->cval;
        case ExprOp::Var: return a->var == b->var && a->index == b->index;
        case ExprOp::Pow:
            if (a->exponent != b->exponent) return false;
            break;
        default: break;
    }
    if (a->args.size() != b->args.size()) return false;
    for (std::size_t i = 0; i < a->args.size(); ++i)
        if (!expr_equal(a->args[i], b->args[i])) return false;
    return true;
}

inline std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace detail {

// Precedence: Add=1, Mul/Div=2, Pow=3, atoms/calls=4.
inline void print_expr(const ExprPtr& e, std::string& out);

inline void print_child(const ExprPtr& c, std::string& out, bool parens) {
    if (parens) out += '(';
    print_expr(c, out);
    if (parens) out += ')';
}

inline void print_expr(const ExprPtr& e, std::string& out) {
    switch (e->op) {
        case ExprOp::Const:
            out += format_double(e->cval);
            return;
        case ExprOp::Var: {
            bool barred = is_barred(e->var);
            if (barred) out += "conj(";
            out += (e->var == VarKind::Z || e->var == VarKind::ZBar) ? 'z' : 'v';
            out += std::to_string(e->index + 1);
            if (barred) out += ')';
            return;
        }
        case ExprOp::Add:
            for (std::size_t i = 0; i < e->args.size(); ++i) {
                if (i) out += " + ";
                print_expr(e->args[i], out);
            }
            return;
        case ExprOp::Mul:
            for (std::size_t i = 0; i < e->args.size(); ++i) {
                if (i) out += " * ";
                const auto& a = e->args[i];
                print_child(a, out, a->op == ExprOp::Add || a->op == ExprOp::Div);
            }
            return;
        case ExprOp::Div: {
            const auto& num = e->args[0];
            const auto& den = e->args[1];
            print_child(num, out, num->op == ExprOp::Add);
            out += " / ";
            print_child(den, out,
                        den->op == ExprOp::Add || den->op == ExprOp::Mul || den->op == ExprOp::Div);
            return;
        }
        case ExprOp::Pow: {
            const auto& b = e->args[0];
            bool atom = b->op == ExprOp::Var || b->op == ExprOp::Sqrt || b->op == ExprOp::Exp ||
                        b->op == ExprOp::Log || b->op == ExprOp::Conj;
            print_child(b, out, !atom);
            out += '^';
            out += std::to_string(e->exponent);
            return;
        }
        case ExprOp::Sqrt: out += "sqrt("; break;
        case ExprOp::Exp: out += "exp("; break;
        case ExprOp::Log: out += "log("; break;
        case ExprOp::Conj: out += "conj("; break;
    }
    print_expr(e->args[0], out);
    out += ')';
}

}  // namespace detail

inline std::string to_string(const ExprPtr& e) {
    std::string out;
    detail::print_expr(e, out);
    return out;
}

// ---------------------------------------------------------------------------
// Differentiation with respect to one formal variable
// ---------------------------------------------------------------------------

inline ExprPtr differentiate(const ExprPtr& e, VarKind wk, int wi) {
    switch (e->op) {
        case ExprOp::Const:
            return make_constant(0.0);
        case ExprOp::Var:
            return make_constant(e->var == wk && e->index == wi ? 1.0 : 0.0);
        case ExprOp::Add: {
            std::vector<ExprPtr> terms;
            terms.reserve(e->args.size());
            for (const auto& a : e->args) terms.push_back(differentiate(a, wk, wi));
            return make_add(std::move(terms));
        }
        case ExprOp::Mul: {
            std::vector<ExprPtr> terms;
            for (std::size_t j = 0; j < e->args.size(); ++j) {
                ExprPtr dj = differentiate(e->args[j], wk, wi);
                if (is_const(dj, 0.0)) continue;
                std::vector<ExprPtr> factors;
                factors.reserve(e->args.size());
                for (std::size_t k = 0; k < e->args.size(); ++k)
                    factors.push_back(k == j ? dj : e->args[k]);
                terms.push_back(make_mul(std::move(factors)));
            }
            return make_add(std::move(terms));
        }
        case ExprOp::Div: {
            const auto& f = e->args[0];
            const auto& g = e->args[1];
            ExprPtr df = differentiate(f, wk, wi);
            ExprPtr dg = differentiate(g, wk, wi);
            if (is_const(dg, 0.0)) return make_div(std::move(df), g);
            ExprPtr num = make_add({make_mul({df, g}), make_mul({make_constant(-1.0), f, dg})});
            return make_div(std::move(num), make_pow(g, 2));
        }
        case ExprOp::Pow: {
            ExprPtr df = differentiate(e->args[0], wk, wi);
            return make_mul({make_constant(static_cast<double>(e->exponent)),
                             make_pow(e->args[0], e->exponent - 1), std::move(df)});
        }
        case ExprOp::Sqrt: {
            ExprPtr df = differentiate(e->args[0], wk, wi);
            return make_div(std::move(df), make_mul({make_constant(2.0), make_sqrt(e->args[0])}));
        }
        case ExprOp::Exp: {
            ExprPtr df = differentiate(e->args[0], wk, wi);
            return make_mul({std::move(df), make_exp(e->args[0])});
        }
        case ExprOp::Log: {
            ExprPtr df = differentiate(e->args[0], wk, wi);
            return make_div(std::move(df), e->args[0]);
        }
        case ExprOp::Conj:
            return make_conj(differentiate(e->args[0], bar_partner(wk), wi));
    }
    return make_constant(0.0);
}

// ---------------------------------------------------------------------------
// Flat evaluation tape. Built once per expression tree; shared subtrees are
// deduplicated by node identity so DAG-shaped derivative trees evaluate each
// distinct node once.
// ---------------------------------------------------------------------------

struct EvalPoint {
    std::span<const complexd> z, zbar, v, vbar;
};

class Tape {
public:
    Tape() = default;

    explicit Tape(const ExprPtr& root) {
        std::unordered_map<const Expr*, int> seen;
        build(root, seen);
    }

    std::size_t size() const { return nodes_.size(); }

    complexd eval(const EvalPoint& pt) const {
        static thread_local std::vector<complexd> scratch;
        return eval(pt, scratch);
    }

    complexd eval(const EvalPoint& pt, std::vector<complexd>& slot) const {
        slot.resize(nodes_.size());
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const Node& nd = nodes_[i];
            switch (nd.op) {
                case ExprOp::Const:
                    slot[i] = complexd(nd.cval, 0.0);
                    break;
                case ExprOp::Var:
                    switch (nd.var) {
                        case VarKind::Z: slot[i] = pt.z[nd.index]; break;
                        case VarKind::ZBar: slot[i] = pt.zbar[nd.index]; break;
                        case VarKind::V: slot[i] = pt.v[nd.index]; break;
                        case VarKind::VBar: slot[i] = pt.vbar[nd.index]; break;
                    }
                    break;
                case ExprOp::Add: {
                    complexd acc = 0.0;
                    for (int a = 0; a < nd.arg_count; ++a) acc += slot[arg_index_[nd.arg_begin + a]];
                    slot[i] = acc;
                    break;
                }
                case ExprOp::Mul: {
                    complexd acc = 1.0;
                    for (int a = 0; a < nd.arg_count; ++a) acc *= slot[arg_index_[nd.arg_begin + a]];
                    slot[i] = acc;
                    break;
                }
                case ExprOp::Div: {
                    const complexd den = slot[arg_index_[nd.arg_begin + 1]];
                    if (den == complexd(0.0, 0.0)) throw DomainError("division by zero during evaluation");
                    slot[i] = slot[arg_index_[nd.arg_begin]] / den;
                    break;
                }
                case ExprOp::Pow: {
                    const complexd b = slot[arg_index_[nd.arg_begin]];
                    if (nd.exponent < 0 && b == complexd(0.0, 0.0))
                        throw DomainError("zero raised to a negative power during evaluation");
                    slot[i] = cpow_int(b, nd.exponent);
                    break;
                }
                case ExprOp::Sqrt:
                    slot[i] = std::sqrt(slot[arg_index_[nd.arg_begin]]);
                    break;
                case ExprOp::Exp:
                    slot[i] = std::exp(slot[arg_index_[nd.arg_begin]]);
                    break;
                case ExprOp::Log: {
                    const complexd a = slot[arg_index_[nd.arg_begin]];
                    if (a == complexd(0.0, 0.0)) throw DomainError("log of zero during evaluation");
                    slot[i] = std::log(a);
                    break;
                }
                case ExprOp::Conj:
                    slot[i] = std::conj(slot[arg_index_[nd.arg_begin]]);
                    break;
            }
        }
        return slot.back();
    }

private:
    struct Node {
        ExprOp op;
        double cval;
        VarKind var;
        int index;
        int exponent;
        int arg_begin;
        int arg_count;
    };

    static complexd cpow_int(complexd x, int k) {
        if (k < 0) return complexd(1.0, 0.0) / cpow_int(x, -k);
        complexd r(1.0, 0.0), base = x;
        for (int e = k; e > 0; e >>= 1) {
            if (e & 1) r *= base;
            base *= base;
        }
        return r;
    }

    int build(const ExprPtr& e, std::unordered_map<const Expr*, int>& seen) {
        auto it = seen.find(e.get());
        if (it != seen.end()) return it->second;
        std::vector<int> kids;
        kids.reserve(e->args.size());
        for (const auto& a : e->args) kids.push_back(build(a, seen));
        Node nd;
        nd.op = e->op;
        nd.cval = e->cval;
        nd.var = e->var;
        nd.index = e->index;
        nd.exponent = e->exponent;
        nd.arg_begin = static_cast<int>(arg_index_.size());
        nd.arg_count = static_cast<int>(kids.size());
        for (int k : kids) arg_index_.push_back(k);
        int id = static_cast<int>(nodes_.size());
        nodes_.push_back(nd);
        seen.emplace(e.get(), id);
        return id;
    }

    std::vector<Node> nodes_;
    std::vector<int> arg_index_;
};

}  // namespace cfinsler
