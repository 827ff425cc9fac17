#pragma once

// Recursive-descent parser for the metric DSL and the metric file format.
//
// Grammar:
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := '-' factor | base ('^' integer)?
//   base   := number | ident | call | '(' expr ')'
//   call   := ('sqrt'|'exp'|'log'|'conj'|'abs2') '(' expr ')'
//   ident  := ('z'|'v') digits, or a named constant
//
// abs2(w) desugars to w * conj(w).
//
// Metric file: `dim = n` first, then optional `const name = value`,
// `complete = true|false`, `domain = all | ball [radius]` lines, and a final
// `G = <expr>`. Blank lines and lines starting with '#' are ignored.

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cfinsler/expr.hpp"

namespace cfinsler {

enum class DomainKind { All, UnitBall };

struct MetricDomain {
    DomainKind kind = DomainKind::All;
    double radius = 1.0;
};

struct MetricAst {
    int dimension = 0;
    ExprPtr root;
};

namespace detail {

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };

struct Token {
    Tok kind;
    std::size_t pos;
    double number = 0.0;
    std::string text;
};

class MetricParser {
public:
    MetricParser(std::string_view src, int n, const std::map<std::string, double>* constants)
        : src_(src), n_(n), constants_(constants) {
        advance();
    }

    ExprPtr parse() {
        ExprPtr e = parse_expr();
        if (tok_.kind != Tok::End) throw ParseError("unexpected trailing input", tok_.pos);
        return e;
    }

private:
    ExprPtr parse_expr() {
        ExprPtr acc = parse_term();
        while (tok_.kind == Tok::Plus || tok_.kind == Tok::Minus) {
            bool minus = tok_.kind == Tok::Minus;
            advance();
            ExprPtr rhs = parse_term();
            acc = minus ? make_sub(std::move(acc), std::move(rhs))
                        : make_add({std::move(acc), std::move(rhs)});
        }
        return acc;
    }

    ExprPtr parse_term() {
        ExprPtr acc = parse_factor();
        while (tok_.kind == Tok::Star || tok_.kind == Tok::Slash) {
            bool divide = tok_.kind == Tok::Slash;
            advance();
            ExprPtr rhs = parse_factor();
            acc = divide ? make_div(std::move(acc), std::move(rhs))
                         : make_mul({std::move(acc), std::move(rhs)});
        }
        return acc;
    }

    ExprPtr parse_factor() {
        if (tok_.kind == Tok::Minus) {
            advance();
            return make_neg(parse_factor());
        }
        ExprPtr b = parse_base();
        if (tok_.kind == Tok::Caret) {
            std::size_t caret_pos = tok_.pos;
            advance();
            bool neg = false;
            if (tok_.kind == Tok::Minus) {
                neg = true;
                advance();
            }
            if (tok_.kind != Tok::Number || tok_.number != std::floor(tok_.number))
                throw ParseError("integer exponent expected", caret_pos + 1);
            int k = static_cast<int>(tok_.number);
            advance();
            return make_pow(std::move(b), neg ? -k : k);
        }
        return b;
    }

    ExprPtr parse_base() {
        switch (tok_.kind) {
            case Tok::Number: {
                double v = tok_.number;
                advance();
                return make_constant(v);
            }
            case Tok::LParen: {
                advance();
                ExprPtr e = parse_expr();
                expect(Tok::RParen, "')' expected");
                return e;
            }
            case Tok::Ident:
                return parse_ident();
            default:
                throw ParseError("operand expected", tok_.pos);
        }
    }

    ExprPtr parse_ident() {
        Token id = tok_;
        advance();
        if (tok_.kind == Tok::LParen) {
            std::size_t open = tok_.pos;
            advance();
            ExprPtr arg = parse_expr();
            if (tok_.kind != Tok::RParen) {
                // a ',' or anything else inside a unary call
                throw ParseError("call '" + id.text + "' takes exactly one argument", tok_.pos);
            }
            advance();
            if (id.text == "sqrt") return make_sqrt(std::move(arg));
            if (id.text == "exp") return make_exp(std::move(arg));
            if (id.text == "log") return make_log(std::move(arg));
            if (id.text == "conj") return make_conj(std::move(arg));
            if (id.text == "abs2") return make_mul({arg, make_conj(arg)});
            throw ParseError("unknown function '" + id.text + "'", open > 0 ? id.pos : id.pos);
        }
        // z<k> / v<k> variables
        if ((id.text[0] == 'z' || id.text[0] == 'v') && id.text.size() > 1 &&
            std::all_of(id.text.begin() + 1, id.text.end(),
                        [](unsigned char c) { return std::isdigit(c); })) {
            int idx = std::stoi(id.text.substr(1));
            if (idx < 1 || idx > n_)
                throw ParseError("variable index out of range 1.." + std::to_string(n_), id.pos);
            return make_variable(id.text[0] == 'z' ? VarKind::Z : VarKind::V, idx - 1);
        }
        if (constants_) {
            auto it = constants_->find(id.text);
            if (it != constants_->end()) return make_constant(it->second);
        }
        throw ParseError("unknown identifier '" + id.text + "'", id.pos);
    }

    void expect(Tok k, const char* msg) {
        if (tok_.kind != k) throw ParseError(msg, tok_.pos);
        advance();
    }

    void advance() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        tok_.pos = pos_;
        if (pos_ >= src_.size()) {
            tok_.kind = Tok::End;
            return;
        }
        char c = src_[pos_];
        switch (c) {
            case '+': tok_.kind = Tok::Plus; ++pos_; return;
            case '-': tok_.kind = Tok::Minus; ++pos_; return;
            case '*': tok_.kind = Tok::Star; ++pos_; return;
            case '/': tok_.kind = Tok::Slash; ++pos_; return;
            case '^': tok_.kind = Tok::Caret; ++pos_; return;
            case '(': tok_.kind = Tok::LParen; ++pos_; return;
            case ')': tok_.kind = Tok::RParen; ++pos_; return;
            default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = src_.data() + pos_;
            const char* end = src_.data() + src_.size();
            double value = 0.0;
            auto res = std::from_chars(begin, end, value);
            if (res.ec != std::errc())
                throw ParseError("malformed number", pos_);
            tok_.kind = Tok::Number;
            tok_.number = value;
            pos_ += static_cast<std::size_t>(res.ptr - begin);
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            tok_.kind = Tok::Ident;
            tok_.text = std::string(src_.substr(start, pos_ - start));
            return;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    std::string_view src_;
    int n_;
    const std::map<std::string, double>* constants_;
    std::size_t pos_ = 0;
    Token tok_;
};

}  // namespace detail

inline MetricAst parse_metric(std::string_view source, int n,
                              const std::map<std::string, double>* constants = nullptr) {
    if (source.empty()) throw ParseError("empty metric source", 0);
    if (n < 1) throw PreconditionError("metric dimension must be positive");
    detail::MetricParser p(source, n, constants);
    return MetricAst{n, p.parse()};
}

// ---------------------------------------------------------------------------
// Metric file
// ---------------------------------------------------------------------------

struct MetricFile {
    std::string name;
    int dim = 0;
    std::map<std::string, double> constants;
    bool complete = false;
    MetricDomain domain;
    MetricAst ast;
    std::string g_source;
};

namespace detail {

inline std::string trim(std::string s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    std::size_t e = s.find_last_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return s.substr(b, e - b + 1);
}

}  // namespace detail

inline MetricFile load_metric_text(const std::string& text, const std::string& name = "metric") {
    MetricFile mf;
    mf.name = name;
    std::size_t line_start = 0;
    bool have_dim = false, have_g = false;
    while (line_start <= text.size()) {
        std::size_t nl = text.find('\n', line_start);
        std::string line = text.substr(line_start, nl == std::string::npos ? std::string::npos
                                                                           : nl - line_start);
        std::size_t offset = line_start;
        line_start = nl == std::string::npos ? text.size() + 1 : nl + 1;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value' line", offset);
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key == "dim") {
            mf.dim = std::stoi(value);
            if (mf.dim < 1) throw ParseError("dim must be a positive integer", offset);
            have_dim = true;
        } else if (key.rfind("const ", 0) == 0) {
            std::string cname = detail::trim(key.substr(6));
            if (cname.empty()) throw ParseError("const name missing", offset);
            mf.constants[cname] = std::stod(value);
        } else if (key == "complete") {
            if (value == "true") mf.complete = true;
            else if (value == "false") mf.complete = false;
            else throw ParseError("complete must be true or false", offset);
        } else if (key == "domain") {
            if (value == "all") {
                mf.domain = MetricDomain{DomainKind::All, 0.0};
            } else if (value.rfind("ball", 0) == 0) {
                std::string r = detail::trim(value.substr(4));
                mf.domain = MetricDomain{DomainKind::UnitBall, r.empty() ? 1.0 : std::stod(r)};
                if (mf.domain.radius <= 0.0) throw ParseError("ball radius must be positive", offset);
            } else {
                throw ParseError("domain must be 'all' or 'ball [radius]'", offset);
            }
        } else if (key == "G") {
            if (!have_dim) throw ParseError("'dim = n' must precede 'G = ...'", offset);
            if (have_g) throw ParseError("duplicate 'G = ...' line", offset);
            mf.ast = parse_metric(value, mf.dim, &mf.constants);
            mf.g_source = value;
            have_g = true;
        } else {
            throw ParseError("unknown metric file key '" + key + "'", offset);
        }
    }
    if (!have_dim) throw ParseError("metric file missing 'dim = n'", 0);
    if (!have_g) throw ParseError("metric file missing 'G = <expr>'", 0);
    return mf;
}

}  // namespace cfinsler
