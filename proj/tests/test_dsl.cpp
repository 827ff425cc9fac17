#include <doctest.h>

#include "support.hpp"

using namespace cfinsler;

namespace {

complexd eval_at(const ExprPtr& e, const FormalPoint& fp) { return Tape(e).eval(fp.view()); }

FormalPoint point1(complexd z, complexd v) {
    TangentPoint tp{{z}, {v}};
    return FormalPoint::diagonal(tp);
}

}  // namespace

TEST_CASE("abs2 desugars to w * conj(w)") {
    MetricAst ast = parse_metric("abs2(v1)", 1);
    ExprPtr manual = parse_metric("v1 * conj(v1)", 1).root;
    CHECK(expr_equal(ast.root, manual));
    CHECK(ast.root->op == ExprOp::Mul);
    CHECK(ast.root->args[0]->op == ExprOp::Var);
    CHECK(ast.root->args[1]->var == VarKind::VBar);
}

TEST_CASE("abs2 and the manual form evaluate bit-for-bit") {
    MetricAst a = parse_metric("abs2(v1 + 0.7*z1)", 1);
    MetricAst b = parse_metric("(v1 + 0.7*z1) * conj(v1 + 0.7*z1)", 1);
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        FormalPoint fp = point1(0.5 * rng.complex_gaussian(), rng.complex_gaussian());
        complexd x = eval_at(a.root, fp);
        complexd y = eval_at(b.root, fp);
        CHECK(x.real() == y.real());
        CHECK(x.imag() == y.imag());
    }
}

TEST_CASE("poincare source evaluates to 1 at the origin") {
    MetricAst ast = parse_metric("abs2(v1) / (1 - abs2(z1))^2", 1);
    CHECK(eval_at(ast.root, point1({0, 0}, {1, 0})).real() == 1.0);
}

TEST_CASE("negative integer exponents") {
    MetricAst a = parse_metric("abs2(v1) * (1 - abs2(z1))^-2", 1);
    MetricAst b = parse_metric("abs2(v1) / (1 - abs2(z1))^2", 1);
    Rng rng(77);
    for (int i = 0; i < 20; ++i) {
        FormalPoint fp = point1(0.5 * rng.complex_gaussian(), rng.complex_gaussian());
        complexd x = eval_at(a.root, fp);
        complexd y = eval_at(b.root, fp);
        CHECK(std::abs(x - y) < 1e-14 * (1.0 + std::abs(y)));
    }
}

TEST_CASE("parse errors carry positions") {
    CHECK_THROWS_AS(parse_metric("v1 + ", 1), ParseError);
    try {
        parse_metric("v1 + ", 1);
    } catch (const ParseError& e) {
        CHECK(e.offset == 5);
    }
    CHECK_THROWS_AS(parse_metric("w1 + v1", 1), ParseError);   // unknown identifier
    CHECK_THROWS_AS(parse_metric("v2", 1), ParseError);        // index out of range
    CHECK_THROWS_AS(parse_metric("sqrt(v1, v1)", 1), ParseError);  // arity
    CHECK_THROWS_AS(parse_metric("v1 ^ z1", 1), ParseError);   // non-integer exponent
    CHECK_THROWS_AS(parse_metric("", 1), ParseError);
}

TEST_CASE("print/parse round-trips the normalized tree") {
    std::vector<std::string> sources = {
        "abs2(v1)",
        "abs2(v1) / (1 - abs2(z1))^2",
        "sqrt((abs2(v1) + abs2(v2))^2 + 0.1 * (abs2(v1)^2 + abs2(v2)^2))",
        "exp(z1 * conj(z1)) * abs2(v1) + log(2 + abs2(z1))",
        "(v1 + v2) * (conj(v1) - conj(v2)) + 3.5",
        "conj(z1 * z1 + v1) * v1 * conj(v1)",
        "v1 * conj(v1) / (1 - z1*conj(z1)) / (1 + z1*conj(z1))",
        "-2 * abs2(v1) + abs2(v2) ^ 2",
        "abs2(v1) * (1 - abs2(z1))^-2",
    };
    for (const auto& src : sources) {
        int n = src.find("v2") != std::string::npos || src.find("z2") != std::string::npos ? 2 : 1;
        ExprPtr ast = parse_metric(src, n).root;
        std::string printed = to_string(ast);
        ExprPtr again = parse_metric(printed, n).root;
        CHECK_MESSAGE(expr_equal(ast, again), printed.c_str());
        CHECK(to_string(again) == printed);
    }
}

TEST_CASE("round-trip holds for derivative trees") {
    auto m = compile_builtin("ball_kobayashi", 2);
    MultiIndex mi{{VarKind::V, 0}, {VarKind::VBar, 1}, {VarKind::Z, 0}};
    ExprPtr d = m->derivative_ast(mi);
    std::string printed = to_string(d);
    ExprPtr again = parse_metric(printed, 2).root;
    CHECK(expr_equal(d, again));
}

TEST_CASE("builtin catalog") {
    MetricCatalogEntry e = builtin_metric("euclidean", 2);
    auto m = compile_builtin("euclidean", 2);
    CHECK(m->value(TangentPoint{{{0, 0}, {0, 0}}, {{1, 0}, {0, 0}}}) == 1.0);

    auto ball = compile_builtin("ball_kobayashi", 2);
    CHECK(ball->value(TangentPoint{{{0, 0}, {0, 0}}, {{1, 0}, {0, 0}}}) == 1.0);

    CHECK_THROWS_AS(builtin_metric("poincare_disk", 2), PreconditionError);
    CHECK_THROWS_AS(builtin_metric("no_such_metric", 1), PreconditionError);
    CHECK(e.traits.hermitian);
}

TEST_CASE("ball reduces to poincare on the diagonal slice") {
    auto ball = compile_builtin("ball_kobayashi", 2);
    auto poin = compile_builtin("poincare_disk", 1);
    Rng rng(11);
    for (int i = 0; i < 20; ++i) {
        complexd z(0.8 * rng.uniform() - 0.4, 0.8 * rng.uniform() - 0.4);
        complexd v = rng.complex_gaussian();
        double gb = ball->value(TangentPoint{{z, {0, 0}}, {v, {0, 0}}});
        double gp = poin->value(TangentPoint{{z}, {v}});
        CHECK(std::abs(gb - gp) < 1e-14 * (1.0 + std::abs(gp)));
    }
}

TEST_CASE("homogeneity of catalog metrics") {
    Rng rng(23);
    for (const auto& c : testsup::catalog_cases()) {
        auto m = compile_builtin(c.name, c.dim);
        std::vector<HomogeneitySample> samples;
        for (int i = 0; i < 100; ++i) {
            HomogeneitySample s;
            s.site = testsup::random_site(*m, rng);
            s.lambda = complexd(0.3 + rng.uniform(), rng.uniform() - 0.5);
            samples.push_back(std::move(s));
        }
        HomogeneityReport rep = check_homogeneity(*m, samples);
        CHECK_MESSAGE(rep.max_residual < 1e-10, c.name.c_str());
    }
}

TEST_CASE("homogeneity: exact rational case and a failing pseudo-metric") {
    auto poin = compile_builtin("poincare_disk", 1);
    HomogeneitySample s{TangentPoint{{{0, 0}}, {{1, 0}}}, complexd(2.0, 0.0)};
    CHECK(check_homogeneity(*poin, {s}).max_residual == 0.0);

    MetricAst bogus = parse_metric("v1 + z1", 1);
    CompiledMetric bm(std::move(bogus));
    // |G(0;2) - 4 G(0;1)| / max(1, 4 |G|) = |2 - 4| / 4
    HomogeneityReport rep = check_homogeneity(bm, {s});
    CHECK(rep.max_residual == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.max_residual > 1e-10);
}

TEST_CASE("homogeneity check rejects lambda = 0") {
    auto poin = compile_builtin("poincare_disk", 1);
    HomogeneitySample s{TangentPoint{{{0, 0}}, {{1, 0}}}, complexd(0.0, 0.0)};
    CHECK_THROWS_AS(check_homogeneity(*poin, {s}), PreconditionError);
}

TEST_CASE("metric file parsing") {
    MetricFile mf = load_metric_text(testsup::read_file(
                                         testsup::source_path("metrics/hermitian_nonkahler.metric")),
                                     "hermitian_nonkahler");
    CHECK(mf.dim == 2);
    CHECK_FALSE(mf.complete);
    CHECK(mf.domain.kind == DomainKind::UnitBall);

    MetricFile pf = load_metric_text("dim = 1\nconst a = 0.25\nG = a * abs2(v1)\n");
    auto m = compile_file(pf);
    CHECK(m->value(TangentPoint{{{0, 0}}, {{2, 0}}}) == doctest::Approx(1.0));

    CHECK_THROWS_AS(load_metric_text("G = abs2(v1)\ndim = 1\n"), ParseError);   // dim after G
    CHECK_THROWS_AS(load_metric_text("dim = 1\n"), ParseError);                 // no G
    CHECK_THROWS_AS(load_metric_text("dim = 1\nmood = good\nG = abs2(v1)\n"), ParseError);
}

TEST_CASE("domain errors outside the unit ball") {
    auto poin = compile_builtin("poincare_disk", 1);
    CHECK_THROWS_AS(poin->value(TangentPoint{{{1.5, 0}}, {{1, 0}}}), DomainError);
    auto ball = compile_builtin("ball_kobayashi", 2);
    CHECK_THROWS_AS(ball->value(TangentPoint{{{0.9, 0}, {0.9, 0}}, {{1, 0}, {0, 0}}}), DomainError);
}

TEST_CASE("evaluation domain errors") {
    MetricAst logm = parse_metric("log(abs2(v1))", 1);
    CompiledMetric lm(std::move(logm));
    CHECK_THROWS_AS(lm.value(TangentPoint{{{0, 0}}, {{0, 0}}}), DomainError);  // log 0
    MetricAst divm = parse_metric("abs2(v1) / abs2(z1)", 1);
    CompiledMetric dm(std::move(divm));
    CHECK_THROWS_AS(dm.value(TangentPoint{{{0, 0}}, {{1, 0}}}), DomainError);  // x/0
}

TEST_CASE("dimension and order caps") {
    std::string src = "abs2(v1)";
    CHECK_THROWS_AS(parse_metric(src, 0), PreconditionError);
    MetricAst nine;
    nine.dimension = 9;
    nine.root = make_variable(VarKind::V, 0);
    CHECK_THROWS_AS(CompiledMetric(std::move(nine)), PreconditionError);
}
