#include <doctest.h>

#include "support.hpp"

using namespace cfinsler;

TEST_CASE("ball classification passes every hypothesis") {
    auto ball = compile_builtin("ball_kobayashi", 2);
    SamplerConfig cfg;
    cfg.samples = 120;
    ClassificationReport rep = classify_metric(*ball, cfg);
    CHECK_FALSE(rep.aborted);
    CHECK(rep.strongly_pseudoconvex);
    CHECK(rep.curvature_constant_minus4);
    CHECK(rep.max_curvature_deviation < 1e-6);
    CHECK(rep.h_vanishes);
    CHECK(rep.kahler);
    CHECK(rep.condition_holds);
    CHECK(rep.theorem_coherent);
    CHECK(rep.kobayashi_identification.rfind("POSITIVE", 0) == 0);
    CHECK(rep.kobayashi_identification.find("assumed by declaration") != std::string::npos);
}

TEST_CASE("euclidean classification is negative but coherent") {
    auto euc = compile_builtin("euclidean", 2);
    SamplerConfig cfg;
    cfg.samples = 60;
    ClassificationReport rep = classify_metric(*euc, cfg);
    CHECK_FALSE(rep.aborted);
    CHECK(rep.strongly_pseudoconvex);
    CHECK_FALSE(rep.curvature_constant_minus4);
    CHECK_FALSE(rep.condition_holds);
    CHECK(rep.h_vanishes);  // flat metric: H = 0 even though the curvature is 0
    CHECK(rep.theorem_coherent);
    CHECK(rep.kobayashi_identification.rfind("NEGATIVE", 0) == 0);
}

TEST_CASE("quartic perturbation: pseudoconvex, Kahler, constant zero curvature") {
    auto quart = compile_builtin("quartic_perturbation", 2);
    SamplerConfig cfg;
    cfg.samples = 60;
    ClassificationReport rep = classify_metric(*quart, cfg);
    CHECK_FALSE(rep.aborted);
    CHECK(rep.strongly_pseudoconvex);
    CHECK(rep.singular_sites == 0);
    CHECK_FALSE(rep.curvature_constant_minus4);
    // the metric does not depend on z, so its holomorphic curvature vanishes
    // identically and the curvature column has no spread
    CHECK(std::abs(rep.curvature_min) < 1e-12);
    CHECK(std::abs(rep.curvature_max) < 1e-12);
    CHECK(rep.h_vanishes);
    CHECK(rep.kahler);
    CHECK_FALSE(rep.condition_holds);
    CHECK(rep.theorem_coherent);
}

TEST_CASE("degenerate metric aborts the classification") {
    MetricAst flat = parse_metric("abs2(v1)", 2);
    CompiledMetric m(std::move(flat), {}, "degenerate");
    SamplerConfig cfg;
    cfg.samples = 40;
    ClassificationReport rep = classify_metric(m, cfg);
    CHECK(rep.aborted);
    CHECK(rep.abort_reason.rfind("NOT-STRONGLY-PSEUDOCONVEX", 0) == 0);
}

TEST_CASE("reports are byte-identical for a fixed seed and across thread counts") {
    auto ball = compile_builtin("ball_kobayashi", 2);
    SamplerConfig cfg;
    cfg.samples = 80;
    cfg.seed = 424242;
    std::string a = classification_to_json(classify_metric(*ball, cfg)).dump(2);
    std::string b = classification_to_json(classify_metric(*ball, cfg)).dump(2);
    SamplerConfig cfg1 = cfg;
    cfg1.threads = 1;
    SamplerConfig cfg4 = cfg;
    cfg4.threads = 4;
    std::string c = classification_to_json(classify_metric(*ball, cfg1)).dump(2);
    std::string d = classification_to_json(classify_metric(*ball, cfg4)).dump(2);
    CHECK(a == b);
    CHECK(a == c);
    CHECK(a == d);

    SamplerConfig other = cfg;
    other.seed = 99;
    std::string e = classification_to_json(classify_metric(*ball, other)).dump(2);
    CHECK(e != a);  // the seed is part of the report
}

TEST_CASE("pointwise gate") {
    auto ball = compile_builtin("ball_kobayashi", 2);
    SamplerConfig cfg;
    cfg.samples = 60;
    ClassificationReport rep = classify_metric(*ball, cfg);
    TangentPoint site{{{0.2, 0.1}, {-0.3, 0.2}}, {{1, 0}, {0.5, 0.5}}};
    CHECK(pointwise_geodesic_gate(*ball, rep, site) == GateDecision::Exists);

    auto euc = compile_builtin("euclidean", 2);
    ClassificationReport re = classify_metric(*euc, cfg);
    CHECK_THROWS_AS(pointwise_geodesic_gate(*euc, re, site), PreconditionError);

    // hermitian non-Kahler metric: hypotheses fail, the gate must refuse to rule
    auto hm = testsup::load_metric_file("metrics/hermitian_nonkahler.metric");
    ClassificationReport rh = classify_metric(*hm, cfg);
    CHECK_FALSE(rh.curvature_constant_minus4);
    CHECK_THROWS_AS(pointwise_geodesic_gate(*hm, rh, site), PreconditionError);
}
