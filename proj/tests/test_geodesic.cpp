#include <doctest.h>

#include "cfinsler/geodesic.hpp"
#include "support.hpp"

using namespace cfinsler;

namespace {

const std::vector<complexd> kOrigin2 = {{0, 0}, {0, 0}};
const std::vector<complexd> kE1 = {{1, 0}, {0, 0}};

GeodesicOptions fast_options() {
    GeodesicOptions o;
    return o;
}

}  // namespace

TEST_CASE("vector fields on the sphere bundle") {
    auto euc = compile_builtin("euclidean", 2);
    auto [X, Z] = vector_fields_XZ(*euc, TangentPoint{kOrigin2, kE1});
    CHECK(X[0] == complexd(1, 0));
    CHECK(X[1] == complexd(0, 0));
    CHECK(X[2] == complexd(0, 0));  // no connection term
    CHECK(X[3] == complexd(0, 0));
    CHECK(Z[2] == complexd(0, 1));
    CHECK(Z[3] == complexd(0, 0));

    auto poin = compile_builtin("poincare_disk", 1);
    auto [Xp, Zp] = vector_fields_XZ(*poin, TangentPoint{{{0, 0}}, {{1, 0}}});
    CHECK(std::abs(Xp[0] - complexd(1, 0)) < 1e-14);
    CHECK(std::abs(Xp[1]) < 1e-14);

    auto ball = compile_builtin("ball_kobayashi", 2);
    auto [Xb, Zb] = vector_fields_XZ(*ball, TangentPoint{kOrigin2, kE1});
    CHECK(std::abs(Xb[0] - complexd(1, 0)) < 1e-14);
    CHECK(std::abs(Xb[2]) < 1e-14);
    CHECK(std::abs(Xb[3]) < 1e-14);

    CHECK_THROWS_AS(vector_fields_XZ(*euc, TangentPoint{kOrigin2, {{2, 0}, {0, 0}}}),
                    PreconditionError);
}

TEST_CASE("ball ray follows tanh along the slice") {
    auto ball = compile_builtin("ball_kobayashi", 2);
    std::vector<double> samples;
    for (int j = 0; j <= 30; ++j) samples.push_back(3.0 * j / 30.0);
    RayTrace ray = integrate_ray(*ball, kOrigin2, kE1, 0.0, samples, {});
    for (std::size_t j = 0; j < samples.size(); ++j) {
        double th = std::tanh(samples[j]);
        double sech2 = 1.0 - th * th;
        CHECK(std::abs(ray.sigma[j][0] - th) < 1e-8);
        CHECK(std::abs(ray.sigma[j][1]) < 1e-10);
        CHECK(std::abs(ray.sigma_dot[j][0] - sech2) < 1e-8);
    }
    CHECK(ray.max_norm_drift < 10 * 1e-10);
}

TEST_CASE("poincare ray rotates with the initial angle") {
    auto poin = compile_builtin("poincare_disk", 1);
    std::vector<double> samples;
    for (int j = 0; j <= 20; ++j) samples.push_back(2.0 * j / 20.0);
    RayTrace ray = integrate_ray(*poin, {{0, 0}}, {{1, 0}}, std::numbers::pi / 2.0, samples, {});
    for (std::size_t j = 0; j < samples.size(); ++j) {
        complexd expected = complexd(0, 1) * std::tanh(samples[j]);
        CHECK(std::abs(ray.sigma[j][0] - expected) < 1e-8);
    }
}

TEST_CASE("euclidean ray is the free straight line") {
    auto euc = compile_builtin("euclidean", 2);
    std::vector<double> samples = {0.0, 0.5, 1.0, 2.0, 4.0};
    RayTrace ray = integrate_ray(*euc, kOrigin2, kE1, 0.0, samples, {});
    for (std::size_t j = 0; j < samples.size(); ++j) {
        CHECK(std::abs(ray.sigma[j][0] - samples[j]) < 1e-10);
        CHECK(std::abs(ray.sigma_dot[j][0] - 1.0) < 1e-10);
    }
    CHECK(ray.max_norm_drift < 1e-11);
}

TEST_CASE("rotation coherence of unitarily invariant metrics") {
    Rng rng(5);
    std::vector<double> samples;
    for (int j = 0; j <= 16; ++j) samples.push_back(2.5 * j / 16.0);
    auto ball = compile_builtin("ball_kobayashi", 2);
    auto poin = compile_builtin("poincare_disk", 1);
    for (double theta : {std::numbers::pi / 2.0, std::numbers::pi}) {
        complexd rot = std::polar(1.0, theta);
        {
            RayTrace r0 = integrate_ray(*ball, kOrigin2, kE1, 0.0, samples, {});
            RayTrace rt = integrate_ray(*ball, kOrigin2, kE1, theta, samples, {});
            for (std::size_t j = 0; j < samples.size(); ++j)
                for (int c = 0; c < 2; ++c)
                    CHECK(std::abs(rt.sigma[j][c] - rot * r0.sigma[j][c]) < 1e-9);
        }
        {
            RayTrace r0 = integrate_ray(*poin, {{0, 0}}, {{1, 0}}, 0.0, samples, {});
            RayTrace rt = integrate_ray(*poin, {{0, 0}}, {{1, 0}}, theta, samples, {});
            for (std::size_t j = 0; j < samples.size(); ++j)
                CHECK(std::abs(rt.sigma[j][0] - rot * r0.sigma[j][0]) < 1e-9);
        }
    }
}

TEST_CASE("ray preconditions") {
    auto euc = compile_builtin("euclidean", 2);
    CHECK_THROWS_AS(integrate_ray(*euc, kOrigin2, {{2, 0}, {0, 0}}, 0.0, {0.0, 1.0}, {}),
                    PreconditionError);
    CHECK_THROWS_AS(integrate_ray(*euc, kOrigin2, kE1, 0.0, {0.5, 1.0}, {}), PreconditionError);
}

TEST_CASE("assembly rejects inconsistent rays") {
    auto ball = compile_builtin("ball_kobayashi", 2);
    std::vector<double> t = default_t_grid(16, 2.0);
    std::vector<double> s(t.size());
    for (std::size_t j = 0; j < t.size(); ++j) s[j] = std::atanh(t[j]);
    std::vector<RayTrace> rays;
    for (int k = 0; k < 16; ++k)
        rays.push_back(integrate_ray(*ball, kOrigin2, kE1, 2 * std::numbers::pi * k / 16, s, {}));
    GeodesicTrace tr = assemble_disk(rays, t);
    CHECK(tr.phi.size() == 16);
    // mismatched base point
    std::vector<complexd> other = {{0.1, 0}, {0, 0}};
    std::vector<complexd> xi_at_other = {{1, 0}, {0, 0}};
    TangentPoint tp{other, xi_at_other};
    auto ballf = ball->norm_f(tp);
    for (auto& c : xi_at_other) c /= ballf;
    rays[3] = integrate_ray(*ball, other, xi_at_other, 0.3, s, {});
    CHECK_THROWS_AS(assemble_disk(rays, t), PreconditionError);
}

TEST_CASE("solve on the ball: the linear disk, flagged as a geodesic complex curve") {
    auto ball = compile_builtin("ball_kobayashi", 2);
    SolveOutcome out = solve_complex_geodesic(*ball, kOrigin2, kE1, fast_options());
    REQUIRE(out.trace.has_value());
    const GeodesicTrace& tr = *out.trace;
    double sup = 0.0;
    for (std::size_t k = 0; k < tr.theta.size(); ++k)
        for (std::size_t j = 0; j < tr.t.size(); ++j) {
            complexd zeta = std::polar(tr.t[j], tr.theta[k]);
            sup = std::max(sup, std::abs(tr.phi[k][j][0] - zeta));
            sup = std::max(sup, std::abs(tr.phi[k][j][1]));
        }
    CHECK(sup < 1e-6);
    CHECK(tr.holomorphy_residual < 1e-6);
    CHECK(tr.isometry_residual < 1e-6);
    CHECK(std::abs(tr.realized_curvature + 4.0) < 1e-3);
    CHECK(tr.geodesic_complex_curve);
    CHECK_FALSE(tr.holomorphy_warning);
    CHECK(tr.max_norm_drift < 1e-9);
}

TEST_CASE("solve on the euclidean metric refuses") {
    auto euc = compile_builtin("euclidean", 2);
    SolveOutcome out = solve_complex_geodesic(*euc, kOrigin2, kE1, fast_options());
    REQUIRE(out.refusal.has_value());
    CHECK(std::abs(out.refusal->condition_residual[0] - complexd(-2.0, 0.0)) < 1e-12);
    CHECK(std::abs(out.refusal->condition_residual[1]) < 1e-12);
    CHECK(out.refusal->norm == doctest::Approx(2.0));
}

TEST_CASE("forced euclidean trace fails holomorphy decisively") {
    auto euc = compile_builtin("euclidean", 2);
    GeodesicOptions o = fast_options();
    o.force = true;
    SolveOutcome out = solve_complex_geodesic(*euc, kOrigin2, kE1, o);
    REQUIRE(out.trace.has_value());
    CHECK(out.trace->holomorphy_residual > 1e-2);
    CHECK(out.trace->holomorphy_residual > 0.05);
    CHECK(out.trace->holomorphy_warning);
    CHECK_FALSE(out.trace->geodesic_complex_curve);
}

TEST_CASE("holomorphy tracks the existence condition across metrics") {
    // sampled form of the equivalence: the residual is tiny exactly when the
    // existence condition holds, and decisively large when it fails
    auto quart = compile_builtin("quartic_perturbation", 2);
    std::vector<complexd> p = {{0, 0}, {0, 0}};
    std::vector<complexd> xi = {{1, 0}, {0.5, 0.5}};
    double f = quart->norm_f(TangentPoint{p, xi});
    for (auto& c : xi) c /= f;
    GeodesicOptions o;
    o.force = true;
    o.n_theta = 32;
    o.n_t = 24;
    o.s_max = 2.0;
    SolveOutcome out = solve_complex_geodesic(*quart, p, xi, o);
    REQUIRE(out.trace.has_value());
    CHECK(max_abs(out.trace->condition_residual) > 1e-7);
    CHECK(out.trace->holomorphy_residual > 1e-2);
    CHECK(out.trace->holomorphy_warning);
}

TEST_CASE("solve away from the center and uniqueness evidence") {
    auto ball = compile_builtin("ball_kobayashi", 2);
    std::vector<complexd> p = {{0.5, 0}, {0, 0}};
    std::vector<complexd> xi = {{0, 0}, {1, 0}};
    double f = ball->norm_f(TangentPoint{p, xi});
    for (auto& c : xi) c /= f;

    GeodesicOptions o = fast_options();
    SolveOutcome out = solve_complex_geodesic(*ball, p, xi, o);
    REQUIRE(out.trace.has_value());
    CHECK(out.trace->holomorphy_residual < 1e-5);
    CHECK(out.trace->isometry_residual < 1e-5);
    CHECK(out.trace->geodesic_complex_curve);

    GeodesicOptions tighter = o;
    tighter.integrator.rtol = o.integrator.rtol / 2.0;
    tighter.integrator.atol = o.integrator.atol / 2.0;
    SolveOutcome out2 = solve_complex_geodesic(*ball, p, xi, tighter);
    REQUIRE(out2.trace.has_value());
    CHECK(trace_sup_distance(*out.trace, *out2.trace) < 1e-6);
}

TEST_CASE("infinitesimal-isometry diagnostic: unit pullback at the origin forces the "
          "hyperbolic scale everywhere") {
    auto ball = compile_builtin("ball_kobayashi", 2);
    SolveOutcome out = solve_complex_geodesic(*ball, kOrigin2, kE1, fast_options());
    REQUIRE(out.trace.has_value());
    const GeodesicTrace& tr = *out.trace;
    TangentPoint center{tr.phi[0][0], tr.dphi[0][0]};
    CHECK(std::abs(ball->value(center) - 1.0) < 1e-9);
    double worst = 0.0;
    for (std::size_t k = 0; k < tr.theta.size(); ++k)
        for (std::size_t j = 0; j < tr.t.size(); ++j) {
            double t = tr.t[j];
            TangentPoint tp{tr.phi[k][j], tr.dphi[k][j]};
            double g = ball->value(tp);
            double g1 = 1.0 / ((1 - t * t) * (1 - t * t));
            worst = std::max(worst, std::abs(g / g1 - 1.0));
        }
    CHECK(worst < 1e-6);
}

TEST_CASE("solve preconditions") {
    auto ball = compile_builtin("ball_kobayashi", 2);
    std::vector<complexd> zero = {{0, 0}, {0, 0}};
    CHECK_THROWS_AS(solve_complex_geodesic(*ball, kOrigin2, zero, {}), PreconditionError);
    std::vector<complexd> big = {{2, 0}, {0, 0}};
    CHECK_THROWS_AS(solve_complex_geodesic(*ball, kOrigin2, big, {}), PreconditionError);
}

TEST_CASE("isometry residual rejects a non-unit base vector") {
    auto ball = compile_builtin("ball_kobayashi", 2);
    SolveOutcome out = solve_complex_geodesic(*ball, kOrigin2, kE1, fast_options());
    REQUIRE(out.trace.has_value());
    GeodesicTrace scaled = *out.trace;
    for (auto& ray : scaled.dphi)
        for (auto& pt : ray)
            for (auto& c : pt) c *= 2.0;
    CHECK_THROWS_AS(isometry_residual(scaled, *ball), PreconditionError);
}

TEST_CASE("domain exit surfaces as an integration error") {
    // the metric is only defined on a small ball; the ray must hit the wall
    MetricFile mf = load_metric_text("dim = 1\ndomain = ball 0.5\nG = abs2(v1)\n");
    auto m = compile_file(mf);
    try {
        integrate_ray(*m, {{0, 0}}, {{1, 0}}, 0.0, {0.0, 1.0}, {});
        FAIL("expected a domain exit");
    } catch (const IntegrationError& e) {
        CHECK(e.kind == IntegrationError::Kind::DomainExit);
    }
}
