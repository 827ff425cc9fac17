#include <doctest.h>

#include "cfinsler/disk.hpp"
#include "support.hpp"

using namespace cfinsler;

TEST_CASE("circle means") {
    auto absq = [](complexd z) { return std::norm(z); };
    // quadratic: the oscillating terms average out exactly for m >= 3
    CHECK(circle_mean(absq, complexd(0.2, 0.0), 0.1, 16) == doctest::Approx(0.05).epsilon(1e-14));
    auto constant = [](complexd) { return 3.25; };
    CHECK(circle_mean(constant, complexd(0.1, -0.2), 0.05, 8) == 3.25);
    // harmonic: mean value property
    auto re = [](complexd z) { return z.real(); };
    CHECK(std::abs(circle_mean(re, complexd(0.1, 0.2), 0.3, 64) - 0.1) < 1e-15);
    CHECK_THROWS_AS(circle_mean(absq, complexd(0.95, 0.0), 0.1, 16), DomainError);
    CHECK_THROWS_AS(circle_mean(absq, complexd(0.0, 0.0), 0.1, 2), PreconditionError);
}

TEST_CASE("generalized laplacian") {
    auto absq = [](complexd z) { return std::norm(z); };
    // |z|^2 has quotient exactly 4 at every radius
    LaplacianEstimate l1 = generalized_laplacian(absq, complexd(0.25, -0.1), {0.1, 0.05, 0.025});
    CHECK(std::abs(l1.value - 4.0) < 1e-12);
    CHECK_FALSE(l1.lower_estimate);

    // log of the Poincare scale: Lap = 8 / (1 - |z|^2)^2
    auto u = [](complexd z) {
        double d = 1.0 - std::norm(z);
        return std::log(1.0 / (d * d));
    };
    LaplacianEstimate l2 = generalized_laplacian(u, complexd(0.0, 0.0), default_laplacian_radii());
    CHECK(std::abs(l2.value - 8.0) < 1e-4);
    LaplacianEstimate l3 = generalized_laplacian(u, complexd(0.4, 0.1), default_laplacian_radii());
    double expected = 8.0 / std::pow(1.0 - 0.17, 2);
    CHECK(std::abs(l3.value - expected) < 1e-4 * expected);

    // harmonic function
    auto re = [](complexd z) { return z.real(); };
    LaplacianEstimate l4 = generalized_laplacian(re, complexd(0.3, 0.0), default_laplacian_radii());
    CHECK(std::abs(l4.value) < 1e-10);

    CHECK_THROWS_AS(generalized_laplacian(absq, complexd(0, 0), {0.1}), PreconditionError);

    // non-smooth flag: minimum quotient, tagged as a lower estimate
    LaplacianEstimate l5 =
        generalized_laplacian(absq, complexd(0.0, 0.0), {0.1, 0.05}, 64, false);
    CHECK(l5.lower_estimate);
    CHECK(l5.value == doctest::Approx(4.0).epsilon(1e-10));
}

TEST_CASE("gaussian curvature of reference scales") {
    DiskScale g1{[](complexd z) { return comparison_scale(1.0, z); }, true};
    CHECK(std::abs(gaussian_curvature(g1, complexd(0, 0)) + 4.0) < 1e-4);
    CHECK(std::abs(gaussian_curvature(g1, complexd(0.5, 0.2)) + 4.0) < 1e-4);

    DiskScale gq{[](complexd z) { return comparison_scale(0.25, z); }, true};
    CHECK(std::abs(gaussian_curvature(gq, complexd(0.3, 0)) + 1.0) < 1e-4);

    DiskScale flat{[](complexd) { return 1.0; }, true};
    CHECK(std::abs(gaussian_curvature(flat, complexd(0.2, 0.1))) < 1e-12);

    // spherical patch scale has curvature +4; this is the one-dimensional
    // sanity check of the hermitian normalization
    DiskScale fs{[](complexd z) {
                     double d = 1.0 + std::norm(z);
                     return 1.0 / (d * d);
                 },
                 true};
    CHECK(std::abs(gaussian_curvature(fs, complexd(0.3, -0.2)) - 4.0) < 1e-3);

    DiskScale zero{[](complexd) { return 0.0; }, true};
    CHECK_THROWS_AS(gaussian_curvature(zero, complexd(0, 0)), DomainError);
}

TEST_CASE("pullback scales") {
    auto ball = compile_builtin("ball_kobayashi", 2);
    DiskScale pb = pullback_scale(*ball, linear_embedding_disk(2));
    for (complexd z : PolarGrid{10, 8, 0.9}.points())
        CHECK(std::abs(pb.value(z) - comparison_scale(1.0, z)) < 1e-12 * comparison_scale(1.0, z));

    auto euc = compile_builtin("euclidean", 2);
    DiskScale pe = pullback_scale(*euc, linear_embedding_disk(2));
    CHECK(pe.value(complexd(0.3, 0.4)) == 1.0);

    auto poin = compile_builtin("poincare_disk", 1);
    DiskScale pp = pullback_scale(*poin, linear_embedding_disk(1));
    CHECK(std::abs(pp.value(complexd(0.2, -0.5)) - comparison_scale(1.0, complexd(0.2, -0.5))) <
          1e-13);

    CHECK_THROWS_AS(pullback_scale(*ball, linear_embedding_disk(1)), PreconditionError);
    // leaving the metric domain raises
    DiskMap big;
    big.n = 1;
    big.point = [](complexd z) { return std::vector<complexd>{3.0 * z}; };
    big.derivative = [](complexd) { return std::vector<complexd>{complexd(3.0, 0.0)}; };
    DiskScale bad = pullback_scale(*poin, big);
    CHECK_THROWS_AS(bad.value(complexd(0.5, 0.0)), DomainError);
}

TEST_CASE("ahlfors comparison") {
    auto ball = compile_builtin("ball_kobayashi", 2);
    DiskScale pb = pullback_scale(*ball, linear_embedding_disk(2));
    PolarGrid grid{20, 20, 0.95};

    AhlforsReport eq = ahlfors_compare(pb, 1.0, grid);
    CHECK_FALSE(eq.violation);
    CHECK(eq.heins_equality);
    CHECK(eq.equality_everywhere);

    DiskScale half{[](complexd z) { return 0.5 * comparison_scale(1.0, z); }, true};
    AhlforsReport lt = ahlfors_compare(half, 1.0, grid);
    CHECK_FALSE(lt.violation);
    CHECK_FALSE(lt.heins_equality);

    DiskScale twice{[](complexd z) { return 2.0 * comparison_scale(1.0, z); }, true};
    AhlforsReport gt = ahlfors_compare(twice, 1.0, grid);
    CHECK(gt.violation);

    CHECK_THROWS_AS(ahlfors_compare(pb, -1.0, grid), PreconditionError);
}

TEST_CASE("pullbacks of curvature -4 metrics stay below the comparison scale") {
    Rng rng(83);
    PolarGrid grid{20, 20, 0.95};
    auto ball = compile_builtin("ball_kobayashi", 2);
    auto poin = compile_builtin("poincare_disk", 1);
    for (int k = 0; k < 5; ++k) {
        DiskMap mb = testsup::random_polynomial_ball_map(2, rng);
        AhlforsReport rb = ahlfors_compare(pullback_scale(*ball, mb), 1.0, grid, 1e-8);
        CHECK_FALSE(rb.violation);
        DiskMap mp = testsup::random_polynomial_ball_map(1, rng);
        AhlforsReport rp = ahlfors_compare(pullback_scale(*poin, mp), 1.0, grid, 1e-8);
        CHECK_FALSE(rp.violation);
    }
}

TEST_CASE("curvature is invariant under disk self-maps") {
    // K(pullback scale)(z) = K(scale)(phi(z)) wherever phi' != 0
    auto selfmap = [](complexd z) { return 0.5 * (z * z + complexd(0.3, 0.1)); };
    auto selfmap_d = [](complexd z) { return z; };
    std::vector<DiskScale> scales = {
        {[](complexd z) { return comparison_scale(1.0, z); }, true},
        {[](complexd z) {
             double d = 1.0 + std::norm(z);
             return 1.0 / (d * d);
         },
         true}};
    for (const DiskScale& g : scales) {
        DiskScale pulled{[&, g](complexd z) {
                             return std::norm(selfmap_d(z)) * g.value(selfmap(z));
                         },
                         true};
        for (complexd z0 : {complexd(0.3, 0.2), complexd(-0.4, 0.1), complexd(0.2, -0.5)}) {
            double lhs = gaussian_curvature(pulled, z0);
            double rhs = gaussian_curvature(g, selfmap(z0));
            CHECK(std::abs(lhs - rhs) < 1e-3 * (1.0 + std::abs(rhs)));
        }
    }
}
