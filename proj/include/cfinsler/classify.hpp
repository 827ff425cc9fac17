#pragma once

// Sample-based classification of a metric: strong pseudoconvexity, constant
// holomorphic curvature -4, vanishing curvature torsion H, the Kahler
// condition, and the complex-geodesic existence condition, aggregated into
// verdicts about which geodesic existence statements apply. Completeness is
// never inferred; it is a declared attribute and reported as an assumption.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfinsler/parallel.hpp"
#include "cfinsler/tensors.hpp"

namespace cfinsler {

// splitmix64: portable deterministic bit stream.
struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    double uniform() {  // [0, 1)
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    double gaussian() {
        // Box-Muller, hand-rolled so the stream is identical across
        // standard libraries.
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    complexd complex_gaussian() {
        double re = gaussian();
        double im = gaussian();
        return complexd(re, im);
    }

private:
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline double halton(std::uint64_t index, std::uint64_t base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= static_cast<double>(base);
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

struct SamplerConfig {
    int samples = 200;
    std::uint64_t seed = 20200615;
    double curvature_tol = 1e-6;
    double tensor_tol = 1e-7;
    // z sampling region: for ball domains a fraction of the domain radius,
    // otherwise a box half-width.
    double z_radius_fraction = 0.8;
    double z_box_halfwidth = 1.0;
    double max_singular_fraction = 0.05;
    int threads = 0;
};

// Low-discrepancy z draw plus a seeded uniform-direction v, F-normalized.
// All draws happen sequentially in the constructor, so threaded evaluation
// cannot reorder the streams; ball-domain rejection walks the single Halton
// sequence forward (consecutive indices stay well distributed).
class SiteSampler {
public:
    SiteSampler(const CompiledMetric& metric, const SamplerConfig& cfg)
        : metric_(metric), cfg_(cfg) {
        const int n = metric.dim();
        static constexpr std::uint64_t primes[16] = {2,  3,  5,  7,  11, 13, 17, 19,
                                                     23, 29, 31, 37, 41, 43, 47, 53};
        const bool ball = metric.domain().kind == DomainKind::UnitBall;
        const double limit =
            ball ? cfg.z_radius_fraction * metric.domain().radius : cfg.z_box_halfwidth;
        zpoints_.reserve(cfg.samples);
        std::uint64_t h = 1;
        while (static_cast<int>(zpoints_.size()) < cfg.samples) {
            std::vector<complexd> z(n);
            double norm2 = 0.0;
            for (int i = 0; i < n; ++i) {
                double re = (2.0 * halton(h, primes[(2 * i) % 16]) - 1.0) * limit;
                double im = (2.0 * halton(h, primes[(2 * i + 1) % 16]) - 1.0) * limit;
                z[i] = complexd(re, im);
                norm2 += std::norm(z[i]);
            }
            ++h;
            if (ball && norm2 >= limit * limit) continue;
            zpoints_.push_back(std::move(z));
        }
        Rng rng(cfg.seed);
        vdirs_.reserve(cfg.samples);
        for (int s = 0; s < cfg.samples; ++s) {
            std::vector<complexd> v(n);
            double norm2 = 0.0;
            while (norm2 == 0.0) {
                for (int a = 0; a < n; ++a) {
                    v[a] = rng.complex_gaussian();
                    norm2 += std::norm(v[a]);
                }
            }
            double inv = 1.0 / std::sqrt(norm2);
            for (auto& c : v) c *= inv;
            vdirs_.push_back(std::move(v));
        }
    }

    // Site with F-normalized direction. Deterministic in (seed, index).
    TangentPoint site(int index) const {
        TangentPoint tp;
        tp.p = zpoints_[static_cast<std::size_t>(index)];
        tp.v = vdirs_[static_cast<std::size_t>(index)];
        double f = metric_.norm_f(tp);
        if (f > 0.0)
            for (auto& c : tp.v) c /= f;
        return tp;
    }

private:
    const CompiledMetric& metric_;
    SamplerConfig cfg_;
    std::vector<std::vector<complexd>> zpoints_;
    std::vector<std::vector<complexd>> vdirs_;
};

// ---------------------------------------------------------------------------
// Classification report
// ---------------------------------------------------------------------------

struct ClassificationReport {
    std::string metric_name;
    int dimension = 0;
    int samples = 0;
    std::uint64_t seed = 0;
    double curvature_tol = 0.0, tensor_tol = 0.0;
    bool complete_declared = false;

    bool aborted = false;
    std::string abort_reason;
    int singular_sites = 0;

    bool strongly_pseudoconvex = false;
    double min_levi_eigenvalue = 0.0;
    bool curvature_constant_minus4 = false;
    double max_curvature_deviation = 0.0;  // max |K_F + 4|
    double curvature_min = 0.0, curvature_max = 0.0;
    bool h_vanishes = false;
    double max_h_norm = 0.0;
    bool kahler = false;
    double max_kahler_norm = 0.0;
    bool condition_holds = false;  // the existence condition
    double max_condition_norm = 0.0;

    bool theorem_coherent = false;  // condition <=> (curvature -4 and H = 0)

    // Verdict strings for the geodesic existence statements.
    std::string infinitesimal_geodesics;
    std::string geodesic_complex_curves;
    std::string kobayashi_identification;
};

inline ClassificationReport classify_metric(const CompiledMetric& metric,
                                            const SamplerConfig& cfg = {}) {
    ClassificationReport rep;
    rep.metric_name = metric.name();
    rep.dimension = metric.dim();
    rep.samples = cfg.samples;
    rep.seed = cfg.seed;
    rep.curvature_tol = cfg.curvature_tol;
    rep.tensor_tol = cfg.tensor_tol;
    rep.complete_declared = metric.complete_declared();

    SiteSampler sampler(metric, cfg);

    struct SampleStats {
        bool singular = false;
        double min_eig = 0.0, curv = 0.0, h = 0.0, kah = 0.0, cond = 0.0;
    };
    std::vector<SampleStats> stats(cfg.samples);

    // Warm the derivative cache single-threaded so the parallel phase only
    // reads it.
    if (cfg.samples > 0) {
        try {
            (void)evaluate_tensors(metric, sampler.site(0), {});
        } catch (const SingularLevi&) {
        }
    }

    parallel_for(cfg.samples, cfg.threads, [&](int i) {
        TangentPoint site = sampler.site(i);
        try {
            TensorPack tp = evaluate_tensors(metric, site, {});
            stats[i].min_eig = tp.min_levi_eigenvalue;
            stats[i].curv = tp.curvature;
            stats[i].h = max_abs(tp.h_contracted);
            stats[i].kah = max_abs(tp.kahler_residual);
            stats[i].cond = max_abs(tp.geodesic_condition_residual);
        } catch (const SingularLevi&) {
            stats[i].singular = true;
        }
    });

    double min_eig = std::numeric_limits<double>::infinity();
    double cdev = 0.0, cmin = std::numeric_limits<double>::infinity(),
           cmax = -std::numeric_limits<double>::infinity();
    double hmax = 0.0, kmax = 0.0, condmax = 0.0;
    int singular = 0;
    for (const auto& s : stats) {
        if (s.singular) {
            ++singular;
            continue;
        }
        min_eig = std::min(min_eig, s.min_eig);
        cdev = std::max(cdev, std::abs(s.curv + 4.0));
        cmin = std::min(cmin, s.curv);
        cmax = std::max(cmax, s.curv);
        hmax = std::max(hmax, s.h);
        kmax = std::max(kmax, s.kah);
        condmax = std::max(condmax, s.cond);
    }
    rep.singular_sites = singular;
    if (singular > cfg.max_singular_fraction * cfg.samples) {
        rep.aborted = true;
        rep.abort_reason = "NOT-STRONGLY-PSEUDOCONVEX: " + std::to_string(singular) + " of " +
                           std::to_string(cfg.samples) + " sites failed the Levi test";
        return rep;
    }

    rep.strongly_pseudoconvex = singular == 0;
    rep.min_levi_eigenvalue = min_eig;
    rep.max_curvature_deviation = cdev;
    rep.curvature_min = cmin;
    rep.curvature_max = cmax;
    rep.curvature_constant_minus4 = cdev < cfg.curvature_tol;
    rep.max_h_norm = hmax;
    rep.h_vanishes = hmax < cfg.tensor_tol;
    rep.max_kahler_norm = kmax;
    rep.kahler = kmax < cfg.tensor_tol;
    rep.max_condition_norm = condmax;
    rep.condition_holds = condmax < cfg.tensor_tol;

    rep.theorem_coherent =
        rep.condition_holds == (rep.curvature_constant_minus4 && rep.h_vanishes);

    const bool hyp = rep.curvature_constant_minus4 && rep.h_vanishes;
    const char* completeness_note = rep.complete_declared
                                        ? "completeness declared by the metric"
                                        : "completeness NOT declared; statements hold on "
                                          "compactly contained disks only";
    if (hyp) {
        rep.infinitesimal_geodesics =
            std::string("POSITIVE: an infinitesimal complex geodesic exists tangent to every "
                        "sampled unit vector (") +
            completeness_note + ")";
        rep.geodesic_complex_curves =
            rep.kahler ? std::string("POSITIVE: geodesic complex curves exist through every "
                                     "sampled unit vector (Kahler condition holds; ") +
                             completeness_note + ")"
                       : "NEGATIVE: the Kahler condition fails on samples, so geodesic complex "
                         "curves exist only where the pointwise gate passes";
        rep.kobayashi_identification =
            rep.complete_declared
                ? "POSITIVE: F is identified with the Kobayashi metric (constant holomorphic "
                  "curvature -4 and vanishing curvature torsion on samples; completeness assumed "
                  "by declaration)"
                : "INCONCLUSIVE: hypotheses hold on samples but completeness is not declared";
    } else {
        rep.infinitesimal_geodesics =
            "NEGATIVE: curvature/torsion hypotheses fail on samples";
        rep.geodesic_complex_curves =
            "NEGATIVE: curvature/torsion hypotheses fail on samples";
        rep.kobayashi_identification =
            "NEGATIVE: curvature/torsion hypotheses fail on samples";
    }
    return rep;
}

// Pointwise gate: with curvature and H hypotheses established on samples, a
// geodesic complex curve through (p; xi) exists iff the torsion contraction
// vanishes there.
enum class GateDecision { Exists, NotExists };

inline GateDecision pointwise_geodesic_gate(const CompiledMetric& metric,
                                            const ClassificationReport& rep,
                                            const TangentPoint& site, double tol = 1e-7) {
    if (rep.aborted || !(rep.curvature_constant_minus4 && rep.h_vanishes))
        throw PreconditionError(
            "pointwise gate hypotheses not established: classification must pass the "
            "constant-curvature and vanishing-H checks first");
    TangentPoint unit = site;
    double f = metric.norm_f(unit);
    if (f <= 0.0) throw PreconditionError("gate requires a nonzero direction");
    for (auto& c : unit.v) c /= f;
    double t = max_abs(torsion_T_contracted(metric, unit));
    return t < tol ? GateDecision::Exists : GateDecision::NotExists;
}

// ---------------------------------------------------------------------------
// JSON form (schema_version 1)
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json classification_to_json(const ClassificationReport& r) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["metric"] = r.metric_name;
    j["dimension"] = r.dimension;
    j["samples"] = r.samples;
    j["seed"] = r.seed;
    j["thresholds"] = {{"curvature", r.curvature_tol}, {"tensor", r.tensor_tol}};
    j["complete_declared"] = r.complete_declared;
    if (r.aborted) {
        j["aborted"] = true;
        j["abort_reason"] = r.abort_reason;
        j["singular_sites"] = r.singular_sites;
        return j;
    }
    j["aborted"] = false;
    j["strongly_pseudoconvex"] = {{"verdict", r.strongly_pseudoconvex ? "PASS" : "FAIL"},
                                  {"min_levi_eigenvalue", r.min_levi_eigenvalue},
                                  {"singular_sites", r.singular_sites}};
    j["curvature_constant_minus4"] = {{"verdict", r.curvature_constant_minus4 ? "PASS" : "FAIL"},
                                      {"max_abs_deviation", r.max_curvature_deviation},
                                      {"min", r.curvature_min},
                                      {"max", r.curvature_max}};
    j["h_vanishes"] = {{"verdict", r.h_vanishes ? "PASS" : "FAIL"}, {"max_norm", r.max_h_norm}};
    j["kahler"] = {{"verdict", r.kahler ? "PASS" : "FAIL"}, {"max_norm", r.max_kahler_norm}};
    j["geodesic_condition"] = {{"verdict", r.condition_holds ? "PASS" : "FAIL"},
                               {"max_norm", r.max_condition_norm}};
    j["theorem_coherent"] = r.theorem_coherent;
    j["verdicts"] = {{"infinitesimal_geodesics", r.infinitesimal_geodesics},
                     {"geodesic_complex_curves", r.geodesic_complex_curves},
                     {"kobayashi_identification", r.kobayashi_identification}};
    return j;
}

}  // namespace cfinsler
