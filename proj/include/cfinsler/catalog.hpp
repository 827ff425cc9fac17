#pragma once

// Built-in metrics. Each entry is constructed by parsing canonical DSL
// source, so the catalog also exercises the parser.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cfinsler/metric.hpp"

namespace cfinsler {

struct MetricTraits {
    bool hermitian = false;
    std::optional<double> constant_curvature;
    bool kahler = false;
    bool complete = false;
};

struct MetricCatalogEntry {
    std::string name;
    int dimension = 0;
    MetricAst ast;
    MetricDomain domain;
    MetricTraits traits;
    std::string source;
};

namespace detail {

inline std::string sum_abs2(char var, int n) {
    std::string s;
    for (int a = 1; a <= n; ++a) {
        if (a > 1) s += " + ";
        s += "abs2(";
        s += var;
        s += std::to_string(a);
        s += ')';
    }
    return s;
}

}  // namespace detail

inline std::vector<std::string> builtin_names() {
    return {"poincare_disk", "euclidean", "ball_kobayashi", "fubini_study_patch",
            "quartic_perturbation"};
}

inline MetricCatalogEntry builtin_metric(const std::string& name, int n) {
    if (n < 1 || n > kMaxDimension)
        throw PreconditionError("builtin metric dimension must lie in 1.." +
                                std::to_string(kMaxDimension));
    MetricCatalogEntry e;
    e.name = name;
    e.dimension = n;
    std::map<std::string, double> constants;
    if (name == "poincare_disk") {
        if (n != 1) throw PreconditionError("poincare_disk requires dimension 1");
        e.source = "abs2(v1) / (1 - abs2(z1))^2";
        e.domain = {DomainKind::UnitBall, 1.0};
        e.traits = {true, -4.0, true, true};
    } else if (name == "euclidean") {
        e.source = detail::sum_abs2('v', n);
        e.domain = {DomainKind::All, 0.0};
        e.traits = {true, 0.0, true, true};
    } else if (name == "ball_kobayashi") {
        // ((1 - |z|^2) |v|^2 + |<v,z>|^2) / (1 - |z|^2)^2 with the pairing
        // expanded into formal variables.
        std::string zz = detail::sum_abs2('z', n);
        std::string vv = detail::sum_abs2('v', n);
        std::string inner, inner_bar;
        for (int a = 1; a <= n; ++a) {
            if (a > 1) { inner += " + "; inner_bar += " + "; }
            inner += "v" + std::to_string(a) + "*conj(z" + std::to_string(a) + ")";
            inner_bar += "conj(v" + std::to_string(a) + ")*z" + std::to_string(a);
        }
        e.source = "((1 - (" + zz + ")) * (" + vv + ") + (" + inner + ") * (" + inner_bar +
                   ")) / (1 - (" + zz + "))^2";
        e.domain = {DomainKind::UnitBall, 1.0};
        e.traits = {true, -4.0, true, true};
    } else if (name == "fubini_study_patch") {
        if (n != 1) throw PreconditionError("fubini_study_patch requires dimension 1");
        e.source = "abs2(v1) / (1 + abs2(z1))^2";
        e.domain = {DomainKind::All, 0.0};
        e.traits = {true, 4.0, true, false};
    } else if (name == "quartic_perturbation") {
        constants["eps"] = 0.1;
        std::string vv = detail::sum_abs2('v', n);
        std::string quartics;
        for (int a = 1; a <= n; ++a) {
            if (a > 1) quartics += " + ";
            quartics += "abs2(v" + std::to_string(a) + ")^2";
        }
        e.source = "sqrt((" + vv + ")^2 + eps * (" + quartics + "))";
        e.domain = {DomainKind::All, 0.0};
        e.traits = {false, std::nullopt, true, false};
    } else {
        throw PreconditionError("unknown builtin metric '" + name + "'");
    }
    e.ast = parse_metric(e.source, n, &constants);
    return e;
}

inline std::shared_ptr<CompiledMetric> compile_builtin(const std::string& name, int n) {
    MetricCatalogEntry e = builtin_metric(name, n);
    return std::make_shared<CompiledMetric>(std::move(e.ast), e.domain, e.name, e.traits.complete);
}

inline std::shared_ptr<CompiledMetric> compile_file(const MetricFile& mf) {
    return std::make_shared<CompiledMetric>(mf.ast, mf.domain, mf.name, mf.complete);
}

}  // namespace cfinsler
