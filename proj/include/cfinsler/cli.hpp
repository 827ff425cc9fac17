#pragma once

// Command-line front door. Subcommands: check, curvature, classify,
// geodesic, laplacian, ahlfors. Exit codes: 0 success / positive finding,
// 1 check failure, 2 classification abort, 3 geodesic refusal, 64 usage.
//
// Output is deterministic for a fixed config and seed, including under
// --threads N.

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfinsler/catalog.hpp"
#include "cfinsler/classify.hpp"
#include "cfinsler/geodesic.hpp"

namespace cfinsler {

namespace cli {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitClassifyAborted = 2;
constexpr int kExitRefusal = 3;
constexpr int kExitUsage = 64;
constexpr int kExitInternal = 70;

inline complexd parse_complex(const std::string& text) {
    // forms: "1", "-0.5", "2i", "1+2i", "0.5-0.25i"
    std::string s;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) s += c;
    if (s.empty()) throw PreconditionError("empty complex literal");
    if (s.back() == 'i' || s.back() == 'I') {
        s.pop_back();
        // split into real + imaginary at the last +/- that is not an exponent sign
        std::size_t split = std::string::npos;
        for (std::size_t i = s.size(); i-- > 1;) {
            if ((s[i] == '+' || s[i] == '-') && s[i - 1] != 'e' && s[i - 1] != 'E') {
                split = i;
                break;
            }
        }
        if (split == std::string::npos) {
            if (s.empty() || s == "+" ) return complexd(0.0, 1.0);
            if (s == "-") return complexd(0.0, -1.0);
            return complexd(0.0, std::stod(s));
        }
        double re = std::stod(s.substr(0, split));
        std::string im = s.substr(split);
        if (im == "+") return complexd(re, 1.0);
        if (im == "-") return complexd(re, -1.0);
        return complexd(re, std::stod(im));
    }
    return complexd(std::stod(s), 0.0);
}

inline std::vector<complexd> parse_complex_vector(const std::string& text, int n) {
    std::vector<complexd> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_complex(item));
    if (static_cast<int>(out.size()) != n)
        throw PreconditionError("expected " + std::to_string(n) + " comma-separated components, got " +
                                std::to_string(out.size()));
    return out;
}

inline std::string fmt_complex_pair(complexd c) {
    return format_double(c.real()) + "," + format_double(c.imag());
}

struct Sink {
    std::string out_path;
    std::ostream* stream = &std::cout;
    std::ofstream file;

    void open() {
        if (!out_path.empty()) {
            file.open(out_path);
            if (!file) throw PreconditionError("cannot open output file '" + out_path + "'");
            stream = &file;
        }
    }
};

inline std::shared_ptr<CompiledMetric> resolve_metric(const std::string& spec, int dim) {
    for (const std::string& b : builtin_names()) {
        if (spec == b) {
            int n = dim;
            if (n == 0) n = (b == "poincare_disk" || b == "fubini_study_patch") ? 1 : 2;
            return compile_builtin(b, n);
        }
    }
    std::ifstream in(spec);
    if (!in) throw PreconditionError("metric '" + spec + "' is neither a builtin name nor a readable file");
    std::stringstream buf;
    buf << in.rdbuf();
    MetricFile mf = load_metric_text(buf.str(), spec);
    if (dim != 0 && dim != mf.dim)
        throw PreconditionError("--dim contradicts the metric file dimension");
    return compile_file(mf);
}

// Scale specs for the disk commands:
//   ga:<a> | poincare | const:<c> | absq | re | mul:<c>:<spec> | pullback:<metric>
inline DiskScale resolve_scale(const std::string& spec,
                               std::vector<std::shared_ptr<CompiledMetric>>& keepalive) {
    if (spec == "poincare") return DiskScale{[](complexd z) { return comparison_scale(1.0, z); }, true};
    if (spec == "absq") return DiskScale{[](complexd z) { return std::norm(z); }, true};
    if (spec == "re") return DiskScale{[](complexd z) { return z.real(); }, true};
    if (spec.rfind("ga:", 0) == 0) {
        double a = std::stod(spec.substr(3));
        if (a <= 0.0) throw PreconditionError("scale ga:<a> needs a > 0");
        return DiskScale{[a](complexd z) { return comparison_scale(a, z); }, true};
    }
    if (spec.rfind("const:", 0) == 0) {
        double c = std::stod(spec.substr(6));
        return DiskScale{[c](complexd) { return c; }, true};
    }
    if (spec.rfind("mul:", 0) == 0) {
        std::size_t second = spec.find(':', 4);
        if (second == std::string::npos) throw PreconditionError("mul:<c>:<spec> malformed");
        double c = std::stod(spec.substr(4, second - 4));
        DiskScale inner = resolve_scale(spec.substr(second + 1), keepalive);
        auto f = inner.value;
        return DiskScale{[c, f](complexd z) { return c * f(z); }, inner.smooth};
    }
    if (spec.rfind("pullback:", 0) == 0) {
        auto metric = resolve_metric(spec.substr(9), 0);
        keepalive.push_back(metric);
        DiskMap map = linear_embedding_disk(metric->dim());
        auto m = metric;  // owned by the closure
        return DiskScale{[m, map](complexd z) {
                             TangentPoint tp{map.point(z), map.derivative(z)};
                             return m->value(tp);
                         },
                         true};
    }
    throw PreconditionError("unknown scale spec '" + spec + "'");
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

struct CheckRow {
    std::string group, name;
    double value;
    double threshold;
    bool pass;
};

inline int cmd_check(const std::shared_ptr<CompiledMetric>& metric, int sites, int hom_samples,
                     double tol, std::uint64_t seed, int threads, const std::string& format,
                     bool quiet, Sink& sink) {
    std::vector<CheckRow> rows;

    SamplerConfig scfg;
    scfg.samples = std::max(sites, hom_samples);
    scfg.seed = seed;
    SiteSampler sampler(*metric, scfg);

    // homogeneity
    {
        Rng rng(seed ^ 0x5eedull);
        std::vector<HomogeneitySample> hs;
        for (int i = 0; i < hom_samples; ++i) {
            HomogeneitySample h;
            h.site = sampler.site(i);
            // F-normalization already applied; any nonzero lambda works
            h.lambda = complexd(0.25 + 1.5 * rng.uniform(), -1.0 + 2.0 * rng.uniform());
            hs.push_back(std::move(h));
        }
        double max_res = 0.0;
        try {
            max_res = check_homogeneity(*metric, hs).max_residual;
        } catch (const DomainError&) {
            max_res = std::numeric_limits<double>::infinity();
        }
        rows.push_back({"homogeneity", "squared_scaling", max_res, 1e-10, max_res < 1e-10});
    }

    // Levi sampling
    int singular = 0;
    double min_eig = std::numeric_limits<double>::infinity();
    for (int i = 0; i < sites; ++i) {
        try {
            LeviResult lr = levi(*metric, sampler.site(i));
            min_eig = std::min(min_eig, lr.min_eigenvalue);
        } catch (const SingularLevi&) {
            ++singular;
        } catch (const DomainError&) {
            ++singular;
        }
    }
    rows.push_back({"levi", "singular_sites", static_cast<double>(singular), 0.0, singular == 0});
    if (singular < sites)
        rows.push_back({"levi", "min_eigenvalue", min_eig, 0.0, min_eig > 0.0});

    // identity suite over sites (skips sites where the Levi test fails;
    // those are already counted above)
    if (singular < sites) {
        std::vector<IdentityReport> reports(sites);
        std::vector<char> ok(sites, 0);
        (void)threads;
        try {
            reports[0] = identity_suite(*metric, sampler.site(0));
            ok[0] = 1;
        } catch (const std::runtime_error&) {
        }
        parallel_for(sites - 1, threads, [&](int i) {
            try {
                reports[i + 1] = identity_suite(*metric, sampler.site(i + 1));
                ok[i + 1] = 1;
            } catch (const std::runtime_error&) {
            }
        });
        std::map<std::string, double> worst;
        for (int i = 0; i < sites; ++i) {
            if (!ok[i]) continue;
            for (const auto& r : reports[i].rows) {
                auto [it, fresh] = worst.try_emplace(r.name, r.residual);
                if (!fresh) it->second = std::max(it->second, r.residual);
            }
        }
        // keep the row order of the suite itself
        int first_ok = -1;
        for (int i = 0; i < sites && first_ok < 0; ++i)
            if (ok[i]) first_ok = i;
        if (first_ok >= 0) {
            for (const auto& r : reports[first_ok].rows)
                rows.push_back({"identity", r.name, worst[r.name], tol, worst[r.name] < tol});
        }
    }

    bool all_pass = true;
    for (const auto& r : rows) all_pass &= r.pass;

    sink.open();
    std::ostream& os = *sink.stream;
    if (format == "json") {
        nlohmann::ordered_json j;
        j["schema_version"] = 1;
        j["metric"] = metric->name();
        j["sites"] = sites;
        j["seed"] = seed;
        nlohmann::ordered_json jr = nlohmann::ordered_json::array();
        for (const auto& r : rows)
            jr.push_back({{"group", r.group},
                          {"name", r.name},
                          {"value", r.value},
                          {"threshold", r.threshold},
                          {"status", r.pass ? "PASS" : "FAIL"}});
        j["rows"] = jr;
        j["pass"] = all_pass;
        os << j.dump(2) << '\n';
    } else {
        os << "group,name,value,threshold,status\n";
        for (const auto& r : rows)
            os << r.group << ',' << r.name << ',' << format_double(r.value) << ','
               << format_double(r.threshold) << ',' << (r.pass ? "PASS" : "FAIL") << '\n';
    }
    if (!quiet && sink.stream != &std::cout)
        std::cout << (all_pass ? "check passed" : "check FAILED") << " for " << metric->name()
                  << '\n';
    return all_pass ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// curvature
// ---------------------------------------------------------------------------

inline int cmd_curvature(const std::shared_ptr<CompiledMetric>& metric, int samples,
                         std::uint64_t seed, int threads, const std::string& format, bool quiet,
                         Sink& sink) {
    SamplerConfig scfg;
    scfg.samples = samples;
    scfg.seed = seed;
    SiteSampler sampler(*metric, scfg);

    std::vector<TangentPoint> sites(samples);
    std::vector<double> k(samples, std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < samples; ++i) sites[i] = sampler.site(i);
    if (samples > 0) k[0] = holomorphic_curvature(*metric, sites[0]);  // warm the cache
    parallel_for(samples - 1, threads,
                 [&](int i) { k[i + 1] = holomorphic_curvature(*metric, sites[i + 1]); });

    double mn = std::numeric_limits<double>::infinity(), mx = -mn, mean = 0.0;
    for (double v : k) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
        mean += v;
    }
    mean /= std::max(samples, 1);

    sink.open();
    std::ostream& os = *sink.stream;
    const int n = metric->dim();
    if (format == "json") {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (int i = 0; i < samples; ++i) {
            nlohmann::ordered_json site = nlohmann::ordered_json::array();
            for (int c = 0; c < n; ++c)
                site.push_back({sites[i].p[c].real(), sites[i].p[c].imag()});
            nlohmann::ordered_json dir = nlohmann::ordered_json::array();
            for (int c = 0; c < n; ++c)
                dir.push_back({sites[i].v[c].real(), sites[i].v[c].imag()});
            rows.push_back({{"z", site}, {"v", dir}, {"K", k[i]}});
        }
        nlohmann::ordered_json j;
        j["schema_version"] = 1;
        j["metric"] = metric->name();
        j["seed"] = seed;
        j["rows"] = rows;
        j["summary"] = {{"min", mn}, {"max", mx}, {"mean", mean}, {"spread", mx - mn}};
        os << j.dump(2) << '\n';
    } else {
        os << "index";
        for (int c = 1; c <= n; ++c)
            os << ",z" << c << "_re,z" << c << "_im";
        for (int c = 1; c <= n; ++c)
            os << ",v" << c << "_re,v" << c << "_im";
        os << ",K\n";
        for (int i = 0; i < samples; ++i) {
            os << i;
            for (int c = 0; c < n; ++c) os << ',' << fmt_complex_pair(sites[i].p[c]);
            for (int c = 0; c < n; ++c) os << ',' << fmt_complex_pair(sites[i].v[c]);
            os << ',' << format_double(k[i]) << '\n';
        }
        os << "summary,min," << format_double(mn) << ",max," << format_double(mx) << ",mean,"
           << format_double(mean) << ",spread," << format_double(mx - mn) << '\n';
    }
    if (!quiet && sink.stream != &std::cout)
        std::cout << "curvature over " << samples << " samples: min " << format_double(mn)
                  << " max " << format_double(mx) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

inline int cmd_classify(const std::shared_ptr<CompiledMetric>& metric, const SamplerConfig& cfg,
                        const std::string& format, bool quiet, Sink& sink) {
    ClassificationReport rep = classify_metric(*metric, cfg);
    sink.open();
    std::ostream& os = *sink.stream;
    nlohmann::ordered_json j = classification_to_json(rep);
    if (format == "csv") {
        os << "key,value\n";
        std::function<void(const std::string&, const nlohmann::ordered_json&)> walk =
            [&](const std::string& prefix, const nlohmann::ordered_json& node) {
                if (node.is_object()) {
                    for (auto it = node.begin(); it != node.end(); ++it)
                        walk(prefix.empty() ? it.key() : prefix + "." + it.key(), it.value());
                } else {
                    os << prefix << ',' << (node.is_string() ? node.get<std::string>() : node.dump())
                       << '\n';
                }
            };
        walk("", j);
    } else {
        os << j.dump(2) << '\n';
    }
    if (!quiet && sink.stream != &std::cout)
        std::cout << "classified " << metric->name() << (rep.aborted ? " (ABORTED)" : "") << '\n';
    return rep.aborted ? kExitClassifyAborted : kExitOk;
}

// ---------------------------------------------------------------------------
// geodesic
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json complex_vector_json(const std::vector<complexd>& v) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (auto c : v) a.push_back({c.real(), c.imag()});
    return a;
}

inline void write_trace_csv(std::ostream& csv, const GeodesicTrace& tr,
                            const CompiledMetric& metric) {
    const int n = metric.dim();
    auto holo = holomorphy_pointwise(tr);
    csv << "theta,t";
    for (int c = 1; c <= n; ++c) csv << ",phi" << c << "_re,phi" << c << "_im";
    csv << ",h,isometry_residual,holomorphy_residual\n";
    for (std::size_t k = 0; k < tr.theta.size(); ++k)
        for (std::size_t ti = 0; ti < tr.t.size(); ++ti) {
            const double t = tr.t[ti];
            TangentPoint tp{tr.phi[k][ti], tr.dphi[k][ti]};
            const double g = metric.value(tp);
            const double w = 1.0 - t * t;
            csv << format_double(tr.theta[k]) << ',' << format_double(t);
            for (int c = 0; c < n; ++c) csv << ',' << fmt_complex_pair(tr.phi[k][ti][c]);
            csv << ',' << format_double(g * w * w) << ','
                << format_double(std::abs(g * w * w - 1.0)) << ','
                << format_double(holo[k][ti]) << '\n';
        }
}

inline int cmd_geodesic(const std::shared_ptr<CompiledMetric>& metric,
                        const std::vector<complexd>& p, const std::vector<complexd>& xi,
                        const GeodesicOptions& gopts, const std::string& out_prefix,
                        const std::string& format, bool quiet) {
    SolveOutcome outcome = solve_complex_geodesic(*metric, p, xi, gopts);

    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["metric"] = metric->name();
    j["p"] = complex_vector_json(p);
    j["grid"] = {{"n_theta", gopts.n_theta}, {"n_t", gopts.n_t}, {"s_max", gopts.s_max}};

    int code = kExitOk;
    if (outcome.refusal) {
        const Refusal& ref = *outcome.refusal;
        j["outcome"] = "refusal";
        j["refusal"] = {{"reason", "existence condition violated at (p; xi): no holomorphic "
                                   "solution exists"},
                        {"residual", complex_vector_json(ref.condition_residual)},
                        {"norm", ref.norm}};
        code = kExitRefusal;
    } else {
        const GeodesicTrace& tr = *outcome.trace;
        j["outcome"] = "trace";
        j["xi_normalized"] = complex_vector_json(tr.base.v);
        j["flags"] = {{"geodesic_complex_curve", tr.geodesic_complex_curve},
                      {"holomorphy_warning", tr.holomorphy_warning}};
        j["residuals"] = {{"holomorphy", tr.holomorphy_residual},
                          {"isometry", tr.isometry_residual},
                          {"norm_drift", tr.max_norm_drift},
                          {"condition_norm", max_abs(tr.condition_residual)},
                          {"kahler_norm", max_abs(tr.kahler_at_base)}};
        j["realized_curvature"] = tr.realized_curvature;

        if (!out_prefix.empty()) {
            std::ofstream csv(out_prefix + ".csv");
            if (!csv) throw PreconditionError("cannot open '" + out_prefix + ".csv'");
            write_trace_csv(csv, tr, *metric);
        } else if (format == "csv" && !quiet) {
            write_trace_csv(std::cout, tr, *metric);
        }
    }
    if (!out_prefix.empty()) {
        std::ofstream js(out_prefix + ".json");
        if (!js) throw PreconditionError("cannot open '" + out_prefix + ".json'");
        js << j.dump(2) << '\n';
    }
    if (!quiet) {
        if (format == "json" || (out_prefix.empty() && outcome.refusal))
            std::cout << j.dump(2) << '\n';
        else if (!out_prefix.empty())
            std::cout << (code == kExitRefusal ? "refusal" : "trace written") << " (" << out_prefix
                      << ".csv, " << out_prefix << ".json)\n";
    }
    return code;
}

// ---------------------------------------------------------------------------
// laplacian / ahlfors
// ---------------------------------------------------------------------------

inline int cmd_laplacian(const DiskScale& u, const std::vector<complexd>& points, bool curvature,
                         const std::vector<double>& radii, int circle_samples,
                         const std::string& format, Sink& sink) {
    sink.open();
    std::ostream& os = *sink.stream;
    std::vector<double> values(points.size());
    std::vector<bool> lower(points.size(), false);
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (curvature) {
            values[i] = gaussian_curvature(u, points[i], radii, circle_samples);
        } else {
            LaplacianEstimate est =
                generalized_laplacian(u.value, points[i], radii, circle_samples, u.smooth);
            values[i] = est.value;
            lower[i] = est.lower_estimate;
        }
    }
    if (format == "json") {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < points.size(); ++i)
            rows.push_back({{"zeta", {points[i].real(), points[i].imag()}},
                            {curvature ? "curvature" : "laplacian", values[i]},
                            {"lower_estimate", static_cast<bool>(lower[i])}});
        nlohmann::ordered_json j;
        j["schema_version"] = 1;
        j["rows"] = rows;
        os << j.dump(2) << '\n';
    } else {
        os << "zeta_re,zeta_im," << (curvature ? "curvature" : "laplacian") << ",lower_estimate\n";
        for (std::size_t i = 0; i < points.size(); ++i)
            os << fmt_complex_pair(points[i]) << ',' << format_double(values[i]) << ','
               << (lower[i] ? "true" : "false") << '\n';
    }
    return kExitOk;
}

inline int cmd_ahlfors(const DiskScale& g, double a, const PolarGrid& grid, double tol,
                       const std::string& format, bool quiet, Sink& sink) {
    AhlforsReport rep = ahlfors_compare(g, a, grid, tol);
    sink.open();
    std::ostream& os = *sink.stream;
    if (format == "json") {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (const auto& r : rep.rows)
            rows.push_back({{"zeta", {r.zeta.real(), r.zeta.imag()}},
                            {"g", r.g},
                            {"ga", r.ga},
                            {"margin", r.margin}});
        nlohmann::ordered_json j;
        j["schema_version"] = 1;
        j["a"] = a;
        j["max_margin"] = rep.max_margin;
        j["violation"] = rep.violation;
        j["heins_equality"] = rep.heins_equality;
        j["equality_everywhere"] = rep.equality_everywhere;
        j["rows"] = rows;
        os << j.dump(2) << '\n';
    } else {
        os << "zeta_re,zeta_im,g,ga,margin\n";
        for (const auto& r : rep.rows)
            os << fmt_complex_pair(r.zeta) << ',' << format_double(r.g) << ','
               << format_double(r.ga) << ',' << format_double(r.margin) << '\n';
        os << "summary,max_margin," << format_double(rep.max_margin) << ",violation,"
           << (rep.violation ? "true" : "false") << ",heins_equality,"
           << (rep.heins_equality ? "true" : "false") << ",equality_everywhere,"
           << (rep.equality_everywhere ? "true" : "false") << '\n';
    }
    if (!quiet && sink.stream != &std::cout)
        std::cout << (rep.violation ? "VIOLATION" : rep.heins_equality ? "HEINS-EQUALITY" : "ok")
                  << '\n';
    return rep.violation ? kExitCheckFailed : kExitOk;
}

// Applies `key = value` defaults from a --config file: keys become long
// options appended after the explicit arguments, skipping any option the
// command line already sets, so flags always win.
inline std::vector<std::string> apply_config_defaults(std::vector<std::string> args) {
    std::string path;
    std::vector<std::string> out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw PreconditionError("--config needs a file path");
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            out.push_back(args[i]);
        }
    }
    if (path.empty()) return out;
    std::ifstream in(path);
    if (!in) throw PreconditionError("cannot open config file '" + path + "'");
    std::string line;
    while (std::getline(in, line)) {
        line = detail::trim(line);
        if (line.empty() || line[0] == '#' || line[0] == '[') continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw PreconditionError("config line is not 'key = value': " + line);
        std::string key = "--" + detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        bool given = false;
        for (const auto& a : out)
            if (a == key || a.rfind(key + "=", 0) == 0) given = true;
        if (given) continue;
        if (value == "true") {
            out.push_back(key);
        } else if (value != "false") {
            out.push_back(key);
            out.push_back(value);
        }
    }
    return out;
}

}  // namespace cli

// ---------------------------------------------------------------------------
// Entry point shared by the binary and the tests
// ---------------------------------------------------------------------------

inline int run_cli(std::vector<std::string> args) {
    using namespace cli;
    CLI::App app{"complex Finsler metric toolkit: curvature, torsion tensors, and the "
                 "complex-geodesic Cauchy problem"};
    app.require_subcommand(1);

    std::string metric_spec, format = "csv", out_path, scale_spec = "poincare";
    int dim = 0, threads = 0;
    bool quiet = false;
    std::uint64_t seed = 20200615;

    std::string config_doc_only;
    auto add_common = [&](CLI::App* sub, bool with_metric) {
        // handled by apply_config_defaults before parsing; listed for --help
        sub->add_option("--config", config_doc_only, "read key = value defaults; flags override");
        if (with_metric)
            sub->add_option("--metric", metric_spec, "builtin name or metric file path")
                ->required();
        sub->add_option("--dim", dim, "dimension for builtins that accept one");
        sub->add_option("--seed", seed, "sampler seed");
        sub->add_option("--threads", threads, "worker threads (0 = hardware)");
        sub->add_option("--format", format, "output format")
            ->check(CLI::IsMember({"csv", "json"}));
        sub->add_flag("--quiet", quiet, "suppress status output");
        sub->add_option("--out", out_path, "write the primary output to a file");
    };

    // check
    auto* c_check = app.add_subcommand("check", "homogeneity, Levi and identity residuals");
    int check_sites = 50, hom_samples = 100;
    double check_tol = 1e-7;
    add_common(c_check, true);
    c_check->add_option("--sites", check_sites, "identity-suite sample sites")
        ->check(CLI::PositiveNumber);
    c_check->add_option("--homogeneity-samples", hom_samples, "homogeneity samples")
        ->check(CLI::PositiveNumber);
    c_check->add_option("--tol", check_tol, "identity residual threshold")
        ->check(CLI::PositiveNumber);

    // curvature
    auto* c_curv = app.add_subcommand("curvature", "holomorphic curvature over random sites");
    int curv_samples = 100;
    add_common(c_curv, true);
    c_curv->add_option("--samples", curv_samples, "sample count")->check(CLI::PositiveNumber);

    // classify
    auto* c_cls = app.add_subcommand("classify", "classify against the geodesic existence theory");
    SamplerConfig cls_cfg;
    add_common(c_cls, true);
    c_cls->add_option("--samples", cls_cfg.samples, "sample count")->check(CLI::PositiveNumber);
    c_cls->add_option("--curvature-tol", cls_cfg.curvature_tol, "curvature verdict threshold")
        ->check(CLI::PositiveNumber);
    c_cls->add_option("--tensor-tol", cls_cfg.tensor_tol, "tensor verdict threshold")
        ->check(CLI::PositiveNumber);
    c_cls->add_option("--z-radius", cls_cfg.z_radius_fraction,
                      "fraction of the domain radius to sample")
        ->check(CLI::PositiveNumber);

    // geodesic
    auto* c_geo = app.add_subcommand("geodesic", "solve the complex-geodesic Cauchy problem");
    std::string point_text, xi_text;
    GeodesicOptions gopts;
    bool normalize = false;
    add_common(c_geo, true);
    c_geo->add_option("--point", point_text, "base point, comma-separated complex components")
        ->required();
    c_geo->add_option("--xi", xi_text, "initial direction, comma-separated complex components")
        ->required();
    c_geo->add_option("--theta-grid", gopts.n_theta, "ray count")->check(CLI::Range(16, 4096));
    c_geo->add_option("--t-grid", gopts.n_t, "radial sample count")->check(CLI::Range(16, 4096));
    c_geo->add_option("--smax", gopts.s_max, "integration range in s = atanh t")
        ->check(CLI::PositiveNumber);
    c_geo->add_option("--rtol", gopts.integrator.rtol, "integrator relative tolerance")
        ->check(CLI::PositiveNumber);
    c_geo->add_option("--condition-tol", gopts.condition_tol, "existence condition tolerance")
        ->check(CLI::PositiveNumber);
    c_geo->add_flag("--force", gopts.force, "integrate even if the existence condition fails");
    c_geo->add_flag("--normalize", normalize, "rescale xi onto the unit sphere bundle first");

    // laplacian
    auto* c_lap = app.add_subcommand("laplacian", "generalized Laplacian / Gaussian curvature");
    std::vector<std::string> at_points{"0"};
    bool lap_curvature = false;
    int circle_samples = 256;
    c_lap->add_option("--config", config_doc_only, "read key = value defaults; flags override");
    c_lap->add_option("--u", scale_spec, "scale spec (ga:<a>|poincare|const:<c>|absq|re|mul:<c>:<spec>|pullback:<metric>)");
    c_lap->add_option("--at", at_points, "evaluation points (complex literals)");
    c_lap->add_flag("--curvature", lap_curvature, "report the Gaussian curvature of the scale");
    c_lap->add_option("--circle-samples", circle_samples, "quadrature samples per circle")
        ->check(CLI::Range(3, 1 << 20));
    c_lap->add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "json"}));
    c_lap->add_flag("--quiet", quiet, "suppress status output");
    c_lap->add_option("--out", out_path, "write the primary output to a file");

    // ahlfors
    auto* c_ahl = app.add_subcommand("ahlfors", "compare a scale against the curvature "
                                                "-4a comparison scale");
    double ahl_a = 1.0, ahl_tol = 1e-8;
    std::string grid_text = "20,20,0.95";
    c_ahl->add_option("--config", config_doc_only, "read key = value defaults; flags override");
    c_ahl->add_option("--g", scale_spec, "scale spec");
    c_ahl->add_option("--a", ahl_a, "comparison parameter a > 0")->check(CLI::PositiveNumber);
    c_ahl->add_option("--grid", grid_text, "polar grid n_r,n_theta,r_max");
    c_ahl->add_option("--tol", ahl_tol, "violation tolerance");
    c_ahl->add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "json"}));
    c_ahl->add_flag("--quiet", quiet, "suppress status output");
    c_ahl->add_option("--out", out_path, "write the primary output to a file");

    try {
        args = cli::apply_config_defaults(std::move(args));
        std::vector<const char*> argv;
        argv.push_back("cfinsler");
        for (const auto& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << '\n';
        return kExitUsage;
    } catch (const PreconditionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    Sink sink;
    sink.out_path = out_path;
    try {
        if (*c_check) {
            auto metric = resolve_metric(metric_spec, dim);
            return cmd_check(metric, check_sites, hom_samples, check_tol, seed, threads, format,
                             quiet, sink);
        }
        if (*c_curv) {
            auto metric = resolve_metric(metric_spec, dim);
            return cmd_curvature(metric, curv_samples, seed, threads, format, quiet, sink);
        }
        if (*c_cls) {
            auto metric = resolve_metric(metric_spec, dim);
            cls_cfg.seed = seed;
            cls_cfg.threads = threads;
            return cmd_classify(metric, cls_cfg, format, quiet, sink);
        }
        if (*c_geo) {
            auto metric = resolve_metric(metric_spec, dim);
            std::vector<complexd> p = parse_complex_vector(point_text, metric->dim());
            std::vector<complexd> xi = parse_complex_vector(xi_text, metric->dim());
            gopts.threads = threads;
            if (normalize) {
                double f = metric->norm_f(TangentPoint{p, xi});
                if (f <= 0.0) throw PreconditionError("cannot normalize a null direction");
                for (auto& c : xi) c /= f;
            }
            return cmd_geodesic(metric, p, xi, gopts, out_path, format, quiet);
        }
        if (*c_lap) {
            std::vector<std::shared_ptr<CompiledMetric>> keep;
            DiskScale u = resolve_scale(scale_spec, keep);
            std::vector<complexd> pts;
            for (const auto& t : at_points) pts.push_back(parse_complex(t));
            return cmd_laplacian(u, pts, lap_curvature, default_laplacian_radii(), circle_samples,
                                 format, sink);
        }
        if (*c_ahl) {
            std::vector<std::shared_ptr<CompiledMetric>> keep;
            DiskScale g = resolve_scale(scale_spec, keep);
            PolarGrid grid;
            {
                std::stringstream ss(grid_text);
                std::string part;
                std::vector<std::string> parts;
                while (std::getline(ss, part, ',')) parts.push_back(part);
                if (parts.size() != 3) throw PreconditionError("--grid must be n_r,n_theta,r_max");
                grid.n_r = std::stoi(parts[0]);
                grid.n_theta = std::stoi(parts[1]);
                grid.r_max = std::stod(parts[2]);
            }
            return cmd_ahlfors(g, ahl_a, grid, ahl_tol, format, quiet, sink);
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const PreconditionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InternalCheckError& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitCheckFailed;
    }
    return kExitUsage;
}

}  // namespace cfinsler
