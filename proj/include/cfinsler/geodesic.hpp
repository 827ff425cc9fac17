#pragma once

// The complex-geodesic Cauchy problem, solved by the radial construction:
// along each ray angle theta integrate the autonomous system
//     sigma''^a = -Gamma^a_{;i}(sigma; sigma') sigma'^i,
//     sigma(0) = p, sigma'(0) = e^{i theta} xi,
// in the arclength-like parameter s (t = tanh s), then assemble the
// candidate disk phi(t e^{i theta}) = sigma_theta(atanh t) and run the
// holomorphy / isometry / curvature-realization diagnostics. The existence
// condition residual decides between a trace and a typed refusal.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "cfinsler/disk.hpp"
#include "cfinsler/parallel.hpp"
#include "cfinsler/tensors.hpp"

namespace cfinsler {

struct IntegratorOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_max = 0.1;
    double h_min = 1e-13;
    long max_steps = 2000000;
};

struct RayTrace {
    double theta = 0.0;
    std::vector<double> s;                         // sample parameters
    std::vector<double> t;                         // tanh s
    std::vector<std::vector<complexd>> sigma;      // per sample
    std::vector<std::vector<complexd>> sigma_dot;  // per sample
    std::vector<double> norm_monitor;              // G(sigma; sigma') at accepted steps
    double max_norm_drift = 0.0;
    long steps = 0;
};

namespace detail {

struct GeodesicRhs {
    const CompiledMetric& metric;
    int n;

    // y = (sigma, sigma'); returns (sigma', sigma'').
    std::vector<complexd> operator()(const std::vector<complexd>& y) const {
        std::vector<complexd> f(2 * static_cast<std::size_t>(n));
        FormalPoint fp;
        fp.z.assign(y.begin(), y.begin() + n);
        fp.v.assign(y.begin() + n, y.end());
        fp.zbar.resize(n);
        fp.vbar.resize(n);
        for (int i = 0; i < n; ++i) {
            fp.zbar[i] = std::conj(fp.z[i]);
            fp.vbar[i] = std::conj(fp.v[i]);
        }
        const EvalPoint pt = fp.view();
        metric.check_domain(fp.z, fp.zbar);
        CMatrix m(n);
        std::vector<complexd> gvbz(static_cast<std::size_t>(n) * n);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                m.at(a, b) = metric.derivative_tape(
                    MultiIndex{{VarKind::V, a}, {VarKind::VBar, b}}).eval(pt);
                gvbz[static_cast<std::size_t>(a) * n + b] = metric.derivative_tape(
                    MultiIndex{{VarKind::VBar, a}, {VarKind::Z, b}}).eval(pt);
            }
        CMatrix w;
        try {
            w = levi_inverse_of(m);
        } catch (const std::runtime_error&) {
            throw SingularLevi("Levi matrix singular along the ray",
                               std::numeric_limits<double>::quiet_NaN());
        }
        for (int a = 0; a < n; ++a) {
            f[a] = fp.v[a];
            complexd acc(0.0, 0.0);
            for (int mu = 0; mu < n; ++mu)
                for (int i = 0; i < n; ++i)
                    acc += w.at(a, mu) * gvbz[static_cast<std::size_t>(mu) * n + i] * fp.v[i];
            f[n + a] = -acc;
        }
        return f;
    }
};

// Dormand-Prince 5(4) coefficients.
struct Dopri5 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
};

}  // namespace detail

// Integrates one ray; `sample_s` must be sorted ascending and start at 0.
// The step controller lands exactly on every requested sample parameter.
inline RayTrace integrate_ray(const CompiledMetric& metric, const std::vector<complexd>& p,
                              const std::vector<complexd>& xi, double theta,
                              const std::vector<double>& sample_s,
                              const IntegratorOptions& opts = {}) {
    const int n = metric.dim();
    if (static_cast<int>(p.size()) != n || static_cast<int>(xi.size()) != n)
        throw PreconditionError("ray initial data dimension mismatch");
    if (sample_s.empty() || sample_s.front() != 0.0)
        throw PreconditionError("ray samples must start at s = 0");

    TangentPoint base{p, xi};
    double f = metric.norm_f(base);
    if (std::abs(f - 1.0) > 1e-9)
        throw PreconditionError("ray integration requires a unit initial vector, F = " +
                                format_double(f));

    detail::GeodesicRhs rhs{metric, n};
    const std::size_t dim = 2 * static_cast<std::size_t>(n);
    std::vector<complexd> y(dim);
    const complexd rot = std::polar(1.0, theta);
    for (int i = 0; i < n; ++i) {
        y[i] = p[i];
        y[n + i] = rot * xi[i];
    }

    RayTrace ray;
    ray.theta = theta;

    auto record_sample = [&](double s, const std::vector<complexd>& state) {
        ray.s.push_back(s);
        ray.t.push_back(std::tanh(s));
        ray.sigma.emplace_back(state.begin(), state.begin() + n);
        ray.sigma_dot.emplace_back(state.begin() + n, state.end());
    };
    auto monitor = [&](const std::vector<complexd>& state) {
        TangentPoint tp;
        tp.p.assign(state.begin(), state.begin() + n);
        tp.v.assign(state.begin() + n, state.end());
        double g = metric.value(tp);
        ray.norm_monitor.push_back(g);
        ray.max_norm_drift = std::max(ray.max_norm_drift, std::abs(g - 1.0));
    };

    monitor(y);
    std::size_t next_sample = 0;
    if (sample_s[0] == 0.0) {
        record_sample(0.0, y);
        ++next_sample;
    }
    const double s_end = sample_s.back();
    double s = 0.0;
    double h_prop = std::min(opts.h_max, s_end > 0 ? s_end / 100.0 : opts.h_max);

    std::vector<complexd> k1 = rhs(y), k2, k3, k4, k5, k6, k7, ytmp(dim), ynew(dim);
    auto stage = [&](const std::vector<complexd>& base_y, double hh,
                     std::initializer_list<std::pair<const std::vector<complexd>*, double>> terms) {
        for (std::size_t i = 0; i < dim; ++i) {
            complexd acc = base_y[i];
            for (const auto& [k, c] : terms) acc += hh * c * (*k)[i];
            ytmp[i] = acc;
        }
        return rhs(ytmp);
    };

    using D = detail::Dopri5;
    while (next_sample < sample_s.size()) {
        const double target = sample_s[next_sample];
        if (target - s <= 1e-14) {
            record_sample(target, y);
            ++next_sample;
            continue;
        }
        if (ray.steps++ > opts.max_steps)
            throw IntegrationError(IntegrationError::Kind::StepFailure,
                                   "step budget exhausted during ray integration");
        const bool clamped = h_prop >= target - s;
        const double h = clamped ? target - s : h_prop;

        double err;
        try {
            k2 = stage(y, h, {{&k1, D::a21}});
            k3 = stage(y, h, {{&k1, D::a31}, {&k2, D::a32}});
            k4 = stage(y, h, {{&k1, D::a41}, {&k2, D::a42}, {&k3, D::a43}});
            k5 = stage(y, h, {{&k1, D::a51}, {&k2, D::a52}, {&k3, D::a53}, {&k4, D::a54}});
            k6 = stage(y, h,
                       {{&k1, D::a61}, {&k2, D::a62}, {&k3, D::a63}, {&k4, D::a64}, {&k5, D::a65}});
            for (std::size_t i = 0; i < dim; ++i)
                ynew[i] = y[i] + h * (D::b1 * k1[i] + D::b3 * k3[i] + D::b4 * k4[i] +
                                      D::b5 * k5[i] + D::b6 * k6[i]);
            k7 = rhs(ynew);

            err = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                complexd e = h * (D::e1 * k1[i] + D::e3 * k3[i] + D::e4 * k4[i] + D::e5 * k5[i] +
                                  D::e6 * k6[i] + D::e7 * k7[i]);
                double sc = opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
                double r = std::abs(e) / sc;
                err += r * r;
            }
            err = std::sqrt(err / dim);
        } catch (const DomainError& e) {
            // a trial stage left the chart; retry with a smaller step, and
            // report a domain exit once no step fits
            if (h <= 16.0 * opts.h_min)
                throw IntegrationError(IntegrationError::Kind::DomainExit,
                                       std::string("ray left the metric domain: ") + e.what());
            h_prop = h / 4.0;
            continue;
        }
        if (!std::isfinite(err))
            throw IntegrationError(IntegrationError::Kind::StepFailure,
                                   "non-finite error estimate (blow-up?)");

        const bool accepted = err <= 1.0;
        if (accepted) {
            s += h;
            y.swap(ynew);
            k1.swap(k7);
            monitor(y);
            if (clamped) {
                record_sample(target, y);
                ++next_sample;
            }
        }
        double factor = err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.2);
        factor = std::clamp(factor, 0.2, 5.0);
        if (!(accepted && clamped && factor >= 1.0))
            h_prop = std::min(h * factor, opts.h_max);
        if (h_prop < opts.h_min)
            throw IntegrationError(IntegrationError::Kind::StepFailure,
                                   "step size collapsed during ray integration");
    }
    return ray;
}

// Overload matching the (s_max, tol) call shape: samples at the integrator's
// accepted steps plus s_max.
inline RayTrace integrate_ray(const CompiledMetric& metric, const std::vector<complexd>& p,
                              const std::vector<complexd>& xi, double theta, double s_max,
                              double tol) {
    IntegratorOptions opts;
    opts.rtol = tol;
    opts.atol = tol * 1e-2;
    std::vector<double> samples;
    for (int j = 0; j <= 32; ++j) samples.push_back(s_max * j / 32.0);
    return integrate_ray(metric, p, xi, theta, samples, opts);
}

// ---------------------------------------------------------------------------
// Disk assembly and diagnostics
// ---------------------------------------------------------------------------

struct GeodesicTrace {
    TangentPoint base;             // (p; xi), F(p;xi) = 1
    std::vector<double> theta;     // uniform, size >= 16
    std::vector<double> t;         // increasing from 0, size >= 16
    // phi[k][j], dphi[k][j]: n-vectors at (theta_k, t_j)
    std::vector<std::vector<std::vector<complexd>>> phi, dphi;
    double max_norm_drift = 0.0;

    double holomorphy_residual = 0.0;
    double isometry_residual = 0.0;
    double realized_curvature = 0.0;
    bool holomorphy_warning = false;
    bool geodesic_complex_curve = false;
    std::vector<complexd> condition_residual;  // at (p; xi)
    std::vector<complexd> kahler_at_base;
};

inline std::vector<double> default_t_grid(int count, double s_max) {
    const double t_max = std::tanh(s_max);
    std::vector<double> t(count);
    for (int j = 0; j < count; ++j)
        t[j] = t_max * std::sin(0.5 * std::numbers::pi * j / (count - 1));
    return t;
}

inline GeodesicTrace assemble_disk(const std::vector<RayTrace>& rays,
                                   const std::vector<double>& t_grid) {
    if (rays.size() < 16) throw PreconditionError("disk assembly needs at least 16 rays");
    if (t_grid.size() < 16) throw PreconditionError("disk assembly needs at least 16 t samples");
    const std::size_t nt = t_grid.size();
    GeodesicTrace tr;
    tr.theta.resize(rays.size());
    tr.t = t_grid;
    tr.phi.resize(rays.size());
    tr.dphi.resize(rays.size());
    const std::vector<complexd>& p0 = rays[0].sigma[0];
    for (std::size_t k = 0; k < rays.size(); ++k) {
        const RayTrace& r = rays[k];
        if (r.sigma.size() != nt)
            throw PreconditionError("ray sample count does not match the t grid");
        for (std::size_t c = 0; c < p0.size(); ++c)
            if (std::abs(r.sigma[0][c] - p0[c]) > 1e-12)
                throw PreconditionError("rays do not share the base point");
        tr.theta[k] = r.theta;
        tr.max_norm_drift = std::max(tr.max_norm_drift, r.max_norm_drift);
        tr.phi[k].resize(nt);
        tr.dphi[k].resize(nt);
        const complexd rot_back = std::polar(1.0, -r.theta);
        for (std::size_t j = 0; j < nt; ++j) {
            tr.phi[k][j] = r.sigma[j];
            const double t = t_grid[j];
            const double sech2 = 1.0 - t * t;
            std::vector<complexd> d(r.sigma_dot[j].size());
            for (std::size_t c = 0; c < d.size(); ++c)
                d[c] = rot_back * r.sigma_dot[j][c] / sech2;
            tr.dphi[k][j] = std::move(d);
        }
    }
    tr.base.p = p0;
    tr.base.v = tr.dphi[0][0];
    return tr;
}

namespace detail {

// Fornberg weights for the m-th derivative at x0 over the given nodes.
inline std::vector<double> fornberg_weights(double x0, const std::vector<double>& x, int m) {
    const int nd = static_cast<int>(x.size()) - 1;
    std::vector<std::vector<std::vector<double>>> d(
        static_cast<std::size_t>(nd) + 1,
        std::vector<std::vector<double>>(static_cast<std::size_t>(nd) + 1,
                                         std::vector<double>(static_cast<std::size_t>(m) + 1, 0.0)));
    d[0][0][0] = 1.0;
    double c1 = 1.0;
    for (int i = 1; i <= nd; ++i) {
        double c2 = 1.0;
        for (int j = 0; j < i; ++j) {
            double c3 = x[i] - x[j];
            c2 *= c3;
            for (int k = 0; k <= std::min(i, m); ++k) {
                d[i][j][k] = ((x[i] - x0) * d[i - 1][j][k] -
                              (k > 0 ? k * d[i - 1][j][k - 1] : 0.0)) /
                             c3;
            }
        }
        for (int k = 0; k <= std::min(i, m); ++k) {
            d[i][i][k] = (c1 / c2) * ((k > 0 ? k * d[i - 1][i - 1][k - 1] : 0.0) -
                                      (x[i - 1] - x0) * d[i - 1][i - 1][k]);
        }
        c1 = c2;
    }
    std::vector<double> w(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) w[j] = d[nd][j][m];
    return w;
}

}  // namespace detail

// |d_theta phi - i t d_t phi| / (1 + |t d_t phi|) per interior grid point
// (NaN where the stencil does not fit); for holomorphic phi the numerator
// vanishes identically. Fourth-order central differences in theta (periodic)
// and a five-point difference on the (non-uniform) t grid.
inline std::vector<std::vector<double>> holomorphy_pointwise(const GeodesicTrace& tr) {
    const int nk = static_cast<int>(tr.theta.size());
    const int nt = static_cast<int>(tr.t.size());
    if (nk < 16 || nt < 16)
        throw PreconditionError("holomorphy residual needs at least a 16 x 16 grid");
    const std::size_t nc = tr.phi[0][0].size();
    const double dtheta = 2.0 * std::numbers::pi / nk;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<double>> out(nk, std::vector<double>(nt, nan));
    for (int j = 2; j + 2 < nt; ++j) {
        const double t = tr.t[j];
        if (t == 0.0) continue;
        std::vector<double> nodes(tr.t.begin() + (j - 2), tr.t.begin() + (j + 3));
        std::vector<double> w = detail::fornberg_weights(t, nodes, 1);
        for (int k = 0; k < nk; ++k) {
            double num = 0.0, den = 0.0;
            for (std::size_t c = 0; c < nc; ++c) {
                const complexd fm2 = tr.phi[(k - 2 + nk) % nk][j][c];
                const complexd fm1 = tr.phi[(k - 1 + nk) % nk][j][c];
                const complexd fp1 = tr.phi[(k + 1) % nk][j][c];
                const complexd fp2 = tr.phi[(k + 2) % nk][j][c];
                const complexd dth = (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * dtheta);
                complexd dt(0.0, 0.0);
                for (int q = 0; q < 5; ++q) dt += w[q] * tr.phi[k][j - 2 + q][c];
                const complexd tdt = t * dt;
                num += std::norm(dth - complexd(0.0, 1.0) * tdt);
                den += std::norm(tdt);
            }
            out[k][j] = std::sqrt(num) / (1.0 + std::sqrt(den));
        }
    }
    return out;
}

inline double holomorphy_residual(const GeodesicTrace& tr) {
    double worst = 0.0;
    for (const auto& row : holomorphy_pointwise(tr))
        for (double v : row)
            if (std::isfinite(v)) worst = std::max(worst, v);
    return worst;
}

// sup of |G(phi; phi') (1 - t^2)^2 - 1|; the pullback of an infinitesimal
// complex geodesic is the Poincare scale.
inline double isometry_residual(const GeodesicTrace& tr, const CompiledMetric& metric) {
    TangentPoint base{tr.phi[0][0], tr.dphi[0][0]};
    double f = metric.norm_f(base);
    if (std::abs(f - 1.0) > 1e-6)
        throw PreconditionError("trace base vector is not F-unit (F = " + format_double(f) + ")");
    double worst = 0.0;
    for (std::size_t k = 0; k < tr.theta.size(); ++k)
        for (std::size_t j = 0; j < tr.t.size(); ++j) {
            const double t = tr.t[j];
            TangentPoint tp{tr.phi[k][j], tr.dphi[k][j]};
            const double g = metric.value(tp);
            const double w = 1.0 - t * t;
            worst = std::max(worst, std::abs(g * w * w - 1.0));
        }
    return worst;
}

// Gaussian curvature at zeta = 0 of the pullback scale of the candidate
// disk, from freshly integrated short rays on the estimator circles.
inline double realized_curvature(const GeodesicTrace& tr, const CompiledMetric& metric,
                                 const IntegratorOptions& opts = {}) {
    const std::vector<double> radii = default_laplacian_radii();
    const int m = 256;
    std::vector<double> sample_s = {0.0};
    for (double r : radii) sample_s.push_back(std::atanh(r));
    std::sort(sample_s.begin(), sample_s.end());

    const double g0 = metric.value(tr.base);  // = 1 on the unit sphere bundle
    std::vector<double> mean_log(radii.size(), 0.0);
    for (int kk = 0; kk < m; ++kk) {
        const double th = 2.0 * std::numbers::pi * kk / m;
        RayTrace ray = integrate_ray(metric, tr.base.p, tr.base.v, th, sample_s, opts);
        const complexd rot_back = std::polar(1.0, -th);
        for (std::size_t ri = 0; ri < radii.size(); ++ri) {
            // sample index of atanh(radii[ri]) in ascending sample_s
            std::size_t j = 0;
            for (std::size_t q = 0; q < ray.s.size(); ++q)
                if (std::abs(ray.t[q] - radii[ri]) < 1e-12) j = q;
            const double t = ray.t[j];
            TangentPoint tp;
            tp.p = ray.sigma[j];
            tp.v.resize(ray.sigma_dot[j].size());
            for (std::size_t c = 0; c < tp.v.size(); ++c)
                tp.v[c] = rot_back * ray.sigma_dot[j][c] / (1.0 - t * t);
            mean_log[ri] += std::log(metric.value(tp));
        }
    }
    // Neville extrapolation of q(r) = 4 (mean log g - log g(0)) / r^2 to r = 0.
    std::vector<double> x(radii.size()), q(radii.size());
    for (std::size_t i = 0; i < radii.size(); ++i) {
        x[i] = radii[i] * radii[i];
        q[i] = 4.0 * (mean_log[i] / m - std::log(g0)) / x[i];
    }
    std::vector<double> tbl = q;
    for (std::size_t level = 1; level < tbl.size(); ++level)
        for (std::size_t i = 0; i + level < tbl.size(); ++i)
            tbl[i] = (x[i] * tbl[i + 1] - x[i + level] * tbl[i]) / (x[i] - x[i + level]);
    return -tbl[0] / (2.0 * g0);
}

// ---------------------------------------------------------------------------
// Vector fields on the unit sphere bundle
// ---------------------------------------------------------------------------

// X = v^i d/dz^i - Gamma^a_{;i} v^i d/dv^a and Z = i v^a d/dv^a, each as 2n
// components (base block, fiber block) at a site with F(p;v) = 1.
inline std::pair<std::vector<complexd>, std::vector<complexd>> vector_fields_XZ(
    const CompiledMetric& metric, const TangentPoint& site) {
    const int n = metric.dim();
    if (std::abs(metric.norm_f(site) - 1.0) > 1e-9)
        throw PreconditionError("vector fields are defined on the unit sphere bundle (F = 1)");
    std::vector<complexd> gamma = gamma_coefficients(metric, site);
    std::vector<complexd> X(2 * static_cast<std::size_t>(n)), Z(2 * static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) {
        X[a] = site.v[a];
        complexd acc(0.0, 0.0);
        for (int i = 0; i < n; ++i) acc += gamma[static_cast<std::size_t>(a) * n + i] * site.v[i];
        X[n + a] = -acc;
        Z[a] = complexd(0.0, 0.0);
        Z[n + a] = complexd(0.0, 1.0) * site.v[a];
    }
    return {X, Z};
}

// ---------------------------------------------------------------------------
// Full solve
// ---------------------------------------------------------------------------

struct GeodesicOptions {
    // 128 rays keep the fourth-order theta-stencil truncation (~(2pi/N)^4/30)
    // comfortably below the 1e-6 holomorphy gate; 64 rays sit right at it.
    int n_theta = 128;
    int n_t = 48;
    double s_max = 5.0;
    IntegratorOptions integrator;
    double condition_tol = 1e-7;  // on the existence-condition residual norm
    double kahler_tol = 1e-7;     // pointwise Kahler gate for the flag
    double unit_tol = 1e-6;       // |F - 1| window for exact rescaling
    bool force = false;           // integrate even when the condition fails
    int threads = 0;
};

struct Refusal {
    std::vector<complexd> condition_residual;
    double norm = 0.0;
};

struct SolveOutcome {
    std::optional<GeodesicTrace> trace;
    std::optional<Refusal> refusal;
};

inline SolveOutcome solve_complex_geodesic(const CompiledMetric& metric,
                                           const std::vector<complexd>& p,
                                           const std::vector<complexd>& xi_in,
                                           const GeodesicOptions& opts = {}) {
    const int n = metric.dim();
    if (static_cast<int>(p.size()) != n || static_cast<int>(xi_in.size()) != n)
        throw PreconditionError("solve input dimension mismatch");
    bool zero = true;
    for (auto c : xi_in)
        if (c != complexd(0.0, 0.0)) zero = false;
    if (zero) throw PreconditionError("initial direction must be nonzero");

    TangentPoint site{p, xi_in};
    const double f = metric.norm_f(site);
    if (std::abs(f - 1.0) > opts.unit_tol)
        throw PreconditionError("initial vector must satisfy F(p; xi) = 1 within " +
                                format_double(opts.unit_tol) + " (got F = " + format_double(f) +
                                "); rescale first");
    for (auto& c : site.v) c /= f;

    TensorOptions topts;
    topts.with_h = false;
    topts.crosscheck_curvature = false;
    TensorPack tp = evaluate_tensors(metric, site, topts);
    const double cond_norm = max_abs(tp.geodesic_condition_residual);

    SolveOutcome out;
    if (cond_norm > opts.condition_tol && !opts.force) {
        out.refusal = Refusal{tp.geodesic_condition_residual, cond_norm};
        return out;
    }

    std::vector<double> t_grid = default_t_grid(opts.n_t, opts.s_max);
    std::vector<double> sample_s(t_grid.size());
    for (std::size_t j = 0; j < t_grid.size(); ++j) sample_s[j] = std::atanh(t_grid[j]);

    std::vector<RayTrace> rays(opts.n_theta);
    parallel_for(opts.n_theta, opts.threads, [&](int k) {
        const double th = 2.0 * std::numbers::pi * k / opts.n_theta;
        rays[k] = integrate_ray(metric, site.p, site.v, th, sample_s, opts.integrator);
    });

    GeodesicTrace tr = assemble_disk(rays, t_grid);
    tr.base = site;
    tr.condition_residual = tp.geodesic_condition_residual;
    tr.kahler_at_base = tp.kahler_residual;
    tr.holomorphy_residual = holomorphy_residual(tr);
    tr.isometry_residual = isometry_residual(tr, metric);
    tr.realized_curvature = realized_curvature(tr, metric, opts.integrator);
    tr.holomorphy_warning = cond_norm > opts.condition_tol || tr.holomorphy_residual > 1e-4;
    tr.geodesic_complex_curve =
        !tr.holomorphy_warning && max_abs(tp.kahler_residual) < opts.kahler_tol;
    out.trace = std::move(tr);
    return out;
}

// sup distance between phi fields of two traces over matching grids;
// tolerance-refinement stability is the uniqueness evidence.
inline double trace_sup_distance(const GeodesicTrace& a, const GeodesicTrace& b) {
    if (a.theta.size() != b.theta.size() || a.t.size() != b.t.size())
        throw PreconditionError("trace grids do not match");
    double worst = 0.0;
    for (std::size_t k = 0; k < a.theta.size(); ++k)
        for (std::size_t j = 0; j < a.t.size(); ++j)
            for (std::size_t c = 0; c < a.phi[k][j].size(); ++c)
                worst = std::max(worst, std::abs(a.phi[k][j][c] - b.phi[k][j][c]));
    return worst;
}

}  // namespace cfinsler
