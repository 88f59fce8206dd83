#pragma once

// Core machinery for confidence intervals that utilize uncertain prior
// information: the optimized interval functions b (center shift, odd) and
// s (half-width, even), their coverage probability CP(gamma; rho) and scaled
// expected length SEL(gamma; rho), and the interval constructors.
//
// b and s live on a knot grid on [0, L] (default L = 6), are extended to
// [-L, L] by symmetry through natural cubic splines, and are constant
// outside: b = 0 and s = z_{1-alpha/2} for |x| >= L.

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ciuupi/errors.hpp"
#include "ciuupi/linalg.hpp"
#include "ciuupi/normal.hpp"
#include "ciuupi/optim.hpp"
#include "ciuupi/quadrature.hpp"
#include "ciuupi/spline.hpp"

namespace ciuupi {

struct GammaRho {
    double gamma = 0.0;
    double rho = 0.0;

    GammaRho() = default;
    GammaRho(double g, double r) : gamma(g), rho(r) {
        if (!(std::fabs(rho) <= 1.0 - 1e-6))
            throw std::domain_error("GammaRho: |rho| must be <= 1 - 1e-6");
    }
};

struct CiuupiConfig {
    double alpha = 0.05;
    int knot_count = 7;            // knots 0, 1, ..., 6
    double knot_max = 6.0;
    double coverage_grid_step = 0.05;  // gamma grid on [0, coverage_grid_max]
    double coverage_grid_max = 10.0;
    double sel_max_bound = 1.15;
    double constraint_tol = 1e-6;
    double objective_step_tol = 1e-8;
    int quad_order = 20;           // Gauss-Legendre points per unit-length panel

    std::vector<double> knots() const {
        std::vector<double> k(knot_count);
        for (int i = 0; i < knot_count; ++i)
            k[i] = knot_max * i / (knot_count - 1);
        return k;
    }
    std::vector<double> coverage_grid() const {
        int n = static_cast<int>(std::round(coverage_grid_max / coverage_grid_step));
        std::vector<double> g(n + 1);
        for (int i = 0; i <= n; ++i) g[i] = i * coverage_grid_step;
        return g;
    }
};

namespace detail {

// Natural cubic spline over the even reflection of knots [0,L] to [-L,L].
// Odd payloads (b) get negated values on the left half; even payloads (s)
// get mirrored values. The reflected natural spline of odd (even) data is
// itself odd (even) up to rounding.
inline CubicSpline mirrored_spline(const std::vector<double>& half_knots,
                                   const std::vector<double>& half_values, bool odd) {
    const std::size_t k = half_knots.size();
    std::vector<double> x(2 * k - 1), y(2 * k - 1);
    for (std::size_t i = 0; i < k; ++i) {
        x[k - 1 + i] = half_knots[i];
        y[k - 1 + i] = half_values[i];
        x[k - 1 - i] = -half_knots[i];
        y[k - 1 - i] = odd ? -half_values[i] : half_values[i];
    }
    return CubicSpline::natural(std::move(x), std::move(y));
}

}  // namespace detail

class BSFunctions {
  public:
    BSFunctions() = default;

    // Full knot-value vectors on [0, L]; pins b(0) = b(L) = 0 and
    // s(L) = z_{1-alpha/2} exactly.
    static BSFunctions from_knot_values(double alpha, double rho, std::vector<double> knots,
                                        std::vector<double> b_values,
                                        std::vector<double> s_values) {
        if (knots.size() < 2 || b_values.size() != knots.size() ||
            s_values.size() != knots.size())
            throw std::domain_error("BSFunctions: knot/value size mismatch");
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::domain_error("BSFunctions: alpha must lie in (0,1)");
        BSFunctions bs;
        bs.alpha_ = alpha;
        bs.rho_ = rho;
        bs.z_ = norm_quantile(1.0 - alpha / 2.0);
        b_values.front() = 0.0;
        b_values.back() = 0.0;
        s_values.back() = bs.z_;
        bs.knots_ = std::move(knots);
        bs.b_values_ = std::move(b_values);
        bs.s_values_ = std::move(s_values);
        bs.b_spline_ = detail::mirrored_spline(bs.knots_, bs.b_values_, /*odd=*/true);
        bs.s_spline_ = detail::mirrored_spline(bs.knots_, bs.s_values_, /*odd=*/false);
        for (double x = 0.0; x <= bs.knots_.back(); x += 0.01)
            if (!(bs.s(x) > 0.0))
                throw std::domain_error("BSFunctions: s must be positive everywhere");
        return bs;
    }

    // b identically zero and s identically z_{1-alpha/2}: CI(b,s) reduces to
    // the usual interval.
    static BSFunctions usual(double alpha, double rho, const CiuupiConfig& cfg = {}) {
        std::vector<double> knots = cfg.knots();
        double z = norm_quantile(1.0 - alpha / 2.0);
        return from_knot_values(alpha, rho, knots, std::vector<double>(knots.size(), 0.0),
                                std::vector<double>(knots.size(), z));
    }

    double b(double x) const { return b_spline_(x); }
    double s(double x) const { return s_spline_(x); }

    double alpha() const { return alpha_; }
    double rho() const { return rho_; }
    double z() const { return z_; }
    double support_limit() const { return knots_.back(); }
    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& b_values() const { return b_values_; }
    const std::vector<double>& s_values() const { return s_values_; }

    // Versioned plain-text record; round-trips exactly through parse().
    std::string serialize() const {
        char buf[128];
        std::string out;
        std::snprintf(buf, sizeof(buf), "ciuupi-bs v1 alpha=%.12g rho=%.12g\n", alpha_, rho_);
        out += buf;
        for (std::size_t i = 0; i < knots_.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.12g %.12g %.12g\n", knots_[i], b_values_[i],
                          s_values_[i]);
            out += buf;
        }
        return out;
    }

    static BSFunctions parse(std::istream& in) {
        std::string tag, version, alpha_kv, rho_kv;
        if (!(in >> tag >> version >> alpha_kv >> rho_kv) || tag != "ciuupi-bs" ||
            version != "v1" || alpha_kv.rfind("alpha=", 0) != 0 || rho_kv.rfind("rho=", 0) != 0)
            throw std::runtime_error("BSFunctions::parse: bad header");
        double alpha = std::stod(alpha_kv.substr(6));
        double rho = std::stod(rho_kv.substr(4));
        std::vector<double> knots, bv, sv;
        double k, b, s;
        while (in >> k >> b >> s) {
            knots.push_back(k);
            bv.push_back(b);
            sv.push_back(s);
        }
        if (knots.size() < 2) throw std::runtime_error("BSFunctions::parse: no knot rows");
        return from_knot_values(alpha, rho, std::move(knots), std::move(bv), std::move(sv));
    }

    static BSFunctions parse(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

  private:
    double alpha_ = 0.0, rho_ = 0.0, z_ = 0.0;
    std::vector<double> knots_, b_values_, s_values_;
    CubicSpline b_spline_, s_spline_;
};

namespace detail {

// Composite Gauss-Legendre mesh over [-L, L] with panel boundaries at the
// (mirrored) knots, so each panel sees a single cubic piece of b and s.
struct CpQuadMesh {
    std::vector<double> nodes, weights;

    static CpQuadMesh build(const std::vector<double>& half_knots, int order) {
        QuadratureRule rule = gauss_legendre(order);
        std::vector<double> bounds;
        for (std::size_t i = half_knots.size(); i-- > 1;) bounds.push_back(-half_knots[i]);
        for (std::size_t i = 0; i < half_knots.size(); ++i) bounds.push_back(half_knots[i]);
        CpQuadMesh mesh;
        for (std::size_t p = 0; p + 1 < bounds.size(); ++p) {
            double mid = 0.5 * (bounds[p] + bounds[p + 1]);
            double half = 0.5 * (bounds[p + 1] - bounds[p]);
            for (int i = 0; i < rule.order; ++i) {
                mesh.nodes.push_back(mid + half * rule.nodes[i]);
                mesh.weights.push_back(half * rule.weights[i]);
            }
        }
        return mesh;
    }
};

// CP from precomputed b/s values at the mesh nodes. Tail regions |v| >= L
// have constant b = 0, s = z, so they reduce to bivariate normal rectangle
// probabilities.
inline double cp_from_nodes(const std::vector<double>& b_nodes,
                            const std::vector<double>& s_nodes, const CpQuadMesh& mesh,
                            double gamma, double rho, double z, double L) {
    const double c = std::sqrt((1.0 - rho) * (1.0 + rho));
    double quad = 0.0;
    for (std::size_t j = 0; j < mesh.nodes.size(); ++j) {
        const double u = mesh.nodes[j] - gamma;
        const double ru = rho * u;
        quad += mesh.weights[j] * norm_pdf(u) *
                (norm_cdf((b_nodes[j] + s_nodes[j] - ru) / c) -
                 norm_cdf((b_nodes[j] - s_nodes[j] - ru) / c));
    }
    const double left = bvn_cdf(-L - gamma, z, rho) - bvn_cdf(-L - gamma, -z, rho);
    const double right = (norm_cdf(z) - norm_cdf(-z)) -
                         (bvn_cdf(L - gamma, z, rho) - bvn_cdf(L - gamma, -z, rho));
    return quad + left + right;
}

inline double sel_tail_mass(double gamma, double L) {
    return norm_cdf(-L - gamma) + norm_cdf(gamma - L);
}

}  // namespace detail

// Coverage probability of CI(b,s) at standardized prior discrepancy
// g.gamma and known correlation g.rho; absolute accuracy ~1e-10.
inline double cp(const BSFunctions& bs, const GammaRho& g, int quad_order = 20) {
    const double L = bs.support_limit();
    detail::CpQuadMesh mesh = detail::CpQuadMesh::build(bs.knots(), quad_order);
    std::vector<double> bn(mesh.nodes.size()), sn(mesh.nodes.size());
    for (std::size_t j = 0; j < mesh.nodes.size(); ++j) {
        bn[j] = bs.b(mesh.nodes[j]);
        sn[j] = bs.s(mesh.nodes[j]);
    }
    return detail::cp_from_nodes(bn, sn, mesh, g.gamma, g.rho, bs.z(), L);
}

// Scaled expected length E s(V) / z_{1-alpha/2}, V ~ N(gamma, 1).
// Independent of rho; the GammaRho parameter keeps the call signature
// parallel with cp.
inline double sel(const BSFunctions& bs, const GammaRho& g, int quad_order = 20) {
    const double L = bs.support_limit();
    detail::CpQuadMesh mesh = detail::CpQuadMesh::build(bs.knots(), quad_order);
    double quad = 0.0;
    for (std::size_t j = 0; j < mesh.nodes.size(); ++j)
        quad += mesh.weights[j] * bs.s(mesh.nodes[j]) * norm_pdf(mesh.nodes[j] - g.gamma);
    return quad / bs.z() + detail::sel_tail_mass(g.gamma, L);
}

struct Interval {
    double lower = 0.0, upper = 0.0;
    double length() const { return upper - lower; }
};

// The usual 1-c confidence interval
inline Interval usual_ci(double theta_hat, double var_theta, double c) {
    if (!(var_theta > 0.0)) throw std::domain_error("usual_ci: var_theta must be > 0");
    double w = norm_quantile(1.0 - c / 2.0) * std::sqrt(var_theta);
    return {theta_hat - w, theta_hat + w};
}

// CI(b,s): center shifted by b, half-width s, both evaluated at the
// standardized distance of tau_hat from the prior value t.
inline Interval ci_bs(const BSFunctions& bs, double theta_hat, double tau_hat, double t,
                      double var_theta, double var_tau) {
    if (!(var_theta > 0.0 && var_tau > 0.0))
        throw std::domain_error("ci_bs: variances must be > 0");
    const double sd_theta = std::sqrt(var_theta);
    const double x = (tau_hat - t) / std::sqrt(var_tau);
    const double center = theta_hat - sd_theta * bs.b(x);
    const double w = sd_theta * bs.s(x);
    return {center - w, center + w};
}

// ---------------------------------------------------------------------------
// Optimization of b and s: minimize SEL(0) subject to CP(gamma) >= 1 - alpha
// on the coverage grid and SEL(gamma) <= sel_max_bound on the same grid.
// Quadratic-penalty outer loop around BFGS with central-difference gradients.
// ---------------------------------------------------------------------------

namespace detail {

struct BsDesign {
    CiuupiConfig cfg;
    double rho = 0.0, z = 0.0;
    std::vector<double> knots, gammas;
    CpQuadMesh mesh;
    std::size_t nb = 0, ns = 0;  // free b values (1..K-1), free s values (0..K-1)

    // node values are affine in the decision vector x = [b_free, s_free]
    Mat b_basis, s_basis;      // nodes x nb, nodes x ns
    std::vector<double> s_offset;
    // per (gamma, node) precomputes
    std::vector<double> phi;   // weights[j] * pdf(nodes[j] - gamma_i), row-major
    std::vector<double> ru;    // rho * (nodes[j] - gamma_i)
    std::vector<double> u;     // nodes[j] - gamma_i
    std::vector<double> cp_tail, sel_tail;
    double inv_c = 1.0;

    static BsDesign build(const CiuupiConfig& cfg, double rho) {
        BsDesign d;
        d.cfg = cfg;
        d.rho = rho;
        d.z = norm_quantile(1.0 - cfg.alpha / 2.0);
        d.knots = cfg.knots();
        d.gammas = cfg.coverage_grid();
        d.mesh = CpQuadMesh::build(d.knots, cfg.quad_order);
        const std::size_t k = d.knots.size();
        d.nb = k - 2;
        d.ns = k - 1;
        const std::size_t nn = d.mesh.nodes.size();
        const double L = d.knots.back();

        d.b_basis = Mat(nn, d.nb);
        d.s_basis = Mat(nn, d.ns);
        d.s_offset.assign(nn, 0.0);
        std::vector<double> vals(k, 0.0);
        for (std::size_t c = 0; c < d.nb; ++c) {
            std::fill(vals.begin(), vals.end(), 0.0);
            vals[c + 1] = 1.0;
            CubicSpline sp = mirrored_spline(d.knots, vals, /*odd=*/true);
            for (std::size_t j = 0; j < nn; ++j) d.b_basis(j, c) = sp(d.mesh.nodes[j]);
        }
        for (std::size_t c = 0; c < d.ns; ++c) {
            std::fill(vals.begin(), vals.end(), 0.0);
            vals[c] = 1.0;
            CubicSpline sp = mirrored_spline(d.knots, vals, /*odd=*/false);
            for (std::size_t j = 0; j < nn; ++j) d.s_basis(j, c) = sp(d.mesh.nodes[j]);
        }
        std::fill(vals.begin(), vals.end(), 0.0);
        vals[k - 1] = 1.0;  // pinned s(L) = z
        CubicSpline sp = mirrored_spline(d.knots, vals, /*odd=*/false);
        for (std::size_t j = 0; j < nn; ++j) d.s_offset[j] = d.z * sp(d.mesh.nodes[j]);

        const std::size_t ng = d.gammas.size();
        d.phi.resize(ng * nn);
        d.ru.resize(ng * nn);
        d.u.resize(ng * nn);
        d.cp_tail.resize(ng);
        d.sel_tail.resize(ng);
        d.inv_c = 1.0 / std::sqrt((1.0 - rho) * (1.0 + rho));
        for (std::size_t i = 0; i < ng; ++i) {
            const double gamma = d.gammas[i];
            for (std::size_t j = 0; j < nn; ++j) {
                const double uu = d.mesh.nodes[j] - gamma;
                d.u[i * nn + j] = uu;
                d.ru[i * nn + j] = rho * uu;
                d.phi[i * nn + j] = d.mesh.weights[j] * norm_pdf(uu);
            }
            d.cp_tail[i] = (bvn_cdf(-L - gamma, d.z, rho) - bvn_cdf(-L - gamma, -d.z, rho)) +
                           (norm_cdf(d.z) - norm_cdf(-d.z)) -
                           (bvn_cdf(L - gamma, d.z, rho) - bvn_cdf(L - gamma, -d.z, rho));
            d.sel_tail[i] = sel_tail_mass(gamma, L);
        }
        return d;
    }

    // evaluates cp and sel across the whole gamma grid for decision vector x
    void evaluate(const Vec& x, std::vector<double>& cps, std::vector<double>& sels) const {
        const std::size_t nn = mesh.nodes.size();
        const std::size_t ng = gammas.size();
        std::vector<double> bn(nn, 0.0), sn(nn, 0.0);
        for (std::size_t j = 0; j < nn; ++j) {
            double bv = 0.0, sv = 0.0;
            for (std::size_t c = 0; c < nb; ++c) bv += b_basis(j, c) * x[c];
            for (std::size_t c = 0; c < ns; ++c) sv += s_basis(j, c) * x[nb + c];
            bn[j] = bv;
            sn[j] = s_offset[j] + sv;
        }
        cps.assign(ng, 0.0);
        sels.assign(ng, 0.0);
        for (std::size_t i = 0; i < ng; ++i) {
            const double* phi_i = &phi[i * nn];
            const double* ru_i = &ru[i * nn];
            double quad_cp = 0.0, quad_sel = 0.0;
            for (std::size_t j = 0; j < nn; ++j) {
                quad_cp += phi_i[j] * (norm_cdf((bn[j] + sn[j] - ru_i[j]) * inv_c) -
                                       norm_cdf((bn[j] - sn[j] - ru_i[j]) * inv_c));
                quad_sel += phi_i[j] * sn[j];
            }
            cps[i] = quad_cp + cp_tail[i];
            sels[i] = quad_sel / z + sel_tail[i];
        }
    }
};

}  // namespace detail

// Computes b_rho and s_rho for the given configuration: the interval
// functions minimizing SEL at gamma = 0 subject to coverage >= 1 - alpha on
// the gamma grid and SEL <= sel_max_bound everywhere on the grid.
inline BSFunctions optimize_bs(const CiuupiConfig& cfg, double rho) {
    if (!(std::fabs(rho) < 1.0 - 1e-6))
        throw std::domain_error("optimize_bs: |rho| must be < 1 - 1e-6");
    if (!(cfg.sel_max_bound > 1.0))
        throw OptimFailed("optimize_bs: sel_max_bound must exceed 1");

    // CP and SEL are even in rho once b changes sign, so the problem is
    // solved in canonical form at |rho| and mapped back. This keeps the
    // rho -> -rho antisymmetry exact instead of limited by optimizer
    // termination inside the nearly flat solution valley.
    if (rho < 0.0) {
        BSFunctions pos = optimize_bs(cfg, -rho);
        std::vector<double> bneg = pos.b_values();
        for (double& v : bneg) v = -v;
        return BSFunctions::from_knot_values(cfg.alpha, rho, pos.knots(), std::move(bneg),
                                             pos.s_values());
    }

    const detail::BsDesign design = detail::BsDesign::build(cfg, rho);
    const double target_cp = 1.0 - cfg.alpha;
    // tighten both bounds slightly so the converged penalty solution, which
    // sits just outside the tightened boundary, still satisfies the real one
    const double margin = 2e-6;

    std::vector<double> cps, sels;
    auto penalty = [&](const Vec& x, double mu) {
        design.evaluate(x, cps, sels);
        double viol = 0.0;
        for (std::size_t i = 0; i < cps.size(); ++i) {
            double vc = (target_cp + margin) - cps[i];
            if (vc > 0.0) viol += vc * vc;
            double vs = sels[i] - (cfg.sel_max_bound - margin);
            if (vs > 0.0) viol += vs * vs;
        }
        return sels[0] + mu * viol;
    };
    auto worst_violation = [&](const Vec& x, double bound_shift) {
        design.evaluate(x, cps, sels);
        double w = 0.0;
        for (std::size_t i = 0; i < cps.size(); ++i) {
            w = std::max(w, (target_cp + bound_shift) - cps[i]);
            w = std::max(w, sels[i] - (cfg.sel_max_bound - bound_shift));
        }
        return w;
    };

    Vec x(design.nb + design.ns, 0.0);
    for (std::size_t c = 0; c < design.ns; ++c) x[design.nb + c] = design.z;

    BfgsOptions opts;
    opts.fd_step = 1e-6;
    opts.grad_tol = 2e-7;
    opts.obj_step_tol = cfg.objective_step_tol * 0.1;
    opts.max_iters = 600;

    for (double mu : {1e4, 1e6, 1e8, 1e10}) {
        auto f = [&](const Vec& v) { return penalty(v, mu); };
        BfgsResult r = bfgs_minimize(f, x, opts);
        x = r.x;
        if (worst_violation(x, margin) <= margin) break;
    }

    if (worst_violation(x, 0.0) > cfg.constraint_tol)
        throw OptimFailed("optimize_bs: constraint violation above tolerance");

    std::vector<double> bv(design.knots.size(), 0.0), sv(design.knots.size(), 0.0);
    for (std::size_t c = 0; c < design.nb; ++c) bv[c + 1] = x[c];
    for (std::size_t c = 0; c < design.ns; ++c) sv[c] = x[design.nb + c];
    sv.back() = design.z;
    return BSFunctions::from_knot_values(cfg.alpha, rho, design.knots, bv, sv);
}

}  // namespace ciuupi
