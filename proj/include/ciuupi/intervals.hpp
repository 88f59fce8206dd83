#pragma once

// Confidence intervals for theta = g(beta): Wald (I_W), its prior-information
// analogue ACI_W, the profile likelihood interval I_L, and the SRLR analogue
// ACI_L whose endpoints solve r1(theta') = b(r2) +- s(r2).

#include <cmath>
#include <cstdio>
#include <map>
#include <string>

#include "ciuupi/bs.hpp"
#include "ciuupi/regmodel.hpp"
#include "ciuupi/roots.hpp"

namespace ciuupi {

enum class IntervalKind { Wald, AciWald, Profile, AciLikelihood };

inline const char* kind_name(IntervalKind k) {
    switch (k) {
        case IntervalKind::Wald: return "I_W";
        case IntervalKind::AciWald: return "ACI_W";
        case IntervalKind::Profile: return "I_L";
        case IntervalKind::AciLikelihood: return "ACI_L";
    }
    return "?";
}

struct IntervalResult {
    double lower = 0.0, upper = 0.0;
    IntervalKind kind = IntervalKind::Wald;
    double nominal = 0.0;
    bool monotonicity_verified = true;
    double lower_residual = 0.0, upper_residual = 0.0;
    bool capped = false;

    double length() const { return upper - lower; }
};

// `kind lower upper nominal capped`, 6 decimals
inline std::string format_interval(const IntervalResult& r) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s %.6f %.6f %.6f %d", kind_name(r.kind), r.lower, r.upper,
                  r.nominal, r.capped ? 1 : 0);
    return buf;
}

// Signed-root likelihood ratio machinery around one fitted dataset. Not
// thread-safe: the constrained-fit warm-start cache mutates; simulation
// code uses one evaluator per run (and per thread).
class SrlrEvaluator {
  public:
    SrlrEvaluator(RegressionSpec spec, FitResult fit)
        : spec_(std::move(spec)), fit_(std::move(fit)), ll_hat_(fit_.log_lik) {
        if (!fit_.converged)
            throw ConstrainedFitFailed("SrlrEvaluator: unconverged maximum likelihood fit");
    }

    const RegressionSpec& spec() const { return spec_; }
    const FitResult& fit() const { return fit_; }
    double loglik_hat() const { return ll_hat_; }

    // SRLR statistic for H0: theta = theta_prime
    double r1(double theta_prime) {
        auto cached = r1_cache_.find(theta_prime);
        if (cached != r1_cache_.end()) return cached->second;

        const Vec* start = &fit_.beta_hat;
        if (!warm_.empty()) {
            auto it = warm_.lower_bound(theta_prime);
            if (it == warm_.end()) --it;
            else if (it != warm_.begin()) {
                auto prev = std::prev(it);
                if (theta_prime - prev->first < it->first - theta_prime) it = prev;
            }
            start = &it->second;
        }
        FitResult cf = fit_constrained(spec_, spec_.g, theta_prime, start);
        if (!cf.converged)
            throw ConstrainedFitFailed("r1: constrained fit failed at theta' = " +
                                       std::to_string(theta_prime));
        double r = signed_root(fit_.theta_hat - theta_prime, cf.log_lik);
        warm_[theta_prime] = cf.beta_hat;
        r1_cache_[theta_prime] = r;
        return r;
    }

    // SRLR statistic for H0: tau = t; computed once and reused
    double r2() {
        if (!r2_cached_) {
            FitResult cf = fit_constrained(spec_, spec_.h, spec_.t, &fit_.beta_hat);
            if (!cf.converged) throw ConstrainedFitFailed("r2: constrained fit failed");
            r2_value_ = signed_root(fit_.tau_hat - spec_.t, cf.log_lik);
            r2_cached_ = true;
        }
        return r2_value_;
    }

  private:
    double signed_root(double sign_src, double ll_constrained) const {
        double rad = 2.0 * (ll_hat_ - ll_constrained);
        if (rad < 0.0) {
            if (rad < -1e-10)
                throw ConstrainedFitFailed("signed root: constrained fit beats the MLE");
            rad = 0.0;
        }
        double r = std::sqrt(rad);
        return sign_src >= 0.0 ? r : -r;
    }

    RegressionSpec spec_;
    FitResult fit_;
    double ll_hat_;
    std::map<double, Vec> warm_;
    std::map<double, double> r1_cache_;
    double r2_value_ = 0.0;
    bool r2_cached_ = false;
};

namespace detail {

struct EndpointSolve {
    double theta = 0.0;
    double residual = 0.0;
    bool capped = false;
    double reach = 0.0;  // largest probe displacement from theta_hat
};

// Solves r1(theta') = target by bracket expansion away from theta_hat
// (geometric steps) followed by the bracketing root finder. r1 is treated
// as decreasing; a missing sign change within the length cap, or a failing
// constrained fit far out, reports a capped endpoint at the cap.
inline EndpointSolve solve_r1_equals(SrlrEvaluator& eval, double target, double length_cap,
                                     int max_expansions = 60) {
    const double theta_hat = eval.fit().theta_hat;
    const double sd = std::sqrt(std::max(eval.fit().avar_theta, 1e-300));
    const double dir = target > 0.0 ? -1.0 : 1.0;  // r1 decreases in theta'

    EndpointSolve out;
    double fa = eval.r1(theta_hat) - target;
    if (fa == 0.0) {
        out.theta = theta_hat;
        return out;
    }
    // r1(theta_hat) ~ 0, so f has the sign of -target at the start;
    // expanding in `dir` raises r1 towards (past) the target
    double a = theta_hat;
    double displacement = sd;
    for (int k = 0; k <= max_expansions; ++k) {
        if (displacement >= length_cap) {
            out.theta = theta_hat + dir * length_cap;
            out.capped = true;
            out.reach = length_cap;
            out.residual = std::numeric_limits<double>::quiet_NaN();
            return out;
        }
        double b = theta_hat + dir * displacement;
        double fb;
        try {
            fb = eval.r1(b) - target;
        } catch (const ConstrainedFitFailed&) {
            out.theta = theta_hat + dir * length_cap;
            out.capped = true;
            out.reach = displacement;
            out.residual = std::numeric_limits<double>::quiet_NaN();
            return out;
        }
        out.reach = displacement;
        if ((fa > 0.0) != (fb > 0.0) || fb == 0.0) {
            double lo = std::min(a, b), hi = std::max(a, b);
            auto f = [&](double x) { return eval.r1(x) - target; };
            out.theta = find_root(f, lo, hi, 1e-10);
            out.residual = std::fabs(eval.r1(out.theta) - target);
            return out;
        }
        a = b;
        fa = fb;
        displacement *= 2.0;
    }
    out.theta = theta_hat + dir * length_cap;
    out.capped = true;
    out.residual = std::numeric_limits<double>::quiet_NaN();
    return out;
}

// Monotonicity audit on an 81-point grid spanning the computed interval.
inline bool r1_decreasing_on(SrlrEvaluator& eval, double lo, double hi,
                             std::vector<double>* values = nullptr) {
    const int n = 81;
    double prev = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = lo + (hi - lo) * i / (n - 1);
        double v;
        try {
            v = eval.r1(x);
        } catch (const ConstrainedFitFailed&) {
            return false;
        }
        if (values) values->push_back(v);
        if (i > 0 && v > prev + 1e-7) return false;
        prev = v;
    }
    return true;
}

// Fallback when r1 is not monotone: endpoints are the inf/sup of the level
// set {theta': lo_t <= r1 <= hi_t}, located by grid scan plus root
// refinement on the outermost crossings.
inline void level_set_endpoints(SrlrEvaluator& eval, double lo_t, double hi_t, double scan_lo,
                                double scan_hi, IntervalResult& out) {
    const int n = 161;
    std::vector<double> xs(n), rs(n);
    std::vector<bool> ok(n);
    for (int i = 0; i < n; ++i) {
        xs[i] = scan_lo + (scan_hi - scan_lo) * i / (n - 1);
        try {
            rs[i] = eval.r1(xs[i]);
            ok[i] = true;
        } catch (const ConstrainedFitFailed&) {
            ok[i] = false;
        }
    }
    int first = -1, last = -1;
    for (int i = 0; i < n; ++i) {
        if (ok[i] && rs[i] >= lo_t && rs[i] <= hi_t) {
            if (first < 0) first = i;
            last = i;
        }
    }
    if (first < 0) {
        out.lower = out.upper = eval.fit().theta_hat;
        out.monotonicity_verified = false;
        return;
    }
    out.lower = xs[first];
    out.upper = xs[last];
    // refine the outermost boundary crossings where a bracket exists
    if (first > 0 && ok[first - 1]) {
        double t = rs[first - 1] > hi_t ? hi_t : lo_t;
        try {
            out.lower = find_root([&](double x) { return eval.r1(x) - t; }, xs[first - 1],
                                  xs[first], 1e-10);
        } catch (const std::exception&) {
        }
    }
    if (last + 1 < n && ok[last + 1]) {
        double t = rs[last + 1] < lo_t ? lo_t : hi_t;
        try {
            out.upper = find_root([&](double x) { return eval.r1(x) - t; }, xs[last],
                                  xs[last + 1], 1e-10);
        } catch (const std::exception&) {
        }
    }
    out.lower_residual = std::fabs(eval.r1(out.lower) - hi_t);
    out.upper_residual = std::fabs(eval.r1(out.upper) - lo_t);
    out.monotonicity_verified = false;
}

// Shared implementation for I_L and ACI_L: endpoints solve
// r1 = hi_t (lower) and r1 = lo_t (upper).
inline IntervalResult srlr_interval(SrlrEvaluator& eval, double lo_t, double hi_t,
                                    IntervalKind kind, double nominal, double length_cap) {
    IntervalResult out;
    out.kind = kind;
    out.nominal = nominal;

    EndpointSolve lo = detail::solve_r1_equals(eval, hi_t, length_cap);
    EndpointSolve hi = detail::solve_r1_equals(eval, lo_t, length_cap);
    out.lower = std::min(lo.theta, hi.theta);
    out.upper = std::max(lo.theta, hi.theta);
    out.lower_residual = lo.residual;
    out.upper_residual = hi.residual;
    out.capped = lo.capped || hi.capped;
    if (out.capped) {
        out.monotonicity_verified = false;
        return out;
    }
    if (!r1_decreasing_on(eval, out.lower, out.upper)) {
        double reach = std::max({lo.reach, hi.reach, 1e-8});
        level_set_endpoints(eval, lo_t, hi_t, eval.fit().theta_hat - reach,
                            eval.fit().theta_hat + reach, out);
    }
    return out;
}

}  // namespace detail

// Profile likelihood interval I_L(y; c): endpoints solve r1 = +-z_{1-c/2}.
inline IntervalResult profile_ci(SrlrEvaluator& eval, double c, double length_cap = 1000.0) {
    if (!(c > 0.0 && c < 1.0)) throw std::domain_error("profile_ci: c must lie in (0,1)");
    const double z = norm_quantile(1.0 - c / 2.0);
    return detail::srlr_interval(eval, -z, z, IntervalKind::Profile, 1.0 - c, length_cap);
}

// SRLR analogue of CI(b,s): endpoints solve r1 = b(r2) +- s(r2), with b and
// s computed at rho(beta_hat) by the caller.
inline IntervalResult aci_l(SrlrEvaluator& eval, const BSFunctions& bs,
                            double length_cap = 1000.0) {
    const double r2 = eval.r2();
    const double center = bs.b(r2), half = bs.s(r2);
    return detail::srlr_interval(eval, center - half, center + half,
                                 IntervalKind::AciLikelihood, 1.0 - bs.alpha(), length_cap);
}

// Wald interval I_W(y; c) with plug-in asymptotic variance.
inline IntervalResult wald_ci(const FitResult& fit, double c) {
    if (!(c > 0.0 && c < 1.0)) throw std::domain_error("wald_ci: c must lie in (0,1)");
    IntervalResult out;
    out.kind = IntervalKind::Wald;
    out.nominal = 1.0 - c;
    double w = norm_quantile(1.0 - c / 2.0) * std::sqrt(fit.avar_theta);
    out.lower = fit.theta_hat - w;
    out.upper = fit.theta_hat + w;
    return out;
}

// Wald analogue ACI_W: ci_bs with plug-in avar/acov at beta_hat.
inline IntervalResult aci_w(const FitResult& fit, const BSFunctions& bs, double t) {
    Interval i = ci_bs(bs, fit.theta_hat, fit.tau_hat, t, fit.avar_theta, fit.avar_tau);
    IntervalResult out;
    out.kind = IntervalKind::AciWald;
    out.nominal = 1.0 - bs.alpha();
    out.lower = i.lower;
    out.upper = i.upper;
    return out;
}

}  // namespace ciuupi
