#pragma once

// General regression model abstraction (independent responses, no scale
// parameter): log-likelihood, score, information, maximum likelihood and
// equality-constrained fits, and the asymptotic variance/covariance of the
// interest functionals g and h.

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "ciuupi/errors.hpp"
#include "ciuupi/linalg.hpp"
#include "ciuupi/rng.hpp"

namespace ciuupi {

// A smooth scalar functional of the parameter vector with its gradient.
// `linear` marks functionals with constant gradient; constrained fits use
// variable elimination for those.
struct SmoothFunctional {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
    std::function<Mat(const Vec&)> hessian;  // may be empty: FD of gradient
    bool fd_gradient = false;
    bool linear = false;

    Mat hessian_at(const Vec& beta) const {
        if (hessian) return hessian(beta);
        const double h = 1e-6;
        const std::size_t p = beta.size();
        Mat out(p, p);
        Vec bp = beta;
        for (std::size_t j = 0; j < p; ++j) {
            bp[j] = beta[j] + h;
            Vec gp = gradient(bp);
            bp[j] = beta[j] - h;
            Vec gm = gradient(bp);
            bp[j] = beta[j];
            for (std::size_t i = 0; i < p; ++i) out(i, j) = (gp[i] - gm[i]) / (2.0 * h);
        }
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = i + 1; j < p; ++j) {
                double v = 0.5 * (out(i, j) + out(j, i));
                out(i, j) = out(j, i) = v;
            }
        return out;
    }
};

// Wraps a plain value function with a central-difference gradient.
inline SmoothFunctional functional_from_value(std::function<double(const Vec&)> f,
                                              double step = 1e-6) {
    SmoothFunctional sf;
    sf.value = f;
    sf.fd_gradient = true;
    sf.gradient = [f, step](const Vec& beta) {
        Vec g(beta.size());
        Vec b = beta;
        for (std::size_t i = 0; i < beta.size(); ++i) {
            b[i] = beta[i] + step;
            double fp = f(b);
            b[i] = beta[i] - step;
            double fm = f(b);
            b[i] = beta[i];
            g[i] = (fp - fm) / (2.0 * step);
        }
        return g;
    };
    return sf;
}

class RegressionModel {
  public:
    virtual ~RegressionModel() = default;
    virtual std::size_t dim() const = 0;
    virtual double log_likelihood(const Vec& beta) const = 0;
    virtual Vec score(const Vec& beta) const = 0;
    virtual Mat observed_information(const Vec& beta) const = 0;
    virtual Mat expected_information(const Vec& beta) const = 0;
    // Largest |linear predictor|; the fitters treat iterates beyond 30 with
    // a non-small score as separated (diverging MLE).
    virtual double max_abs_eta(const Vec&) const { return 0.0; }
    // Same design, fresh responses drawn under beta.
    virtual std::unique_ptr<RegressionModel> resample(const Vec& beta, RngStream& rng) const = 0;
};

struct RegressionSpec {
    std::shared_ptr<const RegressionModel> model;
    SmoothFunctional g;  // parameter of interest theta = g(beta)
    SmoothFunctional h;  // prior-information parameter tau = h(beta)
    double t = 0.0;      // uncertain prior value for tau

    RegressionSpec with_model(std::shared_ptr<const RegressionModel> m) const {
        RegressionSpec s = *this;
        s.model = std::move(m);
        return s;
    }
};

struct AsymptoticSummary {
    double avar_theta = 0.0, avar_tau = 0.0, acov = 0.0, rho = 0.0;
};

struct FitResult {
    Vec beta_hat;
    double log_lik = 0.0;
    Mat expected_info;
    double theta_hat = 0.0, tau_hat = 0.0;
    double avar_theta = 0.0, avar_tau = 0.0, acov = 0.0, rho_hat = 0.0;
    bool converged = false;
    int iterations = 0;
};

// --------------------------------------------------------------------------
// Concrete models
// --------------------------------------------------------------------------

inline double logit(double p) { return std::log(p / (1.0 - p)); }
inline double inv_logit(double eta) {
    return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}
inline double log1p_exp(double eta) {
    return eta >= 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

struct BinomialObservation {
    Vec x;
    int trials = 0;
    int successes = 0;
};

// Grouped binomial responses with the canonical logit link; observed and
// expected information coincide.
class BinomialLogitModel : public RegressionModel {
  public:
    BinomialLogitModel(std::vector<BinomialObservation> obs, std::size_t p)
        : obs_(std::move(obs)), p_(p) {
        for (const auto& o : obs_) {
            if (o.x.size() != p_) throw std::domain_error("BinomialLogitModel: bad row width");
            if (o.trials <= 0 || o.successes < 0 || o.successes > o.trials)
                throw std::domain_error("BinomialLogitModel: bad counts");
        }
        log_choose_ = 0.0;
        for (const auto& o : obs_)
            log_choose_ += std::lgamma(o.trials + 1.0) - std::lgamma(o.successes + 1.0) -
                           std::lgamma(o.trials - o.successes + 1.0);
    }

    std::size_t dim() const override { return p_; }

    double log_likelihood(const Vec& beta) const override {
        double ll = log_choose_;
        for (const auto& o : obs_) {
            double eta = dot(o.x, beta);
            ll += o.successes * eta - o.trials * log1p_exp(eta);
        }
        return ll;
    }

    Vec score(const Vec& beta) const override {
        Vec s(p_, 0.0);
        for (const auto& o : obs_) {
            double r = o.successes - o.trials * inv_logit(dot(o.x, beta));
            for (std::size_t j = 0; j < p_; ++j) s[j] += r * o.x[j];
        }
        return s;
    }

    Mat observed_information(const Vec& beta) const override {
        return expected_information(beta);
    }

    Mat expected_information(const Vec& beta) const override {
        Mat info(p_, p_);
        for (const auto& o : obs_) {
            double psi = inv_logit(dot(o.x, beta));
            double w = o.trials * psi * (1.0 - psi);
            for (std::size_t i = 0; i < p_; ++i)
                for (std::size_t j = 0; j < p_; ++j) info(i, j) += w * o.x[i] * o.x[j];
        }
        return info;
    }

    double max_abs_eta(const Vec& beta) const override {
        double m = 0.0;
        for (const auto& o : obs_) m = std::max(m, std::fabs(dot(o.x, beta)));
        return m;
    }

    std::unique_ptr<RegressionModel> resample(const Vec& beta, RngStream& rng) const override {
        std::vector<BinomialObservation> fresh = obs_;
        for (auto& o : fresh) {
            double psi = inv_logit(dot(o.x, beta));
            o.successes = draw_binomial(rng, o.trials, psi);
        }
        return std::make_unique<BinomialLogitModel>(std::move(fresh), p_);
    }

    const std::vector<BinomialObservation>& observations() const { return obs_; }

  private:
    std::vector<BinomialObservation> obs_;
    std::size_t p_;
    double log_choose_ = 0.0;
};

struct LinearObservation {
    Vec x;
    double y = 0.0;
};

// Linear regression with known error variance; the reference problem whose
// SRLR statistics coincide with standardized Wald quantities.
class LinearNormalModel : public RegressionModel {
  public:
    LinearNormalModel(std::vector<LinearObservation> obs, std::size_t p, double sigma2)
        : obs_(std::move(obs)), p_(p), sigma2_(sigma2) {
        if (!(sigma2_ > 0.0)) throw std::domain_error("LinearNormalModel: sigma2 must be > 0");
        for (const auto& o : obs_)
            if (o.x.size() != p_) throw std::domain_error("LinearNormalModel: bad row width");
    }

    std::size_t dim() const override { return p_; }

    double log_likelihood(const Vec& beta) const override {
        double ll = -0.5 * obs_.size() * std::log(2.0 * M_PI * sigma2_);
        for (const auto& o : obs_) {
            double r = o.y - dot(o.x, beta);
            ll -= 0.5 * r * r / sigma2_;
        }
        return ll;
    }

    Vec score(const Vec& beta) const override {
        Vec s(p_, 0.0);
        for (const auto& o : obs_) {
            double r = (o.y - dot(o.x, beta)) / sigma2_;
            for (std::size_t j = 0; j < p_; ++j) s[j] += r * o.x[j];
        }
        return s;
    }

    Mat observed_information(const Vec&) const override {
        Mat info(p_, p_);
        for (const auto& o : obs_)
            for (std::size_t i = 0; i < p_; ++i)
                for (std::size_t j = 0; j < p_; ++j) info(i, j) += o.x[i] * o.x[j] / sigma2_;
        return info;
    }

    Mat expected_information(const Vec& beta) const override {
        return observed_information(beta);
    }

    std::unique_ptr<RegressionModel> resample(const Vec& beta, RngStream& rng) const override {
        std::vector<LinearObservation> fresh = obs_;
        double sd = std::sqrt(sigma2_);
        for (auto& o : fresh) o.y = dot(o.x, beta) + sd * rng.normal();
        return std::make_unique<LinearNormalModel>(std::move(fresh), p_, sigma2_);
    }

  private:
    std::vector<LinearObservation> obs_;
    std::size_t p_;
    double sigma2_;
};

// --------------------------------------------------------------------------
// Fitting
// --------------------------------------------------------------------------

inline Mat expected_information(const RegressionSpec& spec, const Vec& beta) {
    return spec.model->expected_information(beta);
}

inline AsymptoticSummary asymptotic_summary(const RegressionSpec& spec, const Vec& beta) {
    Vec dg = spec.g.gradient(beta);
    Vec dh = spec.h.gradient(beta);
    double gg = dot(dg, dg), hh = dot(dh, dh), gh = dot(dg, dh);
    if (!(gg > 0.0 && hh > 0.0) || 1.0 - (gh * gh) / (gg * hh) < 1e-16)
        throw SingularInformation("asymptotic_summary: gradients of g and h are collinear");

    Mat info = spec.model->expected_information(beta);
    Mat l = cholesky(info);
    Vec ig = chol_solve(l, dg);
    Vec ih = chol_solve(l, dh);
    AsymptoticSummary s;
    s.avar_theta = dot(dg, ig);
    s.avar_tau = dot(dh, ih);
    s.acov = dot(dg, ih);
    s.rho = s.acov / std::sqrt(s.avar_theta * s.avar_tau);
    return s;
}

namespace detail {

inline void fill_summary(const RegressionSpec& spec, FitResult& fit) {
    fit.expected_info = spec.model->expected_information(fit.beta_hat);
    fit.theta_hat = spec.g.value(fit.beta_hat);
    fit.tau_hat = spec.h.value(fit.beta_hat);
    try {
        AsymptoticSummary s = asymptotic_summary(spec, fit.beta_hat);
        fit.avar_theta = s.avar_theta;
        fit.avar_tau = s.avar_tau;
        fit.acov = s.acov;
        fit.rho_hat = s.rho;
    } catch (const SingularInformation&) {
        // fit converged but the (g, h) summary is degenerate here; callers
        // that need it hit the NaNs immediately
        fit.avar_theta = fit.avar_tau = fit.acov = fit.rho_hat =
            std::numeric_limits<double>::quiet_NaN();
    }
}

constexpr double kScoreTol = 1e-9;
constexpr double kStepTol = 1e-10;
constexpr int kMaxIters = 200;
constexpr double kEtaSeparation = 30.0;

}  // namespace detail

// Newton-Raphson with step halving on the full log-likelihood. Nonconvergence
// (including detected separation) is reported through `converged = false`,
// not an exception; simulation callers count such runs separately.
inline FitResult fit_mle(const RegressionSpec& spec, const Vec* start = nullptr) {
    const std::size_t p = spec.model->dim();
    FitResult fit;
    fit.beta_hat = start ? *start : Vec(p, 0.0);
    double ll = spec.model->log_likelihood(fit.beta_hat);

    for (int iter = 0; iter < detail::kMaxIters; ++iter) {
        fit.iterations = iter;
        Vec s = spec.model->score(fit.beta_hat);
        double snorm = max_abs(s);
        if (spec.model->max_abs_eta(fit.beta_hat) > detail::kEtaSeparation &&
            snorm > detail::kScoreTol) {
            fit.converged = false;
            fit.log_lik = ll;
            return fit;
        }
        Vec step;
        try {
            step = chol_solve(cholesky(spec.model->observed_information(fit.beta_hat)), s);
        } catch (const SingularInformation&) {
            if (iter == 0) throw;  // hopeless from the start
            fit.converged = false;
            fit.log_lik = ll;
            return fit;
        }
        if (snorm <= detail::kScoreTol && norm2(step) <= detail::kStepTol) {
            fit.converged = true;
            break;
        }
        Vec cand(p);
        double ll_new = ll;
        // once the predicted gain is below rounding noise the halving loop
        // cannot see progress; take the plain Newton step there
        if (0.5 * dot(s, step) <= 1e-11 * (1.0 + std::fabs(ll))) {
            for (std::size_t j = 0; j < p; ++j) cand[j] = fit.beta_hat[j] + step[j];
            ll_new = spec.model->log_likelihood(cand);
        } else {
            double t = 1.0;
            for (int halving = 0; halving <= 30; ++halving) {
                for (std::size_t j = 0; j < p; ++j) cand[j] = fit.beta_hat[j] + t * step[j];
                ll_new = spec.model->log_likelihood(cand);
                if (ll_new >= ll) break;
                t *= 0.5;
            }
            if (ll_new < ll) {
                fit.converged = false;
                fit.log_lik = ll;
                return fit;
            }
        }
        fit.beta_hat = cand;
        ll = ll_new;
    }
    fit.log_lik = ll;
    if (fit.converged) detail::fill_summary(spec, fit);
    return fit;
}

namespace detail {

// Orthonormal basis of the null space of c^T (columns of the returned
// matrix), by projecting identity columns and Gram-Schmidt.
inline Mat null_space_basis(const Vec& c) {
    const std::size_t p = c.size();
    double cn2 = dot(c, c);
    std::vector<Vec> cols;
    for (std::size_t i = 0; i < p && cols.size() < p - 1; ++i) {
        Vec v(p, 0.0);
        v[i] = 1.0;
        double proj = c[i] / cn2;
        for (std::size_t j = 0; j < p; ++j) v[j] -= proj * c[j];
        for (const Vec& q : cols) {
            double d = dot(v, q);
            for (std::size_t j = 0; j < p; ++j) v[j] -= d * q[j];
        }
        double n = norm2(v);
        if (n < 1e-10) continue;
        for (double& x : v) x /= n;
        cols.push_back(std::move(v));
    }
    if (cols.size() != p - 1)
        throw SingularInformation("null_space_basis: failed to build basis");
    Mat z(p, p - 1);
    for (std::size_t j = 0; j < cols.size(); ++j)
        for (std::size_t i = 0; i < p; ++i) z(i, j) = cols[j][i];
    return z;
}

// Constrained fit for a linear functional c^T beta = value via variable
// elimination: beta = beta_part + Z zeta with Z spanning null(c^T).
inline FitResult fit_constrained_linear(const RegressionSpec& spec, const SmoothFunctional& f,
                                        double value, const Vec& init) {
    const std::size_t p = spec.model->dim();
    Vec c = f.gradient(init);
    Mat z = null_space_basis(c);
    Vec beta = init;
    // move the start onto the constraint plane
    double miss = (value - f.value(init)) / dot(c, c);
    for (std::size_t j = 0; j < p; ++j) beta[j] += miss * c[j];

    FitResult fit;
    fit.beta_hat = beta;
    double ll = spec.model->log_likelihood(beta);
    const std::size_t q = p - 1;

    for (int iter = 0; iter < kMaxIters; ++iter) {
        fit.iterations = iter;
        Vec s = spec.model->score(fit.beta_hat);
        Vec sr(q, 0.0);
        for (std::size_t j = 0; j < q; ++j)
            for (std::size_t i = 0; i < p; ++i) sr[j] += z(i, j) * s[i];
        double snorm = max_abs(sr);
        if (spec.model->max_abs_eta(fit.beta_hat) > kEtaSeparation && snorm > kScoreTol) {
            fit.converged = false;
            fit.log_lik = ll;
            return fit;
        }
        Mat hh = spec.model->observed_information(fit.beta_hat);
        Mat hr(q, q);
        for (std::size_t a = 0; a < q; ++a)
            for (std::size_t b = 0; b < q; ++b) {
                double acc = 0.0;
                for (std::size_t i = 0; i < p; ++i)
                    for (std::size_t j = 0; j < p; ++j) acc += z(i, a) * hh(i, j) * z(j, b);
                hr(a, b) = acc;
            }
        Vec dz;
        try {
            dz = chol_solve(cholesky(hr), sr);
        } catch (const SingularInformation&) {
            fit.converged = false;
            fit.log_lik = ll;
            return fit;
        }
        Vec step(p, 0.0);
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < q; ++j) step[i] += z(i, j) * dz[j];
        if (snorm <= kScoreTol && norm2(step) <= kStepTol) {
            fit.converged = true;
            break;
        }
        Vec cand(p);
        double ll_new = ll;
        if (0.5 * dot(sr, dz) <= 1e-11 * (1.0 + std::fabs(ll))) {
            for (std::size_t i = 0; i < p; ++i) cand[i] = fit.beta_hat[i] + step[i];
            ll_new = spec.model->log_likelihood(cand);
        } else {
            double t = 1.0;
            for (int halving = 0; halving <= 30; ++halving) {
                for (std::size_t i = 0; i < p; ++i) cand[i] = fit.beta_hat[i] + t * step[i];
                ll_new = spec.model->log_likelihood(cand);
                if (ll_new >= ll) break;
                t *= 0.5;
            }
            if (ll_new < ll) {
                fit.converged = false;
                fit.log_lik = ll;
                return fit;
            }
        }
        fit.beta_hat = cand;
        ll = ll_new;
    }
    fit.log_lik = ll;
    if (fit.converged) fill_summary(spec, fit);
    return fit;
}

// Constrained fit for a nonlinear functional via Newton on the KKT system
// of max_beta loglik subject to f(beta) = value, with a residual-norm line
// search.
inline FitResult fit_constrained_nonlinear(const RegressionSpec& spec, const SmoothFunctional& f,
                                           double value, const Vec& init) {
    const std::size_t p = spec.model->dim();
    FitResult fit;
    Vec beta = init;
    double lambda = 0.0;
    {
        Vec s = spec.model->score(beta);
        Vec df = f.gradient(beta);
        lambda = dot(df, s) / dot(df, df);
    }

    auto residual = [&](const Vec& b, double lam, Vec& out) {
        Vec s = spec.model->score(b);
        Vec df = f.gradient(b);
        out.assign(p + 1, 0.0);
        for (std::size_t i = 0; i < p; ++i) out[i] = s[i] - lam * df[i];
        out[p] = f.value(b) - value;
    };

    Vec res;
    try {
        residual(beta, lambda, res);
    } catch (const DegenerateSlope&) {
        fit.beta_hat = beta;
        fit.converged = false;
        return fit;
    }

    for (int iter = 0; iter < kMaxIters; ++iter) {
        fit.iterations = iter;
        double stat = 0.0;
        for (std::size_t i = 0; i < p; ++i) stat = std::max(stat, std::fabs(res[i]));
        if (stat <= 1e-8 && std::fabs(res[p]) <= 1e-10) {
            fit.converged = true;
            break;
        }
        if (spec.model->max_abs_eta(beta) > kEtaSeparation && stat > 1e-6) {
            fit.converged = false;
            break;
        }
        try {
            Mat hh = spec.model->observed_information(beta);  // = -d2 loglik
            Mat fh = f.hessian_at(beta);
            Vec df = f.gradient(beta);
            Mat jac(p + 1, p + 1);
            for (std::size_t i = 0; i < p; ++i) {
                for (std::size_t j = 0; j < p; ++j) jac(i, j) = -hh(i, j) - lambda * fh(i, j);
                jac(i, p) = -df[i];
                jac(p, i) = df[i];
            }
            jac(p, p) = 0.0;
            Vec rhs(p + 1);
            for (std::size_t i = 0; i <= p; ++i) rhs[i] = -res[i];
            Vec delta = lu_solve(jac, rhs);

            double rn0 = norm2(res);
            double t = 1.0;
            Vec bcand(p);
            double lcand = lambda;
            Vec rcand;
            bool ok = false;
            for (int halving = 0; halving <= 30; ++halving) {
                for (std::size_t i = 0; i < p; ++i) bcand[i] = beta[i] + t * delta[i];
                lcand = lambda + t * delta[p];
                residual(bcand, lcand, rcand);
                if (norm2(rcand) < rn0 * (1.0 - 1e-4 * t) + 1e-14) {
                    ok = true;
                    break;
                }
                t *= 0.5;
            }
            if (!ok) {
                fit.converged = false;
                break;
            }
            beta = bcand;
            lambda = lcand;
            res = rcand;
        } catch (const DegenerateSlope&) {
            fit.converged = false;
            break;
        } catch (const SingularInformation&) {
            fit.converged = false;
            break;
        }
    }
    fit.beta_hat = beta;
    fit.log_lik = spec.model->log_likelihood(beta);
    if (fit.converged) fill_summary(spec, fit);
    return fit;
}

}  // namespace detail

// Maximizes the log-likelihood subject to f(beta) = value. Nonconvergence is
// reported via `converged = false`, as in fit_mle.
inline FitResult fit_constrained(const RegressionSpec& spec, const SmoothFunctional& f,
                                 double value, const Vec* start = nullptr) {
    Vec init = start ? *start : Vec(spec.model->dim(), 0.0);
    if (f.linear) return detail::fit_constrained_linear(spec, f, value, init);
    return detail::fit_constrained_nonlinear(spec, f, value, init);
}

// --------------------------------------------------------------------------
// Two-compound bioassay functionals
// --------------------------------------------------------------------------

struct BioassayFunctionals {
    SmoothFunctional g;  // theta = ED_z - ED'_z
    SmoothFunctional h;  // tau = beta2 - beta4 (parallelism discrepancy)
    double logit_z = 0.0;
};

// Log-dose at which compound A (intercept b1, slope b2) attains response
// probability z/100; analogous for compound B with (b3, b4).
inline double ed_z(const Vec& beta, double z, bool compound_a) {
    double l = logit(z / 100.0);
    double slope = compound_a ? beta[1] : beta[3];
    double icept = compound_a ? beta[0] : beta[2];
    if (std::fabs(slope) < 1e-10) throw DegenerateSlope("ed_z: slope too close to 0");
    return (l - icept) / slope;
}

inline BioassayFunctionals bioassay_functionals(double z) {
    if (!(z > 0.0 && z < 100.0))
        throw std::domain_error("bioassay_functionals: z must lie in (0,100)");
    const double l = logit(z / 100.0);

    BioassayFunctionals out;
    out.logit_z = l;

    out.g.value = [l](const Vec& b) {
        if (std::fabs(b[1]) < 1e-10 || std::fabs(b[3]) < 1e-10)
            throw DegenerateSlope("bioassay g: slope too close to 0");
        return (l - b[0]) / b[1] - (l - b[2]) / b[3];
    };
    out.g.gradient = [l](const Vec& b) {
        if (std::fabs(b[1]) < 1e-10 || std::fabs(b[3]) < 1e-10)
            throw DegenerateSlope("bioassay g: slope too close to 0");
        return Vec{-1.0 / b[1], -(l - b[0]) / (b[1] * b[1]), 1.0 / b[3],
                   (l - b[2]) / (b[3] * b[3])};
    };
    out.g.hessian = [l](const Vec& b) {
        if (std::fabs(b[1]) < 1e-10 || std::fabs(b[3]) < 1e-10)
            throw DegenerateSlope("bioassay g: slope too close to 0");
        Mat hss(4, 4);
        hss(0, 1) = hss(1, 0) = 1.0 / (b[1] * b[1]);
        hss(1, 1) = 2.0 * (l - b[0]) / (b[1] * b[1] * b[1]);
        hss(2, 3) = hss(3, 2) = -1.0 / (b[3] * b[3]);
        hss(3, 3) = -2.0 * (l - b[2]) / (b[3] * b[3] * b[3]);
        return hss;
    };

    out.h.value = [](const Vec& b) { return b[1] - b[3]; };
    out.h.gradient = [](const Vec& b) {
        (void)b;
        return Vec{0.0, 1.0, 0.0, -1.0};
    };
    out.h.hessian = [](const Vec& b) {
        (void)b;
        return Mat(4, 4);
    };
    out.h.linear = true;
    return out;
}

}  // namespace ciuupi
