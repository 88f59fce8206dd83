#pragma once

// BFGS minimizer for small smooth problems, with gradients by central finite
// differences. Used by the b/s penalty optimization; deterministic.

#include <cmath>
#include <functional>

#include "ciuupi/linalg.hpp"

namespace ciuupi {

struct BfgsOptions {
    int max_iters = 400;
    double grad_tol = 1e-7;     // stop on ||grad||_inf below this
    double obj_step_tol = 1e-9; // or on two consecutive tiny objective steps
    double fd_step = 1e-6;      // central-difference half step
};

struct BfgsResult {
    Vec x;
    double f = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

template <class F>
Vec fd_gradient(F&& f, const Vec& x, double h, int* eval_count = nullptr) {
    Vec g(x.size());
    Vec xp = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double xi = x[i];
        xp[i] = xi + h;
        double fp = f(xp);
        xp[i] = xi - h;
        double fm = f(xp);
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    if (eval_count) *eval_count += 2 * static_cast<int>(x.size());
    return g;
}

template <class F>
BfgsResult bfgs_minimize(F&& f, Vec x0, const BfgsOptions& opt = {}) {
    const std::size_t n = x0.size();
    BfgsResult res;
    res.x = std::move(x0);
    res.f = f(res.x);
    res.evaluations = 1;

    Mat h_inv = Mat::identity(n);
    Vec g = fd_gradient(f, res.x, opt.fd_step, &res.evaluations);
    int small_steps = 0;

    for (int iter = 0; iter < opt.max_iters; ++iter) {
        res.iterations = iter + 1;
        if (max_abs(g) <= opt.grad_tol) {
            res.converged = true;
            break;
        }

        Vec dir = mat_vec(h_inv, g);
        for (double& v : dir) v = -v;
        double slope = dot(g, dir);
        if (!(slope < 0.0)) {
            // reset to steepest descent if curvature info went bad
            h_inv = Mat::identity(n);
            dir = g;
            for (double& v : dir) v = -v;
            slope = dot(g, dir);
        }

        // backtracking Armijo line search
        double t = 1.0;
        Vec x_new(n);
        double f_new = res.f;
        bool accepted = false;
        for (int ls = 0; ls < 50; ++ls) {
            for (std::size_t i = 0; i < n; ++i) x_new[i] = res.x[i] + t * dir[i];
            f_new = f(x_new);
            ++res.evaluations;
            if (f_new <= res.f + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            res.converged = max_abs(g) <= 10.0 * opt.grad_tol;
            break;
        }

        Vec g_new = fd_gradient(f, x_new, opt.fd_step, &res.evaluations);
        Vec s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = x_new[i] - res.x[i];
            y[i] = g_new[i] - g[i];
        }
        double sy = dot(s, y);
        if (sy > 1e-12 * norm2(s) * norm2(y)) {
            // BFGS update of the inverse Hessian approximation
            double rho = 1.0 / sy;
            Vec hy = mat_vec(h_inv, y);
            double yhy = dot(y, hy);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    h_inv(i, j) += (1.0 + rho * yhy) * rho * s[i] * s[j] -
                                   rho * (s[i] * hy[j] + hy[i] * s[j]);
        }

        double df = std::fabs(f_new - res.f);
        res.x = std::move(x_new);
        res.f = f_new;
        g = std::move(g_new);

        if (df <= opt.obj_step_tol * (1.0 + std::fabs(res.f))) {
            if (++small_steps >= 2) {
                res.converged = true;
                break;
            }
        } else {
            small_steps = 0;
        }
    }
    return res;
}

}  // namespace ciuupi
