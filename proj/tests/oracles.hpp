#pragma once

// Independent reference implementations used only by tests. These stay
// deliberately separate from the library's numerical paths: the normal cdf
// here is a long-double Taylor series / continued fraction, quantiles come
// from bisection, and expectations come from Monte Carlo or brute force.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

// Standard normal cdf via Taylor series around 0 for moderate |x| and the
// Mills-ratio continued fraction in the tails, evaluated in long double.
inline long double norm_cdf_reference(long double x) {
    const long double inv_sqrt2pi = 0.398942280401432677939946L;
    long double ax = std::fabs(x);
    long double phi = inv_sqrt2pi * std::exp(-0.5L * x * x);
    long double result;
    if (ax < 7.0L) {
        // 1/2 + phi(x) * sum_{k>=0} x^(2k+1) / (1*3*...*(2k+1))
        long double term = ax, sum = ax;
        for (int k = 1; k < 400; ++k) {
            term *= ax * ax / (2.0L * k + 1.0L);
            sum += term;
            if (term < 1e-25L * sum) break;
        }
        result = 0.5L + phi * sum;
    } else {
        // upper tail via continued fraction for the Mills ratio
        long double cf = 0.0L;
        for (int k = 60; k >= 1; --k) cf = k / (ax + cf);
        result = 1.0L - phi / (ax + cf);
    }
    return x >= 0.0L ? result : 1.0L - result;
}

inline long double norm_quantile_reference(long double p) {
    long double lo = -40.0L, hi = 40.0L;
    for (int i = 0; i < 200; ++i) {
        long double mid = 0.5L * (lo + hi);
        (norm_cdf_reference(mid) < p ? lo : hi) = mid;
    }
    return 0.5L * (lo + hi);
}

// P(X <= x, Y <= y), standard bivariate normal, via one-dimensional
// composite Simpson integration of phi(u) * Phi((y - rho u)/sqrt(1-rho^2)).
inline double bvn_cdf_reference(double x, double y, double rho) {
    const double lo = -10.0, hi = x;
    if (hi <= lo) return 0.0;
    const int n = 20000;  // even
    const double h = (hi - lo) / n;
    const double c = std::sqrt(1.0 - rho * rho);
    auto f = [&](double u) {
        double phi = 0.3989422804014327 * std::exp(-0.5 * u * u);
        return phi * static_cast<double>(norm_cdf_reference((y - rho * u) / c));
    };
    double acc = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) acc += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

// Simple LCG-free reference sampler for Monte Carlo oracles (xorshift128+,
// independent of the library's stream generator).
struct XorShift128 {
    std::uint64_t s0, s1;
    explicit XorShift128(std::uint64_t seed) {
        s0 = seed * 0x9E3779B97F4A7C15ULL + 1;
        s1 = (seed ^ 0xDEADBEEFCAFEF00DULL) * 0xBF58476D1CE4E5B9ULL + 1;
        for (int i = 0; i < 10; ++i) next();
    }
    std::uint64_t next() {
        std::uint64_t a = s0, b = s1;
        s0 = b;
        a ^= a << 23;
        a ^= a >> 18;
        a ^= b ^ (b >> 5);
        s1 = a;
        return a + b;
    }
    double uniform() { return ((next() >> 11) + 0.5) * 0x1.0p-53; }
    double normal() {
        // Box-Muller; fine for an oracle
        double u1 = uniform(), u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
};

// Derivative-free maximizer for smooth concave 2-parameter functions:
// repeated grid zoom, deterministic.
inline std::vector<double> grid_maximize_2d(const std::function<double(const std::vector<double>&)>& f,
                                            double lo0, double hi0, double lo1, double hi1,
                                            int passes = 10) {
    double best0 = 0.5 * (lo0 + hi0), best1 = 0.5 * (lo1 + hi1);
    for (int pass = 0; pass < passes; ++pass) {
        double bestf = -1e300;
        const int n = 40;
        double b0 = best0, b1 = best1;
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n; ++j) {
                std::vector<double> x{lo0 + (hi0 - lo0) * i / n, lo1 + (hi1 - lo1) * j / n};
                double v = f(x);
                if (v > bestf) {
                    bestf = v;
                    b0 = x[0];
                    b1 = x[1];
                }
            }
        best0 = b0;
        best1 = b1;
        double w0 = (hi0 - lo0) / n * 2.5, w1 = (hi1 - lo1) / n * 2.5;
        lo0 = best0 - w0; hi0 = best0 + w0;
        lo1 = best1 - w1; hi1 = best1 + w1;
    }
    return {best0, best1};
}

// Nelder-Mead minimizer (deterministic), the workhorse for oracle-side
// optimization where the surface is a thin curved ridge.
inline std::vector<double> nelder_mead_min(const std::function<double(const std::vector<double>&)>& f,
                                           std::vector<double> x0, double scale,
                                           int max_iter = 4000) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> pts(n + 1, x0);
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += scale;
    for (std::size_t i = 0; i <= n; ++i) fv[i] = f(pts[i]);

    for (int it = 0; it < max_iter; ++it) {
        // order
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t j = i + 1; j <= n; ++j)
                if (fv[j] < fv[i]) { std::swap(fv[i], fv[j]); std::swap(pts[i], pts[j]); }
        if (std::fabs(fv[n] - fv[0]) < 1e-14 * (1.0 + std::fabs(fv[0]))) break;

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[i][j] / n;
        auto blend = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j) p[j] = centroid[j] + t * (pts[n][j] - centroid[j]);
            return p;
        };
        std::vector<double> xr = blend(-1.0);
        double fr = f(xr);
        if (fr < fv[0]) {
            std::vector<double> xe = blend(-2.0);
            double fe = f(xe);
            if (fe < fr) { pts[n] = xe; fv[n] = fe; }
            else { pts[n] = xr; fv[n] = fr; }
        } else if (fr < fv[n - 1]) {
            pts[n] = xr; fv[n] = fr;
        } else {
            std::vector<double> xc = blend(fr < fv[n] ? -0.5 : 0.5);
            double fc = f(xc);
            if (fc < std::min(fr, fv[n])) { pts[n] = xc; fv[n] = fc; }
            else {
                for (std::size_t i = 1; i <= n; ++i) {
                    for (std::size_t j = 0; j < n; ++j)
                        pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
                    fv[i] = f(pts[i]);
                }
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (fv[i] < fv[best]) best = i;
    return pts[best];
}

// Constrained maximizer by the quadratic-penalty route: maximize
// f(x) - penalty * (c(x) - target)^2 by Nelder-Mead with penalty
// continuation up to the final penalty. The simplex tracks the curved
// penalty ridge, which rectangular grid scans cannot.
inline std::vector<double> penalty_maximize_2d(
    const std::function<double(const std::vector<double>&)>& f,
    const std::function<double(const std::vector<double>&)>& c, double target,
    double lo0, double hi0, double lo1, double hi1, double penalty = 1e8) {
    // coarse grid for a global start
    std::vector<double> best{0.5 * (lo0 + hi0), 0.5 * (lo1 + hi1)};
    double bestf = -1e300;
    auto pf0 = [&](const std::vector<double>& x) {
        double v = c(x) - target;
        return f(x) - 1e2 * v * v;
    };
    for (int i = 0; i <= 60; ++i)
        for (int j = 0; j <= 60; ++j) {
            std::vector<double> x{lo0 + (hi0 - lo0) * i / 60.0, lo1 + (hi1 - lo1) * j / 60.0};
            double v = pf0(x);
            if (v > bestf) { bestf = v; best = x; }
        }
    for (double pen = 1e2; pen <= penalty * 1.0001; pen *= 10.0) {
        auto neg = [&](const std::vector<double>& x) {
            double v = c(x) - target;
            return -(f(x) - pen * v * v);
        };
        best = nelder_mead_min(neg, best, 0.5 / std::sqrt(pen));
    }
    return best;
}

}  // namespace oracle
