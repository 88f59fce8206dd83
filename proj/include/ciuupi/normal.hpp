#pragma once

// Univariate and bivariate standard normal distribution functions.
//
// cdf accuracy is |err| <= 1e-12 (erfc based), quantile inverts the cdf to
// ~1e-15 after one Newton polish, and the bivariate cdf follows Genz (2004),
// the double-precision rewrite of Drezner & Wesolowsky's method.

#include <cmath>
#include <stdexcept>

namespace ciuupi {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;
inline constexpr double kSqrt2 = 1.4142135623730950488;

inline double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

// Upper tail P(Z > x), accurate for large positive x.
inline double norm_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

// Inverse standard normal cdf. Rational initial guess (Acklam) polished by
// one Halley step, giving near machine precision on (0,1).
inline double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("norm_quantile: p must lie in (0,1)");

    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};

    const double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // one Halley step against the erfc-based cdf
    double e = norm_cdf(x) - p;
    double u = e / norm_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

namespace detail {

// Genz's BVND: P(X > h, Y > k) for standard bivariate normal with
// correlation r. Gauss-Legendre point count adapts to |r|.
inline double bvn_upper(double h, double k, double r) {
    static const double w6[3] = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
    static const double x6[3] = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
    static const double w12[6] = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                                  0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
    static const double x12[6] = {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                                  0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
    static const double w20[10] = {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                                   0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
                                   0.1316886384491766,  0.1420961093183821,  0.1491729864726037,
                                   0.1527533871307259};
    static const double x20[10] = {0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                                   0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                                   0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                                   0.07652652113349733};

    const double* w;
    const double* x;
    int ng;
    double ar = std::fabs(r);
    if (ar < 0.3) {
        ng = 3; w = w6; x = x6;
    } else if (ar < 0.75) {
        ng = 6; w = w12; x = x12;
    } else {
        ng = 10; w = w20; x = x20;
    }

    double bvn = 0.0;
    double hk = h * k, hs = 0.5 * (h * h + k * k);
    if (ar < 0.925) {
        double asr = std::asin(r);
        for (int i = 0; i < ng; ++i) {
            for (int is = -1; is <= 1; is += 2) {
                double sn = std::sin(asr * (1.0 + is * x[i]) * 0.5);
                bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
            }
        }
        bvn = bvn * asr / (4.0 * M_PI) + norm_sf(h) * norm_sf(k);
    } else {
        if (r < 0.0) { k = -k; hk = -hk; }
        if (ar < 1.0) {
            double as = (1.0 - r) * (1.0 + r);
            double a = std::sqrt(as);
            double bs = (h - k) * (h - k);
            double cc = (4.0 - hk) / 8.0;
            double dd = (12.0 - hk) / 16.0;
            double asq = bs / as + hk;
            if (asq < 100.0)
                bvn = a * std::exp(-asq / 2.0) *
                      (1.0 - cc * (bs - as) * (1.0 - dd * bs / 5.0) / 3.0 + cc * dd * as * as / 5.0);
            if (hk > -100.0) {
                double b = std::sqrt(bs);
                double sp = std::sqrt(2.0 * M_PI) * norm_sf(b / a);
                bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - cc * bs * (1.0 - dd * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for (int i = 0; i < ng; ++i) {
                for (int is = -1; is <= 1; is += 2) {
                    double xs = a * (1.0 + is * x[i]);
                    xs = xs * xs;
                    double rs = std::sqrt(1.0 - xs);
                    double asq2 = bs / xs + hk;
                    if (asq2 < 100.0) {
                        double sp2 = 1.0 + cc * xs * (1.0 + dd * xs);
                        double ep = std::exp(-hk * xs / (2.0 * (1.0 + rs) * (1.0 + rs))) / rs;
                        bvn += a * w[i] * std::exp(-asq2 / 2.0) * (ep - sp2);
                    }
                }
            }
            bvn = -bvn / (2.0 * M_PI);
        }
        if (r > 0.0) {
            bvn += norm_sf(std::max(h, k));
        } else {
            bvn = -bvn;
            if (k > h) bvn += norm_cdf(k) - norm_cdf(h);
        }
    }
    return bvn;
}

}  // namespace detail

// P(X <= x, Y <= y) for standard bivariate normal with correlation rho.
inline double bvn_cdf(double x, double y, double rho) {
    if (!(rho > -1.0 && rho < 1.0))
        throw std::domain_error("bvn_cdf: |rho| must be < 1");
    return detail::bvn_upper(-x, -y, rho);
}

}  // namespace ciuupi
