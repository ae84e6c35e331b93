#pragma once

#include <cmath>

namespace hamlevy {
namespace normal {

inline constexpr double inv_sqrt_2pi = 0.3989422804014326779;
inline constexpr double sqrt_2 = 1.4142135623730950488;

inline double pdf(double x) { return inv_sqrt_2pi * std::exp(-0.5 * x * x); }

// cdf via erfc keeps full relative accuracy in the lower tail
inline double cdf(double x) { return 0.5 * std::erfc(-x / sqrt_2); }

inline double cdf_upper(double x) { return 0.5 * std::erfc(x / sqrt_2); }

// antiderivative of the cdf: d/dx [x*cdf(x) + pdf(x)] = cdf(x), -> 0 at -inf
inline double cdf_integral(double x) { return x * cdf(x) + pdf(x); }

// integral of the upper tail 1-cdf over [x, inf)
inline double upper_tail_integral(double x) { return pdf(x) - x * cdf_upper(x); }

// Inverse cdf: Acklam's rational approximation polished with one Halley step
// against erfc, which brings it to within a few ulp.
inline double inv_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -HUGE_VAL;
        if (p == 1.0) return HUGE_VAL;
        return NAN;
    }
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement on cdf(x) - p = 0
    const double e = cdf(x) - p;
    const double u = e / pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

} // namespace normal
} // namespace hamlevy
