#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "hamlevy/errors.hpp"

namespace hamlevy {

struct QuadratureConfig {
    double abs_tol = 1e-10;
    int max_depth = 48; // refinement cap per panel
};

namespace detail {

// Adaptive Simpson with the classic 1/15 Richardson error estimate.  Panels
// that have shrunk below h_floor are accepted as-is: a bounded jump that sits
// on a panel edge never satisfies the halved tolerance (both shrink by 2 per
// level), but its remaining contribution is at most |jump| * h_floor.
template <class F>
double simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, double h_floor, int depth, int max_depth,
                   bool& converged) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double h = b - a;
    const double left = (h / 12.0) * (fa + 4.0 * flm + fm);
    const double right = (h / 12.0) * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol || h <= h_floor || h <= std::abs(m) * 1e-15) {
        return left + right + delta / 15.0;
    }
    if (depth >= max_depth) {
        converged = false;
        return left + right + delta / 15.0;
    }
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, h_floor, depth + 1, max_depth,
                       converged) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, h_floor, depth + 1, max_depth,
                       converged);
}

} // namespace detail

// Integral of f over [a, b] to absolute tolerance cfg.abs_tol.
// Throws QuadratureNotConverged when the refinement cap is hit with the
// tolerance still unmet.
template <class F>
double integrate(const F& f, double a, double b, const QuadratureConfig& cfg = {}) {
    if (!(b > a)) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = ((b - a) / 6.0) * (fa + 4.0 * fm + fb);
    bool converged = true;
    const double v = detail::simpson_rec(f, a, b, fa, fm, fb, whole, cfg.abs_tol,
                                         (b - a) * 1e-14, 0, cfg.max_depth, converged);
    if (!converged) throw QuadratureNotConverged();
    return v;
}

// Same, but the panel edges include every interior breakpoint.  With kinks of
// the integrand listed as breakpoints, piecewise-polynomial integrands up to
// cubic order are integrated exactly by the base rule.
template <class F>
double integrate(const F& f, double a, double b, std::vector<double> breakpoints,
                 const QuadratureConfig& cfg = {}) {
    if (!(b > a)) return 0.0;
    breakpoints.push_back(a);
    breakpoints.push_back(b);
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
    double total = 0.0;
    double lo = a;
    const double span = b - a;
    for (double p : breakpoints) {
        if (p <= lo || p > b) continue;
        const double hi = std::min(p, b);
        QuadratureConfig piece = cfg;
        piece.abs_tol = cfg.abs_tol * std::max((hi - lo) / span, 1e-3);
        total += integrate(f, lo, hi, piece);
        lo = hi;
    }
    if (lo < b) total += integrate(f, lo, b, cfg);
    return total;
}

} // namespace hamlevy
