#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "hamlevy/errors.hpp"
#include "hamlevy/levy.hpp"
#include "hamlevy/quadrature.hpp"
#include "hamlevy/rng.hpp"

namespace hamlevy {

// 1-D wave propagator, 1/2 on the strict cone interior |x| < t and 0 for t <= 0
inline double green(double t, double x) {
    return (t > 0.0 && std::abs(x) < t) ? 0.5 : 0.0;
}

// spatially windowed propagator: int_{-R}^{R} G_{t-r}(x-y) dx
// = half the overlap length of [-R, R] with the cone section (y-(t-r), y+(t-r))
inline double phi(double t, double R, double r, double y) {
    if (!(t > r)) return 0.0;
    const double h = t - r;
    const double lo = std::max(-R, y - h);
    const double hi = std::min(R, y + h);
    return hi > lo ? 0.5 * (hi - lo) : 0.0;
}

// Trapezoidal simulation domain {(s, y) : 0 <= s <= t_max, |y| < Y(s)} with
// Y(s) = base_half_width + (t_max - s).  The unit-slope flare makes the set
// closed under backward light cones.
struct SpaceTimeWindow {
    double t_max = 0.0;
    double base_half_width = 0.0;

    double half_width_at(double s) const { return base_half_width + (t_max - s); }

    double area() const {
        return 2.0 * base_half_width * t_max + t_max * t_max;
    }

    // whole backward cone of the point (t, x) lies inside
    bool covers_point(double t, double x) const {
        return t >= 0.0 && t <= t_max && std::abs(x) + t <= base_half_width + t_max;
    }

    // support of phi(t, R, ., .) lies inside, i.e. |y| < R + (t - s) is covered
    bool covers_average(double t, double R) const {
        return t >= 0.0 && t <= t_max && R + t <= base_half_width + t_max;
    }

    bool contains(double s, double y) const {
        return s >= 0.0 && s <= t_max && std::abs(y) <= half_width_at(s);
    }
};

struct Atom {
    double s; // time
    double y; // position
    double z; // jump size
};

// one realization of the driving noise restricted to a window, sorted by time
// with strictly increasing time stamps
struct AtomCloud {
    SpaceTimeWindow window;
    std::vector<Atom> atoms;
};

struct PointTarget {
    double t;
    double x;
};

struct AverageTarget {
    double t;
    double R;
};

struct Targets {
    std::vector<PointTarget> points;
    std::vector<AverageTarget> averages;
};

// smallest symmetric trapezoid covering the backward cones of all point
// targets and the windowed-propagator supports of all average targets
inline SpaceTimeWindow window_for_targets(const Targets& targets) {
    if (targets.points.empty() && targets.averages.empty()) throw EmptyTargets();
    double t_max = 0.0;
    double reach = 0.0; // required base + t_max
    for (const auto& p : targets.points) {
        if (!(p.t >= 0.0)) throw EmptyTargets("point target needs t >= 0");
        t_max = std::max(t_max, p.t);
        reach = std::max(reach, std::abs(p.x) + p.t);
    }
    for (const auto& a : targets.averages) {
        if (!(a.t >= 0.0) || !(a.R > 0.0))
            throw EmptyTargets("average target needs t >= 0 and R > 0");
        t_max = std::max(t_max, a.t);
        reach = std::max(reach, a.R + a.t);
    }
    SpaceTimeWindow w;
    w.t_max = t_max;
    w.base_half_width = std::max(0.0, reach - t_max);
    return w;
}

// Poisson cloud on the window: count ~ Poisson(rate * area), positions i.i.d.
// uniform on the trapezoid (inverse-cdf in time, uniform in space), jump sizes
// from the law.  Output is sorted by time; exact time ties are re-drawn.
inline AtomCloud sample_cloud(const SpaceTimeWindow& window, const JumpLawSpec& law,
                              CounterRng& rng) {
    const double rate = law.total_rate();
    if (!std::isfinite(rate)) throw FiniteActivityRequired();
    AtomCloud cloud;
    cloud.window = window;
    const double area = window.area();
    const double mean = rate * area;
    if (!(mean > 0.0)) return cloud;
    const std::uint64_t count = rng.poisson(mean);
    cloud.atoms.reserve(count);
    const double peak = window.base_half_width + window.t_max; // Y(0)
    auto draw_position = [&](Atom& a) {
        const double u = rng.uniform();
        // time cdf is (2*peak*s - s^2)/area; solve the quadratic for s
        const double s = peak - std::sqrt(std::max(0.0, peak * peak - u * area));
        a.s = std::min(s, window.t_max);
        const double hw = window.half_width_at(a.s);
        a.y = rng.uniform(-hw, hw);
    };
    for (std::uint64_t i = 0; i < count; ++i) {
        Atom a;
        draw_position(a);
        a.z = law.sample_jump(rng);
        cloud.atoms.push_back(a);
    }
    auto by_time = [](const Atom& a, const Atom& b) { return a.s < b.s; };
    std::sort(cloud.atoms.begin(), cloud.atoms.end(), by_time);
    // ties break the strict-order invariant the recursion needs; re-draw the
    // later atom's position until times are strictly increasing
    bool clean = false;
    while (!clean) {
        clean = true;
        for (std::size_t i = 1; i < cloud.atoms.size(); ++i) {
            if (cloud.atoms[i].s == cloud.atoms[i - 1].s) {
                draw_position(cloud.atoms[i]);
                clean = false;
            }
        }
        if (!clean) std::sort(cloud.atoms.begin(), cloud.atoms.end(), by_time);
    }
    return cloud;
}

// Windowed-propagator kernel facts, all by deterministic quadrature:
//  (a) int (phi_{t,R} - phi_{s,R})(r, y) dy, equal to 2(t-s)R for any r <= s
//  (b) int_s^t int phi_{t,R}^2 dy dr, bounded by (4/3) R (t-s)^3
//  (c) int_s^t int phi_{t,R}^4 dy dr, bounded by 2 R^2 (t-s)^4
struct Lemma24Report {
    double increment_mass = 0.0;
    double increment_mass_exact = 0.0;
    double square_integral = 0.0;
    double square_bound = 0.0;
    double quartic_integral = 0.0;
    double quartic_bound = 0.0;
};

namespace detail {

inline std::vector<double> phi_breakpoints(double t, double R, double r) {
    const double h = t - r;
    if (!(h > 0.0)) return {};
    return {-R - h, -std::abs(R - h), std::abs(R - h), R + h, 0.0};
}

template <class F>
double integrate_phi_profile(const F& f, double t, double R, double r,
                             const QuadratureConfig& cfg) {
    const double h = t - r;
    if (!(h > 0.0)) return 0.0;
    return integrate(f, -R - h, R + h, phi_breakpoints(t, R, r), cfg);
}

} // namespace detail

inline Lemma24Report lemma24_report(double t, double s, double R, double r,
                                    const QuadratureConfig& cfg = {}) {
    if (!(R > 0.0) || !(r >= 0.0) || !(r <= s) || !(s <= t))
        throw EmptyTargets("kernel report needs 0 <= r <= s <= t and R > 0");
    Lemma24Report rep;
    rep.increment_mass_exact = 2.0 * (t - s) * R;
    rep.square_bound = (4.0 / 3.0) * R * std::pow(t - s, 3);
    rep.quartic_bound = 2.0 * R * R * std::pow(t - s, 4);
    if (t == s) return rep;

    QuadratureConfig inner_cfg = cfg;
    inner_cfg.abs_tol = cfg.abs_tol * 1e-2;

    auto diff = [&](double y) { return phi(t, R, r, y) - phi(s, R, r, y); };
    std::vector<double> bp = detail::phi_breakpoints(t, R, r);
    const std::vector<double> bp_s = detail::phi_breakpoints(s, R, r);
    bp.insert(bp.end(), bp_s.begin(), bp_s.end());
    const double h = t - r;
    rep.increment_mass = integrate(diff, -R - h, R + h, bp, cfg);

    auto sq_slice = [&](double rr) {
        auto f = [&](double y) { const double v = phi(t, R, rr, y); return v * v; };
        return detail::integrate_phi_profile(f, t, R, rr, inner_cfg);
    };
    auto quartic_slice = [&](double rr) {
        auto f = [&](double y) { const double v = phi(t, R, rr, y); return v * v * v * v; };
        return detail::integrate_phi_profile(f, t, R, rr, inner_cfg);
    };
    // the slice integrals change analytic form where the cone half-width t-rr
    // crosses R
    std::vector<double> rbp;
    if (t - R > s && t - R < t) rbp.push_back(t - R);
    rep.square_integral = integrate(sq_slice, s, t, rbp, cfg);
    rep.quartic_integral = integrate(quartic_slice, s, t, rbp, cfg);
    return rep;
}

} // namespace hamlevy
