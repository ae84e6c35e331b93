#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "hamlevy/errors.hpp"
#include "hamlevy/field.hpp"
#include "hamlevy/levy.hpp"
#include "hamlevy/rng.hpp"

namespace hamlevy {

struct SolveOptions {
    // switch to the y-sorted candidate index above this atom count; both code
    // paths accumulate identical terms in identical order
    std::size_t prune_threshold = 4096;
};

// wave field over one atom cloud; u_i = value seen by atom i, i.e. the field
// just before the atom fires: u_i = 1 + sum over earlier atoms j in the
// backward cone of i of (1/2) z_j u_j
struct FieldSolution {
    const AtomCloud& cloud;
    std::vector<double> u_at_atoms;
};

// field started from a delta velocity kick of size z at (r, y), solved over
// the same cloud; v_at_atoms aligns with cloud.atoms and is 0 for s_i <= r
struct DeltaSolution {
    const AtomCloud& cloud;
    double r;
    double y;
    double z;
    std::vector<double> v_at_atoms;
};

struct PointSource {
    double r;
    double y;
    double z;
};

namespace detail {

inline void require_strict_times(const AtomCloud& cloud) {
    for (std::size_t i = 1; i < cloud.atoms.size(); ++i)
        if (!(cloud.atoms[i - 1].s < cloud.atoms[i].s))
            throw TiedTimes("cloud times must be strictly increasing");
}

inline AtomCloud with_atom(const AtomCloud& cloud, const PointSource& xi) {
    AtomCloud out;
    out.window = cloud.window;
    out.atoms = cloud.atoms;
    const Atom a{xi.r, xi.y, xi.z};
    auto pos = std::upper_bound(out.atoms.begin(), out.atoms.end(), a,
                                [](const Atom& l, const Atom& r_) { return l.s < r_.s; });
    out.atoms.insert(pos, a);
    return out;
}

} // namespace detail

inline FieldSolution solve(const AtomCloud& cloud, const JumpLawSpec& law,
                           const SolveOptions& opts = {}) {
    if (!law.is_centered()) throw NonCenteredLaw();
    detail::require_strict_times(cloud);
    const std::size_t n = cloud.atoms.size();
    FieldSolution sol{cloud, std::vector<double>(n, 1.0)};
    const auto& atoms = cloud.atoms;
    if (n <= opts.prune_threshold) {
        for (std::size_t i = 0; i < n; ++i) {
            const Atom& ai = atoms[i];
            double acc = 1.0;
            for (std::size_t j = 0; j < i; ++j) {
                const Atom& aj = atoms[j];
                if (std::abs(ai.y - aj.y) < ai.s - aj.s)
                    acc += 0.5 * aj.z * sol.u_at_atoms[j];
            }
            sol.u_at_atoms[i] = acc;
        }
        return sol;
    }
    std::vector<std::size_t> by_y(n);
    for (std::size_t i = 0; i < n; ++i) by_y[i] = i;
    std::sort(by_y.begin(), by_y.end(),
              [&](std::size_t a, std::size_t b) { return atoms[a].y < atoms[b].y; });
    std::vector<double> ys(n);
    for (std::size_t k = 0; k < n; ++k) ys[k] = atoms[by_y[k]].y;
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < n; ++i) {
        const Atom& ai = atoms[i];
        // any contributor satisfies |y_j - y_i| < s_i - s_j <= s_i
        const auto lo = std::lower_bound(ys.begin(), ys.end(), ai.y - ai.s);
        const auto hi = std::upper_bound(ys.begin(), ys.end(), ai.y + ai.s);
        cand.clear();
        for (auto it = lo; it != hi; ++it) {
            const std::size_t j = by_y[static_cast<std::size_t>(it - ys.begin())];
            if (j < i && std::abs(ai.y - atoms[j].y) < ai.s - atoms[j].s) cand.push_back(j);
        }
        std::sort(cand.begin(), cand.end());
        double acc = 1.0;
        for (std::size_t j : cand) acc += 0.5 * atoms[j].z * sol.u_at_atoms[j];
        sol.u_at_atoms[i] = acc;
    }
    return sol;
}

inline double eval_u(const FieldSolution& sol, double t, double x) {
    if (!sol.cloud.window.covers_point(t, x))
        throw OutsideWindow("backward cone of the evaluation point escapes the window");
    double acc = 1.0;
    const auto& atoms = sol.cloud.atoms;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (atoms[i].s < t && std::abs(x - atoms[i].y) < t - atoms[i].s)
            acc += 0.5 * atoms[i].z * sol.u_at_atoms[i];
    }
    return acc;
}

inline DeltaSolution solve_delta(const AtomCloud& cloud, const JumpLawSpec& law,
                                 double r, double y, double z) {
    if (!law.is_centered()) throw NonCenteredLaw();
    detail::require_strict_times(cloud);
    const std::size_t n = cloud.atoms.size();
    DeltaSolution sol{cloud, r, y, z, std::vector<double>(n, 0.0)};
    const auto& atoms = cloud.atoms;
    for (std::size_t i = 0; i < n; ++i) {
        const Atom& ai = atoms[i];
        if (!(ai.s > r)) continue;
        double acc = green(ai.s - r, ai.y - y) * z;
        for (std::size_t j = 0; j < i; ++j) {
            const Atom& aj = atoms[j];
            if (aj.s > r && std::abs(ai.y - aj.y) < ai.s - aj.s)
                acc += 0.5 * aj.z * sol.v_at_atoms[j];
        }
        sol.v_at_atoms[i] = acc;
    }
    return sol;
}

// no window guard here: the value is an algebraic functional of the given
// cloud, and the derivative checks probe points outside the sampled region
inline double eval_v(const DeltaSolution& sol, double t, double x) {
    double acc = green(t - sol.r, x - sol.y) * sol.z;
    const auto& atoms = sol.cloud.atoms;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const Atom& a = atoms[i];
        if (a.s > sol.r && a.s < t && std::abs(x - a.y) < t - a.s)
            acc += 0.5 * a.z * sol.v_at_atoms[i];
    }
    return acc;
}

// green(t-r, x-y) * v(t,x) - (1/2) v(t,x); zero for every configuration
// because v vanishes identically outside the cone of its source
inline double half_identity_residual(const DeltaSolution& sol, double t, double x) {
    const double v = eval_v(sol, t, x);
    return green(t - sol.r, x - sol.y) * v - 0.5 * v;
}

inline double add_one_cost(const AtomCloud& cloud, const JumpLawSpec& law,
                           const PointSource& xi, double t, double x,
                           const SolveOptions& opts = {}) {
    if (!law.is_centered()) throw NonCenteredLaw();
    if (!cloud.window.covers_point(t, x))
        throw OutsideWindow("backward cone of the evaluation point escapes the window");
    if (!(xi.r >= 0.0)) throw OutsideWindow("source time must be nonnegative");
    for (const Atom& a : cloud.atoms)
        if (a.s == xi.r) throw TiedTimes("source time collides with an atom");
    const AtomCloud aug = detail::with_atom(cloud, xi);
    const double bumped = eval_u(solve(aug, law, opts), t, x);
    const double base = eval_u(solve(cloud, law, opts), t, x);
    return bumped - base;
}

inline double add_two_cost(const AtomCloud& cloud, const JumpLawSpec& law,
                           const PointSource& xi1, const PointSource& xi2,
                           double t, double x, const SolveOptions& opts = {}) {
    if (!law.is_centered()) throw NonCenteredLaw();
    if (!cloud.window.covers_point(t, x))
        throw OutsideWindow("backward cone of the evaluation point escapes the window");
    if (xi1.r == xi2.r) throw TiedTimes("sources need distinct times");
    if (!(xi1.r >= 0.0) || !(xi2.r >= 0.0)) throw OutsideWindow("source time must be nonnegative");
    for (const Atom& a : cloud.atoms)
        if (a.s == xi1.r || a.s == xi2.r) throw TiedTimes("source time collides with an atom");
    // canonical order makes the swapped call evaluate the same expression
    const PointSource& early = xi1.r < xi2.r ? xi1 : xi2;
    const PointSource& late = xi1.r < xi2.r ? xi2 : xi1;
    const AtomCloud c1 = detail::with_atom(cloud, early);
    const AtomCloud c2 = detail::with_atom(cloud, late);
    const AtomCloud c12 = detail::with_atom(c1, late);
    const double u12 = eval_u(solve(c12, law, opts), t, x);
    const double u1 = eval_u(solve(c1, law, opts), t, x);
    const double u2 = eval_u(solve(c2, law, opts), t, x);
    const double u0 = eval_u(solve(cloud, law, opts), t, x);
    return (u12 - u1) - (u2 - u0);
}

// int_{-R}^{R} (u(t,x) - 1) dx via the exact interchange with the atom sum
inline double spatial_average(const FieldSolution& sol, double t, double R) {
    if (!sol.cloud.window.covers_average(t, R))
        throw OutsideWindow("averaging support escapes the window");
    double acc = 0.0;
    const auto& atoms = sol.cloud.atoms;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const Atom& a = atoms[i];
        if (a.s < t) acc += phi(t, R, a.s, a.y) * a.z * sol.u_at_atoms[i];
    }
    return acc;
}

// slow cross-check: u(t, .) is piecewise constant with breakpoints at the
// cone edges y_i +- (t - s_i), so midpoint evaluation integrates it exactly
inline double spatial_average_quadrature(const FieldSolution& sol, double t, double R) {
    if (!sol.cloud.window.covers_average(t, R))
        throw OutsideWindow("averaging support escapes the window");
    std::vector<double> cuts{-R, R};
    for (const Atom& a : sol.cloud.atoms) {
        if (a.s >= t) continue;
        const double h = t - a.s;
        for (double c : {a.y - h, a.y + h})
            if (c > -R && c < R) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    double acc = 0.0;
    for (std::size_t k = 1; k < cuts.size(); ++k) {
        const double mid = 0.5 * (cuts[k - 1] + cuts[k]);
        acc += (eval_u(sol, t, mid) - 1.0) * (cuts[k] - cuts[k - 1]);
    }
    return acc;
}

// Randomized verification of the path-wise derivative identities.  Residual
// maxima over all cases; the *_exact fields must come back identically zero.
struct DerivativeFuzzReport {
    std::size_t cases = 0;
    double max_first_order_residual = 0.0;  // add-one cost vs u(r,y) v(t,x)
    double max_second_order_residual = 0.0; // add-two cost vs the triple product
    double max_outside_cone_exact = 0.0;    // add-one cost, source outside the cone
    double max_disjoint_pair_exact = 0.0;   // add-two cost, late source outside the cone
    double max_half_identity_exact = 0.0;
    double max_delta_support_exact = 0.0;   // v evaluated outside the source cone
    double max_swap_exact = 0.0;            // add-two cost under argument swap
};

inline DerivativeFuzzReport derivative_fuzz(const JumpLawSpec& law, std::size_t cases,
                                            std::uint64_t seed,
                                            double max_expected_atoms = 50.0,
                                            const SolveOptions& opts = {}) {
    DerivativeFuzzReport rep;
    rep.cases = cases;
    const double rate = law.total_rate();
    if (!std::isfinite(rate)) throw FiniteActivityRequired();
    for (std::size_t c = 0; c < cases; ++c) {
        CounterRng rng(seed, c);
        SpaceTimeWindow w;
        w.t_max = rng.uniform(0.4, 1.2);
        w.base_half_width = rng.uniform(0.2, 1.0);
        if (rate * w.area() > max_expected_atoms) {
            const double k = std::sqrt(max_expected_atoms / (rate * w.area()));
            w.t_max *= k;
            w.base_half_width *= k;
        }
        const double T = w.t_max;
        const double peak = w.base_half_width + T;
        const AtomCloud cloud = sample_cloud(w, law, rng);

        auto fresh_time = [&](double hi) {
            for (;;) {
                const double r = rng.uniform(0.0, hi);
                bool tied = false;
                for (const Atom& a : cloud.atoms) tied = tied || a.s == r;
                if (!tied) return r;
            }
        };
        const double r1 = fresh_time(0.95 * T);
        const double y1 = rng.uniform(-(peak - r1), peak - r1);
        const double z1 = law.sample_jump(rng);
        double r2 = fresh_time(0.95 * T);
        while (r2 == r1) r2 = fresh_time(0.95 * T);
        const double y2 = rng.uniform(-(peak - r2), peak - r2);
        const double z2 = law.sample_jump(rng);

        const double t = rng.uniform(std::max(r1, r2), T);
        double x = rng.uniform(-(peak - t), peak - t);
        if (rng.uniform() < 0.5) {
            // bias half the cases into the first source's cone
            const double trial = y1 + rng.uniform(-0.9, 0.9) * (t - r1);
            if (w.covers_point(t, trial)) x = trial;
        }

        const FieldSolution base = solve(cloud, law, opts);
        const DeltaSolution d1 = solve_delta(cloud, law, r1, y1, z1);

        const double cost1 = add_one_cost(cloud, law, {r1, y1, z1}, t, x, opts);
        const double factored1 = eval_u(base, r1, y1) * eval_v(d1, t, x);
        rep.max_first_order_residual =
            std::max(rep.max_first_order_residual,
                     std::abs(cost1 - factored1) / (1.0 + std::max(std::abs(cost1), std::abs(factored1))));

        // source strictly outside the backward cone of (t, x)
        const double y_out = x + (t - r1) + rng.uniform(0.1, 1.0);
        rep.max_outside_cone_exact =
            std::max(rep.max_outside_cone_exact,
                     std::abs(add_one_cost(cloud, law, {r1, y_out, z1}, t, x, opts)));
        rep.max_delta_support_exact =
            std::max(rep.max_delta_support_exact, std::abs(eval_v(d1, t, y1 + (t - r1) + 0.25)));

        rep.max_half_identity_exact =
            std::max({rep.max_half_identity_exact, std::abs(half_identity_residual(d1, t, x)),
                      std::abs(half_identity_residual(d1, t, y_out)),
                      std::abs(half_identity_residual(d1, rng.uniform(r1, T),
                                                      rng.uniform(-peak, peak)))});

        const double cost2 = add_two_cost(cloud, law, {r1, y1, z1}, {r2, y2, z2}, t, x, opts);
        const double swapped = add_two_cost(cloud, law, {r2, y2, z2}, {r1, y1, z1}, t, x, opts);
        rep.max_swap_exact = std::max(rep.max_swap_exact, std::abs(cost2 - swapped));
        const bool first_early = r1 < r2;
        const double re = first_early ? r1 : r2, ye = first_early ? y1 : y2,
                     ze = first_early ? z1 : z2;
        const double rl = first_early ? r2 : r1, yl = first_early ? y2 : y1,
                     zl = first_early ? z2 : z1;
        const DeltaSolution de = solve_delta(cloud, law, re, ye, ze);
        const DeltaSolution dl = solve_delta(cloud, law, rl, yl, zl);
        const double triple = eval_u(base, re, ye) * eval_v(de, rl, yl) * eval_v(dl, t, x);
        rep.max_second_order_residual =
            std::max(rep.max_second_order_residual,
                     std::abs(cost2 - triple) / (1.0 + std::max(std::abs(cost2), std::abs(triple))));

        // late source outside the cone of (t, x): iterated difference is
        // identically zero because neither bracket sees that source
        rep.max_disjoint_pair_exact = std::max(
            rep.max_disjoint_pair_exact,
            std::abs(add_two_cost(cloud, law, {r1, y1, z1},
                                  {r2, x + (t - r2) + rng.uniform(0.1, 1.0), z2}, t, x, opts)));
    }
    return rep;
}

} // namespace hamlevy
