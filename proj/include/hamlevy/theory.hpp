#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "hamlevy/errors.hpp"
#include "hamlevy/field.hpp"
#include "hamlevy/levy.hpp"
#include "hamlevy/quadrature.hpp"
#include "hamlevy/rng.hpp"

namespace hamlevy {

// deterministic targets parameterized by the noise variance intensity m2
struct CovarianceModel {
    double m2 = 1.0;
    QuadratureConfig quad{};

    CovarianceModel() = default;
    explicit CovarianceModel(double m2_, QuadratureConfig q = {}) : m2(m2_), quad(q) {
        if (!(m2 > 0.0) || !std::isfinite(m2))
            throw InvalidLaw("variance intensity must lie in (0, inf)");
    }
};

// limiting covariance of the normalized spatial averages:
// 2 m2 int_0^{t^s} (t-r)(s-r) cosh(r sqrt(m2/2)) dr
inline double sigma_limit(const CovarianceModel& model, double t, double s) {
    if (!(t >= 0.0) || !(s >= 0.0)) throw std::invalid_argument("sigma_limit needs t, s >= 0");
    const double upper = std::min(t, s);
    if (upper == 0.0) return 0.0;
    const double c = std::sqrt(model.m2 / 2.0);
    auto f = [&](double r) { return (t - r) * (s - r) * std::cosh(c * r); };
    return 2.0 * model.m2 * integrate(f, 0.0, upper, model.quad);
}

// E[u(t,x)^2] = cosh(t sqrt(m2/2))
inline double second_moment_theory(const CovarianceModel& model, double t) {
    if (!(t >= 0.0)) throw std::invalid_argument("second_moment_theory needs t >= 0");
    return std::cosh(t * std::sqrt(model.m2 / 2.0));
}

struct ChaosTermEstimate {
    std::size_t n = 0;
    double t = 0.0;
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
};

// Squared chaos-level contribution to E[u(t,0)^2].  The space coordinates
// telescope exactly (each squared propagator is half an indicator, and each
// position appears in exactly one factor), leaving
//   (m2/2)^n int_{0<t_1<...<t_n<t} (t_2-t_1)...(t_n-t_{n-1})(t-t_n) dt
// which is estimated over the ordered simplex by sorted uniforms.  n = 1 is
// returned in closed form: m2 t^2 / 4.
inline ChaosTermEstimate chaos_term_norm(const CovarianceModel& model, std::size_t n, double t,
                                         std::size_t samples, CounterRng& rng) {
    if (n < 1) throw std::invalid_argument("chaos order starts at 1");
    if (!(t >= 0.0)) throw std::invalid_argument("chaos_term_norm needs t >= 0");
    ChaosTermEstimate est;
    est.n = n;
    est.t = t;
    est.n_samples = samples;
    if (n == 1) {
        est.estimate = model.m2 * t * t / 4.0;
        return est;
    }
    if (samples < 2) throw DegenerateSample("need at least 2 simplex samples");
    double fact = 1.0;
    for (std::size_t k = 2; k <= n; ++k) fact *= static_cast<double>(k);
    const double scale = std::pow(model.m2 / 2.0, static_cast<double>(n)) *
                         std::pow(t, static_cast<double>(n)) / fact;
    std::vector<double> ts(n);
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
        for (std::size_t i = 0; i < n; ++i) ts[i] = rng.uniform(0.0, t);
        std::sort(ts.begin(), ts.end());
        double prod = t - ts[n - 1];
        for (std::size_t i = 1; i < n; ++i) prod *= ts[i] - ts[i - 1];
        sum += prod;
        sumsq += prod * prod;
    }
    const double mean = sum / static_cast<double>(samples);
    const double var =
        std::max(0.0, (sumsq - static_cast<double>(samples) * mean * mean) /
                          static_cast<double>(samples - 1));
    est.estimate = scale * mean;
    est.std_error = scale * std::sqrt(var / static_cast<double>(samples));
    return est;
}

// Spatial integrals controlling the normal-approximation error of the
// averaged field, kept as three distinct kernels:
//   inner(y1) = (1/2) int_{y1-t}^{y1+t} phi_{t,R}(0, y2)^2 dy2
//   I1 = int inner(y1)^{1+alpha} dy1     (bounded by 2 t^{3+3a} R)
//   I2 = int inner(y1) dy1               (bounded by 2 R t^3)
//   I3 = int phi_{t,R}(0, y) dy          (equal to 2 t R)
// All three grow linearly in R; the report carries value(2R)/value(R).
struct PoincareReport {
    double I1 = 0.0, I2 = 0.0, I3 = 0.0;
    double ratio_I1 = 0.0, ratio_I2 = 0.0, ratio_I3 = 0.0;
    double alpha = 0.0;
};

namespace detail {

inline double poincare_inner(double t, double R, double y1, const QuadratureConfig& cfg) {
    auto f = [&](double y2) { const double p = phi(t, R, 0.0, y2); return p * p; };
    const std::vector<double> bp{-R - t, -std::abs(R - t), std::abs(R - t), R + t};
    return 0.5 * integrate(f, y1 - t, y1 + t, bp, cfg);
}

template <class Inner>
double poincare_outer(double t, double R, const Inner& inner, const QuadratureConfig& cfg) {
    const double lim = R + 2.0 * t;
    std::vector<double> bp{-R, 0.0, R};
    if (R > 2.0 * t) {
        bp.push_back(R - 2.0 * t);
        bp.push_back(-(R - 2.0 * t));
    }
    return integrate(inner, -lim, lim, bp, cfg);
}

} // namespace detail

inline PoincareReport poincare_scaling_integrals(double t, double R, double alpha,
                                                 const QuadratureConfig& cfg = {}) {
    if (!(t > 0.0) || !(R > 0.0)) throw std::invalid_argument("scaling integrals need t, R > 0");
    if (!(alpha > 0.0) || !(alpha <= 1.0))
        throw std::invalid_argument("alpha must lie in (0, 1]");
    QuadratureConfig inner_cfg = cfg;
    inner_cfg.abs_tol = cfg.abs_tol * 1e-2;
    auto triple = [&](double RR) {
        auto i1 = [&](double y1) {
            return std::pow(detail::poincare_inner(t, RR, y1, inner_cfg), 1.0 + alpha);
        };
        auto i2 = [&](double y1) { return detail::poincare_inner(t, RR, y1, inner_cfg); };
        auto i3 = [&](double y) { return phi(t, RR, 0.0, y); };
        const std::vector<double> bp3{-std::abs(RR - t), std::abs(RR - t)};
        double a = detail::poincare_outer(t, RR, i1, cfg);
        double b = detail::poincare_outer(t, RR, i2, cfg);
        double c = integrate(i3, -RR - t, RR + t, bp3, cfg);
        return std::array<double, 3>{a, b, c};
    };
    const auto base = triple(R);
    const auto doubled = triple(2.0 * R);
    PoincareReport rep;
    rep.alpha = alpha;
    rep.I1 = base[0];
    rep.I2 = base[1];
    rep.I3 = base[2];
    rep.ratio_I1 = doubled[0] / base[0];
    rep.ratio_I2 = doubled[1] / base[1];
    rep.ratio_I3 = doubled[2] / base[2];
    return rep;
}

// predicted decay exponent of the normal-approximation distance in R
inline double clt_rate_prediction(double alpha) {
    if (!(alpha > 0.0) || !(alpha <= 1.0))
        throw std::invalid_argument("alpha must lie in (0, 1]");
    return alpha / (1.0 + alpha);
}

} // namespace hamlevy
