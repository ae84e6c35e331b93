#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "hamlevy/errors.hpp"
#include "hamlevy/field.hpp"
#include "hamlevy/levy.hpp"
#include "hamlevy/normal.hpp"
#include "hamlevy/rng.hpp"
#include "hamlevy/solver.hpp"
#include "hamlevy/theory.hpp"

namespace hamlevy {

// ---------------------------------------------------------------------------
// Monte Carlo harness

struct McConfig {
    std::uint64_t master_seed = 1;
    std::size_t n_paths = 1;
    JumpLawSpec law = JumpLawSpec::symmetric_two_point(1.0, 1.0);
    std::vector<double> times;  // average targets: all (t, R) pairs
    std::vector<double> radii;
    std::vector<PointTarget> point_probes;
    unsigned threads = 0; // 0 = hardware default; results never depend on it
};

// per-path records, one column per target; reproducible from the config alone
struct SampleSet {
    McConfig config;
    SpaceTimeWindow window;
    std::vector<std::vector<double>> average_columns; // times.size() * radii.size()
    std::vector<std::vector<double>> probe_columns;
    std::vector<std::uint32_t> atom_counts;

    std::size_t average_index(std::size_t it, std::size_t ir) const {
        return it * config.radii.size() + ir;
    }
    const std::vector<double>& averages(std::size_t it, std::size_t ir) const {
        return average_columns[average_index(it, ir)];
    }
};

inline SampleSet run_mc(const McConfig& cfg) {
    if (cfg.n_paths < 1) throw DegenerateSample("need at least one path");
    if (!cfg.law.is_centered()) throw NonCenteredLaw();
    for (double t : cfg.times)
        if (!(t >= 0.0)) throw EmptyTargets("average times must be nonnegative");
    for (double R : cfg.radii)
        if (!(R > 0.0)) throw EmptyTargets("radii must be positive");
    Targets targets;
    for (double t : cfg.times)
        for (double R : cfg.radii) targets.averages.push_back({t, R});
    for (const PointTarget& p : cfg.point_probes) targets.points.push_back(p);
    const SpaceTimeWindow window = window_for_targets(targets);

    SampleSet set;
    set.config = cfg;
    set.window = window;
    const std::size_t n_avg = cfg.times.size() * cfg.radii.size();
    set.average_columns.assign(n_avg, std::vector<double>(cfg.n_paths, 0.0));
    set.probe_columns.assign(cfg.point_probes.size(),
                             std::vector<double>(cfg.n_paths, 0.0));
    set.atom_counts.assign(cfg.n_paths, 0);

    auto run_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            CounterRng rng(cfg.master_seed, i);
            const AtomCloud cloud = sample_cloud(window, cfg.law, rng);
            const FieldSolution sol = solve(cloud, cfg.law);
            set.atom_counts[i] = static_cast<std::uint32_t>(cloud.atoms.size());
            std::size_t col = 0;
            for (double t : cfg.times)
                for (double R : cfg.radii) set.average_columns[col++][i] = spatial_average(sol, t, R);
            for (std::size_t p = 0; p < cfg.point_probes.size(); ++p)
                set.probe_columns[p][i] =
                    eval_u(sol, cfg.point_probes[p].t, cfg.point_probes[p].x);
        }
    };

    unsigned T = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    T = static_cast<unsigned>(std::min<std::size_t>(T, cfg.n_paths));
    if (T <= 1) {
        run_range(0, cfg.n_paths);
        return set;
    }
    // contiguous static partition: every path writes its own slots, so the
    // output is independent of scheduling and thread count
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(T);
    const std::size_t chunk = (cfg.n_paths + T - 1) / T;
    for (unsigned k = 0; k < T; ++k) {
        const std::size_t lo = std::min<std::size_t>(static_cast<std::size_t>(k) * chunk, cfg.n_paths);
        const std::size_t hi = std::min<std::size_t>(lo + chunk, cfg.n_paths);
        pool.emplace_back([&, k, lo, hi] {
            try {
                run_range(lo, hi);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return set;
}

// ---------------------------------------------------------------------------
// summaries and standard errors

struct MeanReport {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

inline MeanReport sample_mean(const std::vector<double>& xs) {
    if (xs.size() < 2) throw DegenerateSample("need at least 2 samples");
    const double n = static_cast<double>(xs.size());
    double s1 = 0.0;
    for (double x : xs) s1 += x;
    const double mean = s1 / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n), xs.size()};
}

struct ColumnSummary {
    std::string name;
    std::size_t n = 0;
    double mean = 0.0, sd = 0.0, skewness = 0.0, excess_kurtosis = 0.0;
    double min = 0.0, max = 0.0;
};

inline ColumnSummary summarize(const std::string& name, const std::vector<double>& xs) {
    if (xs.size() < 2) throw DegenerateSample("need at least 2 samples");
    ColumnSummary s;
    s.name = name;
    s.n = xs.size();
    const double n = static_cast<double>(xs.size());
    double s1 = 0.0;
    s.min = xs[0];
    s.max = xs[0];
    for (double x : xs) {
        s1 += x;
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
    }
    s.mean = s1 / n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double d = x - s.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    s.sd = std::sqrt(m2 * n / (n - 1.0));
    if (m2 > 0.0) {
        s.skewness = m3 / std::pow(m2, 1.5);
        s.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    }
    return s;
}

struct JackknifeResult {
    double estimate = 0.0;
    double std_error = 0.0;
};

// leave-one-out variance ratio Var(x)/divisor from cached sums
inline JackknifeResult jackknife_variance(const std::vector<double>& xs, double divisor) {
    const std::size_t n = xs.size();
    if (n < 3) throw DegenerateSample("jackknife needs at least 3 samples");
    double s1 = 0.0, s2 = 0.0;
    for (double x : xs) {
        s1 += x;
        s2 += x * x;
    }
    const double nn = static_cast<double>(n);
    JackknifeResult out;
    out.estimate = (s2 - s1 * s1 / nn) / (nn - 1.0) / divisor;
    const double m = nn - 1.0;
    double acc = 0.0, acc2 = 0.0;
    std::vector<double> loo(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a1 = s1 - xs[i];
        const double a2 = s2 - xs[i] * xs[i];
        loo[i] = (a2 - a1 * a1 / m) / (m - 1.0) / divisor;
        acc += loo[i];
    }
    const double loo_mean = acc / nn;
    for (std::size_t i = 0; i < n; ++i) acc2 += (loo[i] - loo_mean) * (loo[i] - loo_mean);
    out.std_error = std::sqrt((nn - 1.0) / nn * acc2);
    return out;
}

inline JackknifeResult jackknife_covariance(const std::vector<double>& xs,
                                            const std::vector<double>& ys, double divisor) {
    const std::size_t n = xs.size();
    if (n != ys.size() || n < 3) throw DegenerateSample("jackknife needs paired samples, n >= 3");
    double sx = 0.0, sy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxy += xs[i] * ys[i];
    }
    const double nn = static_cast<double>(n);
    JackknifeResult out;
    out.estimate = (sxy - sx * sy / nn) / (nn - 1.0) / divisor;
    const double m = nn - 1.0;
    double acc = 0.0, acc2 = 0.0;
    std::vector<double> loo(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double ax = sx - xs[i], ay = sy - ys[i], axy = sxy - xs[i] * ys[i];
        loo[i] = (axy - ax * ay / m) / (m - 1.0) / divisor;
        acc += loo[i];
    }
    const double loo_mean = acc / nn;
    for (std::size_t i = 0; i < n; ++i) acc2 += (loo[i] - loo_mean) * (loo[i] - loo_mean);
    out.std_error = std::sqrt((nn - 1.0) / nn * acc2);
    return out;
}

// ---------------------------------------------------------------------------
// distances to the standard normal

enum class Normalization { sample_sd, theoretical_sd };

struct NormalDistance {
    double value = 0.0;
    double scale = 0.0; // divisor that was applied to the samples
    Normalization normalization = Normalization::sample_sd;
};

namespace detail {

inline double resolve_scale(const std::vector<double>& xs, Normalization norm,
                            double theoretical_sd) {
    if (xs.size() < 2) throw DegenerateSample("need at least 2 samples");
    if (norm == Normalization::theoretical_sd) {
        if (!(theoretical_sd > 0.0)) throw DegenerateSample("theoretical sd must be positive");
        return theoretical_sd;
    }
    const double sd = summarize("", xs).sd;
    if (!(sd > 0.0)) throw DegenerateSample("zero sample standard deviation");
    return sd;
}

} // namespace detail

// sup_x |F_n(x) - Phi(x)|, evaluated exactly over the sorted sample
inline NormalDistance ks_distance(const std::vector<double>& xs, Normalization norm,
                                  double theoretical_sd = 0.0) {
    NormalDistance out;
    out.normalization = norm;
    out.scale = detail::resolve_scale(xs, norm, theoretical_sd);
    std::vector<double> zs(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) zs[i] = xs[i] / out.scale;
    std::sort(zs.begin(), zs.end());
    const double n = static_cast<double>(zs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < zs.size(); ++i) {
        const double c = normal::cdf(zs[i]);
        d = std::max(d, std::abs(c - static_cast<double>(i) / n));
        d = std::max(d, std::abs(c - static_cast<double>(i + 1) / n));
    }
    out.value = d;
    return out;
}

// int |F_n - Phi| dx via the closed-form antiderivative of Phi on each piece
inline NormalDistance w1_distance(const std::vector<double>& xs, Normalization norm,
                                  double theoretical_sd = 0.0) {
    NormalDistance out;
    out.normalization = norm;
    out.scale = detail::resolve_scale(xs, norm, theoretical_sd);
    std::vector<double> zs(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) zs[i] = xs[i] / out.scale;
    std::sort(zs.begin(), zs.end());
    const std::size_t n = zs.size();
    const double nn = static_cast<double>(n);
    // int_{-inf}^{z_0} Phi dx
    double total = normal::cdf_integral(zs.front());
    // between consecutive order statistics the empirical cdf is i/n
    for (std::size_t i = 1; i < n; ++i) {
        const double a = zs[i - 1], b = zs[i];
        if (!(b > a)) continue;
        const double level = static_cast<double>(i) / nn;
        auto seg = [&](double lo, double hi, bool below) {
            // int_lo^hi |level - Phi|, sign known on the segment
            const double ramp = normal::cdf_integral(hi) - normal::cdf_integral(lo);
            const double flat = level * (hi - lo);
            return below ? flat - ramp : ramp - flat;
        };
        const double q = normal::inv_cdf(level);
        if (q <= a)
            total += seg(a, b, false);
        else if (q >= b)
            total += seg(a, b, true);
        else
            total += seg(a, q, true) + seg(q, b, false);
    }
    // int_{z_{n-1}}^{inf} (1 - Phi) dx
    total += normal::upper_tail_integral(zs.back());
    out.value = total;
    return out;
}

struct TwoSampleReport {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n1 = 0, n2 = 0;
    bool reject = false;
};

inline TwoSampleReport two_sample_ks(std::vector<double> a, std::vector<double> b,
                                     double level = 1e-3) {
    if (a.size() < 2 || b.size() < 2) throw DegenerateSample("need at least 2 samples per side");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    TwoSampleReport rep;
    rep.statistic = d;
    rep.n1 = a.size();
    rep.n2 = b.size();
    const double ne = std::sqrt(na * nb / (na + nb));
    const double lambda = (ne + 0.12 + 0.11 / ne) * d;
    if (lambda < 0.2) {
        rep.p_value = 1.0;
    } else {
        double q = 0.0;
        for (int k = 1; k <= 100; ++k)
            q += 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
        rep.p_value = std::min(1.0, std::max(0.0, q));
    }
    rep.reject = rep.p_value < level;
    return rep;
}

// equality in law of u(t, x) across spatial shifts; the two columns must come
// from disjoint substreams so the samples are independent
inline TwoSampleReport stationarity_check(const std::vector<double>& a,
                                          const std::vector<double>& b, double level = 1e-3) {
    return two_sample_ks(a, b, level);
}

// ---------------------------------------------------------------------------
// variance / covariance limits

struct VarianceRow {
    double t = 0.0, s = 0.0, R = 0.0;
    double ratio = 0.0;     // Var(F_R(t))/R, or Cov(F_R(t), F_R(s))/R when s != t
    double std_error = 0.0; // jackknife
    double target = 0.0;    // limiting value
    double lln = 0.0;       // Var(F_R(t)/R), decays like 1/R
};

struct VarianceTable {
    std::vector<VarianceRow> rows;
};

inline VarianceTable variance_diagnostic(const SampleSet& set, const CovarianceModel& model) {
    VarianceTable table;
    const auto& times = set.config.times;
    const auto& radii = set.config.radii;
    for (std::size_t it = 0; it < times.size(); ++it) {
        for (std::size_t ir = 0; ir < radii.size(); ++ir) {
            const auto& col = set.averages(it, ir);
            VarianceRow row;
            row.t = row.s = times[it];
            row.R = radii[ir];
            const JackknifeResult jk = jackknife_variance(col, radii[ir]);
            row.ratio = jk.estimate;
            row.std_error = jk.std_error;
            row.target = sigma_limit(model, times[it], times[it]);
            row.lln = row.ratio / radii[ir];
            table.rows.push_back(row);
        }
    }
    for (std::size_t it = 0; it < times.size(); ++it) {
        for (std::size_t jt = it + 1; jt < times.size(); ++jt) {
            for (std::size_t ir = 0; ir < radii.size(); ++ir) {
                VarianceRow row;
                row.t = times[it];
                row.s = times[jt];
                row.R = radii[ir];
                const JackknifeResult jk =
                    jackknife_covariance(set.averages(it, ir), set.averages(jt, ir), radii[ir]);
                row.ratio = jk.estimate;
                row.std_error = jk.std_error;
                row.target = sigma_limit(model, times[it], times[jt]);
                row.lln = row.ratio / radii[ir];
                table.rows.push_back(row);
            }
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// time regularity of the averaged field

struct HolderGap {
    double gap = 0.0;
    double mean_sq = 0.0;
    double std_error = 0.0;
};

struct HolderFit {
    double slope = 0.0;
    double slope_se = 0.0;
    double intercept = 0.0;
    std::vector<HolderGap> points;
};

// regress log E|F_R(t) - F_R(s)|^2 on log|t - s| over dyadic gaps of the
// configured time grid (spacings h, 2h, 4h); expected slope 2
inline HolderFit holder_diagnostic(const SampleSet& set, double R) {
    const auto& times = set.config.times;
    if (times.size() < 4) throw DegenerateSample("need at least 4 grid times");
    std::size_t ir = set.config.radii.size();
    for (std::size_t k = 0; k < set.config.radii.size(); ++k)
        if (set.config.radii[k] == R) ir = k;
    if (ir == set.config.radii.size()) throw EmptyTargets("radius not in the sample set");
    std::vector<std::size_t> order(times.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
    const std::size_t n_paths = set.config.n_paths;

    HolderFit fit;
    for (std::size_t spacing : {std::size_t{1}, std::size_t{2}, std::size_t{4}}) {
        if (spacing >= times.size()) continue;
        // per-path average over all aligned pairs keeps path records i.i.d.
        std::vector<double> per_path(n_paths, 0.0);
        std::size_t n_pairs = 0;
        for (std::size_t j = 0; j + spacing < times.size(); ++j) {
            const auto& lo = set.averages(order[j], ir);
            const auto& hi = set.averages(order[j + spacing], ir);
            for (std::size_t i = 0; i < n_paths; ++i) {
                const double d = hi[i] - lo[i];
                per_path[i] += d * d;
            }
            ++n_pairs;
        }
        for (double& v : per_path) v /= static_cast<double>(n_pairs);
        const MeanReport m = sample_mean(per_path);
        const double gap = times[order[spacing]] - times[order[0]];
        fit.points.push_back({gap, m.mean, m.std_error});
    }
    if (fit.points.size() < 2) throw DegenerateSample("not enough dyadic gaps");
    const std::size_t m = fit.points.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& p : fit.points) {
        const double lx = std::log(p.gap), ly = std::log(p.mean_sq);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double mm = static_cast<double>(m);
    const double den = sxx - sx * sx / mm;
    fit.slope = (sxy - sx * sy / mm) / den;
    fit.intercept = (sy - fit.slope * sx) / mm;
    double rss = 0.0;
    for (const auto& p : fit.points) {
        const double res = std::log(p.mean_sq) - (fit.intercept + fit.slope * std::log(p.gap));
        rss += res * res;
    }
    fit.slope_se = m > 2 ? std::sqrt(rss / (mm - 2.0) / den) : 0.0;
    return fit;
}

// ---------------------------------------------------------------------------
// serialization

namespace detail {

inline std::string format_double(double v, const char* fmt = "%.17g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

} // namespace detail

inline std::string column_name_average(double t, double R) {
    return "F_t" + detail::format_double(t, "%g") + "_R" + detail::format_double(R, "%g");
}

inline std::string column_name_probe(double t, double x) {
    return "u_t" + detail::format_double(t, "%g") + "_x" + detail::format_double(x, "%g");
}

// one row per path; CRLF line endings, full-precision values
inline void write_csv(const SampleSet& set, std::ostream& os) {
    os << "path,atoms";
    for (double t : set.config.times)
        for (double R : set.config.radii) os << "," << column_name_average(t, R);
    for (const auto& p : set.config.point_probes)
        os << "," << column_name_probe(p.t, p.x);
    os << "\r\n";
    for (std::size_t i = 0; i < set.config.n_paths; ++i) {
        os << i << "," << set.atom_counts[i];
        for (const auto& col : set.average_columns)
            os << "," << detail::format_double(col[i]);
        for (const auto& col : set.probe_columns) os << "," << detail::format_double(col[i]);
        os << "\r\n";
    }
}

} // namespace hamlevy
