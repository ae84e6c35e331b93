#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hamlevy/errors.hpp"
#include "hamlevy/rng.hpp"

namespace hamlevy {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

// Jump intensity families.  Rates are events per unit space-time area; moment
// functionals are intensity integrals m_p = int |z|^p nu(dz), not probability
// moments.

struct SymmetricTwoPoint {
    double magnitude; // jumps are +-magnitude, half the rate each
    double rate;
};

struct CenteredTwoPoint {
    double up;   // jump +up with probability p_up
    double down; // jump -down otherwise
    double p_up;
    double rate;
};

struct DiscreteAtoms {
    std::vector<std::pair<double, double>> atoms; // (jump size, rate)
};

// density c1*|z|^(-a-1) on eps <= |z| <= 1 and c2*|z|^(-b-1) on |z| > 1.
// eps = 0 keeps the full small-jump part: fine for moment analysis, but the
// total rate is then infinite for a >= 0 and sampling is refused.
struct PowerDensity {
    double c1;
    double a;
    double c2;
    double b;
    double eps;
};

struct InvalidLaw : Error {
    explicit InvalidLaw(const std::string& w) : Error("invalid_law", w) {}
};

class JumpLawSpec {
public:
    using Family = std::variant<SymmetricTwoPoint, CenteredTwoPoint, DiscreteAtoms, PowerDensity>;

    static JumpLawSpec symmetric_two_point(double magnitude, double rate) {
        if (!(magnitude > 0.0) || !(rate > 0.0))
            throw InvalidLaw("symmetric-two-point needs magnitude > 0 and rate > 0");
        return JumpLawSpec(SymmetricTwoPoint{magnitude, rate});
    }

    // p_up <= 0 means "derive it from the centering constraint".
    static JumpLawSpec centered_two_point(double up, double down, double p_up, double rate) {
        if (!(up > 0.0) || !(down > 0.0) || !(rate > 0.0))
            throw InvalidLaw("centered-two-point needs up > 0, down > 0, rate > 0");
        const double balanced = down / (up + down);
        if (p_up <= 0.0) {
            p_up = balanced;
        } else {
            if (!(p_up < 1.0)) throw InvalidLaw("centered-two-point needs p_up in (0,1)");
            if (std::abs(p_up * up - (1.0 - p_up) * down) > 1e-12 * (up + down))
                throw InvalidLaw("centered-two-point parameters leave a nonzero mean jump");
        }
        return JumpLawSpec(CenteredTwoPoint{up, down, p_up, rate});
    }

    static JumpLawSpec discrete(std::vector<std::pair<double, double>> atoms) {
        if (atoms.empty()) throw InvalidLaw("discrete law needs at least one atom");
        for (const auto& [z, r] : atoms) {
            if (z == 0.0) throw InvalidLaw("discrete law atoms must have nonzero jump size");
            if (!(r > 0.0)) throw InvalidLaw("discrete law atoms must have positive rate");
        }
        return JumpLawSpec(DiscreteAtoms{std::move(atoms)});
    }

    static JumpLawSpec power_density(double c1, double a, double c2, double b, double eps) {
        if (c1 < 0.0 || c2 < 0.0 || c1 + c2 == 0.0)
            throw InvalidLaw("power density needs c1, c2 >= 0 and not both zero");
        if (!(a < 2.0)) throw InvalidLaw("power density needs small-jump exponent a < 2");
        if (!(b > 0.0)) throw InvalidLaw("power density needs tail exponent b > 0");
        if (!(eps >= 0.0 && eps < 1.0)) throw InvalidLaw("power density needs cutoff eps in [0,1)");
        JumpLawSpec law{PowerDensity{c1, a, c2, b, eps}};
        const double m2 = law.moment_m(2.0);
        if (!(m2 > 0.0) || !std::isfinite(m2))
            throw InvalidLaw("power density violates the standing assumption m_2 in (0, inf); "
                             "tail exponent must satisfy b > 2 when c2 > 0");
        return law;
    }

    const Family& family() const { return family_; }

    std::string family_name() const {
        struct V {
            std::string operator()(const SymmetricTwoPoint&) const { return "symmetric-two-point"; }
            std::string operator()(const CenteredTwoPoint&) const { return "centered-two-point"; }
            std::string operator()(const DiscreteAtoms&) const { return "discrete"; }
            std::string operator()(const PowerDensity&) const { return "power-density"; }
        };
        return std::visit(V{}, family_);
    }

    // nu(R_0) after the cutoff; +inf for an untruncated power density with a >= 0
    double total_rate() const {
        struct V {
            double operator()(const SymmetricTwoPoint& f) const { return f.rate; }
            double operator()(const CenteredTwoPoint& f) const { return f.rate; }
            double operator()(const DiscreteAtoms& f) const {
                double s = 0.0;
                for (const auto& [z, r] : f.atoms) s += r;
                return s;
            }
            double operator()(const PowerDensity& f) const {
                double small = 0.0;
                if (f.c1 > 0.0) small = 2.0 * f.c1 * power_piece_integral(-f.a, f.eps);
                const double tail = f.c2 > 0.0 ? 2.0 * f.c2 / f.b : 0.0;
                return small + tail;
            }
        };
        return std::visit(V{}, family_);
    }

    // m_p = int |z|^p nu(dz), p >= 1; +inf when divergent
    double moment_m(double p) const {
        if (!(p >= 1.0)) throw InvalidLaw("moment_m needs order p >= 1");
        return abs_moment_(p);
    }

    // M_p = int_{|z|>1} |z|^p nu(dz), p > 0
    double tail_moment_M(double p) const {
        if (!(p > 0.0)) throw InvalidLaw("tail_moment_M needs order p > 0");
        struct V {
            double p;
            double operator()(const SymmetricTwoPoint& f) const {
                return f.magnitude > 1.0 ? f.rate * std::pow(f.magnitude, p) : 0.0;
            }
            double operator()(const CenteredTwoPoint& f) const {
                double s = 0.0;
                if (f.up > 1.0) s += f.rate * f.p_up * std::pow(f.up, p);
                if (f.down > 1.0) s += f.rate * (1.0 - f.p_up) * std::pow(f.down, p);
                return s;
            }
            double operator()(const DiscreteAtoms& f) const {
                double s = 0.0;
                for (const auto& [z, r] : f.atoms)
                    if (std::abs(z) > 1.0) s += r * std::pow(std::abs(z), p);
                return s;
            }
            double operator()(const PowerDensity& f) const {
                if (f.c2 == 0.0) return 0.0;
                return p < f.b ? 2.0 * f.c2 / (f.b - p) : infinity;
            }
        };
        return std::visit(V{p}, family_);
    }

    // int z nu(dz); throws when m_1 diverges
    double mean_jump() const {
        struct V {
            const JumpLawSpec* self;
            double operator()(const SymmetricTwoPoint&) const { return 0.0; }
            double operator()(const CenteredTwoPoint& f) const {
                return f.rate * (f.p_up * f.up - (1.0 - f.p_up) * f.down);
            }
            double operator()(const DiscreteAtoms& f) const {
                double s = 0.0;
                for (const auto& [z, r] : f.atoms) s += z * r;
                return s;
            }
            double operator()(const PowerDensity&) const {
                if (!std::isfinite(self->abs_moment_(1.0))) throw DivergentFirstMoment();
                return 0.0; // symmetric density
            }
        };
        return std::visit(V{this}, family_);
    }

    // Whether int z nu(dz) = 0 holds structurally.  The centered-two-point
    // family is centered by construction even when the stored p_up carries a
    // last-ulp rounding residue, so this is the check the exact solver uses.
    bool is_centered() const {
        struct V {
            const JumpLawSpec* self;
            bool operator()(const SymmetricTwoPoint&) const { return true; }
            bool operator()(const CenteredTwoPoint&) const { return true; }
            bool operator()(const DiscreteAtoms&) const {
                try {
                    return self->mean_jump() == 0.0;
                } catch (const DivergentFirstMoment&) {
                    return false;
                }
            }
            bool operator()(const PowerDensity& f) const {
                return f.eps > 0.0 || f.a < 1.0 || f.c1 == 0.0;
            }
        };
        return std::visit(V{this}, family_);
    }

    // variance removed by the small-jump cutoff: int_{|z|<eps} z^2 nu(dz)
    double small_jump_discarded_variance() const {
        if (const auto* f = std::get_if<PowerDensity>(&family_)) {
            if (f->c1 == 0.0 || f->eps == 0.0) return 0.0;
            return 2.0 * f->c1 * std::pow(f->eps, 2.0 - f->a) / (2.0 - f->a);
        }
        return 0.0;
    }

    // one jump size distributed as nu normalized by the total rate
    double sample_jump(CounterRng& rng) const {
        struct V {
            CounterRng& rng;
            double operator()(const SymmetricTwoPoint& f) const {
                return rng.uniform() < 0.5 ? -f.magnitude : f.magnitude;
            }
            double operator()(const CenteredTwoPoint& f) const {
                return rng.uniform() < f.p_up ? f.up : -f.down;
            }
            double operator()(const DiscreteAtoms& f) const {
                double total = 0.0;
                for (const auto& [z, r] : f.atoms) total += r;
                double u = rng.uniform() * total;
                for (const auto& [z, r] : f.atoms) {
                    if (u < r) return z;
                    u -= r;
                }
                return f.atoms.back().first;
            }
            double operator()(const PowerDensity& f) const {
                const double small_rate =
                    f.c1 > 0.0 ? 2.0 * f.c1 * power_piece_integral(-f.a, f.eps) : 0.0;
                if (!std::isfinite(small_rate)) throw FiniteActivityRequired();
                const double tail_rate = f.c2 > 0.0 ? 2.0 * f.c2 / f.b : 0.0;
                const double total = small_rate + tail_rate;
                const double u = rng.uniform() * total;
                double mag;
                if (u < small_rate) {
                    const double v = u / small_rate;
                    if (f.a == 0.0) {
                        mag = std::pow(f.eps, 1.0 - v);
                    } else {
                        // invert the truncated power cdf on [eps, 1]
                        const double eps_pow = f.eps > 0.0 ? std::pow(f.eps, -f.a) : 0.0;
                        mag = std::pow((1.0 - v) * eps_pow + v, -1.0 / f.a);
                    }
                } else {
                    mag = std::pow(1.0 - rng.uniform_open(), -1.0 / f.b);
                }
                return rng.uniform() < 0.5 ? -mag : mag;
            }
        };
        return std::visit(V{rng}, family_);
    }

private:
    explicit JumpLawSpec(Family f) : family_(std::move(f)) {}

    // int_eps^1 z^(q-1) dz with the eps = 0 and q = 0 limits handled
    static double power_piece_integral(double q, double eps) {
        if (eps == 0.0) return q > 0.0 ? 1.0 / q : infinity;
        if (q == 0.0) return std::log(1.0 / eps);
        return (1.0 - std::pow(eps, q)) / q;
    }

    double abs_moment_(double p) const {
        struct V {
            double p;
            double operator()(const SymmetricTwoPoint& f) const {
                return f.rate * std::pow(f.magnitude, p);
            }
            double operator()(const CenteredTwoPoint& f) const {
                return f.rate * (f.p_up * std::pow(f.up, p) +
                                 (1.0 - f.p_up) * std::pow(f.down, p));
            }
            double operator()(const DiscreteAtoms& f) const {
                double s = 0.0;
                for (const auto& [z, r] : f.atoms) s += r * std::pow(std::abs(z), p);
                return s;
            }
            double operator()(const PowerDensity& f) const {
                double s = 0.0;
                if (f.c1 > 0.0) s += 2.0 * f.c1 * power_piece_integral(p - f.a, f.eps);
                if (f.c2 > 0.0) s += p < f.b ? 2.0 * f.c2 / (f.b - p) : infinity;
                return s;
            }
        };
        return std::visit(V{p}, family_);
    }

    Family family_;
};

struct AssumptionReport {
    bool m2_finite;
    bool clt_ok;
    bool centered;
};

// clt_ok follows the quantitative CLT requirement: both m_{2+2a} and m_{1+a}
// finite for the chosen Hoelder index alpha in (0, 1].
inline AssumptionReport check_assumptions(const JumpLawSpec& law, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidLaw("alpha must lie in (0, 1]");
    AssumptionReport rep{};
    const double m2 = law.moment_m(2.0);
    rep.m2_finite = std::isfinite(m2) && m2 > 0.0;
    rep.clt_ok = std::isfinite(law.moment_m(2.0 + 2.0 * alpha)) &&
                 std::isfinite(law.moment_m(1.0 + alpha));
    rep.centered = law.is_centered();
    return rep;
}

} // namespace hamlevy
