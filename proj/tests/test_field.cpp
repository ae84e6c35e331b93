#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hamlevy/field.hpp"

using namespace hamlevy;

TEST_CASE("propagator is one half strictly inside the cone") {
    REQUIRE(green(1.0, 0.5) == 0.5);
    REQUIRE(green(1.0, -0.999) == 0.5);
    REQUIRE(green(1.0, 1.0) == 0.0);  // boundary excluded
    REQUIRE(green(1.0, -1.0) == 0.0);
    REQUIRE(green(0.0, 0.0) == 0.0);  // zero and negative times vanish
    REQUIRE(green(-2.0, 0.0) == 0.0);
    REQUIRE(green(2.0, -1.999) == 0.5);
}

TEST_CASE("propagator mass grows linearly in time") {
    for (double t : {0.3, 1.0, 2.5}) {
        const double mass = integrate([t](double y) { return green(t, y); }, -t - 1.0, t + 1.0,
                                      std::vector<double>{-t, t});
        REQUIRE(mass == Catch::Approx(t).margin(1e-12));
    }
}

TEST_CASE("windowed propagator closed-form values") {
    REQUIRE(phi(1.0, 2.0, 0.0, 0.0) == 1.0);
    REQUIRE(phi(1.0, 0.5, 0.0, 0.0) == 0.5);
    REQUIRE(phi(1.0, 2.0, 0.0, 2.5) == 0.25);
    REQUIRE(phi(1.0, 2.0, 0.0, 5.0) == 0.0);
    REQUIRE(phi(0.5, 1.0, 0.5, 0.0) == 0.0); // t == r
    REQUIRE(phi(0.2, 1.0, 0.5, 0.0) == 0.0); // t < r
    REQUIRE(phi(1.0, 2.0, 0.25, -2.0) == Catch::Approx(0.375).margin(1e-15));
}

TEST_CASE("windowed propagator mass is 2(t-r)R") {
    const double t = 1.0, R = 2.0, r = 0.0;
    const double mass = integrate([&](double y) { return phi(t, R, r, y); }, -4.0, 4.0,
                                  detail::phi_breakpoints(t, R, r));
    REQUIRE(mass == Catch::Approx(2.0 * t * R).margin(1e-12));
}

TEST_CASE("windowed propagator increments are monotone and 1-Lipschitz in t") {
    CounterRng rng(31, 0);
    for (int i = 0; i < 10000; ++i) {
        const double R = rng.uniform(0.1, 3.0);
        const double r = rng.uniform(0.0, 1.0);
        const double s = r + rng.uniform(0.0, 2.0);
        const double t = s + rng.uniform(0.0, 2.0);
        const double y = rng.uniform(-R - 3.0, R + 3.0);
        const double d = phi(t, R, r, y) - phi(s, R, r, y);
        REQUIRE(d >= 0.0);
        REQUIRE(d <= (t - s) + 1e-15);
    }
}

TEST_CASE("kernel report on a short increment") {
    const Lemma24Report rep = lemma24_report(1.0, 0.0, 1.0, 0.0);
    REQUIRE(rep.increment_mass_exact == 2.0);
    REQUIRE(rep.increment_mass == Catch::Approx(2.0).margin(1e-10));
    // int_0^1 (2 tau^2 - (2/3) tau^3) dtau = 1/2
    REQUIRE(rep.square_integral == Catch::Approx(0.5).margin(1e-8));
    REQUIRE(rep.square_bound == Catch::Approx(4.0 / 3.0).margin(1e-15));
    // int_0^1 (2 tau^4 - (6/5) tau^5) dtau = 1/5
    REQUIRE(rep.quartic_integral == Catch::Approx(0.2).margin(1e-8));
    REQUIRE(rep.quartic_bound == Catch::Approx(2.0).margin(1e-15));
}

TEST_CASE("kernel report with an interior slice time") {
    const Lemma24Report rep = lemma24_report(2.0, 1.0, 3.0, 0.5);
    REQUIRE(rep.increment_mass == Catch::Approx(6.0).margin(1e-10));
    REQUIRE(rep.square_integral == Catch::Approx(11.0 / 6.0).margin(1e-8));
    REQUIRE(rep.quartic_integral == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("kernel report when the increment exceeds the radius") {
    // slices change form at t - r = R; the exact split gives 43/6 and 29/5
    const Lemma24Report rep = lemma24_report(3.0, 0.0, 1.0, 0.0);
    REQUIRE(rep.square_integral == Catch::Approx(43.0 / 6.0).margin(1e-7));
    REQUIRE(rep.quartic_integral == Catch::Approx(5.8).margin(1e-7));
    REQUIRE(rep.square_integral <= rep.square_bound);
    REQUIRE(rep.quartic_integral <= rep.quartic_bound);
}

TEST_CASE("kernel report of an empty increment is all zeros") {
    const Lemma24Report rep = lemma24_report(1.0, 1.0, 2.0, 0.5);
    REQUIRE(rep.increment_mass == 0.0);
    REQUIRE(rep.increment_mass_exact == 0.0);
    REQUIRE(rep.square_integral == 0.0);
    REQUIRE(rep.quartic_integral == 0.0);
}

TEST_CASE("kernel report rejects bad orderings") {
    REQUIRE_THROWS_AS(lemma24_report(1.0, 2.0, 1.0, 0.0), EmptyTargets);
    REQUIRE_THROWS_AS(lemma24_report(1.0, 0.5, 1.0, 0.7), EmptyTargets);
    REQUIRE_THROWS_AS(lemma24_report(1.0, 0.5, -1.0, 0.0), EmptyTargets);
    REQUIRE_THROWS_AS(lemma24_report(1.0, 0.5, 1.0, -0.1), EmptyTargets);
}

TEST_CASE("window geometry") {
    const SpaceTimeWindow w{1.0, 2.0};
    REQUIRE(w.half_width_at(0.0) == 3.0);
    REQUIRE(w.half_width_at(1.0) == 2.0);
    REQUIRE(w.area() == 5.0);
    REQUIRE(w.covers_point(1.0, 0.0));
    REQUIRE(w.covers_point(0.5, 2.5));
    REQUIRE_FALSE(w.covers_point(0.5, 2.6));
    REQUIRE_FALSE(w.covers_point(1.5, 0.0));
    REQUIRE_FALSE(w.covers_point(-0.1, 0.0));
    REQUIRE(w.covers_average(1.0, 2.0));
    REQUIRE_FALSE(w.covers_average(1.0, 2.1));
    REQUIRE(w.contains(0.0, -3.0));
    REQUIRE_FALSE(w.contains(0.0, 3.1));
}

TEST_CASE("windows derived from targets") {
    const SpaceTimeWindow wp = window_for_targets({{{1.0, 0.0}}, {}});
    REQUIRE(wp.t_max == 1.0);
    REQUIRE(wp.base_half_width == 0.0);
    REQUIRE(wp.half_width_at(0.3) == Catch::Approx(0.7));

    const SpaceTimeWindow wa = window_for_targets({{}, {{1.0, 2.0}}});
    REQUIRE(wa.t_max == 1.0);
    REQUIRE(wa.base_half_width == 2.0);

    const SpaceTimeWindow wb = window_for_targets({{{0.5, 4.0}}, {{1.0, 2.0}}});
    REQUIRE(wb.t_max == 1.0);
    REQUIRE(wb.base_half_width == Catch::Approx(3.5));
    REQUIRE(wb.covers_point(0.5, 4.0));
    REQUIRE(wb.covers_average(1.0, 2.0));
}

TEST_CASE("target validation") {
    REQUIRE_THROWS_AS(window_for_targets({}), EmptyTargets);
    REQUIRE_THROWS_AS(window_for_targets({{{-1.0, 0.0}}, {}}), EmptyTargets);
    REQUIRE_THROWS_AS(window_for_targets({{}, {{1.0, 0.0}}}), EmptyTargets);
}

TEST_CASE("cloud sampling replays identically") {
    const SpaceTimeWindow w{1.0, 1.0};
    const auto law = JumpLawSpec::symmetric_two_point(1.0, 2.0);
    CounterRng a(99, 5), b(99, 5);
    const AtomCloud ca = sample_cloud(w, law, a);
    const AtomCloud cb = sample_cloud(w, law, b);
    REQUIRE(ca.atoms.size() == cb.atoms.size());
    for (std::size_t i = 0; i < ca.atoms.size(); ++i) {
        REQUIRE(ca.atoms[i].s == cb.atoms[i].s);
        REQUIRE(ca.atoms[i].y == cb.atoms[i].y);
        REQUIRE(ca.atoms[i].z == cb.atoms[i].z);
    }
}

TEST_CASE("cloud atoms respect the window and strict time order") {
    const SpaceTimeWindow w{1.0, 1.0};
    const auto law = JumpLawSpec::discrete({{2.0, 1.0}, {-1.0, 2.0}});
    for (int k = 0; k < 1000; ++k) {
        CounterRng rng(7, static_cast<std::uint64_t>(k));
        const AtomCloud cloud = sample_cloud(w, law, rng);
        for (std::size_t i = 0; i < cloud.atoms.size(); ++i) {
            const Atom& a = cloud.atoms[i];
            REQUIRE(w.contains(a.s, a.y));
            REQUIRE(a.z != 0.0);
            if (i > 0) REQUIRE(cloud.atoms[i - 1].s < a.s);
        }
    }
}

TEST_CASE("cloud counts follow the intensity measure") {
    const SpaceTimeWindow w{1.0, 1.0}; // area 3
    const auto law = JumpLawSpec::symmetric_two_point(1.0, 2.0);
    const double mean_target = 2.0 * w.area();
    const int n = 10000;
    double s1 = 0.0, s2 = 0.0;
    std::size_t early = 0, total = 0;
    for (int k = 0; k < n; ++k) {
        CounterRng rng(13, static_cast<std::uint64_t>(k));
        const AtomCloud cloud = sample_cloud(w, law, rng);
        const double c = static_cast<double>(cloud.atoms.size());
        s1 += c;
        s2 += c * c;
        for (const Atom& a : cloud.atoms) {
            ++total;
            if (a.s <= 0.5) ++early;
        }
    }
    const double mean = s1 / n;
    const double var = s2 / n - mean * mean;
    REQUIRE(std::abs(mean - mean_target) <= 5.0 * std::sqrt(mean_target / n));
    REQUIRE(var / mean > 0.9);
    REQUIRE(var / mean < 1.1);
    // time marginal: mass of {s <= 1/2} is int_0^0.5 2(2-s) ds = 1.75 of 3
    const double p = 1.75 / 3.0;
    const double phat = static_cast<double>(early) / static_cast<double>(total);
    REQUIRE(std::abs(phat - p) <=
            5.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(total)));
}

TEST_CASE("counts in disjoint regions are independent") {
    const SpaceTimeWindow w{1.0, 1.0};
    const auto law = JumpLawSpec::symmetric_two_point(1.0, 1.0);
    const int n = 100000;
    // occupancy table for two disjoint sub-rectangles
    long n00 = 0, n01 = 0, n10 = 0, n11 = 0;
    for (int k = 0; k < n; ++k) {
        CounterRng rng(41, static_cast<std::uint64_t>(k));
        const AtomCloud cloud = sample_cloud(w, law, rng);
        bool in_a = false, in_b = false;
        for (const Atom& a : cloud.atoms) {
            in_a = in_a || (a.s <= 0.25 && a.y >= -0.5 && a.y <= 0.0);
            in_b = in_b || (a.s >= 0.5 && a.s <= 0.75 && a.y >= 0.0 && a.y <= 0.5);
        }
        if (in_a && in_b)
            ++n11;
        else if (in_a)
            ++n10;
        else if (in_b)
            ++n01;
        else
            ++n00;
    }
    const double nn = static_cast<double>(n);
    const double det = static_cast<double>(n11) * n00 - static_cast<double>(n10) * n01;
    const double chi2 = nn * det * det /
                        (static_cast<double>(n11 + n10) * static_cast<double>(n01 + n00) *
                         static_cast<double>(n11 + n01) * static_cast<double>(n10 + n00));
    REQUIRE(chi2 < 10.828); // 1 dof quantile at level 1e-3
}

TEST_CASE("sampling requires finite activity") {
    const auto law = JumpLawSpec::power_density(1.0, 0.5, 1.0, 3.0, 0.0);
    const SpaceTimeWindow w{1.0, 1.0};
    CounterRng rng(1, 0);
    REQUIRE_THROWS_AS(sample_cloud(w, law, rng), FiniteActivityRequired);
}

TEST_CASE("an empty window yields an empty cloud") {
    const auto law = JumpLawSpec::symmetric_two_point(1.0, 1.0);
    CounterRng rng(1, 0);
    const AtomCloud cloud = sample_cloud(SpaceTimeWindow{0.0, 0.0}, law, rng);
    REQUIRE(cloud.atoms.empty());
}
