#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hamlevy/solver.hpp"

using namespace hamlevy;

namespace {

const JumpLawSpec unit_law = JumpLawSpec::symmetric_two_point(1.0, 1.0);

AtomCloud random_cloud(const SpaceTimeWindow& w, const JumpLawSpec& law, std::uint64_t seed,
                       std::uint64_t stream) {
    CounterRng rng(seed, stream);
    return sample_cloud(w, law, rng);
}

} // namespace

TEST_CASE("empty cloud solves to the flat field") {
    const AtomCloud cloud{{1.0, 1.0}, {}};
    const FieldSolution sol = solve(cloud, unit_law);
    REQUIRE(sol.u_at_atoms.empty());
    REQUIRE(eval_u(sol, 1.0, 0.0) == 1.0);
    REQUIRE(eval_u(sol, 0.0, 0.0) == 1.0);
}

TEST_CASE("single atom field by hand") {
    const AtomCloud cloud{{1.0, 1.0}, {{0.5, 0.0, 1.0}}};
    const FieldSolution sol = solve(cloud, unit_law);
    REQUIRE(sol.u_at_atoms == std::vector<double>{1.0});
    REQUIRE(eval_u(sol, 1.0, 0.0) == 1.5);   // inside the atom's cone
    REQUIRE(eval_u(sol, 1.0, 0.6) == 1.0);   // outside, exactly flat
    REQUIRE(eval_u(sol, 1.0, 0.5) == 1.0);   // cone boundary excluded
    REQUIRE(eval_u(sol, 0.4, 0.0) == 1.0);   // before the atom
}

TEST_CASE("two nested atoms accumulate recursively") {
    const AtomCloud cloud{{1.0, 1.0}, {{0.25, 0.0, 1.0}, {0.5, 0.1, 1.0}}};
    const FieldSolution sol = solve(cloud, unit_law);
    REQUIRE(sol.u_at_atoms[0] == 1.0);
    REQUIRE(sol.u_at_atoms[1] == 1.5); // second atom sits in the first one's cone
    REQUIRE(eval_u(sol, 1.0, 0.0) == 1.0 + 0.5 * 1.0 + 0.5 * 1.5);
}

TEST_CASE("evaluation outside the window is refused") {
    const AtomCloud cloud{{1.0, 0.5}, {}};
    const FieldSolution sol = solve(cloud, unit_law);
    REQUIRE_THROWS_AS(eval_u(sol, 1.0, 0.6), OutsideWindow);
    REQUIRE_THROWS_AS(eval_u(sol, 1.2, 0.0), OutsideWindow);
}

TEST_CASE("non-centered laws cannot drive the solver") {
    const auto skewed = JumpLawSpec::discrete({{2.0, 3.0}, {-1.0, 1.0}});
    const AtomCloud cloud{{1.0, 1.0}, {}};
    REQUIRE_THROWS_AS(solve(cloud, skewed), NonCenteredLaw);
    REQUIRE_THROWS_AS(solve_delta(cloud, skewed, 0.1, 0.0, 1.0), NonCenteredLaw);
}

TEST_CASE("tied atom times are rejected") {
    const AtomCloud cloud{{1.0, 1.0}, {{0.5, -0.2, 1.0}, {0.5, 0.3, 1.0}}};
    REQUIRE_THROWS_AS(solve(cloud, unit_law), TiedTimes);
}

TEST_CASE("pruned and naive solves agree bitwise") {
    const SpaceTimeWindow w{1.0, 40.0};
    const auto law = JumpLawSpec::symmetric_two_point(1.0, 4.0);
    const AtomCloud cloud = random_cloud(w, law, 51, 0);
    REQUIRE(cloud.atoms.size() > 100);
    SolveOptions naive;
    naive.prune_threshold = 1u << 20;
    SolveOptions pruned;
    pruned.prune_threshold = 0;
    const FieldSolution a = solve(cloud, law, naive);
    const FieldSolution b = solve(cloud, law, pruned);
    for (std::size_t i = 0; i < cloud.atoms.size(); ++i)
        REQUIRE(a.u_at_atoms[i] == b.u_at_atoms[i]);
    CounterRng rng(51, 1);
    for (int k = 0; k < 50; ++k) {
        const double t = rng.uniform(0.0, 1.0);
        const double x = rng.uniform(-40.0, 40.0);
        REQUIRE(eval_u(a, t, x) == eval_u(b, t, x));
    }
}

TEST_CASE("delta field of an empty cloud is the bare propagator") {
    const AtomCloud cloud{{1.0, 1.0}, {}};
    const DeltaSolution d = solve_delta(cloud, unit_law, 0.0, 0.0, 2.0);
    REQUIRE(eval_v(d, 1.0, 0.0) == 1.0);  // green * z = 0.5 * 2 inside
    REQUIRE(eval_v(d, 1.0, 1.5) == 0.0);  // outside the cone
    REQUIRE(eval_v(d, 1.0, 1.0) == 0.0);  // boundary excluded
}

TEST_CASE("delta field vanishes exactly at and before its source time") {
    const SpaceTimeWindow w{1.0, 2.0};
    const auto law = JumpLawSpec::discrete({{2.0, 1.0}, {-1.0, 2.0}});
    const AtomCloud cloud = random_cloud(w, law, 52, 0);
    const DeltaSolution d = solve_delta(cloud, law, 0.4, 0.1, 2.0);
    for (std::size_t i = 0; i < cloud.atoms.size(); ++i)
        if (cloud.atoms[i].s <= 0.4) REQUIRE(d.v_at_atoms[i] == 0.0);
}

TEST_CASE("delta field vanishes exactly outside the forward cone of its source") {
    const SpaceTimeWindow w{1.0, 2.0};
    const auto law = JumpLawSpec::power_density(1.0, 0.5, 1.0, 3.0, 0.05);
    const AtomCloud cloud = random_cloud(w, law, 53, 0);
    const DeltaSolution d = solve_delta(cloud, law, 0.3, -0.5, 1.7);
    for (std::size_t i = 0; i < cloud.atoms.size(); ++i) {
        const Atom& a = cloud.atoms[i];
        if (!(a.s > 0.3) || std::abs(a.y + 0.5) >= a.s - 0.3)
            REQUIRE(d.v_at_atoms[i] == 0.0);
    }
    REQUIRE(eval_v(d, 0.9, -0.5 + 0.6 + 0.1) == 0.0);
    REQUIRE(eval_v(d, 0.9, -0.5 - 0.6 - 0.1) == 0.0);
}

TEST_CASE("delta field is exactly linear in the jump size") {
    const SpaceTimeWindow w{1.0, 2.0};
    const AtomCloud cloud = random_cloud(w, JumpLawSpec::symmetric_two_point(1.0, 3.0), 54, 0);
    const auto law = unit_law;
    const DeltaSolution d1 = solve_delta(cloud, law, 0.2, 0.3, 0.7);
    const DeltaSolution d2 = solve_delta(cloud, law, 0.2, 0.3, 1.4);
    for (std::size_t i = 0; i < cloud.atoms.size(); ++i)
        REQUIRE(d2.v_at_atoms[i] == 2.0 * d1.v_at_atoms[i]);
    REQUIRE(eval_v(d2, 1.0, 0.1) == 2.0 * eval_v(d1, 1.0, 0.1));
}

TEST_CASE("half identity holds with zero tolerance") {
    const SpaceTimeWindow w{1.0, 2.0};
    const auto law = JumpLawSpec::power_density(1.0, 0.5, 1.0, 3.0, 0.05);
    const AtomCloud cloud = random_cloud(w, law, 55, 0);
    const DeltaSolution d = solve_delta(cloud, law, 0.15, 0.4, -0.8);
    CounterRng rng(55, 1);
    for (int k = 0; k < 200; ++k) {
        const double t = rng.uniform(0.0, 1.0);
        const double x = rng.uniform(-3.0, 3.0);
        REQUIRE(half_identity_residual(d, t, x) == 0.0);
    }
}

TEST_CASE("first-order cost factorizes through the delta field by hand") {
    const AtomCloud cloud{{1.0, 1.0}, {{0.5, 0.0, 1.0}}};
    const double cost = add_one_cost(cloud, unit_law, {0.25, 0.1, 2.0}, 1.0, 0.0);
    REQUIRE(cost == 1.5);
    const FieldSolution base = solve(cloud, unit_law);
    const DeltaSolution d = solve_delta(cloud, unit_law, 0.25, 0.1, 2.0);
    REQUIRE(eval_u(base, 0.25, 0.1) * eval_v(d, 1.0, 0.0) == 1.5);
}

TEST_CASE("first-order cost is exactly zero outside the cone") {
    const SpaceTimeWindow w{1.0, 2.0};
    const auto law = JumpLawSpec::power_density(1.0, 0.5, 1.0, 3.0, 0.05);
    const AtomCloud cloud = random_cloud(w, law, 56, 0);
    // source at (0.2, y) with |y - x| >= t - 0.2 cannot influence (t, x) = (0.9, 0)
    REQUIRE(add_one_cost(cloud, law, {0.2, 0.75, 1.3}, 0.9, 0.0) == 0.0);
    REQUIRE(add_one_cost(cloud, law, {0.2, -1.1, -2.6}, 0.9, 0.0) == 0.0);
}

TEST_CASE("add-one guards") {
    const AtomCloud cloud{{1.0, 1.0}, {{0.5, 0.0, 1.0}}};
    REQUIRE_THROWS_AS(add_one_cost(cloud, unit_law, {-0.1, 0.0, 1.0}, 1.0, 0.0), OutsideWindow);
    REQUIRE_THROWS_AS(add_one_cost(cloud, unit_law, {0.5, 0.3, 1.0}, 1.0, 0.0), TiedTimes);
    REQUIRE_THROWS_AS(add_one_cost(cloud, unit_law, {0.2, 0.0, 1.0}, 1.0, 9.0), OutsideWindow);
}

TEST_CASE("add-two guards") {
    const AtomCloud cloud{{1.0, 1.0}, {{0.5, 0.0, 1.0}}};
    REQUIRE_THROWS_AS(
        add_two_cost(cloud, unit_law, {0.2, 0.0, 1.0}, {0.2, 0.5, 1.0}, 1.0, 0.0), TiedTimes);
    REQUIRE_THROWS_AS(
        add_two_cost(cloud, unit_law, {0.5, 0.0, 1.0}, {0.3, 0.5, 1.0}, 1.0, 0.0), TiedTimes);
}

TEST_CASE("second-order cost matches the chain factorization by hand") {
    const AtomCloud cloud{{1.0, 1.0}, {{0.5, 0.0, 1.0}}};
    const PointSource e{0.25, 0.1, 2.0};
    const PointSource l{0.6, -0.2, 4.0};
    const double cost = add_two_cost(cloud, unit_law, e, l, 1.0, 0.0);
    const FieldSolution base = solve(cloud, unit_law);
    const DeltaSolution de = solve_delta(cloud, unit_law, e.r, e.y, e.z);
    const DeltaSolution dl = solve_delta(cloud, unit_law, l.r, l.y, l.z);
    const double triple = eval_u(base, e.r, e.y) * eval_v(de, l.r, l.y) * eval_v(dl, 1.0, 0.0);
    REQUIRE(std::abs(cost - triple) <= 1e-13 * (1.0 + std::abs(triple)));
    REQUIRE(cost == add_two_cost(cloud, unit_law, l, e, 1.0, 0.0)); // bitwise swap
}

TEST_CASE("second-order cost is exactly zero for sources with incompatible cones") {
    // dyadic jumps keep every field value exactly representable, so the
    // iterated difference cancels bitwise when no chain can use both sources
    const SpaceTimeWindow w{1.0, 1.0};
    const auto law = unit_law; // jumps in {-1, +1}
    const AtomCloud cloud = random_cloud(w, law, 57, 0);
    const PointSource e{0.1, -0.6, 1.0};
    const PointSource l{0.4, 0.55, -1.0}; // |y_l - y_e| = 1.15 >= 0.3 = r_l - r_e
    REQUIRE(std::abs(l.y - e.y) >= l.r - e.r);
    const double cost = add_two_cost(cloud, law, e, l, 1.0, 0.0);
    REQUIRE(cost == 0.0);
    // the middle factor of the chain product vanishes exactly as well
    const DeltaSolution de = solve_delta(cloud, law, e.r, e.y, e.z);
    REQUIRE(eval_v(de, l.r, l.y) == 0.0);
}

TEST_CASE("randomized derivative identities for a dyadic and a continuous law") {
    const DerivativeFuzzReport dyadic = derivative_fuzz(unit_law, 300, 71);
    REQUIRE(dyadic.cases == 300);
    REQUIRE(dyadic.max_first_order_residual <= 1e-12);
    REQUIRE(dyadic.max_second_order_residual <= 1e-12);
    REQUIRE(dyadic.max_outside_cone_exact == 0.0);
    REQUIRE(dyadic.max_disjoint_pair_exact == 0.0);
    REQUIRE(dyadic.max_half_identity_exact == 0.0);
    REQUIRE(dyadic.max_delta_support_exact == 0.0);
    REQUIRE(dyadic.max_swap_exact == 0.0);

    const auto power = JumpLawSpec::power_density(1.0, 0.5, 1.0, 3.0, 0.05);
    const DerivativeFuzzReport cont = derivative_fuzz(power, 200, 72);
    REQUIRE(cont.max_first_order_residual <= 1e-12);
    REQUIRE(cont.max_second_order_residual <= 1e-12);
    REQUIRE(cont.max_outside_cone_exact == 0.0);
    REQUIRE(cont.max_disjoint_pair_exact == 0.0);
    REQUIRE(cont.max_half_identity_exact == 0.0);
    REQUIRE(cont.max_delta_support_exact == 0.0);
    REQUIRE(cont.max_swap_exact == 0.0);
}

TEST_CASE("spatial average matches direct quadrature of the field") {
    const SpaceTimeWindow w{1.0, 3.0};
    const auto law = JumpLawSpec::discrete({{2.0, 1.0}, {-1.0, 2.0}});
    for (std::uint64_t stream = 0; stream < 20; ++stream) {
        const AtomCloud cloud = random_cloud(w, law, 58, stream);
        const FieldSolution sol = solve(cloud, law);
        const double direct = spatial_average(sol, 0.9, 2.0);
        const double quad = spatial_average_quadrature(sol, 0.9, 2.0);
        REQUIRE(std::abs(direct - quad) <= 1e-9 * (1.0 + std::abs(direct)));
    }
}

TEST_CASE("spatial average of the flat field is zero") {
    const AtomCloud cloud{{1.0, 2.0}, {}};
    const FieldSolution sol = solve(cloud, unit_law);
    REQUIRE(spatial_average(sol, 1.0, 2.0) == 0.0);
    REQUIRE_THROWS_AS(spatial_average(sol, 1.0, 2.5), OutsideWindow);
}

TEST_CASE("mean of the point field is one") {
    // E u(t, x) = 1: empirical check over independent clouds
    const auto law = unit_law;
    const SpaceTimeWindow w = window_for_targets({{{1.0, 0.0}}, {}});
    const int n = 20000;
    double s1 = 0.0, s2 = 0.0;
    for (int k = 0; k < n; ++k) {
        CounterRng rng(59, static_cast<std::uint64_t>(k));
        const AtomCloud cloud = sample_cloud(w, law, rng);
        const double u = eval_u(solve(cloud, law), 1.0, 0.0);
        s1 += u;
        s2 += u * u;
    }
    const double mean = s1 / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    REQUIRE(std::abs(mean - 1.0) <= 5.0 * se);
}
