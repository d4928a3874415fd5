#include <doctest.h>

#include <cmath>

#include "cbfsim/policies.hpp"

using namespace cbfsim;
using model::AgentState;
using model::Vec2;

namespace {

struct TestRng {
    std::uint64_t s;
    explicit TestRng(std::uint64_t seed) : s(seed) {}
    std::uint64_t next() {
        s += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * (double(next() >> 11) * 0x1.0p-53);
    }
    int uniform_int(int lo, int hi) {
        return lo + int(next() % std::uint64_t(hi - lo + 1));
    }
};

policies::WorldParams default_world() {
    policies::WorldParams wp;
    wp.bp = model::BarrierParams{4.0, 6.0, 5.0};
    wp.gain = model::lqr_gain(0.2, 1.0);
    return wp;
}

// Sample n agents with every pair in the admissible set: positions with
// pairwise distance > r (so h > 0), then velocities shrunk until
// h >= -hdot/lambda1 holds for every pair.
std::vector<AgentState> sample_admissible(TestRng& rng, int n,
                                          const model::BarrierParams& bp) {
    while (true) {
        std::vector<AgentState> states(n);
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) {
            for (int attempt = 0;; ++attempt) {
                if (attempt > 200) {
                    ok = false;
                    break;
                }
                states[i].pos = Vec2(rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0));
                bool clear = true;
                for (int j = 0; j < i; ++j)
                    if ((states[i].pos - states[j].pos).norm() <= bp.r + 0.2) clear = false;
                if (clear) break;
            }
        }
        if (!ok) continue;
        for (auto& s : states) s.vel = Vec2(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
        for (int scale = 0; scale < 40; ++scale) {
            bool admissible = true;
            for (int i = 0; i < n && admissible; ++i)
                for (int j = i + 1; j < n && admissible; ++j) {
                    auto t = model::pair_constraint(states[i], states[j], bp);
                    if (!(t.h >= 0.0 && t.h >= -t.hdot / bp.lambda1())) admissible = false;
                }
            if (admissible) return states;
            for (auto& s : states) s.vel *= 0.5;
        }
    }
}

double realized_f(const std::vector<AgentState>& states, const std::vector<Vec2>& u, int i,
                  int j, const model::BarrierParams& bp) {
    auto t = model::pair_constraint(states[i], states[j], bp);
    return t.a + t.b.dot(u[i] - u[j]);
}

std::vector<Vec2> far_goals(const std::vector<AgentState>& states) {
    std::vector<Vec2> g;
    for (const auto& s : states) g.push_back(s.pos);
    return g;
}

}  // namespace

TEST_CASE("inactive constraints leave the baseline untouched") {
    auto wp = default_world();
    wp.arena_radius = 100.0;  // keep arena rows inactive for far agents
    std::vector<AgentState> states(2);
    states[0].pos = Vec2(-10, 0);
    states[1].pos = Vec2(10, 0);
    std::vector<Vec2> goals = {Vec2(-12, 0), Vec2(12, 0)};
    const Vec2 u0_0 = model::baseline_control(states[0], goals[0], wp.gain);
    const Vec2 u0_1 = model::baseline_control(states[1], goals[1], wp.gain);

    for (auto* step : {&policies::centralized_step, &policies::df_step, &policies::dr_step}) {
        auto out = (*step)(states, goals, wp);
        CHECK((out.controls[0] - u0_0).norm() <= 1e-9);
        CHECK((out.controls[1] - u0_1).norm() <= 1e-9);
        CHECK(out.feasible[0]);
        CHECK(out.feasible[1]);
    }
    auto ccs = policies::ccs_step(states, goals, wp, 2.0);
    CHECK((ccs.controls[0] - u0_0).norm() <= 1e-9);
    auto mem = policies::PccaMemory::zero(2);
    auto pcca = policies::pcca_step(states, goals, wp, mem, {Vec2::Zero(), Vec2::Zero()}, 0.05,
                                    policies::LoopBreakerType::UnitDelay, 0.2);
    CHECK((pcca.controls[0] - u0_0).norm() <= 1e-9);
    CHECK((pcca.controls[1] - u0_1).norm() <= 1e-9);
}

TEST_CASE("centralized symmetric head-on projection") {
    auto wp = default_world();
    std::vector<AgentState> states(2);
    states[0].pos = Vec2(-2.5, 0);
    states[0].vel = Vec2(1, 0);
    states[1].pos = Vec2(2.5, 0);
    states[1].vel = Vec2(-1, 0);
    std::vector<Vec2> goals = {Vec2(5, 0), Vec2(-5, 0)};
    auto out = policies::centralized_step(states, goals, wp);
    REQUIRE(out.feasible[0]);
    CHECK((out.controls[0] + out.controls[1]).norm() <= 1e-8);
    const double f = realized_f(states, out.controls, 0, 1, wp.bp);
    CHECK(f == doctest::Approx(0.0).epsilon(1e-7));
    CHECK(out.constraint_margins(0, 1) == doctest::Approx(f).epsilon(1e-12));
    CHECK(out.constraint_margins(1, 0) == doctest::Approx(f).epsilon(1e-12));
}

TEST_CASE("df and dr single-row projections") {
    auto wp = default_world();
    std::vector<AgentState> states(2);
    states[0].vel = Vec2(1, 0);
    states[1].pos = Vec2(5, 0);
    states[1].vel = Vec2(-1, 0);
    // Goals chosen so the host baseline is exactly (1, 0).
    std::vector<Vec2> goals(2);
    goals[0] = states[0].pos + (Vec2(1, 0) + wp.gain.kv * states[0].vel) / wp.gain.kp;
    goals[1] = states[1].pos + (Vec2(1, 0) + wp.gain.kv * states[1].vel) / wp.gain.kp;
    auto df = policies::df_step(states, goals, wp);
    CHECK(df.controls[0].x() == doctest::Approx(-3.8).epsilon(1e-9));
    CHECK(df.controls[0].y() == doctest::Approx(0.0).epsilon(1e-9));
    auto dr = policies::dr_step(states, goals, wp);
    CHECK(dr.controls[0].x() == doctest::Approx(-1.9).epsilon(1e-9));
    CHECK(dr.controls[0].y() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("df infeasibility for a flanked middle agent") {
    auto wp = default_world();
    std::vector<AgentState> states(3);
    states[0].pos = Vec2(-10, 0);
    states[1].pos = Vec2(0, 0);
    states[2].pos = Vec2(10, 0);
    std::vector<Vec2> goals = {Vec2(10, 0), Vec2(0, 0), Vec2(-10, 0)};
    bool middle_infeasible = false;
    double dt = 0.05;
    for (int k = 0; k < 400 && !middle_infeasible; ++k) {
        auto out = policies::df_step(states, goals, wp);
        if (!out.feasible[1]) middle_infeasible = true;
        for (int i = 0; i < 3; ++i) states[i] = model::step_agent(states[i], out.controls[i], dt);
    }
    CHECK(middle_infeasible);
}

TEST_CASE("df pairwise guarantee gap witness") {
    auto wp = default_world();
    std::vector<AgentState> states(2);
    states[1].pos = Vec2(5, 0);
    // Baselines engineered so each host's own DF row is inactive while the
    // combined pairwise constraint is violated: b.u0_1 = -0.8a, -b.u0_2 = -0.8a.
    auto t = model::pair_constraint(states[0], states[1], wp.bp);
    const double a = t.a;  // 54
    const double want = 0.8 * a / (2.0 * 5.0);
    std::vector<Vec2> goals = {states[0].pos + Vec2(want / wp.gain.kp, 0),
                               states[1].pos - Vec2(want / wp.gain.kp, 0)};
    auto out = policies::df_step(states, goals, wp);
    CHECK(out.feasible[0]);
    CHECK(out.feasible[1]);
    const double f = realized_f(states, out.controls, 0, 1, wp.bp);
    CHECK(f < 0.0);
}

TEST_CASE("ccs two-agent margin and C* feasibility") {
    auto wp = default_world();
    TestRng rng(0xAB5EED01ULL);
    for (int trial = 0; trial < 50; ++trial) {
        auto states = sample_admissible(rng, 2, wp.bp);
        std::vector<Vec2> goals = {states[1].pos, states[0].pos};
        auto out = policies::ccs_step(states, goals, wp, 2.0);
        CHECK(out.feasible[0]);
        CHECK(out.feasible[1]);
        CHECK(realized_f(states, out.controls, 0, 1, wp.bp) >= -1e-7);
    }
}

TEST_CASE("feasible point construction") {
    model::BarrierParams bp{4.0, 6.0, 5.0};
    SUBCASE("rest case") {
        std::vector<AgentState> states(3);
        states[0].pos = Vec2(0, 0);
        states[1].pos = Vec2(6, 0);
        states[2].pos = Vec2(0, 6);
        auto u = policies::feasible_point(states, bp);
        CHECK(u.norm() == 0.0);
    }
    SUBCASE("two-agent moving case") {
        std::vector<AgentState> states(2);
        states[0].pos = Vec2(0, 0);
        states[0].vel = Vec2(1, 0);
        states[1].pos = Vec2(10, 0);
        auto u = policies::feasible_point(states, bp);
        CHECK(u(0) == doctest::Approx(0.0));
        CHECK(u(1) == doctest::Approx(0.0));
        CHECK(u(2) == doctest::Approx(3.0).epsilon(1e-12));  // lambda1 * v_12
        CHECK(u(3) == doctest::Approx(0.0));
    }
    SUBCASE("not admissible") {
        std::vector<AgentState> states(2);
        states[0].pos = Vec2(0, 0);
        states[1].pos = Vec2(2, 0);  // h < 0
        CHECK_THROWS_AS(policies::feasible_point(states, bp),
                        policies::NotInAdmissibleSetError);
    }
}

TEST_CASE("feasibility of the co-optimizing policies over random C* states") {
    auto wp = default_world();
    wp.arena_radius = 100.0;
    TestRng rng(0xAB5EED02ULL);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = rng.uniform_int(2, 6);
        auto states = sample_admissible(rng, n, wp.bp);
        auto goals = far_goals(states);
        auto c = policies::centralized_step(states, goals, wp);
        for (int i = 0; i < n; ++i) CHECK(c.feasible[i]);
        auto ccs = policies::ccs_step(states, goals, wp, 2.0);
        for (int i = 0; i < n; ++i) CHECK(ccs.feasible[i]);
        auto mem = policies::PccaMemory::zero(n);
        std::vector<Vec2> obs(n, Vec2::Zero());
        auto pcca = policies::pcca_step(states, goals, wp, mem, obs, 0.05,
                                        policies::LoopBreakerType::UnitDelay, 0.2);
        for (int i = 0; i < n; ++i) CHECK(pcca.feasible[i]);
        // Prop-1 constructed control achieves the guaranteed margin.
        auto u = policies::feasible_point(states, wp.bp);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                auto t = model::pair_constraint(states[i], states[j], wp.bp);
                const Vec2 vij = states[i].vel - states[j].vel;
                const double f =
                    t.a + t.b.dot(Vec2(u.segment<2>(2 * i)) - Vec2(u.segment<2>(2 * j)));
                CHECK(f >= 2.0 * vij.squaredNorm() - 1e-9);
            }
    }
}

TEST_CASE("permutation equivariance") {
    auto wp = default_world();
    TestRng rng(0xAB5EED03ULL);
    auto states = sample_admissible(rng, 4, wp.bp);
    std::vector<Vec2> goals;
    for (const auto& s : states) goals.push_back(-s.pos);
    const std::vector<int> perm = {2, 0, 3, 1};
    std::vector<AgentState> pstates(4);
    std::vector<Vec2> pgoals(4);
    for (int i = 0; i < 4; ++i) {
        pstates[i] = states[perm[i]];
        pgoals[i] = goals[perm[i]];
    }
    auto check = [&](const policies::PolicyStepOutput& a,
                     const policies::PolicyStepOutput& b) {
        for (int i = 0; i < 4; ++i) CHECK((b.controls[i] - a.controls[perm[i]]).norm() <= 1e-9);
    };
    check(policies::centralized_step(states, goals, wp),
          policies::centralized_step(pstates, pgoals, wp));
    check(policies::df_step(states, goals, wp), policies::df_step(pstates, pgoals, wp));
    check(policies::dr_step(states, goals, wp), policies::dr_step(pstates, pgoals, wp));
    check(policies::ccs_step(states, goals, wp, 2.0),
          policies::ccs_step(pstates, pgoals, wp, 2.0));
    auto mem1 = policies::PccaMemory::zero(4);
    auto mem2 = policies::PccaMemory::zero(4);
    std::vector<Vec2> obs(4, Vec2::Zero());
    check(policies::pcca_step(states, goals, wp, mem1, obs, 0.05,
                              policies::LoopBreakerType::UnitDelay, 0.2),
          policies::pcca_step(pstates, pgoals, wp, mem2, obs, 0.05,
                              policies::LoopBreakerType::UnitDelay, 0.2));
}

TEST_CASE("rotation equivariance") {
    auto wp = default_world();
    TestRng rng(0xAB5EED04ULL);
    auto states = sample_admissible(rng, 3, wp.bp);
    std::vector<Vec2> goals;
    for (const auto& s : states) goals.push_back(-0.5 * s.pos);
    const double th = 1.234;
    Eigen::Rotation2Dd R(th);
    std::vector<AgentState> rstates(3);
    std::vector<Vec2> rgoals(3);
    for (int i = 0; i < 3; ++i) {
        rstates[i].pos = R * states[i].pos;
        rstates[i].vel = R * states[i].vel;
        rgoals[i] = R * goals[i];
    }
    auto check = [&](const policies::PolicyStepOutput& a,
                     const policies::PolicyStepOutput& b) {
        for (int i = 0; i < 3; ++i) CHECK((b.controls[i] - Vec2(R * a.controls[i])).norm() <= 1e-9);
    };
    check(policies::centralized_step(states, goals, wp),
          policies::centralized_step(rstates, rgoals, wp));
    check(policies::df_step(states, goals, wp), policies::df_step(rstates, rgoals, wp));
    check(policies::dr_step(states, goals, wp), policies::dr_step(rstates, rgoals, wp));
    check(policies::ccs_step(states, goals, wp, 2.0),
          policies::ccs_step(rstates, rgoals, wp, 2.0));
    auto mem1 = policies::PccaMemory::zero(3);
    auto mem2 = policies::PccaMemory::zero(3);
    std::vector<Vec2> obs1(3), obs2(3);
    for (int i = 0; i < 3; ++i) {
        obs1[i] = Vec2(0.1 * i, -0.2);
        obs2[i] = R * obs1[i];
    }
    // Warm the memories one matched step so w-hat is rotated likewise.
    policies::pcca_step(states, goals, wp, mem1, obs1, 0.05,
                        policies::LoopBreakerType::UnitDelay, 0.2);
    policies::pcca_step(rstates, rgoals, wp, mem2, obs2, 0.05,
                        policies::LoopBreakerType::UnitDelay, 0.2);
    check(policies::pcca_step(states, goals, wp, mem1, obs1, 0.05,
                              policies::LoopBreakerType::UnitDelay, 0.2),
          policies::pcca_step(rstates, rgoals, wp, mem2, obs2, 0.05,
                              policies::LoopBreakerType::UnitDelay, 0.2));
}

TEST_CASE("dr mirror symmetry through the origin") {
    auto wp = default_world();
    std::vector<AgentState> states(2);
    states[0].pos = Vec2(-3, -1);
    states[0].vel = Vec2(1, 0.3);
    states[1].pos = Vec2(3, 1);
    states[1].vel = Vec2(-1, -0.3);
    std::vector<Vec2> goals = {Vec2(3, 1), Vec2(-3, -1)};
    auto out = policies::dr_step(states, goals, wp);
    CHECK((out.controls[0] + out.controls[1]).norm() <= 1e-9);
}

TEST_CASE("pcca converges to centralized as the sample time shrinks") {
    auto wp = default_world();
    std::vector<Vec2> goals = {Vec2(6, 0.4), Vec2(-6, -0.4)};
    double prev_err = std::numeric_limits<double>::infinity();
    for (double dt : {0.05, 0.01, 0.002}) {
        std::vector<AgentState> states(2);
        states[0].pos = Vec2(-6, -0.4);
        states[1].pos = Vec2(6, 0.4);
        auto mem = policies::PccaMemory::zero(2);
        std::vector<Vec2> obs(2, Vec2::Zero());
        double err = 0.0;
        const int steps = int(8.0 / dt);
        for (int k = 0; k < steps; ++k) {
            auto cen = policies::centralized_step(states, goals, wp);
            auto out = policies::pcca_step(states, goals, wp, mem, obs, dt,
                                           policies::LoopBreakerType::UnitDelay, 0.2);
            for (int i = 0; i < 2; ++i)
                err = std::max(err, (out.controls[i] - cen.controls[i]).norm());
            obs = out.controls;
            for (int i = 0; i < 2; ++i)
                states[i] = model::step_agent(states[i], out.controls[i], dt);
        }
        CHECK(err < prev_err);
        prev_err = err;
    }
    CHECK(prev_err <= 0.2);
}
