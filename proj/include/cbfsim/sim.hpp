#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "cbfsim/policies.hpp"

namespace cbfsim::sim {

using model::AgentState;
using model::Vec2;

enum class MarginMode { SquaredUnits, DistanceUnits };

struct SimConfig {
    double dt = 0.05;
    double t_max = 100.0;
    model::BarrierParams bp{4.0, 6.0, 5.0};  // r defaults to 2 * agent_radius
    double radius_margin = 0.0;
    MarginMode margin_mode = MarginMode::SquaredUnits;
    double arena_radius = 11.0;
    double agent_radius = 2.0;
    double conv_pos_tol = 0.1;
    double conv_vel_tol = 0.1;
    double arena_slack_weight = 1e4;
    double lqr_q = 0.2;
    double lqr_r = 1.0;

    /// Constraint radius with the configured margin applied.
    double effective_r() const;
    void validate() const;
};

/// One trial definition, policy independent.
struct Scenario {
    int n_agents = 0;
    std::vector<Vec2> starts;
    std::vector<Vec2> goals;
    std::uint64_t seed = 0;
};

struct TrialMetrics {
    bool converged = false;
    double convergence_time = 0.0;
    double h_min = 0.0;       // against physical radius 2*r0; see has_pairs
    bool has_pairs = false;   // false for single-agent trials (h_min not applicable)
    bool gridlocked = false;
    bool any_infeasible = false;
    bool failed = false;      // fatal error (coincident agents, solver bug)
    std::string error;
};

bool convergence_check(const std::vector<AgentState>& states, const std::vector<Vec2>& goals,
                       const SimConfig& cfg);

/// Synchronous fixed-step closed loop. If trace is non-null, writes one CSV
/// row per agent per step: t,agent,px,py,vx,vy,ux,uy,feasible.
TrialMetrics run_trial(const Scenario& scenario, const policies::PolicySpec& policy,
                       const SimConfig& cfg, std::ostream* trace = nullptr);

}  // namespace cbfsim::sim
