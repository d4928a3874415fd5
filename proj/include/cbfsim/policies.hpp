#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cbfsim/model.hpp"
#include "cbfsim/qp.hpp"

namespace cbfsim::policies {

using model::AgentState;
using model::Vec2;

struct NotInAdmissibleSetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class PolicyKind { Centralized, DF, DR, CCS, PCCA };

enum class LoopBreakerType { UnitDelay, LowPassFilter };

struct PolicySpec {
    PolicyKind kind = PolicyKind::Centralized;
    double rho = 2.0;                                        // CCS only
    LoopBreakerType loop_breaker = LoopBreakerType::UnitDelay;  // PCCA only
    double tau = 0.2;                                        // PCCA low-pass only
};

/// Shared scenario parameters every policy step needs.
struct WorldParams {
    model::BarrierParams bp;
    double arena_radius = 11.0;
    double agent_radius = 2.0;
    double arena_slack_weight = 1e4;
    model::LqrGain gain;
    std::optional<double> accel_cap;
};

/// Host-side PCCA state: w_hat[i].col(j) is host i's disturbance estimate for
/// agent j, u_prev[i].col(j) the virtual control it computed last step.
struct PccaMemory {
    std::vector<Eigen::Matrix2Xd> w_hat;
    std::vector<Eigen::Matrix2Xd> u_prev;
    static PccaMemory zero(int n_agents);
};

struct PolicyStepOutput {
    std::vector<Vec2> controls;
    std::vector<bool> feasible;
    Eigen::MatrixXd constraint_margins;  // realized F_ij under applied controls
};

PolicyStepOutput centralized_step(const std::vector<AgentState>& states,
                                  const std::vector<Vec2>& goals, const WorldParams& wp);

PolicyStepOutput df_step(const std::vector<AgentState>& states,
                         const std::vector<Vec2>& goals, const WorldParams& wp);

PolicyStepOutput dr_step(const std::vector<AgentState>& states,
                         const std::vector<Vec2>& goals, const WorldParams& wp);

PolicyStepOutput ccs_step(const std::vector<AgentState>& states,
                          const std::vector<Vec2>& goals, const WorldParams& wp, double rho);

/// observed_accels are the controls every agent actually applied last step.
/// The memory update runs before the solves (simultaneous-update semantics).
PolicyStepOutput pcca_step(const std::vector<AgentState>& states,
                           const std::vector<Vec2>& goals, const WorldParams& wp,
                           PccaMemory& mem, const std::vector<Vec2>& observed_accels,
                           double dt, LoopBreakerType breaker, double tau);

/// Constructive feasible stacked control: u_1 = 0, u_l = lambda1 * v_1l.
/// Requires every pair to lie in the admissible set C*.
Eigen::VectorXd feasible_point(const std::vector<AgentState>& states,
                               const model::BarrierParams& bp);

/// Dispatches to the policy named by spec; holds PCCA memory for the caller.
struct PolicyRunner {
    PolicySpec spec;
    WorldParams wp;
    PccaMemory mem;
    std::vector<Vec2> last_controls;

    PolicyRunner(const PolicySpec& s, const WorldParams& w, int n_agents);
    PolicyStepOutput step(const std::vector<AgentState>& states,
                          const std::vector<Vec2>& goals, double dt);
};

std::string policy_name(PolicyKind k);

}  // namespace cbfsim::policies
