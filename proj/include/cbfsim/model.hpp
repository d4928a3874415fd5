#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>

#include "cbfsim/qp.hpp"

namespace cbfsim::model {

using Vec2 = Eigen::Vector2d;

struct NonFiniteInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CoincidentAgentsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonPositiveWeightsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Planar position and velocity of one disk agent.
struct AgentState {
    Vec2 pos = Vec2::Zero();
    Vec2 vel = Vec2::Zero();
};

/// Protected distance r and the second-order barrier bandwidths l0, l1
/// for the constraint hddot + l1*hdot + l0*h >= 0.
struct BarrierParams {
    double r = 4.0;
    double l0 = 6.0;
    double l1 = 5.0;

    // Roots of s^2 + l1 s + l0 = 0 are -lambda1, -lambda2.
    double lambda1() const;
    double lambda2() const;
    void validate() const;  // requires l1^2 >= 4 l0 and l0, l1 > 0
};

/// Pairwise second-order barrier constraint a_ij + b_ij (u_i - u_j) >= 0
/// for h = |xi|^2 - r^2.
struct PairConstraintTerms {
    double a = 0.0;
    Vec2 b = Vec2::Zero();
    double h = 0.0;
    double hdot = 0.0;
};

/// Per-axis state feedback u0 = -kp (pos - goal) - kv vel.
struct LqrGain {
    double kp = 0.0;
    double kv = 0.0;
};

/// Exact zero-order-hold step of the double integrator.
AgentState step_agent(const AgentState& s, const Vec2& u, double dt);

PairConstraintTerms pair_constraint(const AgentState& si, const AgentState& sj,
                                    const BarrierParams& bp);

/// Soft barrier row keeping the agent inside the arena circle, with
/// h_w = (arena_radius - agent_radius)^2 - |pos|^2 and the same (l0, l1)
/// as the pairwise constraints. The gradient is 2-dimensional; callers
/// scatter it into the stacked control vector.
qp::ConstraintRow arena_constraint(const AgentState& s, double arena_radius,
                                   double agent_radius, const BarrierParams& bp,
                                   double slack_weight = 1e4);

/// Per-axis LQR gains for the double integrator with Q = q*I2, R = r.
LqrGain lqr_gain(double q, double r);

Vec2 baseline_control(const AgentState& s, const Vec2& goal, const LqrGain& g,
                      std::optional<double> accel_cap = std::nullopt);

}  // namespace cbfsim::model
