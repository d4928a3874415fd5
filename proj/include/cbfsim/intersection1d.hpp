#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbfsim::intersection1d {

struct SingularStateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NotAnEquilibriumError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BranchViolationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class CorridorPolicy { DF, DR, DRSlack, Centralized, CCS, PCCA };

/// Single-integrator two-agent intersection parameters.
struct Corridor1dParams {
    double v01 = 2.0;
    double v02 = 2.0;
    double r = 4.0;
    double lambda = 1.0;  // barrier bandwidth
    double tau = 0.2;     // PCCA filter time constant
    double M = 1e6;       // DRSlack slack weight
    double dt = 0.005;
    double t_max = 20.0;
    CorridorPolicy policy = CorridorPolicy::DR;

    void validate() const;
};

/// (x1, x2) signed distances to the intersection; (w1, w2) PCCA filter states.
struct Corridor1dState {
    double x1 = 0.0;
    double x2 = 0.0;
    double w1 = 0.0;
    double w2 = 0.0;
    double t = 0.0;
};

int state_dim(CorridorPolicy p);  // 2, or 4 for PCCA

/// Closed-form DR velocity for agent 1 (df doubles the bandwidth).
double dr_velocity_1d(double x1, double x2, double v01, const Corridor1dParams& p,
                      bool df = false);

/// Exact closed-loop vector field (x1dot, x2dot, w1dot, w2dot) with per-agent
/// branch selection; w entries are zero for 2-state policies.
Eigen::Vector4d closed_loop_field(const Corridor1dState& s, const Corridor1dParams& p);

struct ClearTimes {
    double t1 = 0.0;  // capped at t_max
    double t2 = 0.0;
    double t_ext = 0.0;
    bool gridlocked = false;  // both agents capped
};

struct Trajectory1d {
    std::vector<double> t;
    std::vector<Corridor1dState> states;
    ClearTimes clear;
};

/// Fixed-step RK4 with branch re-evaluation at every stage; crossing times
/// linearly interpolated at x_i = 0.
Trajectory1d simulate_1d(const Corridor1dState& initial, const Corridor1dParams& p,
                         bool record = true);

enum class EquilibriumShape { Arc, Point, ArcPlusAxes, Curve1DIn4D };
enum class StabilityClass { Stable, Unstable, DegenerateZero };

struct Linearization {
    Eigen::MatrixXd jacobian;                   // central finite differences
    std::optional<Eigen::MatrixXd> analytic;    // closed form, same coordinates
    Eigen::VectorXcd eigenvalues;               // of the FD jacobian
};

struct EquilibriumReport {
    EquilibriumShape shape;
    std::vector<Eigen::VectorXd> representative_points;
    std::vector<Linearization> linearizations;
    StabilityClass classification;
};

EquilibriumReport equilibria(const Corridor1dParams& p);

Linearization linearize(const Eigen::VectorXd& point, const Corridor1dParams& p);

/// Max drift of the policy's conserved quantity along the trajectory
/// (x1^2 - x2^2 for DR/DF, ln(-x1) - ln(-x2) for CCS).
double conserved_quantity(CorridorPolicy policy, const Trajectory1d& traj);

struct SweepGrid {
    int nx = 0;  // x2(0) axis
    int nv = 0;  // v02 axis
    double x_start = 0.0, x_step = 0.0;
    double v_start = 0.0, v_step = 0.0;
    double x1_0 = -10.0;
    std::vector<double> t_ext;        // row-major, [ix * nv + iv]
    std::vector<std::uint8_t> gridlocked;
    double gridlock_fraction = 0.0;
};

/// Deterministic grid over x2(0) and v02 with x1(0) = -10 and v01 from p.
SweepGrid sweep(const Corridor1dParams& p, double x_lo, double x_hi, double v_lo, double v_hi,
                double step, int threads = 1);

std::string corridor_policy_name(CorridorPolicy p);

}  // namespace cbfsim::intersection1d
