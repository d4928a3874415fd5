#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbfsim::qp {

struct NonConvexError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionMismatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IterationLimitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class RowKind { Hard, Soft };

/// One linear inequality: offset + gradient . u >= 0.
struct ConstraintRow {
    double offset = 0.0;
    Eigen::VectorXd gradient;
    RowKind kind = RowKind::Hard;
    double slack_weight = 0.0;  // soft rows only
};

/// min 1/2 u'Hu + f'u subject to the rows. H must be symmetric positive definite.
struct QpProblem {
    int dim = 0;
    Eigen::MatrixXd hessian;
    Eigen::VectorXd linear;
    std::vector<ConstraintRow> rows;
};

struct QpSolution {
    Eigen::VectorXd u;
    bool feasible = false;
    Eigen::VectorXd slacks;          // max(0, -(offset + g.u)) per row
    std::vector<int> active_set;     // original row indices
    double kkt_residual = 0.0;
};

/// Default weight applied when an infeasible problem is re-solved with
/// hard rows softened.
inline constexpr double kInfeasibleSlackWeight = 1e6;

/// Maximum supported stacked control dimension.
inline constexpr int kDimCap = 64;

/// A hard row counts as satisfied if offset + g.u >= -feasibility_tol(offset).
inline double feasibility_tol(double offset) { return 1e-9 * (1.0 + std::abs(offset)); }

/// Solve the QP exactly with a dual active-set method. If the hard rows are
/// infeasible, re-solves with every hard row softened at weight
/// kInfeasibleSlackWeight and reports feasible = false.
QpSolution solve(const QpProblem& p);

/// Recompute the KKT residual of (p, s) from scratch: max over stationarity,
/// primal feasibility, dual feasibility, and complementary slackness.
double verify_kkt(const QpProblem& p, const QpSolution& s);

}  // namespace cbfsim::qp
