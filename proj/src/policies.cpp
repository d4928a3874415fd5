#include "cbfsim/policies.hpp"

#include <cmath>

namespace cbfsim::policies {

namespace {

using model::BarrierParams;
using model::PairConstraintTerms;

std::vector<Vec2> baselines(const std::vector<AgentState>& states,
                            const std::vector<Vec2>& goals, const WorldParams& wp) {
    std::vector<Vec2> u0(states.size());
    for (size_t i = 0; i < states.size(); ++i)
        u0[i] = model::baseline_control(states[i], goals[i], wp.gain, wp.accel_cap);
    return u0;
}

// All unordered pair terms, indexed [i][j] (i != j); terms(j,i) mirrors (i,j).
std::vector<std::vector<PairConstraintTerms>> pair_terms(const std::vector<AgentState>& states,
                                                         const BarrierParams& bp) {
    const int n = static_cast<int>(states.size());
    std::vector<std::vector<PairConstraintTerms>> t(n, std::vector<PairConstraintTerms>(n));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            t[i][j] = model::pair_constraint(states[i], states[j], bp);
            t[j][i] = t[i][j];
            t[j][i].b = -t[i][j].b;
        }
    return t;
}

Eigen::MatrixXd realized_margins(const std::vector<std::vector<PairConstraintTerms>>& t,
                                 const std::vector<Vec2>& u) {
    const int n = static_cast<int>(u.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            m(i, j) = t[i][j].a + t[i][j].b.dot(u[i] - u[j]);
        }
    return m;
}

void scatter(Eigen::VectorXd& g, int slot, const Vec2& v) { g.segment<2>(2 * slot) += v; }

qp::ConstraintRow embed_arena(const qp::ConstraintRow& arena2, int slot, int dim,
                              const Vec2& control_shift = Vec2::Zero()) {
    qp::ConstraintRow row;
    row.offset = arena2.offset + arena2.gradient.dot(control_shift);
    row.gradient = Eigen::VectorXd::Zero(dim);
    row.gradient.segment<2>(2 * slot) = arena2.gradient;
    row.kind = qp::RowKind::Soft;
    row.slack_weight = arena2.slack_weight;
    return row;
}

}  // namespace

PccaMemory PccaMemory::zero(int n_agents) {
    PccaMemory m;
    m.w_hat.assign(n_agents, Eigen::Matrix2Xd::Zero(2, n_agents));
    m.u_prev.assign(n_agents, Eigen::Matrix2Xd::Zero(2, n_agents));
    return m;
}

PolicyStepOutput centralized_step(const std::vector<AgentState>& states,
                                  const std::vector<Vec2>& goals, const WorldParams& wp) {
    const int n = static_cast<int>(states.size());
    const int dim = 2 * n;
    const auto u0 = baselines(states, goals, wp);
    const auto terms = pair_terms(states, wp.bp);

    qp::QpProblem p;
    p.dim = dim;
    p.hessian = 2.0 * Eigen::MatrixXd::Identity(dim, dim);
    p.linear = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < n; ++i) p.linear.segment<2>(2 * i) = -2.0 * u0[i];

    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            qp::ConstraintRow row;
            row.offset = terms[i][j].a;
            row.gradient = Eigen::VectorXd::Zero(dim);
            scatter(row.gradient, i, terms[i][j].b);
            scatter(row.gradient, j, -terms[i][j].b);
            p.rows.push_back(row);
        }
    for (int i = 0; i < n; ++i) {
        const auto arena = model::arena_constraint(states[i], wp.arena_radius, wp.agent_radius,
                                                   wp.bp, wp.arena_slack_weight);
        p.rows.push_back(embed_arena(arena, i, dim));
    }

    const auto sol = qp::solve(p);
    PolicyStepOutput out;
    out.controls.resize(n);
    for (int i = 0; i < n; ++i) out.controls[i] = sol.u.segment<2>(2 * i);
    out.feasible.assign(n, sol.feasible);
    out.constraint_margins = realized_margins(terms, out.controls);
    return out;
}

namespace {

PolicyStepOutput decentralized_step(const std::vector<AgentState>& states,
                                    const std::vector<Vec2>& goals, const WorldParams& wp,
                                    double responsibility) {
    const int n = static_cast<int>(states.size());
    const auto u0 = baselines(states, goals, wp);
    const auto terms = pair_terms(states, wp.bp);

    PolicyStepOutput out;
    out.controls.resize(n);
    out.feasible.resize(n);
    for (int i = 0; i < n; ++i) {
        qp::QpProblem p;
        p.dim = 2;
        p.hessian = 2.0 * Eigen::MatrixXd::Identity(2, 2);
        p.linear = -2.0 * u0[i];
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            qp::ConstraintRow row;
            row.offset = responsibility * terms[i][j].a;
            row.gradient = terms[i][j].b;
            p.rows.push_back(row);
        }
        const auto arena = model::arena_constraint(states[i], wp.arena_radius, wp.agent_radius,
                                                   wp.bp, wp.arena_slack_weight);
        qp::ConstraintRow arow;
        arow.offset = arena.offset;
        arow.gradient = arena.gradient;
        arow.kind = qp::RowKind::Soft;
        arow.slack_weight = arena.slack_weight;
        p.rows.push_back(arow);

        const auto sol = qp::solve(p);
        out.controls[i] = sol.u;
        out.feasible[i] = sol.feasible;
    }
    out.constraint_margins = realized_margins(terms, out.controls);
    return out;
}

}  // namespace

PolicyStepOutput df_step(const std::vector<AgentState>& states,
                         const std::vector<Vec2>& goals, const WorldParams& wp) {
    return decentralized_step(states, goals, wp, 1.0);
}

PolicyStepOutput dr_step(const std::vector<AgentState>& states,
                         const std::vector<Vec2>& goals, const WorldParams& wp) {
    return decentralized_step(states, goals, wp, 0.5);
}

PolicyStepOutput ccs_step(const std::vector<AgentState>& states,
                          const std::vector<Vec2>& goals, const WorldParams& wp, double rho) {
    const int n = static_cast<int>(states.size());
    const int dim = 2 * n;
    const auto u0 = baselines(states, goals, wp);
    const auto terms = pair_terms(states, wp.bp);

    PolicyStepOutput out;
    out.controls.resize(n);
    out.feasible.resize(n);
    for (int i = 0; i < n; ++i) {
        qp::QpProblem p;
        p.dim = dim;
        p.hessian = 2.0 * Eigen::MatrixXd::Identity(dim, dim);
        p.linear = Eigen::VectorXd::Zero(dim);

        // host rows (i, j), j ascending
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            qp::ConstraintRow row;
            row.offset = terms[i][j].a + rho * terms[i][j].b.dot(u0[i]);
            row.gradient = Eigen::VectorXd::Zero(dim);
            scatter(row.gradient, i, terms[i][j].b);
            scatter(row.gradient, j, -terms[i][j].b);
            p.rows.push_back(row);
        }
        // non-host rows (j, k), lexicographic
        for (int j = 0; j < n; ++j)
            for (int k = j + 1; k < n; ++k) {
                if (j == i || k == i) continue;
                qp::ConstraintRow row;
                row.offset = terms[j][k].a;
                row.gradient = Eigen::VectorXd::Zero(dim);
                scatter(row.gradient, j, terms[j][k].b);
                scatter(row.gradient, k, -terms[j][k].b);
                p.rows.push_back(row);
            }
        for (int j = 0; j < n; ++j) {
            const auto arena = model::arena_constraint(states[j], wp.arena_radius, wp.agent_radius,
                                                       wp.bp, wp.arena_slack_weight);
            // the host's variable is a deviation from u0_i; others are full virtual controls
            p.rows.push_back(embed_arena(arena, j, dim, j == i ? u0[i] : Vec2::Zero()));
        }

        const auto sol = qp::solve(p);
        out.controls[i] = Vec2(sol.u.segment<2>(2 * i)) + u0[i];
        out.feasible[i] = sol.feasible;
    }
    out.constraint_margins = realized_margins(terms, out.controls);
    return out;
}

PolicyStepOutput pcca_step(const std::vector<AgentState>& states,
                           const std::vector<Vec2>& goals, const WorldParams& wp,
                           PccaMemory& mem, const std::vector<Vec2>& observed_accels,
                           double dt, LoopBreakerType breaker, double tau) {
    const int n = static_cast<int>(states.size());
    const int dim = 2 * n;
    const auto u0 = baselines(states, goals, wp);
    const auto terms = pair_terms(states, wp.bp);

    // Disturbance update from last step's observations: w_ij tracks
    // u_j - u*_ij, through a unit delay or a low-pass filter.
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (j == i) {
                mem.w_hat[i].col(j).setZero();
                continue;
            }
            const Vec2 innov = observed_accels[j] - Vec2(mem.u_prev[i].col(j));
            if (breaker == LoopBreakerType::UnitDelay) {
                mem.w_hat[i].col(j) = innov;
            } else {
                const double alpha = 1.0 - std::exp(-dt / tau);
                mem.w_hat[i].col(j) += alpha * (innov - Vec2(mem.w_hat[i].col(j)));
            }
        }

    PolicyStepOutput out;
    out.controls.resize(n);
    out.feasible.resize(n);
    for (int i = 0; i < n; ++i) {
        const auto& w = mem.w_hat[i];
        qp::QpProblem p;
        p.dim = dim;
        p.hessian = 2.0 * Eigen::MatrixXd::Identity(dim, dim);
        p.linear = Eigen::VectorXd::Zero(dim);
        p.linear.segment<2>(2 * i) = -2.0 * u0[i];

        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            qp::ConstraintRow row;
            row.offset = terms[i][j].a - terms[i][j].b.dot(Vec2(w.col(j)));
            row.gradient = Eigen::VectorXd::Zero(dim);
            scatter(row.gradient, i, terms[i][j].b);
            scatter(row.gradient, j, -terms[i][j].b);
            p.rows.push_back(row);
        }
        for (int j = 0; j < n; ++j)
            for (int k = j + 1; k < n; ++k) {
                if (j == i || k == i) continue;
                qp::ConstraintRow row;
                row.offset = terms[j][k].a + terms[j][k].b.dot(Vec2(w.col(j)) - Vec2(w.col(k)));
                row.gradient = Eigen::VectorXd::Zero(dim);
                scatter(row.gradient, j, terms[j][k].b);
                scatter(row.gradient, k, -terms[j][k].b);
                p.rows.push_back(row);
            }
        for (int j = 0; j < n; ++j) {
            const auto arena = model::arena_constraint(states[j], wp.arena_radius, wp.agent_radius,
                                                       wp.bp, wp.arena_slack_weight);
            p.rows.push_back(embed_arena(arena, j, dim, j == i ? Vec2(Vec2::Zero()) : Vec2(w.col(j))));
        }

        const auto sol = qp::solve(p);
        for (int j = 0; j < n; ++j) mem.u_prev[i].col(j) = sol.u.segment<2>(2 * j);
        out.controls[i] = sol.u.segment<2>(2 * i);
        out.feasible[i] = sol.feasible;
    }
    out.constraint_margins = realized_margins(terms, out.controls);
    return out;
}

Eigen::VectorXd feasible_point(const std::vector<AgentState>& states,
                               const model::BarrierParams& bp) {
    const int n = static_cast<int>(states.size());
    const double lambda1 = bp.lambda1();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const auto t = model::pair_constraint(states[i], states[j], bp);
            if (t.h < 0.0 || lambda1 * t.h + t.hdot < 0.0)
                throw NotInAdmissibleSetError("feasible_point: state outside admissible set");
        }
    Eigen::VectorXd u = Eigen::VectorXd::Zero(2 * n);
    for (int l = 1; l < n; ++l)
        u.segment<2>(2 * l) = lambda1 * (states[0].vel - states[l].vel);
    return u;
}

PolicyRunner::PolicyRunner(const PolicySpec& s, const WorldParams& w, int n_agents)
    : spec(s), wp(w), mem(PccaMemory::zero(n_agents)),
      last_controls(n_agents, Vec2::Zero()) {}

PolicyStepOutput PolicyRunner::step(const std::vector<AgentState>& states,
                                    const std::vector<Vec2>& goals, double dt) {
    PolicyStepOutput out;
    switch (spec.kind) {
        case PolicyKind::Centralized:
            out = centralized_step(states, goals, wp);
            break;
        case PolicyKind::DF:
            out = df_step(states, goals, wp);
            break;
        case PolicyKind::DR:
            out = dr_step(states, goals, wp);
            break;
        case PolicyKind::CCS:
            out = ccs_step(states, goals, wp, spec.rho);
            break;
        case PolicyKind::PCCA:
            out = pcca_step(states, goals, wp, mem, last_controls, dt, spec.loop_breaker,
                            spec.tau);
            break;
    }
    last_controls = out.controls;
    return out;
}

std::string policy_name(PolicyKind k) {
    switch (k) {
        case PolicyKind::Centralized: return "centralized";
        case PolicyKind::DF: return "df";
        case PolicyKind::DR: return "dr";
        case PolicyKind::CCS: return "ccs";
        case PolicyKind::PCCA: return "pcca";
    }
    return "?";
}

}  // namespace cbfsim::policies
