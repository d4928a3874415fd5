#include "cbfsim/sim.hpp"

#include <cmath>
#include <limits>

namespace cbfsim::sim {

double SimConfig::effective_r() const {
    if (margin_mode == MarginMode::SquaredUnits)
        return std::sqrt(bp.r * bp.r + radius_margin);
    return bp.r + radius_margin;
}

void SimConfig::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("sim config: dt must be positive");
    if (!(t_max >= dt)) throw std::invalid_argument("sim config: t_max must be >= dt");
    if (!(conv_pos_tol > 0.0) || !(conv_vel_tol > 0.0))
        throw std::invalid_argument("sim config: convergence tolerances must be positive");
    if (!(agent_radius > 0.0)) throw std::invalid_argument("sim config: agent_radius must be positive");
    if (!(arena_radius > agent_radius))
        throw std::invalid_argument("sim config: arena_radius must exceed agent_radius");
    if (radius_margin < 0.0) throw std::invalid_argument("sim config: radius_margin must be >= 0");
    bp.validate();
}

bool convergence_check(const std::vector<AgentState>& states, const std::vector<Vec2>& goals,
                       const SimConfig& cfg) {
    for (size_t i = 0; i < states.size(); ++i) {
        if ((states[i].pos - goals[i]).norm() >= cfg.conv_pos_tol) return false;
        if (states[i].vel.norm() >= cfg.conv_vel_tol) return false;
    }
    return true;
}

TrialMetrics run_trial(const Scenario& scenario, const policies::PolicySpec& policy,
                       const SimConfig& cfg, std::ostream* trace) {
    cfg.validate();
    const int n = scenario.n_agents;

    policies::WorldParams wp;
    wp.bp = cfg.bp;
    wp.bp.r = cfg.effective_r();
    wp.arena_radius = cfg.arena_radius;
    wp.agent_radius = cfg.agent_radius;
    wp.arena_slack_weight = cfg.arena_slack_weight;
    wp.gain = model::lqr_gain(cfg.lqr_q, cfg.lqr_r);

    std::vector<AgentState> states(n);
    for (int i = 0; i < n; ++i) states[i].pos = scenario.starts[i];

    policies::PolicyRunner runner(policy, wp, n);

    TrialMetrics m;
    m.has_pairs = n > 1;
    m.h_min = std::numeric_limits<double>::infinity();
    const double phys = 2.0 * cfg.agent_radius;

    if (trace) *trace << "t,agent,px,py,vx,vy,ux,uy,feasible\n";

    auto record_hmin = [&](const std::vector<AgentState>& st) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double h = (st[i].pos - st[j].pos).squaredNorm() - phys * phys;
                if (h < m.h_min) m.h_min = h;
            }
    };

    record_hmin(states);
    if (convergence_check(states, scenario.goals, cfg)) {
        m.converged = true;
        m.convergence_time = 0.0;
    }

    const long n_steps = static_cast<long>(std::llround(cfg.t_max / cfg.dt));
    try {
        for (long k = 0; k < n_steps; ++k) {
            const double t = k * cfg.dt;
            const auto out = runner.step(states, scenario.goals, cfg.dt);
            for (int i = 0; i < n; ++i)
                if (!out.feasible[i]) m.any_infeasible = true;

            if (trace) {
                for (int i = 0; i < n; ++i)
                    *trace << t << ',' << i << ',' << states[i].pos.x() << ',' << states[i].pos.y()
                           << ',' << states[i].vel.x() << ',' << states[i].vel.y() << ','
                           << out.controls[i].x() << ',' << out.controls[i].y() << ','
                           << (out.feasible[i] ? 1 : 0) << '\n';
            }

            for (int i = 0; i < n; ++i)
                states[i] = model::step_agent(states[i], out.controls[i], cfg.dt);
            record_hmin(states);

            if (!m.converged && convergence_check(states, scenario.goals, cfg)) {
                m.converged = true;
                m.convergence_time = (k + 1) * cfg.dt;
                break;  // goals are pairwise separated, nothing changes after this
            }
        }
    } catch (const std::exception& e) {
        m.failed = true;
        m.error = e.what();
    }

    m.gridlocked = !m.converged && !m.failed;
    if (!m.has_pairs) m.h_min = std::numeric_limits<double>::infinity();
    return m;
}

}  // namespace cbfsim::sim
