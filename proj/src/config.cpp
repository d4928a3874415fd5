#include "cbfsim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cbfsim::config {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& section, const std::set<std::string>& allowed) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key '" + section + it.key() + "'");
}

template <typename T>
void get(const json& j, const std::string& section, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value for key '" + section + key + "'");
    }
}

void require_positive(double v, const std::string& key) {
    if (!(v > 0.0)) throw ConfigError("config: key '" + key + "' must be positive");
}

}  // namespace

AppConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: parse error: ") + e.what());
    }

    AppConfig cfg;
    check_keys(j, "", {"master_seed", "sim", "montecarlo", "sweep", "analyze"});
    get(j, "", "master_seed", cfg.master_seed);

    if (j.contains("sim")) {
        const json& s = j["sim"];
        check_keys(s, "sim.", {"dt", "t_max", "r", "l0", "l1", "radius_margin", "margin_mode",
                               "arena_radius", "agent_radius", "conv_pos_tol", "conv_vel_tol",
                               "arena_slack_weight", "lqr_q", "lqr_r"});
        get(s, "sim.", "dt", cfg.sim.dt);
        get(s, "sim.", "t_max", cfg.sim.t_max);
        get(s, "sim.", "r", cfg.sim.bp.r);
        get(s, "sim.", "l0", cfg.sim.bp.l0);
        get(s, "sim.", "l1", cfg.sim.bp.l1);
        get(s, "sim.", "radius_margin", cfg.sim.radius_margin);
        std::string mode = "squared";
        get(s, "sim.", "margin_mode", mode);
        if (mode == "squared")
            cfg.sim.margin_mode = sim::MarginMode::SquaredUnits;
        else if (mode == "distance")
            cfg.sim.margin_mode = sim::MarginMode::DistanceUnits;
        else
            throw ConfigError("config: key 'sim.margin_mode' must be 'squared' or 'distance'");
        get(s, "sim.", "arena_radius", cfg.sim.arena_radius);
        get(s, "sim.", "agent_radius", cfg.sim.agent_radius);
        get(s, "sim.", "conv_pos_tol", cfg.sim.conv_pos_tol);
        get(s, "sim.", "conv_vel_tol", cfg.sim.conv_vel_tol);
        get(s, "sim.", "arena_slack_weight", cfg.sim.arena_slack_weight);
        get(s, "sim.", "lqr_q", cfg.sim.lqr_q);
        get(s, "sim.", "lqr_r", cfg.sim.lqr_r);
    }
    if (j.contains("montecarlo")) {
        const json& s = j["montecarlo"];
        check_keys(s, "montecarlo.", {"n_trials", "n_agents", "policies", "margin_rerun",
                                      "cross_kind_check", "rho", "pcca_tau"});
        get(s, "montecarlo.", "n_trials", cfg.montecarlo.n_trials);
        get(s, "montecarlo.", "n_agents", cfg.montecarlo.n_agents);
        get(s, "montecarlo.", "policies", cfg.montecarlo.policies);
        get(s, "montecarlo.", "margin_rerun", cfg.montecarlo.margin_rerun);
        get(s, "montecarlo.", "cross_kind_check", cfg.montecarlo.cross_kind_check);
        get(s, "montecarlo.", "rho", cfg.montecarlo.rho);
        get(s, "montecarlo.", "pcca_tau", cfg.montecarlo.pcca_tau);
    }
    if (j.contains("sweep")) {
        const json& s = j["sweep"];
        check_keys(s, "sweep.", {"policies", "x1_0", "v01", "x2_lo", "x2_hi", "v_lo", "v_hi",
                                 "step", "lambda", "r", "tau", "M", "dt", "t_max"});
        get(s, "sweep.", "policies", cfg.sweep.policies);
        get(s, "sweep.", "x1_0", cfg.sweep.x1_0);
        get(s, "sweep.", "v01", cfg.sweep.v01);
        get(s, "sweep.", "x2_lo", cfg.sweep.x2_lo);
        get(s, "sweep.", "x2_hi", cfg.sweep.x2_hi);
        get(s, "sweep.", "v_lo", cfg.sweep.v_lo);
        get(s, "sweep.", "v_hi", cfg.sweep.v_hi);
        get(s, "sweep.", "step", cfg.sweep.step);
        get(s, "sweep.", "lambda", cfg.sweep.lambda);
        get(s, "sweep.", "r", cfg.sweep.r);
        get(s, "sweep.", "tau", cfg.sweep.tau);
        get(s, "sweep.", "M", cfg.sweep.M);
        get(s, "sweep.", "dt", cfg.sweep.dt);
        get(s, "sweep.", "t_max", cfg.sweep.t_max);
    }
    if (j.contains("analyze")) {
        const json& s = j["analyze"];
        check_keys(s, "analyze.", {"policies", "v01", "v02", "r", "lambda", "tau"});
        get(s, "analyze.", "policies", cfg.analyze.policies);
        get(s, "analyze.", "v01", cfg.analyze.v01);
        get(s, "analyze.", "v02", cfg.analyze.v02);
        get(s, "analyze.", "r", cfg.analyze.r);
        get(s, "analyze.", "lambda", cfg.analyze.lambda);
        get(s, "analyze.", "tau", cfg.analyze.tau);
    }

    // validation with key names in messages
    require_positive(cfg.sim.dt, "sim.dt");
    require_positive(cfg.sim.agent_radius, "sim.agent_radius");
    require_positive(cfg.sim.bp.r, "sim.r");
    if (cfg.sim.arena_radius <= cfg.sim.agent_radius)
        throw ConfigError("config: key 'sim.arena_radius' must exceed 'sim.agent_radius'");
    if (cfg.sim.radius_margin < 0.0)
        throw ConfigError("config: key 'sim.radius_margin' must be >= 0");
    if (cfg.sim.bp.l1 * cfg.sim.bp.l1 < 4.0 * cfg.sim.bp.l0)
        throw ConfigError("config: keys 'sim.l0'/'sim.l1' must satisfy l1^2 >= 4 l0");
    if (cfg.montecarlo.n_trials < 1) throw ConfigError("config: key 'montecarlo.n_trials' must be >= 1");
    if (cfg.montecarlo.n_agents < 1) throw ConfigError("config: key 'montecarlo.n_agents' must be >= 1");
    require_positive(cfg.montecarlo.rho, "montecarlo.rho");
    require_positive(cfg.montecarlo.pcca_tau, "montecarlo.pcca_tau");
    require_positive(cfg.sweep.step, "sweep.step");
    require_positive(cfg.sweep.v01, "sweep.v01");
    require_positive(cfg.sweep.lambda, "sweep.lambda");
    require_positive(cfg.sweep.r, "sweep.r");
    require_positive(cfg.sweep.dt, "sweep.dt");
    require_positive(cfg.analyze.r, "analyze.r");
    require_positive(cfg.analyze.lambda, "analyze.lambda");
    require_positive(cfg.analyze.tau, "analyze.tau");
    require_positive(cfg.analyze.v01, "analyze.v01");
    require_positive(cfg.analyze.v02, "analyze.v02");
    for (const auto& name : cfg.montecarlo.policies) make_policy(name, cfg.montecarlo);
    for (const auto& name : cfg.sweep.policies) parse_corridor_policy(name);
    for (const auto& name : cfg.analyze.policies) parse_corridor_policy(name);
    return cfg;
}

AppConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string dump_config(const AppConfig& cfg) {
    json j;
    j["master_seed"] = cfg.master_seed;
    j["sim"] = {
        {"dt", cfg.sim.dt},
        {"t_max", cfg.sim.t_max},
        {"r", cfg.sim.bp.r},
        {"l0", cfg.sim.bp.l0},
        {"l1", cfg.sim.bp.l1},
        {"radius_margin", cfg.sim.radius_margin},
        {"margin_mode", cfg.sim.margin_mode == sim::MarginMode::SquaredUnits ? "squared" : "distance"},
        {"arena_radius", cfg.sim.arena_radius},
        {"agent_radius", cfg.sim.agent_radius},
        {"conv_pos_tol", cfg.sim.conv_pos_tol},
        {"conv_vel_tol", cfg.sim.conv_vel_tol},
        {"arena_slack_weight", cfg.sim.arena_slack_weight},
        {"lqr_q", cfg.sim.lqr_q},
        {"lqr_r", cfg.sim.lqr_r},
    };
    j["montecarlo"] = {
        {"n_trials", cfg.montecarlo.n_trials},
        {"n_agents", cfg.montecarlo.n_agents},
        {"policies", cfg.montecarlo.policies},
        {"margin_rerun", cfg.montecarlo.margin_rerun},
        {"cross_kind_check", cfg.montecarlo.cross_kind_check},
        {"rho", cfg.montecarlo.rho},
        {"pcca_tau", cfg.montecarlo.pcca_tau},
    };
    j["sweep"] = {
        {"policies", cfg.sweep.policies},
        {"x1_0", cfg.sweep.x1_0},
        {"v01", cfg.sweep.v01},
        {"x2_lo", cfg.sweep.x2_lo},
        {"x2_hi", cfg.sweep.x2_hi},
        {"v_lo", cfg.sweep.v_lo},
        {"v_hi", cfg.sweep.v_hi},
        {"step", cfg.sweep.step},
        {"lambda", cfg.sweep.lambda},
        {"r", cfg.sweep.r},
        {"tau", cfg.sweep.tau},
        {"M", cfg.sweep.M},
        {"dt", cfg.sweep.dt},
        {"t_max", cfg.sweep.t_max},
    };
    j["analyze"] = {
        {"policies", cfg.analyze.policies},
        {"v01", cfg.analyze.v01},
        {"v02", cfg.analyze.v02},
        {"r", cfg.analyze.r},
        {"lambda", cfg.analyze.lambda},
        {"tau", cfg.analyze.tau},
    };
    return j.dump(2);
}

policies::PolicySpec make_policy(const std::string& name, const MonteCarloConfig& mc) {
    policies::PolicySpec spec;
    spec.rho = mc.rho;
    spec.tau = mc.pcca_tau;
    if (name == "centralized") {
        spec.kind = policies::PolicyKind::Centralized;
    } else if (name == "df") {
        spec.kind = policies::PolicyKind::DF;
    } else if (name == "dr") {
        spec.kind = policies::PolicyKind::DR;
    } else if (name == "ccs") {
        spec.kind = policies::PolicyKind::CCS;
    } else if (name == "pcca") {
        spec.kind = policies::PolicyKind::PCCA;
        spec.loop_breaker = policies::LoopBreakerType::UnitDelay;
    } else if (name == "pcca_lpf") {
        spec.kind = policies::PolicyKind::PCCA;
        spec.loop_breaker = policies::LoopBreakerType::LowPassFilter;
    } else {
        throw ConfigError("config: unknown policy '" + name + "' in 'montecarlo.policies'");
    }
    return spec;
}

intersection1d::CorridorPolicy parse_corridor_policy(const std::string& name) {
    using intersection1d::CorridorPolicy;
    if (name == "df") return CorridorPolicy::DF;
    if (name == "dr") return CorridorPolicy::DR;
    if (name == "dr_slack") return CorridorPolicy::DRSlack;
    if (name == "centralized") return CorridorPolicy::Centralized;
    if (name == "ccs") return CorridorPolicy::CCS;
    if (name == "pcca") return CorridorPolicy::PCCA;
    throw ConfigError("config: unknown corridor policy '" + name + "'");
}

}  // namespace cbfsim::config
