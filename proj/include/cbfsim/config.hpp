#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cbfsim/intersection1d.hpp"
#include "cbfsim/montecarlo.hpp"

namespace cbfsim::config {

/// Configuration problem; what() names the offending key.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MonteCarloConfig {
    int n_trials = 100;
    int n_agents = 5;
    std::vector<std::string> policies = {"centralized", "df", "dr", "ccs", "pcca", "pcca_lpf"};
    bool margin_rerun = true;
    bool cross_kind_check = false;
    double rho = 2.0;
    double pcca_tau = 0.2;
};

struct SweepConfig {
    std::vector<std::string> policies = {"dr_slack", "centralized", "pcca"};
    double x1_0 = -10.0;
    double v01 = 2.0;
    double x2_lo = -11.0;
    double x2_hi = -8.0;
    double v_lo = 1.0;
    double v_hi = 3.0;
    double step = 0.01;
    double lambda = 1.0;
    double r = 2.0;
    double tau = 0.2;
    double M = 1e6;
    double dt = 0.005;
    double t_max = 20.0;
};

struct AnalyzeConfig {
    std::vector<std::string> policies = {"dr", "centralized", "ccs", "pcca"};
    double v01 = 2.0;
    double v02 = 2.0;
    double r = 4.0;
    double lambda = 1.0;
    double tau = 0.2;
};

struct AppConfig {
    std::uint64_t master_seed = 31337;
    sim::SimConfig sim;
    MonteCarloConfig montecarlo;
    SweepConfig sweep;
    AnalyzeConfig analyze;
};

/// Load a config file, fill defaults, validate. Unknown keys are rejected.
AppConfig load_config(const std::string& path);

/// Fully resolved config as JSON text (round-trips through load).
std::string dump_config(const AppConfig& cfg);

AppConfig parse_config_text(const std::string& text);

/// Resolve a policy name ("centralized", "df", "dr", "ccs", "pcca",
/// "pcca_lpf") into a spec using the Monte Carlo section's parameters.
policies::PolicySpec make_policy(const std::string& name, const MonteCarloConfig& mc);

intersection1d::CorridorPolicy parse_corridor_policy(const std::string& name);

}  // namespace cbfsim::config
