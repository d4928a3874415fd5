#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cbfsim/sim.hpp"

namespace cbfsim::montecarlo {

using sim::Scenario;
using sim::SimConfig;
using sim::TrialMetrics;

struct RejectionLimitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PolicySummary {
    std::string name;
    int n_trials = 0;
    int n_converged = 0;
    double conv_min = 0.0;  // over converged trials only
    double conv_max = 0.0;
    double conv_mean = 0.0;
    double h_min = 0.0;     // over all trials, gridlocked included
    int gridlock_count = 0;
    int infeasible_count = 0;  // trials with any infeasible QP step
    int failed_count = 0;
};

struct BatchSummary {
    std::vector<PolicySummary> per_policy;
    std::vector<std::vector<TrialMetrics>> trials;  // [policy][trial]
};

/// 64-bit mix used to derive per-trial child seeds (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index);

/// Deterministic rejection sampling of starts and goals, uniform in the disk
/// of radius arena_radius - agent_radius; overlap checked within kind only.
std::vector<Scenario> sample_scenarios(int n_trials, int n_agents, const SimConfig& cfg,
                                       std::uint64_t master_seed,
                                       bool cross_kind_check = false);

using NamedPolicy = std::pair<std::string, policies::PolicySpec>;

BatchSummary run_batch(const std::vector<Scenario>& scenarios,
                       const std::vector<NamedPolicy>& policies_to_run, const SimConfig& cfg,
                       int threads = 1);

/// Per-policy margin from the prior batch's worst violation, then rerun.
BatchSummary margin_rerun(const BatchSummary& prior, const std::vector<Scenario>& scenarios,
                          const std::vector<NamedPolicy>& policies_to_run, const SimConfig& cfg,
                          int threads = 1);

/// The margin a policy gets in margin_rerun given its prior h_min.
double margin_for(double prior_h_min, sim::MarginMode mode, double physical_r);

/// Recompute a PolicySummary from the per-trial metrics (aggregation oracle).
PolicySummary summarize(const std::string& name, const std::vector<TrialMetrics>& trials);

}  // namespace cbfsim::montecarlo
