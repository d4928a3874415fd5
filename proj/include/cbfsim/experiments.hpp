#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cbfsim/config.hpp"

namespace cbfsim::experiments {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kToolVersion = "0.1.0";

/// Written next to every experiment's outputs; re-running with the recorded
/// config and seed reproduces byte-identical files (same checksums).
struct RunManifest {
    std::string command;
    std::string config_snapshot;  // fully resolved JSON text
    std::uint64_t master_seed = 0;
    std::string tool_version = kToolVersion;
    std::map<std::string, std::uint64_t> checksums;  // file name -> FNV-1a 64
    double duration_seconds = 0.0;
};

/// FNV-1a 64-bit over raw bytes.
std::uint64_t fnv1a64(const std::string& bytes);

std::string manifest_to_json(const RunManifest& m);
void write_manifest(const RunManifest& m, const std::string& out_dir);

struct MonteCarloResult {
    montecarlo::BatchSummary batch;
    montecarlo::BatchSummary rerun;  // empty unless margin_rerun configured
    bool has_rerun = false;
    RunManifest manifest;
};

/// Full Monte-Carlo experiment: sample, run every configured policy, optional
/// margin rerun. Writes trials.csv, summary.json, table_results.txt,
/// table_margins.txt (if rerun), manifest.json.
MonteCarloResult run_montecarlo(const config::AppConfig& cfg, const std::string& out_dir,
                                int threads);

struct SweepResult {
    std::map<std::string, double> gridlock_fraction;  // per policy
    RunManifest manifest;
};

/// Deterministic intersection sweep per configured policy. Writes
/// <policy>_grid.bin, <policy>_sweep.csv, sweep_summary.json, manifest.json.
SweepResult run_sweep1d(const config::AppConfig& cfg, const std::string& out_dir,
                        int threads);

struct AnalyzeResult {
    std::map<std::string, intersection1d::EquilibriumReport> reports;
    RunManifest manifest;
};

/// Equilibrium + eigenvalue analysis per policy. Writes equilibria.txt,
/// equilibria.json, manifest.json.
AnalyzeResult run_analyze(const config::AppConfig& cfg, const std::string& out_dir);

/// Single seeded scenario with a per-step trace CSV (trace.csv) for one policy.
sim::TrialMetrics run_single_trial(const config::AppConfig& cfg, const std::string& policy,
                                   const std::string& out_dir);

/// Serialize a batch to the per-trial CSV format
/// `trial,policy,converged,conv_time,h_min,gridlock,infeasible`.
std::string trials_csv(const montecarlo::BatchSummary& batch);

std::string batch_summary_json(const montecarlo::BatchSummary& batch);

/// Fixed-width results table (convergence times, gridlocks, infeasible counts).
std::string results_table(const montecarlo::BatchSummary& batch);

/// Fixed-width worst-barrier table comparing a batch and its margin rerun.
std::string margins_table(const montecarlo::BatchSummary& before,
                          const montecarlo::BatchSummary& after);

/// Binary grid layout: two uint32 dims (nx, nv), then six float64 axis fields
/// (x_start, x_step, v_start, v_step, x1_0, gridlock_fraction), then nx*nv
/// float64 t_ext values row-major, then nx*nv uint8 gridlock flags.
std::string grid_to_bytes(const intersection1d::SweepGrid& g);
intersection1d::SweepGrid grid_from_bytes(const std::string& bytes);

std::string sweep_csv(const intersection1d::SweepGrid& g);

std::string equilibria_table(
    const std::map<std::string, intersection1d::EquilibriumReport>& reports);

}  // namespace cbfsim::experiments
