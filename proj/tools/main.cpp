#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cbfsim/experiments.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 1;
    std::string policy;  // optional filter
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_policy) {
    cmd->add_option("--config", o.config_path, "Configuration file (JSON)");
    cmd->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--seed", o.seed, "Master seed override")
        ->each([&o](const std::string&) { o.seed_set = true; });
    cmd->add_option("--threads", o.threads, "Worker threads")->capture_default_str();
    if (with_policy) cmd->add_option("--policy", o.policy, "Run only this policy");
}

cbfsim::config::AppConfig load(const CommonOpts& o) {
    auto cfg = o.config_path.empty() ? cbfsim::config::AppConfig{}
                                     : cbfsim::config::load_config(o.config_path);
    if (o.seed_set) cfg.master_seed = o.seed;
    return cfg;
}

template <typename Vec>
void filter_policies(Vec& names, const std::string& only) {
    if (only.empty()) return;
    Vec kept;
    for (const auto& n : names)
        if (n == only) kept.push_back(n);
    if (kept.empty()) throw cbfsim::config::ConfigError("config: policy filter '" + only +
                                                        "' matches nothing");
    names = kept;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent collision avoidance experiment runner"};
    app.require_subcommand(1);

    CommonOpts mc_o, sw_o, an_o, tr_o;
    auto* mc = app.add_subcommand("montecarlo", "Seeded Monte-Carlo batch over policies");
    add_common(mc, mc_o, true);
    auto* sw = app.add_subcommand("sweep1d", "Intersection initial-condition sweep");
    add_common(sw, sw_o, true);
    auto* an = app.add_subcommand("analyze", "Equilibrium and eigenvalue analysis");
    add_common(an, an_o, true);
    auto* tr = app.add_subcommand("trial", "Single scenario with per-step trace");
    add_common(tr, tr_o, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (mc->parsed()) {
            auto cfg = load(mc_o);
            filter_policies(cfg.montecarlo.policies, mc_o.policy);
            auto res = cbfsim::experiments::run_montecarlo(cfg, mc_o.out_dir, mc_o.threads);
            std::cout << cbfsim::experiments::results_table(res.batch);
            if (res.has_rerun)
                std::cout << cbfsim::experiments::margins_table(res.batch, res.rerun);
        } else if (sw->parsed()) {
            auto cfg = load(sw_o);
            filter_policies(cfg.sweep.policies, sw_o.policy);
            auto res = cbfsim::experiments::run_sweep1d(cfg, sw_o.out_dir, sw_o.threads);
            for (const auto& [name, frac] : res.gridlock_fraction)
                std::cout << name << " gridlock fraction: " << frac << "\n";
        } else if (an->parsed()) {
            auto cfg = load(an_o);
            filter_policies(cfg.analyze.policies, an_o.policy);
            auto res = cbfsim::experiments::run_analyze(cfg, an_o.out_dir);
            std::cout << cbfsim::experiments::equilibria_table(res.reports);
        } else if (tr->parsed()) {
            auto cfg = load(tr_o);
            const std::string name =
                tr_o.policy.empty() ? cfg.montecarlo.policies.at(0) : tr_o.policy;
            auto metrics = cbfsim::experiments::run_single_trial(cfg, name, tr_o.out_dir);
            std::cout << name << ": converged=" << metrics.converged
                      << " t=" << metrics.convergence_time << " h_min=" << metrics.h_min
                      << " gridlocked=" << metrics.gridlocked << "\n";
            if (metrics.failed) {
                std::cerr << "error: " << metrics.error << "\n";
                return 1;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
