#include "cbfsim/montecarlo.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace cbfsim::montecarlo {

namespace {

// splitmix64: one stream per trial, portable and fully deterministic.
struct SplitMix64 {
    std::uint64_t state;
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

}  // namespace

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
    SplitMix64 rng{master ^ (0x9E3779B97F4A7C15ULL * (index + 1))};
    return rng.next();
}

std::vector<Scenario> sample_scenarios(int n_trials, int n_agents, const SimConfig& cfg,
                                       std::uint64_t master_seed, bool cross_kind_check) {
    const double radius = cfg.arena_radius - cfg.agent_radius;
    const double min_sep = 2.0 * cfg.agent_radius;
    constexpr int kMaxAttempts = 100000;

    std::vector<Scenario> out;
    out.reserve(n_trials);
    for (int t = 0; t < n_trials; ++t) {
        Scenario sc;
        sc.n_agents = n_agents;
        sc.seed = mix_seed(master_seed, static_cast<std::uint64_t>(t));
        SplitMix64 rng{sc.seed};

        auto draw = [&]() -> model::Vec2 {
            const double r = radius * std::sqrt(rng.uniform01());
            const double th = 2.0 * M_PI * rng.uniform01();
            return {r * std::cos(th), r * std::sin(th)};
        };
        auto fill = [&](std::vector<model::Vec2>& pts, const std::vector<model::Vec2>* other) {
            for (int i = 0; i < n_agents; ++i) {
                int attempts = 0;
                while (true) {
                    if (++attempts > kMaxAttempts)
                        throw RejectionLimitError("sample_scenarios: rejection limit exceeded");
                    const model::Vec2 p = draw();
                    bool ok = true;
                    for (const auto& q : pts)
                        if ((p - q).norm() < min_sep) { ok = false; break; }
                    if (ok && other)
                        for (const auto& q : *other)
                            if ((p - q).norm() < min_sep) { ok = false; break; }
                    if (ok) { pts.push_back(p); break; }
                }
            }
        };
        fill(sc.starts, nullptr);
        fill(sc.goals, cross_kind_check ? &sc.starts : nullptr);
        out.push_back(std::move(sc));
    }
    return out;
}

PolicySummary summarize(const std::string& name, const std::vector<TrialMetrics>& trials) {
    PolicySummary s;
    s.name = name;
    s.n_trials = static_cast<int>(trials.size());
    s.h_min = std::numeric_limits<double>::infinity();
    s.conv_min = std::numeric_limits<double>::infinity();
    s.conv_max = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    bool any_pairs = false;
    for (const auto& m : trials) {
        if (m.failed) ++s.failed_count;
        if (m.any_infeasible) ++s.infeasible_count;
        if (m.gridlocked) ++s.gridlock_count;
        if (m.has_pairs) {
            any_pairs = true;
            if (m.h_min < s.h_min) s.h_min = m.h_min;
        }
        if (m.converged) {
            ++s.n_converged;
            sum += m.convergence_time;
            if (m.convergence_time < s.conv_min) s.conv_min = m.convergence_time;
            if (m.convergence_time > s.conv_max) s.conv_max = m.convergence_time;
        }
    }
    s.conv_mean = s.n_converged > 0 ? sum / s.n_converged : 0.0;
    if (s.n_converged == 0) { s.conv_min = 0.0; s.conv_max = 0.0; }
    if (!any_pairs) s.h_min = std::numeric_limits<double>::infinity();
    return s;
}

namespace {

// Run one policy over all scenarios, trials dispatched across a thread pool;
// the result vector is indexed by trial regardless of completion order.
std::vector<TrialMetrics> run_policy(const std::vector<Scenario>& scenarios,
                                     const policies::PolicySpec& spec, const SimConfig& cfg,
                                     int threads) {
    const int n = static_cast<int>(scenarios.size());
    std::vector<TrialMetrics> metrics(n);
    if (threads <= 1) {
        for (int t = 0; t < n; ++t) metrics[t] = sim::run_trial(scenarios[t], spec, cfg);
        return metrics;
    }
    std::atomic<int> next{0};
    auto worker = [&]() {
        while (true) {
            const int t = next.fetch_add(1);
            if (t >= n) return;
            metrics[t] = sim::run_trial(scenarios[t], spec, cfg);
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return metrics;
}

}  // namespace

BatchSummary run_batch(const std::vector<Scenario>& scenarios,
                       const std::vector<NamedPolicy>& policies_to_run, const SimConfig& cfg,
                       int threads) {
    if (scenarios.empty() || policies_to_run.empty())
        throw std::invalid_argument("run_batch: empty scenarios or policy list");
    BatchSummary out;
    for (const auto& [name, spec] : policies_to_run) {
        out.trials.push_back(run_policy(scenarios, spec, cfg, threads));
        out.per_policy.push_back(summarize(name, out.trials.back()));
    }
    return out;
}

double margin_for(double prior_h_min, sim::MarginMode mode, double physical_r) {
    const double violation = std::max(0.0, -std::min(0.0, prior_h_min));
    if (violation == 0.0 || !std::isfinite(prior_h_min)) return 0.0;
    if (mode == sim::MarginMode::SquaredUnits) return violation;  // r^2 = (2 r0)^2 + |h_min|
    return std::sqrt(physical_r * physical_r + violation) - physical_r;
}

BatchSummary margin_rerun(const BatchSummary& prior, const std::vector<Scenario>& scenarios,
                          const std::vector<NamedPolicy>& policies_to_run, const SimConfig& cfg,
                          int threads) {
    if (prior.per_policy.size() != policies_to_run.size())
        throw std::invalid_argument("margin_rerun: prior batch does not match policy list");
    if (cfg.radius_margin != 0.0)
        throw std::invalid_argument("margin_rerun: prior must be computed with zero margin");
    BatchSummary out;
    for (size_t p = 0; p < policies_to_run.size(); ++p) {
        SimConfig cfg2 = cfg;
        cfg2.radius_margin =
            margin_for(prior.per_policy[p].h_min, cfg.margin_mode, 2.0 * cfg.agent_radius);
        out.trials.push_back(run_policy(scenarios, policies_to_run[p].second, cfg2, threads));
        out.per_policy.push_back(summarize(policies_to_run[p].first, out.trials.back()));
    }
    return out;
}

}  // namespace cbfsim::montecarlo
