#include "cbfsim/experiments.hpp"

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cbfsim::experiments {

namespace {

using nlohmann::json;

std::string fmt(double v, int prec = 6) {
    std::ostringstream ss;
    ss.precision(prec);
    ss << std::fixed << v;
    return ss.str();
}

void write_file(const std::string& out_dir, const std::string& name, const std::string& bytes,
                RunManifest& manifest) {
    std::filesystem::create_directories(out_dir);
    const std::string path = out_dir + "/" + name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write on '" + path + "'");
    manifest.checksums[name] = fnv1a64(bytes);
}

json summary_to_json(const montecarlo::PolicySummary& s) {
    json j;
    j["policy"] = s.name;
    j["n_trials"] = s.n_trials;
    j["n_converged"] = s.n_converged;
    j["conv_min"] = s.conv_min;
    j["conv_max"] = s.conv_max;
    j["conv_mean"] = s.conv_mean;
    j["h_min"] = s.h_min;
    j["gridlock_count"] = s.gridlock_count;
    j["infeasible_count"] = s.infeasible_count;
    j["failed_count"] = s.failed_count;
    return j;
}

std::vector<montecarlo::NamedPolicy> resolve_policies(const config::AppConfig& cfg) {
    std::vector<montecarlo::NamedPolicy> out;
    for (const auto& name : cfg.montecarlo.policies)
        out.emplace_back(name, config::make_policy(name, cfg.montecarlo));
    return out;
}

void put_u32(std::string& s, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    s.append(b, 4);
}
void put_f64(std::string& s, double v) {
    char b[8];
    std::memcpy(b, &v, 8);
    s.append(b, 8);
}
std::uint32_t get_u32(const std::string& s, std::size_t& off) {
    std::uint32_t v;
    std::memcpy(&v, s.data() + off, 4);
    off += 4;
    return v;
}
double get_f64(const std::string& s, std::size_t& off) {
    double v;
    std::memcpy(&v, s.data() + off, 8);
    off += 8;
    return v;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string manifest_to_json(const RunManifest& m) {
    json j;
    j["command"] = m.command;
    j["config"] = json::parse(m.config_snapshot);
    j["master_seed"] = m.master_seed;
    j["tool_version"] = m.tool_version;
    json sums = json::object();
    for (const auto& [name, sum] : m.checksums) {
        std::ostringstream ss;
        ss << std::hex << sum;
        sums[name] = ss.str();
    }
    j["checksums"] = sums;
    j["duration_seconds"] = m.duration_seconds;
    return j.dump(2);
}

void write_manifest(const RunManifest& m, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::string path = out_dir + "/manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << manifest_to_json(m) << "\n";
}

std::string trials_csv(const montecarlo::BatchSummary& batch) {
    std::ostringstream ss;
    ss << "trial,policy,converged,conv_time,h_min,gridlock,infeasible\n";
    for (std::size_t p = 0; p < batch.per_policy.size(); ++p) {
        const auto& name = batch.per_policy[p].name;
        const auto& trials = batch.trials[p];
        for (std::size_t t = 0; t < trials.size(); ++t) {
            const auto& m = trials[t];
            ss << t << ',' << name << ',' << (m.converged ? 1 : 0) << ','
               << (m.converged ? fmt(m.convergence_time) : std::string("na")) << ','
               << (m.has_pairs ? fmt(m.h_min, 9) : std::string("na")) << ','
               << (m.gridlocked ? 1 : 0) << ',' << (m.any_infeasible ? 1 : 0) << '\n';
        }
    }
    return ss.str();
}

std::string batch_summary_json(const montecarlo::BatchSummary& batch) {
    json j = json::array();
    for (const auto& s : batch.per_policy) j.push_back(summary_to_json(s));
    return j.dump(2);
}

std::string results_table(const montecarlo::BatchSummary& batch) {
    std::ostringstream ss;
    ss << "policy        conv     t_min    t_mean   t_max    gridlock  infeasible  failed\n";
    for (const auto& s : batch.per_policy) {
        ss << s.name;
        for (std::size_t k = s.name.size(); k < 14; ++k) ss << ' ';
        std::ostringstream row;
        row << s.n_converged << "/" << s.n_trials;
        ss << row.str();
        for (std::size_t k = row.str().size(); k < 9; ++k) ss << ' ';
        ss << fmt(s.conv_min, 2) << "    " << fmt(s.conv_mean, 2) << "    "
           << fmt(s.conv_max, 2) << "    " << s.gridlock_count << "         "
           << s.infeasible_count << "           " << s.failed_count << '\n';
    }
    return ss.str();
}

std::string margins_table(const montecarlo::BatchSummary& before,
                          const montecarlo::BatchSummary& after) {
    std::ostringstream ss;
    ss << "policy        h_min_before   h_min_after\n";
    for (std::size_t p = 0; p < before.per_policy.size(); ++p) {
        const auto& name = before.per_policy[p].name;
        ss << name;
        for (std::size_t k = name.size(); k < 14; ++k) ss << ' ';
        ss << fmt(before.per_policy[p].h_min, 4) << "         "
           << fmt(after.per_policy[p].h_min, 4) << '\n';
    }
    return ss.str();
}

MonteCarloResult run_montecarlo(const config::AppConfig& cfg, const std::string& out_dir,
                                int threads) {
    const auto t0 = std::chrono::steady_clock::now();
    MonteCarloResult result;
    result.manifest.command = "montecarlo";
    result.manifest.config_snapshot = config::dump_config(cfg);
    result.manifest.master_seed = cfg.master_seed;

    const auto scenarios =
        montecarlo::sample_scenarios(cfg.montecarlo.n_trials, cfg.montecarlo.n_agents, cfg.sim,
                                     cfg.master_seed, cfg.montecarlo.cross_kind_check);
    const auto named = resolve_policies(cfg);
    result.batch = montecarlo::run_batch(scenarios, named, cfg.sim, threads);

    write_file(out_dir, "trials.csv", trials_csv(result.batch), result.manifest);
    write_file(out_dir, "summary.json", batch_summary_json(result.batch), result.manifest);
    write_file(out_dir, "table_results.txt", results_table(result.batch), result.manifest);

    if (cfg.montecarlo.margin_rerun) {
        result.rerun = montecarlo::margin_rerun(result.batch, scenarios, named, cfg.sim, threads);
        result.has_rerun = true;
        write_file(out_dir, "rerun_trials.csv", trials_csv(result.rerun), result.manifest);
        write_file(out_dir, "rerun_summary.json", batch_summary_json(result.rerun),
                   result.manifest);
        write_file(out_dir, "table_margins.txt", margins_table(result.batch, result.rerun),
                   result.manifest);
    }

    result.manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(result.manifest, out_dir);
    return result;
}

std::string grid_to_bytes(const intersection1d::SweepGrid& g) {
    std::string s;
    s.reserve(4 * 2 + 8 * 6 + g.t_ext.size() * 9);
    put_u32(s, static_cast<std::uint32_t>(g.nx));
    put_u32(s, static_cast<std::uint32_t>(g.nv));
    put_f64(s, g.x_start);
    put_f64(s, g.x_step);
    put_f64(s, g.v_start);
    put_f64(s, g.v_step);
    put_f64(s, g.x1_0);
    put_f64(s, g.gridlock_fraction);
    for (double v : g.t_ext) put_f64(s, v);
    s.append(reinterpret_cast<const char*>(g.gridlocked.data()), g.gridlocked.size());
    return s;
}

intersection1d::SweepGrid grid_from_bytes(const std::string& bytes) {
    intersection1d::SweepGrid g;
    std::size_t off = 0;
    if (bytes.size() < 4 * 2 + 8 * 6) throw IoError("grid file truncated");
    g.nx = static_cast<int>(get_u32(bytes, off));
    g.nv = static_cast<int>(get_u32(bytes, off));
    g.x_start = get_f64(bytes, off);
    g.x_step = get_f64(bytes, off);
    g.v_start = get_f64(bytes, off);
    g.v_step = get_f64(bytes, off);
    g.x1_0 = get_f64(bytes, off);
    g.gridlock_fraction = get_f64(bytes, off);
    const std::size_t cells = static_cast<std::size_t>(g.nx) * static_cast<std::size_t>(g.nv);
    if (bytes.size() != off + cells * 9) throw IoError("grid file size mismatch");
    g.t_ext.resize(cells);
    for (std::size_t i = 0; i < cells; ++i) g.t_ext[i] = get_f64(bytes, off);
    g.gridlocked.assign(bytes.begin() + static_cast<std::ptrdiff_t>(off), bytes.end());
    return g;
}

std::string sweep_csv(const intersection1d::SweepGrid& g) {
    std::ostringstream ss;
    ss << "x2_0,v02,t_ext,gridlocked\n";
    for (int ix = 0; ix < g.nx; ++ix)
        for (int iv = 0; iv < g.nv; ++iv) {
            const std::size_t k = static_cast<std::size_t>(ix) * g.nv + iv;
            ss << fmt(g.x_start + ix * g.x_step, 4) << ',' << fmt(g.v_start + iv * g.v_step, 4)
               << ',' << fmt(g.t_ext[k]) << ',' << int(g.gridlocked[k]) << '\n';
        }
    return ss.str();
}

SweepResult run_sweep1d(const config::AppConfig& cfg, const std::string& out_dir, int threads) {
    const auto t0 = std::chrono::steady_clock::now();
    SweepResult result;
    result.manifest.command = "sweep1d";
    result.manifest.config_snapshot = config::dump_config(cfg);
    result.manifest.master_seed = cfg.master_seed;

    const auto& sw = cfg.sweep;
    for (const auto& name : sw.policies) {
        intersection1d::Corridor1dParams p;
        p.v01 = sw.v01;
        p.v02 = sw.v_lo;  // overridden per cell by sweep()
        p.r = sw.r;
        p.lambda = sw.lambda;
        p.tau = sw.tau;
        p.M = sw.M;
        p.dt = sw.dt;
        p.t_max = sw.t_max;
        p.policy = config::parse_corridor_policy(name);
        auto grid = intersection1d::sweep(p, sw.x2_lo, sw.x2_hi, sw.v_lo, sw.v_hi, sw.step,
                                          threads);
        grid.x1_0 = sw.x1_0;
        result.gridlock_fraction[name] = grid.gridlock_fraction;
        write_file(out_dir, name + "_grid.bin", grid_to_bytes(grid), result.manifest);
        write_file(out_dir, name + "_sweep.csv", sweep_csv(grid), result.manifest);
    }
    json j = json::object();
    for (const auto& [name, frac] : result.gridlock_fraction) j[name] = frac;
    write_file(out_dir, "sweep_summary.json", j.dump(2), result.manifest);

    result.manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(result.manifest, out_dir);
    return result;
}

std::string equilibria_table(
    const std::map<std::string, intersection1d::EquilibriumReport>& reports) {
    std::ostringstream ss;
    ss << "policy        shape          classification     eigenvalues (representative point)\n";
    for (const auto& [name, rep] : reports) {
        ss << name;
        for (std::size_t k = name.size(); k < 14; ++k) ss << ' ';
        const char* shape = "";
        switch (rep.shape) {
            case intersection1d::EquilibriumShape::Arc: shape = "arc"; break;
            case intersection1d::EquilibriumShape::Point: shape = "point"; break;
            case intersection1d::EquilibriumShape::ArcPlusAxes: shape = "arc+axes"; break;
            case intersection1d::EquilibriumShape::Curve1DIn4D: shape = "curve-in-4d"; break;
        }
        ss << shape;
        for (std::size_t k = std::strlen(shape); k < 15; ++k) ss << ' ';
        const char* cls = "";
        switch (rep.classification) {
            case intersection1d::StabilityClass::Stable: cls = "stable"; break;
            case intersection1d::StabilityClass::Unstable: cls = "unstable"; break;
            case intersection1d::StabilityClass::DegenerateZero: cls = "stable-degenerate"; break;
        }
        ss << cls;
        for (std::size_t k = std::strlen(cls); k < 19; ++k) ss << ' ';
        if (!rep.linearizations.empty()) {
            const auto& ev = rep.linearizations.front().eigenvalues;
            for (Eigen::Index i = 0; i < ev.size(); ++i) {
                if (i) ss << ", ";
                ss << fmt(ev[i].real(), 4);
                if (std::abs(ev[i].imag()) > 1e-12) ss << (ev[i].imag() >= 0 ? "+" : "-")
                                                       << fmt(std::abs(ev[i].imag()), 4) << "i";
            }
        }
        ss << '\n';
    }
    return ss.str();
}

AnalyzeResult run_analyze(const config::AppConfig& cfg, const std::string& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    AnalyzeResult result;
    result.manifest.command = "analyze";
    result.manifest.config_snapshot = config::dump_config(cfg);
    result.manifest.master_seed = cfg.master_seed;

    for (const auto& name : cfg.analyze.policies) {
        intersection1d::Corridor1dParams p;
        p.v01 = cfg.analyze.v01;
        p.v02 = cfg.analyze.v02;
        p.r = cfg.analyze.r;
        p.lambda = cfg.analyze.lambda;
        p.tau = cfg.analyze.tau;
        p.policy = config::parse_corridor_policy(name);
        result.reports.emplace(name, intersection1d::equilibria(p));
    }

    json j = json::object();
    for (const auto& [name, rep] : result.reports) {
        json r;
        r["n_points"] = rep.representative_points.size();
        json eigs = json::array();
        for (const auto& lin : rep.linearizations) {
            json pt = json::array();
            for (Eigen::Index i = 0; i < lin.eigenvalues.size(); ++i)
                pt.push_back({lin.eigenvalues[i].real(), lin.eigenvalues[i].imag()});
            eigs.push_back(pt);
        }
        r["eigenvalues"] = eigs;
        j[name] = r;
    }
    write_file(out_dir, "equilibria.txt", equilibria_table(result.reports), result.manifest);
    write_file(out_dir, "equilibria.json", j.dump(2), result.manifest);

    result.manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(result.manifest, out_dir);
    return result;
}

sim::TrialMetrics run_single_trial(const config::AppConfig& cfg, const std::string& policy,
                                   const std::string& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    RunManifest manifest;
    manifest.command = "trial";
    manifest.config_snapshot = config::dump_config(cfg);
    manifest.master_seed = cfg.master_seed;

    const auto scenarios = montecarlo::sample_scenarios(
        1, cfg.montecarlo.n_agents, cfg.sim, cfg.master_seed, cfg.montecarlo.cross_kind_check);
    const auto spec = config::make_policy(policy, cfg.montecarlo);
    std::ostringstream trace;
    const auto metrics = sim::run_trial(scenarios[0], spec, cfg.sim, &trace);
    write_file(out_dir, "trace.csv", trace.str(), manifest);

    montecarlo::BatchSummary batch;
    batch.per_policy.push_back(montecarlo::summarize(policy, {metrics}));
    batch.trials.push_back({metrics});
    write_file(out_dir, "summary.json", batch_summary_json(batch), manifest);

    manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(manifest, out_dir);
    return metrics;
}

}  // namespace cbfsim::experiments
