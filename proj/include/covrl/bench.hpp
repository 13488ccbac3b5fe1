#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "covrl/env_gen.hpp"
#include "covrl/hybrid.hpp"
#include "covrl/io.hpp"
#include "covrl/offline.hpp"
#include "covrl/stats.hpp"

namespace covrl {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EnvSpec {
    std::string kind = "random"; // random | combination_lock | block_lift
    int num_states = 3;
    int num_actions = 2;
    int horizon = 3;
    double sparsity = 0.0;
    std::uint64_t env_seed = 1;
    std::vector<int> emissions;           // block_lift
    nlohmann::json latent;                // block_lift: nested EnvSpec
};

// Fully describes one benchmark: environment, algorithm, classes, parameter
// source and the seed sweep. Field names match the config JSON keys.
struct ExperimentConfig {
    EnvSpec environment;
    std::string algorithm = "glow"; // glow | h2o+fqi | h2o+mle | hyglow | offline-only
    int value_extras = 4;
    bool shuffle = false;
    double perturb_scale = 0.3;
    std::string weight_mode = "oracle"; // oracle | static_pure_ratios
    double delta = 0.05;

    // preset xor manual
    std::string preset_name;  // thm1 | thm2 | hyglow (empty: manual)
    double epsilon = 0.1;
    double preset_constant = 1.0;
    int manual_T = 0;
    int manual_K = 1;
    double manual_gamma = 0.1;

    std::string offline_source = "pi_star"; // pi_star | uniform_policy | uniform_reachable
    std::string solver = "mabo_cr";         // h2o+*, offline-only
    int model_extras = 2;                   // mle model class size - 1
    int offline_n = 64;                     // offline-only sample count

    std::vector<std::uint64_t> seeds;
    std::vector<int> t_grid; // optional: cross seeds with multiple T values
    std::string out_dir = "out";
    bool exact_expectation = false;
    int workers = 1;

    nlohmann::json echo; // raw config as parsed
};

inline EnvSpec env_spec_from_json(const nlohmann::json& j) {
    EnvSpec e;
    e.kind = j.value("kind", "random");
    e.num_states = j.value("num_states", 3);
    e.num_actions = j.value("num_actions", 2);
    e.horizon = j.value("horizon", 3);
    e.sparsity = j.value("sparsity", 0.0);
    e.env_seed = j.value("env_seed", std::uint64_t{1});
    if (j.contains("emissions")) e.emissions = j.at("emissions").get<std::vector<int>>();
    if (j.contains("latent")) e.latent = j.at("latent");
    return e;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    cfg.echo = j;
    if (!j.contains("environment")) throw ConfigError("config: missing environment");
    cfg.environment = env_spec_from_json(j.at("environment"));
    cfg.algorithm = j.value("algorithm", "glow");
    static const std::vector<std::string> algos = {"glow", "h2o+fqi", "h2o+mle", "hyglow",
                                                   "offline-only"};
    if (std::find(algos.begin(), algos.end(), cfg.algorithm) == algos.end())
        throw ConfigError("config: unknown algorithm " + cfg.algorithm);
    cfg.value_extras = j.value("value_extras", 4);
    cfg.shuffle = j.value("shuffle", false);
    cfg.perturb_scale = j.value("perturb_scale", 0.3);
    cfg.weight_mode = j.value("weight_mode", "oracle");
    cfg.delta = j.value("delta", 0.05);
    if (j.contains("preset")) {
        cfg.preset_name = j.at("preset").value("name", "thm1");
        cfg.epsilon = j.at("preset").value("epsilon", 0.1);
        cfg.preset_constant = j.at("preset").value("constant", 1.0);
    } else if (j.contains("manual")) {
        cfg.manual_T = j.at("manual").value("T", 0);
        cfg.manual_K = j.at("manual").value("K", 1);
        cfg.manual_gamma = j.at("manual").value("gamma", 0.1);
        if (cfg.manual_T < 1) throw ConfigError("config: manual.T must be >= 1");
    } else if (cfg.algorithm != "offline-only") {
        throw ConfigError("config: need preset or manual parameters");
    }
    if (j.contains("offline")) {
        cfg.offline_source = j.at("offline").value("source", "pi_star");
        cfg.offline_n = j.at("offline").value("n", 64);
    }
    cfg.solver = j.value("solver", "mabo_cr");
    cfg.model_extras = j.value("model_extras", 2);
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("t_grid")) cfg.t_grid = j.at("t_grid").get<std::vector<int>>();
    cfg.out_dir = j.value("out_dir", "out");
    cfg.exact_expectation = j.value("exact_expectation", false);
    cfg.workers = j.value("workers", 1);
    if (cfg.workers < 1) throw ConfigError("config: workers must be >= 1");
    return cfg;
}

inline TabularMdp build_env(const EnvSpec& spec) {
    Rng rng(spec.env_seed);
    if (spec.kind == "random")
        return make_random_mdp(spec.num_states, spec.num_actions, spec.horizon, spec.sparsity, rng);
    if (spec.kind == "combination_lock")
        return make_combination_lock(spec.horizon, rng, spec.num_actions);
    if (spec.kind == "block_lift") {
        if (spec.latent.is_null()) throw ConfigError("block_lift: missing latent spec");
        const TabularMdp latent = build_env(env_spec_from_json(spec.latent));
        return make_block_lift(latent, spec.emissions);
    }
    throw ConfigError("unknown environment kind: " + spec.kind);
}

// ---------------------------------------------------------------------------
// One benchmark cell (a single seeded run at a single T)
// ---------------------------------------------------------------------------

struct CellResult {
    RunRecord record;
    bool hybrid_columns = false;
    nlohmann::json extra; // algorithm-specific summary fields
};

namespace detail {

inline DataDistribution resolve_offline_source(const TabularMdp& mdp, const std::string& source) {
    if (source == "pi_star")
        return DataDistribution::from_occupancy(occupancy(mdp, greedy_policy(q_star(mdp))),
                                                "pi_star");
    if (source == "uniform_policy")
        return DataDistribution::from_occupancy(
            occupancy(mdp, Policy::uniform(mdp.num_states, mdp.num_actions, mdp.horizon)),
            "uniform_policy");
    if (source == "uniform_reachable") return DataDistribution::uniform_over_reachable(mdp);
    throw ConfigError("unknown offline source: " + source);
}

inline ModelClass perturbed_model_class(const TabularMdp& mdp, int extras, Rng& rng) {
    std::vector<TabularMdp> members{mdp};
    for (int i = 0; i < extras; ++i) {
        TabularMdp m = mdp;
        for (int h = 0; h < m.horizon; ++h)
            for (int x = 0; x < m.num_states; ++x)
                for (int a = 0; a < m.num_actions; ++a) {
                    auto& row = m.transitions[h][x][a];
                    double sum = 0.0;
                    for (double& v : row) {
                        if (v > 0.0) v = std::max(1e-3, v + rng.uniform(-0.2, 0.2));
                        sum += v;
                    }
                    for (double& v : row) v /= sum;
                    double s2 = 0.0;
                    for (double v : row) s2 += v;
                    auto it = std::max_element(row.begin(), row.end());
                    *it += 1.0 - s2;
                }
        members.push_back(std::move(m));
    }
    return ModelClass::with_truth(std::move(members), 0);
}

// Static pure-ratio weight class {clip-free d^pi/d^pi' for all pairs}.
inline WeightClass pure_ratio_class(const TabularMdp& mdp, const PolicyClass& pis) {
    std::vector<Occupancy> occs;
    for (const auto& pi : pis.policies) occs.push_back(occupancy(mdp, pi));
    std::vector<WeightFunction> ws;
    for (const auto& num : occs)
        for (const auto& den : occs) {
            WeightFunction w;
            w.layers.assign(mdp.horizon, LayerDist(mdp.num_states,
                                                   std::vector<double>(mdp.num_actions, 0.0)));
            for (int h = 0; h < mdp.horizon; ++h)
                for (int x = 0; x < mdp.num_states; ++x)
                    for (int a = 0; a < mdp.num_actions; ++a)
                        w.layers[h][x][a] = ratio(num.layers[h][x][a], den.layers[h][x][a]);
            ws.push_back(std::move(w));
        }
    return WeightClass::make_static(std::move(ws));
}

} // namespace detail

/// Executes one (seed, T) cell. T_override = 0 means "resolve from the
/// preset"; otherwise it pins T (presets then only set K and gamma).
inline CellResult run_cell(const ExperimentConfig& cfg, const TabularMdp& mdp,
                           std::uint64_t seed, int t_override) {
    Rng base(seed);
    Rng class_rng = base.child(0);
    Rng run_rng = base.child(1);

    ValueClass F = tabular_value_class(mdp, cfg.value_extras, class_rng, cfg.shuffle,
                                       cfg.perturb_scale);
    PolicyClass Pi = induced_policies(F.members);
    const CoverageReport cov = coverability(mdp, Pi);

    CellResult cell;
    if (cfg.algorithm == "glow") {
        // two-pass resolution: oracle log|W| depends on T
        double log_w = std::log(static_cast<double>(Pi.size()));
        GlowConfig gcfg;
        for (int pass = 0; pass < 2; ++pass) {
            if (cfg.preset_name == "thm1")
                gcfg = preset_thm1(cfg.epsilon, cov.c_cov, F.nominal_log_size, log_w, cfg.delta,
                                   mdp.horizon, cfg.preset_constant);
            else if (cfg.preset_name == "thm2")
                gcfg = preset_thm2(cfg.epsilon, cov.c_cov, F.nominal_log_size, log_w, cfg.delta,
                                   mdp.horizon, cfg.preset_constant);
            else {
                gcfg.T = cfg.manual_T;
                gcfg.K = cfg.manual_K;
                gcfg.gamma = cfg.manual_gamma;
                gcfg.delta = cfg.delta;
                gcfg.log_f = F.nominal_log_size;
            }
            if (t_override > 0) gcfg.T = t_override;
            if (cfg.weight_mode != "oracle") break;
            log_w = std::log(static_cast<double>(Pi.size()) * gcfg.T);
            gcfg.log_w = log_w;
        }
        WeightClass W = cfg.weight_mode == "oracle"
                            ? WeightClass::make_oracle(mdp, Pi, log_w)
                            : detail::pure_ratio_class(mdp, Pi);
        if (cfg.weight_mode != "oracle") log_w = W.nominal_log_size;
        gcfg.delta = cfg.delta;
        gcfg.log_f = F.nominal_log_size;
        gcfg.log_w = log_w;
        gcfg.exact_expectation = cfg.exact_expectation;
        cell.record = glow_run(mdp, F, W, gcfg, run_rng);
        cell.extra["T"] = gcfg.T;
        cell.extra["K"] = gcfg.K;
        cell.extra["gamma"] = gcfg.gamma;
    } else if (cfg.algorithm == "offline-only") {
        const DataDistribution mu = detail::resolve_offline_source(mdp, cfg.offline_source);
        const LayeredDataset data = sample_offline(mdp, mu, cfg.offline_n, run_rng);
        SolverResult res;
        if (cfg.solver == "mabo_cr") {
            WeightClass W = detail::pure_ratio_class(mdp, Pi);
            res = mabo_cr(data, F, mabo_augment(W), cfg.manual_gamma);
        } else if (cfg.solver == "fqi") {
            res = fqi(data, F);
        } else if (cfg.solver == "mle") {
            Rng model_rng = base.child(2);
            const ModelClass M = detail::perturbed_model_class(mdp, cfg.model_extras, model_rng);
            res = mle_model(data, M);
        } else {
            throw ConfigError("unknown solver: " + cfg.solver);
        }
        const double j_star = j_value(mdp, greedy_policy(q_star(mdp)));
        const double j_pi = j_value(mdp, res.pi_hat);
        IterationRow row;
        row.t = 1;
        row.f_index = static_cast<int>(res.chosen_index);
        row.j_pi = j_pi;
        row.inst_regret = j_star - j_pi;
        row.cum_regret = row.inst_regret;
        row.solver_objective = res.objective;
        row.hybrid_size = static_cast<int>(data.uniform_size());
        cell.record.rows.push_back(row);
        cell.record.policy_indices.push_back(row.f_index);
        cell.record.j_star = j_star;
        cell.record.cum_regret = row.cum_regret;
        cell.record.final_risk = row.inst_regret;
        cell.hybrid_columns = true;
        cell.extra["solver_output"] = {{"chosen_index", res.chosen_index},
                                       {"objective", res.objective},
                                       {"layer_choices", res.layer_choices}};
    } else {
        // hybrid algorithms
        HybridConfig hcfg;
        hcfg.delta = cfg.delta;
        hcfg.exact_expectation = cfg.exact_expectation;
        const double log_w = std::log(static_cast<double>(Pi.size()));
        if (cfg.preset_name == "hyglow") {
            const DataDistribution nu_probe = detail::resolve_offline_source(mdp, cfg.offline_source);
            const double c_star =
                concentrability_inf(occupancy(mdp, greedy_policy(q_star(mdp))),
                                    Occupancy{nu_probe.layers, nu_probe.tag});
            hcfg = preset_hyglow(cfg.epsilon, cov.c_cov, c_star, mdp.horizon, F.nominal_log_size,
                                 log_w, cfg.delta, cfg.preset_constant);
        } else {
            hcfg.T = cfg.manual_T;
            hcfg.gamma = cfg.manual_gamma;
        }
        if (t_override > 0) hcfg.T = t_override;
        hcfg.exact_expectation = cfg.exact_expectation;
        const DataDistribution nu = detail::resolve_offline_source(mdp, cfg.offline_source);
        Rng offline_rng = base.child(2);
        const LayeredDataset d_off = sample_offline(mdp, nu, hcfg.T, offline_rng);
        if (cfg.algorithm == "hyglow") {
            hcfg.solver = SolverKind::mabo_cr;
            WeightClass W = cfg.weight_mode == "oracle"
                                ? WeightClass::make_oracle(mdp, Pi, log_w)
                                : detail::pure_ratio_class(mdp, Pi);
            cell.record = hyglow_run(mdp, F, W, d_off, &nu, hcfg, run_rng);
        } else if (cfg.algorithm == "h2o+fqi") {
            hcfg.solver = SolverKind::fqi;
            cell.record = h2o_run(mdp, make_fqi_solver(F), greedy_policy(F[0]), 0, d_off, &nu,
                                  hcfg, run_rng);
        } else {
            hcfg.solver = SolverKind::mle;
            Rng model_rng = base.child(3);
            const ModelClass M = detail::perturbed_model_class(mdp, cfg.model_extras, model_rng);
            cell.record = h2o_run(mdp, make_mle_solver(M), greedy_policy(q_star(M.members[0])), 0,
                                  d_off, &nu, hcfg, run_rng);
        }
        cell.hybrid_columns = true;
        cell.extra["T"] = hcfg.T;
        cell.extra["gamma"] = hcfg.gamma;
        cell.extra["offline_tag"] = nu.tag;
    }
    cell.extra["c_cov"] = cov.c_cov;
    return cell;
}

// ---------------------------------------------------------------------------
// Experiment driver: (seed x T) cells, atomic per-cell outputs, manifest
// ---------------------------------------------------------------------------

struct Manifest {
    nlohmann::json json;
    bool all_ok = true;
};

inline Manifest run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    {
        std::ofstream probe(fs::path(cfg.out_dir) / ".write_probe");
        if (!probe) throw std::runtime_error("run_experiment: output dir not writable");
    }
    fs::remove(fs::path(cfg.out_dir) / ".write_probe");

    const TabularMdp mdp = build_env(cfg.environment);
    std::vector<int> grid = cfg.t_grid;
    if (grid.empty()) grid.push_back(0); // single setting resolved from config

    struct Cell {
        std::uint64_t seed;
        int t_override;
        std::size_t index;
    };
    std::vector<Cell> cells;
    for (std::size_t gi = 0; gi < grid.size(); ++gi)
        for (std::size_t si = 0; si < cfg.seeds.size(); ++si)
            cells.push_back({cfg.seeds[si], grid[gi], cells.size()});

    std::vector<nlohmann::json> cell_meta(cells.size());
    std::vector<std::string> csv_paths(cells.size()), json_paths(cells.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> any_failed{false};
    std::mutex io_mutex;

    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            const Cell& c = cells[i];
            const auto start = std::chrono::steady_clock::now();
            nlohmann::json meta;
            meta["cell"] = c.index;
            meta["seed"] = c.seed;
            meta["t_override"] = c.t_override;
            try {
                const CellResult res = run_cell(cfg, mdp, c.seed, c.t_override);
                const std::string stem = "cell_" + std::to_string(c.index) + "_T" +
                                         std::to_string(c.t_override) + "_seed" +
                                         std::to_string(c.seed);
                const std::string run_id = stem;
                const fs::path csv_path = fs::path(cfg.out_dir) / (stem + ".csv");
                const fs::path json_path = fs::path(cfg.out_dir) / (stem + ".json");
                const std::string csv = run_record_to_csv(res.record, run_id, res.hybrid_columns);
                nlohmann::json summary = run_record_summary(res.record);
                summary["seed"] = c.seed;
                summary["extra"] = res.extra;
                summary["config_echo"] = cfg.echo;
                const std::string summary_text = summary.dump(2) + "\n";
                {
                    // atomic publish: write sidecar, then rename
                    const fs::path tmp_csv = csv_path.string() + ".tmp";
                    const fs::path tmp_json = json_path.string() + ".tmp";
                    write_file(tmp_csv.string(), csv);
                    write_file(tmp_json.string(), summary_text);
                    fs::rename(tmp_csv, csv_path);
                    fs::rename(tmp_json, json_path);
                }
                csv_paths[i] = csv_path.string();
                json_paths[i] = json_path.string();
                meta["status"] = "ok";
                meta["csv"] = csv_path.string();
                meta["summary"] = json_path.string();
                meta["final_risk"] = res.record.final_risk;
            } catch (const std::exception& e) {
                any_failed = true;
                meta["status"] = "failed";
                meta["error"] = e.what();
            }
            const auto end = std::chrono::steady_clock::now();
            meta["wall_ms"] =
                std::chrono::duration_cast<std::chrono::milliseconds>(end - start).count();
            std::lock_guard<std::mutex> lock(io_mutex);
            cell_meta[i] = std::move(meta);
        }
    };

    const int nworkers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(cells.size())));
    if (nworkers <= 1 || cells.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nworkers; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    Manifest manifest;
    manifest.all_ok = !any_failed.load();
    manifest.json["config"] = cfg.echo;
    manifest.json["config_hash"] = Sha256::of(cfg.echo.dump());
    manifest.json["cells"] = cell_meta;
    nlohmann::json outputs = nlohmann::json::array();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (csv_paths[i].empty()) continue;
        outputs.push_back({{"path", csv_paths[i]}, {"sha256", Sha256::of(read_file(csv_paths[i]))}});
        outputs.push_back(
            {{"path", json_paths[i]}, {"sha256", Sha256::of(read_file(json_paths[i]))}});
    }
    manifest.json["outputs"] = std::move(outputs);
    manifest.json["status"] = manifest.all_ok ? "ok" : "failed";
    write_file((fs::path(cfg.out_dir) / "manifest.json").string(), manifest.json.dump(2) + "\n");
    return manifest;
}

// ---------------------------------------------------------------------------
// Slope estimation and plot data
// ---------------------------------------------------------------------------

// cum_regret column values at the requested t checkpoints of one run CSV.
inline std::vector<double> read_cum_regret_at(const std::string& csv_path,
                                              const std::vector<int>& t_grid) {
    const std::string text = read_file(csv_path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + csv_path);
    std::vector<double> out(t_grid.size(),
                            std::numeric_limits<double>::quiet_NaN());
    while (std::getline(in, line)) {
        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (true) {
            const std::size_t comma = line.find(',', pos);
            fields.push_back(line.substr(pos, comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (fields.size() < 6) continue;
        const int t = std::stoi(fields[1]);
        for (std::size_t g = 0; g < t_grid.size(); ++g)
            if (t == t_grid[g]) out[g] = std::stod(fields[5]);
    }
    for (std::size_t g = 0; g < t_grid.size(); ++g)
        if (std::isnan(out[g]))
            throw std::runtime_error("csv missing t=" + std::to_string(t_grid[g]) + ": " +
                                     csv_path);
    return out;
}

struct SlopeReport {
    std::optional<LineFit> fit; // absent when regret is nonpositive somewhere
    std::vector<double> medians;
};

/// log-log least squares of median cumulative regret against the T grid.
/// Degenerate (nonpositive) medians yield no fit.
inline SlopeReport regret_slope(const std::vector<std::string>& csv_paths,
                                const std::vector<int>& t_grid) {
    if (t_grid.size() < 3) throw std::invalid_argument("regret_slope: need >= 3 grid points");
    if (csv_paths.empty()) throw std::invalid_argument("regret_slope: no csv files");
    std::vector<std::vector<double>> per_grid(t_grid.size());
    for (const auto& path : csv_paths) {
        const std::vector<double> vals = read_cum_regret_at(path, t_grid);
        for (std::size_t g = 0; g < t_grid.size(); ++g) per_grid[g].push_back(vals[g]);
    }
    SlopeReport rep;
    rep.medians.resize(t_grid.size());
    bool degenerate = false;
    for (std::size_t g = 0; g < t_grid.size(); ++g) {
        rep.medians[g] = median(per_grid[g]);
        if (rep.medians[g] <= 0.0) degenerate = true;
    }
    if (degenerate) return rep;
    std::vector<double> xs, ys;
    for (std::size_t g = 0; g < t_grid.size(); ++g) {
        xs.push_back(std::log(static_cast<double>(t_grid[g])));
        ys.push_back(std::log(rep.medians[g]));
    }
    rep.fit = least_squares(xs, ys);
    return rep;
}

/// Per-figure TSVs (x, median, q25, q75) next to the manifest:
/// regret_vs_t.tsv from per-iteration curves and risk_vs_T.tsv from the
/// final risks grouped by the T grid. Figures without cells are skipped.
inline std::vector<std::string> emit_plotdata(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    const nlohmann::json manifest = nlohmann::json::parse(read_file(manifest_path));
    const fs::path dir = fs::path(manifest_path).parent_path();
    std::vector<std::string> written;

    // group ok cells by t_override
    std::map<int, std::vector<nlohmann::json>> groups;
    for (const auto& cell : manifest.at("cells")) {
        if (cell.value("status", "") != "ok") continue;
        groups[cell.value("t_override", 0)].push_back(cell);
    }
    if (groups.empty()) return written;

    // regret vs t: use the group with the largest T
    {
        const auto& group = groups.rbegin()->second;
        std::vector<std::vector<double>> curves;
        std::size_t min_len = std::numeric_limits<std::size_t>::max();
        for (const auto& cell : group) {
            const std::string text = read_file(cell.at("csv").get<std::string>());
            std::istringstream in(text);
            std::string line;
            std::getline(in, line);
            std::vector<double> curve;
            while (std::getline(in, line)) {
                std::size_t pos = 0;
                for (int k = 0; k < 5; ++k) pos = line.find(',', pos) + 1;
                curve.push_back(std::stod(line.substr(pos)));
            }
            min_len = std::min(min_len, curve.size());
            curves.push_back(std::move(curve));
        }
        if (!curves.empty() && min_len > 0) {
            std::ostringstream out;
            out << "t\tmedian\tq25\tq75\n";
            for (std::size_t t = 0; t < min_len; ++t) {
                std::vector<double> vals;
                for (const auto& c : curves) vals.push_back(c[t]);
                out << (t + 1) << '\t' << format_double(median(vals)) << '\t'
                    << format_double(percentile(vals, 0.25)) << '\t'
                    << format_double(percentile(vals, 0.75)) << '\n';
            }
            const std::string path = (dir / "regret_vs_t.tsv").string();
            write_file(path, out.str());
            written.push_back(path);
        }
    }

    // risk vs T across groups (only meaningful with a real T grid)
    if (groups.size() > 1 || groups.begin()->first > 0) {
        std::ostringstream out;
        out << "T\tmedian\tq25\tq75\n";
        for (const auto& [T, group] : groups) {
            std::vector<double> risks;
            for (const auto& cell : group)
                if (cell.contains("final_risk")) risks.push_back(cell.at("final_risk").get<double>());
            if (risks.empty()) continue;
            out << T << '\t' << format_double(median(risks)) << '\t'
                << format_double(percentile(risks, 0.25)) << '\t'
                << format_double(percentile(risks, 0.75)) << '\n';
        }
        const std::string path = (dir / "risk_vs_T.tsv").string();
        write_file(path, out.str());
        written.push_back(path);
    }
    return written;
}

} // namespace covrl
