#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "covrl/bench.hpp"
#include "covrl/io.hpp"

namespace fs = std::filesystem;
using namespace covrl;

namespace {

bool wildcard_match(const std::string& pattern, const std::string& text) {
    std::size_t p = 0, t = 0, star = std::string::npos, match = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            match = t;
        } else if (star != std::string::npos) {
            p = star + 1;
            t = ++match;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

std::vector<std::string> expand_glob(const std::string& glob) {
    const fs::path g(glob);
    const fs::path dir = g.has_parent_path() ? g.parent_path() : fs::path(".");
    const std::string pattern = g.filename().string();
    std::vector<std::string> out;
    if (!fs::exists(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && wildcard_match(pattern, entry.path().filename().string()))
            out.push_back(entry.path().string());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> parse_grid(const std::string& csv) {
    std::vector<int> grid;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        const std::size_t comma = csv.find(',', pos);
        grid.push_back(std::stoi(csv.substr(pos, comma - pos)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return grid;
}

int cmd_run(const std::string& config_path, const std::vector<std::uint64_t>& seeds,
            const std::string& out, bool exact, int workers) {
    ExperimentConfig cfg;
    try {
        cfg = experiment_config_from_json(nlohmann::json::parse(read_file(config_path)));
        if (!seeds.empty()) cfg.seeds = seeds;
        if (!out.empty()) cfg.out_dir = out;
        if (exact) cfg.exact_expectation = true;
        if (workers > 0) cfg.workers = workers;
        if (const char* env = std::getenv("COVRL_WORKERS")) cfg.workers = std::atoi(env);
        cfg.echo["out_dir"] = cfg.out_dir; // keep the echo faithful to overrides
        cfg.echo["seeds"] = cfg.seeds;
        cfg.echo["exact_expectation"] = cfg.exact_expectation;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    try {
        const Manifest manifest = run_experiment(cfg);
        std::cout << "cells: " << manifest.json.at("cells").size() << "\n"
                  << "manifest: " << (fs::path(cfg.out_dir) / "manifest.json").string() << "\n";
        if (!manifest.all_ok) {
            std::cerr << "one or more cells failed; partial results preserved\n";
            return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "run error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int cmd_slope(const std::string& glob, const std::string& grid_csv) {
    const std::vector<std::string> paths = expand_glob(glob);
    if (paths.empty()) {
        std::cerr << "no files match " << glob << "\n";
        return 2;
    }
    const std::vector<int> grid = parse_grid(grid_csv);
    const SlopeReport rep = regret_slope(paths, grid);
    nlohmann::json j;
    j["files"] = paths.size();
    j["grid"] = grid;
    j["medians"] = rep.medians;
    if (rep.fit) {
        j["slope"] = rep.fit->slope;
        j["intercept"] = rep.fit->intercept;
        j["r_squared"] = rep.fit->r_squared;
    } else {
        j["slope"] = nullptr;
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_plotdata(const std::string& manifest_path) {
    const std::vector<std::string> files = emit_plotdata(manifest_path);
    for (const auto& f : files) std::cout << f << "\n";
    if (files.empty()) std::cerr << "warning: no figures emitted\n";
    return 0;
}

int cmd_coverability(const std::string& mdp_path, const std::string& class_path) {
    const TabularMdp mdp = mdp_from_json(nlohmann::json::parse(read_file(mdp_path)));
    const ValueClass cls =
        value_class_from_json(nlohmann::json::parse(read_file(class_path)));
    const PolicyClass pis = induced_policies(cls.members);
    const CoverageReport rep = coverability(mdp, pis);
    std::cout << coverage_report_to_json(rep).dump(2) << "\n";
    return 0;
}

int cmd_genenv(const std::string& spec_json, const std::string& mdp_out,
               const std::string& class_out, int extras, std::uint64_t class_seed) {
    const EnvSpec spec = env_spec_from_json(nlohmann::json::parse(spec_json));
    const TabularMdp mdp = build_env(spec);
    write_file(mdp_out, mdp_to_json(mdp).dump(2) + "\n");
    std::cout << "wrote " << mdp_out << "\n";
    if (!class_out.empty()) {
        Rng rng(class_seed);
        const ValueClass cls = tabular_value_class(mdp, extras, rng);
        write_file(class_out, value_class_to_json(cls).dump(2) + "\n");
        std::cout << "wrote " << class_out << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"exact desk-scale benchmark runner for density-ratio online/hybrid RL"};
    app.require_subcommand(1);

    std::string config_path, out_dir, glob, grid_csv = "64,128,256,512";
    std::string manifest_path, mdp_path, class_path;
    std::vector<std::uint64_t> seeds;
    bool exact = false;
    int workers = 0;

    CLI::App* run = app.add_subcommand("run", "execute an experiment config");
    run->add_option("config", config_path, "experiment config JSON")->required();
    run->add_option("--seeds", seeds, "override the seed list");
    run->add_option("--out", out_dir, "override the output directory");
    run->add_flag("--exact", exact, "force exact-expectation mode");
    run->add_option("--workers", workers, "worker pool size");

    CLI::App* slope = app.add_subcommand("slope", "log-log regret slope from run CSVs");
    slope->add_option("glob", glob, "run CSV glob, e.g. 'out/cell_*.csv'")->required();
    slope->add_option("--grid", grid_csv, "comma-separated T checkpoints");

    CLI::App* plotdata = app.add_subcommand("plotdata", "emit per-figure TSVs from a manifest");
    plotdata->add_option("manifest", manifest_path, "manifest.json path")->required();

    CLI::App* cover = app.add_subcommand("coverability", "coverage report for an MDP and class");
    cover->add_option("mdp", mdp_path, "MDP JSON path")->required();
    cover->add_option("class", class_path, "value class JSON path")->required();

    std::string env_spec_json = R"({"kind":"combination_lock","horizon":3,"env_seed":1})";
    std::string mdp_out = "mdp.json", class_out;
    int extras = 4;
    std::uint64_t class_seed = 1;
    CLI::App* genenv = app.add_subcommand("genenv", "generate an environment (and class) JSON");
    genenv->add_option("--spec", env_spec_json, "environment spec as inline JSON");
    genenv->add_option("--out", mdp_out, "MDP JSON output path");
    genenv->add_option("--class-out", class_out, "optional value-class JSON output path");
    genenv->add_option("--extras", extras, "class members beyond the optimal table");
    genenv->add_option("--class-seed", class_seed, "seed for the class perturbations");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, seeds, out_dir, exact, workers);
        if (slope->parsed()) return cmd_slope(glob, grid_csv);
        if (plotdata->parsed()) return cmd_plotdata(manifest_path);
        if (cover->parsed()) return cmd_coverability(mdp_path, class_path);
        if (genenv->parsed())
            return cmd_genenv(env_spec_json, mdp_out, class_out, extras, class_seed);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
