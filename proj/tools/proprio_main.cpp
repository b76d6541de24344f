#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <numeric>

#include "proprio/io.hpp"
#include "proprio/sim/simulation.hpp"

namespace fs = std::filesystem;
using namespace proprio;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitScenarioError = 2;
constexpr int kExitRuntimeError = 3;

struct RunArgs {
    std::string scenario_path;
    std::string mode = "coupled";
    int64_t seed = -1;
    std::string out_dir = "out";
    double resolution = -1.0;
};

Scenario load_with_overrides(const RunArgs& args) {
    Scenario sc = load_scenario(args.scenario_path);
    if (args.seed >= 0) sc.seed = static_cast<uint64_t>(args.seed);
    if (args.resolution > 0.0) sc.resolution = args.resolution;
    return sc;
}

void write_run_outputs(const fs::path& dir, const RunOutput& out) {
    fs::create_directories(dir);
    atomic_write_file(dir / "trace.csv", trace_to_csv(out.trace));
    atomic_write_file(dir / "mpc.csv", mpc_trace_to_csv(out.trace));
    atomic_write_file(dir / "metrics.json", metrics_to_json(out.metrics).dump(2) + "\n");
    atomic_write_file(dir / "map.csv", map_to_csv(out.map));
    atomic_write_file(dir / "map.bin", map_to_binary(out.map));
}

int cmd_run(const RunArgs& args) {
    Scenario sc;
    try {
        sc = load_with_overrides(args);
    } catch (const std::exception& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return kExitScenarioError;
    }
    try {
        const RunMode mode = parse_run_mode(args.mode);
        const RunOutput out = run_scenario(sc, mode);
        write_run_outputs(args.out_dir, out);
        std::cout << "run " << sc.name << " mode=" << args.mode << " seed=" << sc.seed
                  << " com_mae=" << out.metrics.com_mae << " -> " << args.out_dir << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "runtime error [" << sc.name << ", mode " << args.mode << "]: " << e.what()
                  << "\n";
        return kExitRuntimeError;
    }
}

int cmd_sweep(const RunArgs& args, int num_seeds) {
    Scenario sc;
    try {
        sc = load_with_overrides(args);
    } catch (const std::exception& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return kExitScenarioError;
    }
    try {
        const RunMode mode = parse_run_mode(args.mode);
        fs::create_directories(args.out_dir);
        std::ostringstream csv;
        csv << "seed,com_mae_m,pseudo_coverage,force_only_coverage,invalid_cells_in_hull\n";
        for (int seed = 1; seed <= num_seeds; ++seed) {
            Scenario run_sc = sc;
            run_sc.seed = static_cast<uint64_t>(seed);
            const RunOutput out = run_scenario(run_sc, mode);
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%d,%.9g,%.6g,%.6g,%d\n", seed, out.metrics.com_mae,
                          out.metrics.pseudo_coverage, out.metrics.force_only_coverage,
                          out.metrics.invalid_cells_in_hull);
            csv << buf;
        }
        atomic_write_file(fs::path(args.out_dir) / "sweep.csv", csv.str());
        std::cout << "sweep " << sc.name << " mode=" << args.mode << " seeds=" << num_seeds
                  << " -> " << args.out_dir << "/sweep.csv\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitRuntimeError;
    }
}

struct CompareStats {
    std::vector<double> mae;
    double mean = 0.0;
    double variance = 0.0;
};

CompareStats run_mode_seeds(const Scenario& sc, RunMode mode, int num_seeds) {
    CompareStats stats;
    for (int seed = 1; seed <= num_seeds; ++seed) {
        Scenario run_sc = sc;
        run_sc.seed = static_cast<uint64_t>(seed);
        stats.mae.push_back(run_scenario(run_sc, mode).metrics.com_mae);
    }
    stats.mean = std::accumulate(stats.mae.begin(), stats.mae.end(), 0.0) / stats.mae.size();
    for (const double v : stats.mae) stats.variance += (v - stats.mean) * (v - stats.mean);
    stats.variance = stats.mae.size() > 1 ? stats.variance / (stats.mae.size() - 1) : 0.0;
    return stats;
}

int cmd_compare(const RunArgs& args, const std::string& modes_csv, int num_seeds) {
    Scenario sc;
    try {
        sc = load_with_overrides(args);
    } catch (const std::exception& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return kExitScenarioError;
    }
    try {
        const auto comma = modes_csv.find(',');
        if (comma == std::string::npos)
            throw std::invalid_argument("--modes expects two comma-separated modes");
        const std::string mode_a = modes_csv.substr(0, comma);
        const std::string mode_b = modes_csv.substr(comma + 1);
        const CompareStats a = run_mode_seeds(sc, parse_run_mode(mode_a), num_seeds);
        const CompareStats b = run_mode_seeds(sc, parse_run_mode(mode_b), num_seeds);
        if (num_seeds == 1) std::cerr << "warning: single seed, variance reported as 0\n";

        const double mae_reduction = a.mean > 0.0 ? 100.0 * (a.mean - b.mean) / a.mean : 0.0;
        const double var_reduction =
            a.variance > 0.0 ? 100.0 * (a.variance - b.variance) / a.variance : 0.0;

        std::ostringstream csv;
        csv << "seed," << mode_a << "_mae," << mode_b << "_mae\n";
        std::ostringstream txt;
        txt << "scenario: " << sc.name << "  seeds: " << num_seeds << "\n";
        char buf[160];
        for (int i = 0; i < num_seeds; ++i) {
            std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", i + 1, a.mae[i], b.mae[i]);
            csv << buf;
            std::snprintf(buf, sizeof(buf), "seed %2d  %-10s %.6f  %-10s %.6f\n", i + 1,
                          mode_a.c_str(), a.mae[i], mode_b.c_str(), b.mae[i]);
            txt << buf;
        }
        std::snprintf(buf, sizeof(buf), "mean      %-10s %.6f  %-10s %.6f  reduction %.1f%%\n",
                      mode_a.c_str(), a.mean, mode_b.c_str(), b.mean, mae_reduction);
        txt << buf;
        std::snprintf(buf, sizeof(buf), "variance  %-10s %.3e  %-10s %.3e  reduction %.1f%%\n",
                      mode_a.c_str(), a.variance, mode_b.c_str(), b.variance, var_reduction);
        txt << buf;
        csv << "mean," << a.mean << "," << b.mean << "\n";
        csv << "variance," << a.variance << "," << b.variance << "\n";
        csv << "mae_reduction_pct," << mae_reduction << ",\n";
        csv << "variance_reduction_pct," << var_reduction << ",\n";

        fs::create_directories(args.out_dir);
        atomic_write_file(fs::path(args.out_dir) / "compare.csv", csv.str());
        atomic_write_file(fs::path(args.out_dir) / "compare.txt", txt.str());
        std::cout << txt.str();
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitRuntimeError;
    }
}

int cmd_dump_map(const RunArgs& args, double at_time, const std::string& out_file) {
    Scenario sc;
    try {
        sc = load_with_overrides(args);
    } catch (const std::exception& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return kExitScenarioError;
    }
    try {
        if (at_time > 0.0) sc.duration = at_time;
        const RunOutput out = run_scenario(sc, parse_run_mode(args.mode));
        const fs::path path(out_file);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        if (path.extension() == ".bin")
            atomic_write_file(path, map_to_binary(out.map));
        else
            atomic_write_file(path, map_to_csv(out.map));
        std::cout << "map at t=" << sc.duration << " -> " << out_file << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitRuntimeError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"proprioceptive terrain estimation and safe locomotion simulator"};
    app.require_subcommand(1);

    RunArgs args;
    int num_seeds = 10;
    std::string modes_csv = "decoupled,coupled";
    double at_time = -1.0;
    std::string out_file = "map.csv";

    CLI::App* run = app.add_subcommand("run", "run one scenario and write trace/metrics/map");
    run->add_option("--scenario", args.scenario_path, "scenario file")->required();
    run->add_option("--mode", args.mode, "coupled|decoupled|no_cbf|cbf");
    run->add_option("--seed", args.seed, "seed override");
    run->add_option("--out", args.out_dir, "output directory")->required();
    run->add_option("--resolution", args.resolution, "map resolution override, meters");

    CLI::App* sweep = app.add_subcommand("sweep", "run one mode across seeds 1..N");
    sweep->add_option("--scenario", args.scenario_path, "scenario file")->required();
    sweep->add_option("--mode", args.mode, "coupled|decoupled|no_cbf|cbf");
    sweep->add_option("--seeds", num_seeds, "number of seeds");
    sweep->add_option("--out", args.out_dir, "output directory")->required();
    sweep->add_option("--resolution", args.resolution, "map resolution override, meters");

    CLI::App* compare = app.add_subcommand("compare", "compare two modes across seeds");
    compare->add_option("--scenario", args.scenario_path, "scenario file")->required();
    compare->add_option("--modes", modes_csv, "two modes, comma separated");
    compare->add_option("--seeds", num_seeds, "number of seeds per mode");
    compare->add_option("--out", args.out_dir, "output directory")->required();
    compare->add_option("--resolution", args.resolution, "map resolution override, meters");

    CLI::App* dump = app.add_subcommand("dump-map", "run until t and dump the map");
    dump->add_option("--scenario", args.scenario_path, "scenario file")->required();
    dump->add_option("--at", at_time, "simulated time to stop at, seconds");
    dump->add_option("--mode", args.mode, "coupled|decoupled|no_cbf|cbf");
    dump->add_option("--out", out_file, "output file (.csv or .bin)")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(args);
    if (sweep->parsed()) return cmd_sweep(args, num_seeds);
    if (compare->parsed()) return cmd_compare(args, modes_csv, num_seeds);
    if (dump->parsed()) return cmd_dump_map(args, at_time, out_file);
    return kExitOk;
}
