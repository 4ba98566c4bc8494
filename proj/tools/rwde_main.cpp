// rwde: Monte Carlo experiments for random walks in Dirichlet environments.
//
// Each subcommand runs one experiment and writes
//   <out>/<experiment>_points.csv     raw curve data
//   <out>/<experiment>_summary.txt    verdicts, notes, resolved config
// Both files are pure functions of (config, seed); wall time goes to stdout
// only, never into the files.
//
// Exit codes: 0 all verdicts pass, 2 statistical failure, 1 usage or config
// error.

#include <chrono>
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "rwde/harness.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir = "results";
    long long seed = -1;  // -1: keep the config's seed
    int threads = 0;      // 0: keep the config's thread count
};

void add_common(CLI::App* sub, CommonFlags* f) {
    sub->add_option("--config", f->config_path, "config file (key = value, schema = 1)");
    sub->add_option("--seed", f->seed, "override the master seed");
    sub->add_option("--threads", f->threads, "override the worker thread count");
    sub->add_option("--out", f->out_dir, "output directory (default: results)");
}

rwde::ExperimentConfig load_config(const CommonFlags& f) {
    rwde::ExperimentConfig cfg;
    if (!f.config_path.empty()) cfg = rwde::ExperimentConfig::from_file(f.config_path);
    if (f.seed >= 0) cfg.seed = static_cast<uint64_t>(f.seed);
    if (f.threads > 0) cfg.threads = f.threads;
    return cfg;
}

int run_and_report(const CommonFlags& flags,
                   rwde::ResultSet (*runner)(const rwde::ExperimentConfig&)) {
    rwde::ExperimentConfig cfg;
    try {
        cfg = load_config(flags);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    }
    const auto t0 = std::chrono::steady_clock::now();
    rwde::ResultSet rs;
    try {
        rs = runner(cfg);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    const auto t1 = std::chrono::steady_clock::now();
    const double secs = std::chrono::duration<double>(t1 - t0).count();

    rwde::write_result_set(rs, flags.out_dir);
    std::printf("%s: %zu rows, %.1fs, %llu walk steps -> %s/\n", rs.experiment.c_str(),
                rs.rows.size(), secs, static_cast<unsigned long long>(rs.steps_total),
                flags.out_dir.c_str());
    for (const rwde::Verdict& v : rs.verdicts)
        std::printf("  [%s] %s  observed %.6g  bounds [%.6g, %.6g]\n",
                    v.pass ? "PASS" : "FAIL", v.name.c_str(), v.observed, v.bound_lo,
                    v.bound_hi);
    return rs.all_pass() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo experiments for random walks in Dirichlet environments"};
    app.require_subcommand(1);

    struct Cmd {
        const char* name;
        const char* help;
        rwde::ResultSet (*runner)(const rwde::ExperimentConfig&);
    };
    const Cmd cmds[] = {
        {"t1-tail", "tail of the first renewal time and its trap decomposition",
         rwde::run_t1_tail},
        {"fluctuations", "stable-law fit of renewal block sums and position clauses",
         rwde::run_fluctuations},
        {"trap-tail", "trap strength and holding-time tails for one edge",
         rwde::run_trap_tail},
        {"green-moments", "divergence of Green function moments across s",
         rwde::run_green_moments},
        {"reversal-test", "time-reversed environment against its exact law",
         rwde::run_reversal_test},
        {"velocity", "empirical velocity against the drift axis", rwde::run_velocity},
    };

    CommonFlags flags[std::size(cmds)];
    for (size_t i = 0; i < std::size(cmds); ++i)
        add_common(app.add_subcommand(cmds[i].name, cmds[i].help), &flags[i]);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // normalize every usage problem to exit 1; --help stays 0
        return app.exit(e) == 0 ? 0 : 1;
    }

    for (size_t i = 0; i < std::size(cmds); ++i)
        if (app.get_subcommand(cmds[i].name)->parsed())
            return run_and_report(flags[i], cmds[i].runner);
    std::fprintf(stderr, "no subcommand given\n");
    return 1;
}
