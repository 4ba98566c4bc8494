#pragma once

// Experiment orchestration: a flat key=value config, deterministic CSV /
// summary persistence, and one runner per CLI subcommand.  Every runner is
// a pure function of (config, seed): replicas get keyed rng streams, thread
// count only changes the schedule, and result files never contain wall
// clock readings, so reruns are byte-identical.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "rwde/traps.hpp"
#include "rwde/weights.hpp"

namespace rwde {

struct ExperimentConfig {
    // model
    int d = 3;
    std::vector<double> alpha = {1.3, 0.05, 0.05, 0.05, 0.05, 0.05};
    uint64_t seed = 20240801;
    int threads = 1;

    // renewal detection
    double a = 0.0;                    // 0: use 2 sqrt(d) + 0.1
    long confirm_window = 384;
    std::vector<double> u_hat;         // empty: first coordinate direction

    // walk budgets
    long n_max = 1 << 20;              // hard cap on a single walk horizon

    // t1-tail
    long t1_samples = 100000;
    std::vector<double> x_grid;        // empty: geometric 4..4096
    double eps = 0.1;                  // weak-trap split s_f <= eps * x
    double eta = 0.0;                  // 0: kappa + 0.1; sets the visit cutoff
    int expect_heavy_tail = 1;         // 0 flips the Hill verdicts to plateau-absent

    // fluctuations
    std::vector<long> block_grid = {125, 250, 500, 1000};
    long fluct_replicas = 1000;
    long stable_ref_samples = 10000;
    long ks_permutations = 1000;

    // green-moments
    int green_radius = 3;
    long green_samples = 10000;
    std::vector<double> s_grid;        // empty: {1.25, 2.25}
    long green_probe = 200;            // environments checked against radius R-1
    long green_trim = 50;              // deep-end drop count of the doubling ladder

    // trap-tail
    int trap_axis = 0;
    long trap_samples = 10000000;
    std::vector<double> A_grid;        // empty: geometric 10..1000
    std::vector<long> trap_config = {0, 1, 0, 0};  // visit counts xx,xy,yx,yy
    long cond_samples = 2000000;
    double cond_eps = 0.05;
    std::vector<double> cond_x_grid;   // empty: geometric 20..640

    // velocity
    long vel_steps = 1000000;
    long vel_replicas = 16;

    // reversal
    std::string graph_file;            // empty: built-in bidirected triangle
    long reversal_draws = 10000;

    // verdict thresholds (all tunable here, not in the analysis code)
    double hill_lo = 1.55, hill_hi = 1.95;
    double hill_gap_min = 0.1;
    double ks_p_min = 0.01;
    double orth_ratio_max = 0.1;
    double green_trend_threshold = 0.0;
    double slope_tol = 0.15;
    double angle_tol = 0.1;
    double stab_lo = 0.7, stab_hi = 1.4;
    double beta_slack = 1e-9;
    long marginal_pass_min = 9;

    Weights weights() const;
    double kappa() const;
    double renewal_a() const;                 // a, or its default
    std::vector<double> unit_direction() const;

    // Parsers reject unknown keys and any schema other than 1.
    static ExperimentConfig from_text(const std::string& text);
    static ExperimentConfig from_file(const std::string& path);
    void set(const std::string& key, const std::string& value);
    std::string echo() const;  // canonical render, fixed key order
};

struct Verdict {
    std::string name;
    std::string criterion;  // acceptance criterion number or invariant label
    bool pass = false;
    double observed = 0.0;
    double bound_lo = 0.0, bound_hi = 0.0;
};

struct ResultSet {
    std::string experiment;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<Verdict> verdicts;
    std::vector<std::pair<std::string, std::string>> notes;
    uint64_t steps_total = 0;
    std::string config_echo;

    bool all_pass() const;
    void note(const std::string& key, const std::string& value);
    void note(const std::string& key, double value);
};

// <out_dir>/<experiment>_points.csv and <out_dir>/<experiment>_summary.txt,
// %.17g throughout; creates out_dir if needed.
void write_result_set(const ResultSet& rs, const std::string& out_dir);

// Runs body(0..n-1) on `threads` workers.  Each index must write only its
// own slots, so the result does not depend on the schedule.
void run_replicated(long n, int threads, const std::function<void(long)>& body);

ResultSet run_t1_tail(const ExperimentConfig& cfg);
ResultSet run_fluctuations(const ExperimentConfig& cfg);
ResultSet run_green_moments(const ExperimentConfig& cfg);
ResultSet run_reversal_test(const ExperimentConfig& cfg);
ResultSet run_trap_tail(const ExperimentConfig& cfg);
ResultSet run_velocity(const ExperimentConfig& cfg);

}  // namespace rwde
