// Acceptance harness: one section per release criterion, each printing a
// single CRITERION <k> PASS/FAIL line.  Exit 0 only when every section
// passes.  Tolerances live next to the checks; budgets are sized for a
// single core (the caps they were written against assumed eight).

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "rwde/dirichlet_calculus.hpp"
#include "rwde/finite_graph.hpp"
#include "rwde/harness.hpp"
#include "rwde/lattice_env.hpp"
#include "rwde/stable.hpp"
#include "rwde/stats.hpp"
#include "rwde/traps.hpp"
#include "rwde/walk.hpp"
#include "rwde/weights.hpp"
#include "test_util.h"

using namespace rwde;

namespace {

int g_failures = 0;
std::chrono::steady_clock::time_point g_tick;

void start_criterion() { g_tick = std::chrono::steady_clock::now(); }

void report(int k, bool pass, const std::string& detail) {
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - g_tick).count();
    std::printf("CRITERION %2d %s  %s  (%.1fs)\n", k, pass ? "PASS" : "FAIL", detail.c_str(),
                secs);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

LatticePoint P(int x, int y, int z) {
    LatticePoint p{};
    p[0] = x;
    p[1] = y;
    p[2] = z;
    return p;
}

const Weights kCanonical(3, {1.3, 0.05, 0.05, 0.05, 0.05, 0.05});

std::string find_verdict(const ResultSet& rs, const std::string& name, bool* pass,
                         double* observed = nullptr) {
    for (const Verdict& v : rs.verdicts) {
        if (v.name != name) continue;
        *pass = v.pass;
        if (observed) *observed = v.observed;
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s=%.4g(%s)", name.c_str(), v.observed,
                      v.pass ? "ok" : "bad");
        return buf;
    }
    *pass = false;
    return name + "=missing";
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "<unreadable " + path + ">";
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(RWDE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// --------------------------------------------------------------------------
// 1. kappa from the weight table == exhaustive min over small connected sets

void criterion_1() {
    start_criterion();
    Rng rng = Rng::keyed(1001, rng_tag::analysis);
    bool all_ok = true;
    double worst_gap = 0.0;
    for (int rep = 0; rep < 20 && all_ok; ++rep) {
        std::vector<double> a(6);
        for (double& x : a) x = rng.uniform(0.1, 2.0);
        Weights w(3, a);
        const double expected = kappa_report(w).kappa;

        rwde_test::BoxGraph bg = rwde_test::build_box_graph(2, w);
        const int root = bg.at({0, 0, 0});
        auto neighbors = [&](int v) {
            std::vector<int> out;
            for (int ei : bg.g.out_edges(v)) {
                int h = bg.g.edge(ei).head;
                if (!bg.g.is_cemetery(h)) out.push_back(h);
            }
            return out;
        };

        // connected S containing the root, |S| <= 3
        std::set<std::vector<int>> sets;
        sets.insert({root});
        for (int n1 : neighbors(root)) {
            std::vector<int> pair = {root, n1};
            std::sort(pair.begin(), pair.end());
            sets.insert(pair);
            for (int base : {root, n1}) {
                for (int n2 : neighbors(base)) {
                    if (n2 == root || n2 == n1) continue;
                    std::vector<int> triple = {root, n1, n2};
                    std::sort(triple.begin(), triple.end());
                    sets.insert(triple);
                }
            }
        }

        double best = std::numeric_limits<double>::infinity();
        for (const auto& S : sets) {
            KappaSetResult kr = kappa_of_set(bg.g, root, S);
            best = std::min(best, kr.value);
        }
        if (best != expected) {
            all_ok = false;
            worst_gap = best - expected;
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "20 weight vectors, exact match%s",
                  all_ok ? "" : (std::string(", gap ") + std::to_string(worst_gap)).c_str());
    report(1, all_ok, buf);
}

// --------------------------------------------------------------------------
// 2. joint moment formula against brute-force Monte Carlo

void criterion_2() {
    start_criterion();
    bool all_ok = true;
    double worst_z = 0.0;
    for (int fixture = 0; fixture < 10; ++fixture) {
        Rng gen = Rng::keyed(1002, rng_tag::analysis, std::vector<int64_t>{fixture});
        const int nv = 2 + fixture % 2;  // alternate 2- and 3-vertex graphs
        FiniteGraph g;
        for (int v = 0; v < nv; ++v) g.add_vertex("v" + std::to_string(v));
        for (int x = 0; x < nv; ++x)
            for (int y = 0; y < nv; ++y) {
                if (x == y) continue;
                g.add_edge(x, y, gen.uniform(0.3, 2.0));
            }
        g.add_edge(0, nv - 1, gen.uniform(0.3, 2.0));  // one parallel edge
        g.finalize();

        // exponents: mostly positive, a few mild negatives (alpha + 2 xi > 0
        // keeps the Monte Carlo variance finite)
        std::vector<double> xi(g.n_edges());
        for (size_t i = 0; i < xi.size(); ++i) {
            if (gen.u01() < 0.6)
                xi[i] = gen.uniform(0.0, 1.2);
            else
                xi[i] = -0.4 * g.edge(i).alpha * gen.u01();
        }

        const double closed_form = joint_moment(g, xi);
        const long n = 1000000;
        double s1 = 0.0, s2 = 0.0;
        Rng mc = Rng::keyed(1003, rng_tag::environment, std::vector<int64_t>{fixture});
        for (long i = 0; i < n; ++i) {
            EnvironmentOnGraph env = sample_environment(g, mc);
            double w = 1.0;
            for (size_t e = 0; e < xi.size(); ++e)
                if (xi[e] != 0.0) w *= std::pow(env.prob[e], xi[e]);
            s1 += w;
            s2 += w * w;
        }
        double mean = s1 / n;
        double var = std::max(s2 / n - mean * mean, 0.0);
        double se = std::sqrt(var / n);
        double z = se > 0.0 ? std::fabs(mean - closed_form) / se : 1e300;
        worst_z = std::max(worst_z, z);
        if (!(z < 4.0)) all_ok = false;
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "10 fixtures x 1e6 draws, worst |z| = %.2f (< 4)", worst_z);
    report(2, all_ok, buf);
}

// --------------------------------------------------------------------------
// 3. time reversal on the bidirected triangle

void criterion_3() {
    start_criterion();
    ExperimentConfig cfg;
    cfg.seed = 1004;
    ResultSet rs = run_reversal_test(cfg);
    bool p1 = false, p2 = false;
    double marg = 0.0, viol = 0.0;
    std::string d1 = find_verdict(rs, "reversal_marginals", &p1, &marg);
    std::string d2 = find_verdict(rs, "beta_bound_violations", &p2, &viol);
    report(3, p1 && p2, d1 + " " + d2);
}

// --------------------------------------------------------------------------
// 4. trap algebra: pointwise bounds and the strength-tail exponent

void criterion_4() {
    start_criterion();
    long bound_violations = 0, trap_violations = 0, n_traps = 0;
    Rng rng = Rng::keyed(1005, rng_tag::analysis);
    for (long i = 0; i < 1000000; ++i) {
        int axis = static_cast<int>(i % 3);
        TwoVertexDraw d = sample_trap_edge(kCanonical, axis, rng);
        double s = 1.0 / (d.u + d.v);
        double val = (1.0 - d.omega_xy * d.omega_yx) * s;
        if (!(val > 0.0 && val <= 1.0 + 1e-9)) ++bound_violations;
        if (d.omega_xy + d.omega_yx > kTrapThreshold) {
            ++n_traps;
            if (!(val >= 0.5 - 1e-9)) ++trap_violations;
        }
    }

    std::vector<double> grid;
    for (int i = 0; i < 9; ++i) grid.push_back(std::pow(10.0, 1.0 + 0.25 * i));
    TailCurve tc = trap_strength_tail(kCanonical, 0, grid, 10000000, 1006);
    double slope_err = std::fabs(tc.fit.slope - (-1.75));

    bool ok = bound_violations == 0 && trap_violations == 0 && n_traps > 0 && slope_err <= 0.15;
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "bounds 0 violations (traps seen %ld), slope %.3f vs -1.75 (tol 0.15)", n_traps,
                  tc.fit.slope);
    report(4, ok, buf);
}

// --------------------------------------------------------------------------
// 5. forgotten walk fixture and the exact time decomposition

void criterion_5() {
    start_criterion();
    // environment with exactly one trap edge (e_1, axis 0) on the fixture
    // path; located once by seed scan, pinned here
    LatticeEnvironment env(kCanonical, 61);
    bool fixture_ok = is_trap(probe_trap_edge(env, P(1, 0, 0), 0));

    WalkTrace t;
    t.d = 3;
    t.positions = {P(0, 0, 0), P(1, 0, 0), P(2, 0, 0), P(1, 0, 0), P(2, 0, 0), P(3, 0, 0)};

    ForgottenWalk fw = forget(t, P(1, 0, 0), P(2, 0, 0), 5);
    fixture_ok = fixture_ok && fw.kept_times == std::vector<size_t>{0, 1, 4, 5} &&
                 !fw.trailing_open;

    T1Decomposition dec = decompose_T1(env, t, 5);
    fixture_ok = fixture_ok && dec.identity_ok && dec.outside_steps == 1 &&
                 dec.traps.size() == 1 && dec.traps[0].total_crossings == 3 &&
                 dec.traps[0].n_exits == 1;

    TrapConfig want;
    want.j = 0;
    want.n_xy = 1;
    fixture_ok = fixture_ok && trap_config_from_trace(t, P(1, 0, 0), P(2, 0, 0), 0, 5) == want &&
                 trap_config_from_forgotten(fw, P(1, 0, 0), P(2, 0, 0), 0) == want;

    long identity_violations = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        LatticeEnvironment e(kCanonical, 20000 + rep);
        Rng rng = Rng::keyed(20000 + rep, rng_tag::walk, std::vector<int64_t>{rep});
        WalkTrace tr = simulate_walk(e, LatticePoint::zero(), 600, rng, rep);
        T1Decomposition d = decompose_T1(e, tr, tr.steps());
        if (!d.identity_ok) ++identity_violations;
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "fixture %s, identity violations %ld/1000",
                  fixture_ok ? "exact" : "broken", identity_violations);
    report(5, fixture_ok && identity_violations == 0, buf);
}

// --------------------------------------------------------------------------
// 6. renewal structure: line fixture and equality of inter-renewal means

void criterion_6() {
    start_criterion();
    WalkTrace line;
    line.d = 3;
    for (int i = 0; i <= 11; ++i) line.positions.push_back(P(i, 0, 0));
    RenewalOptions opt;
    opt.a = 2.0 * std::sqrt(3.0) + 0.1;
    opt.u_hat = {1.0, 0.0, 0.0};
    opt.confirm_window = 3;
    RenewalRecord lr = detect_renewals(line, opt);
    bool line_ok = !lr.times.empty() && lr.times[0] == 4;

    RenewalOptions ropt = opt;
    ropt.confirm_window = 384;
    std::vector<double> gap12, gap23;
    for (int rep = 0; rep < 1000; ++rep) {
        LatticeEnvironment env(kCanonical, 30000 + rep);
        Rng rng = Rng::keyed(30000 + rep, rng_tag::walk, std::vector<int64_t>{rep});
        WalkTrace t = simulate_walk(env, LatticePoint::zero(), 3000, rng, rep);
        RenewalRecord r = detect_renewals(t, ropt);
        if (r.times.size() < 3) continue;
        gap12.push_back(static_cast<double>(r.times[1] - r.times[0]));
        gap23.push_back(static_cast<double>(r.times[2] - r.times[1]));
    }
    MeanSE a = mean_se(gap12), b = mean_se(gap23);
    double se = std::sqrt(a.se * a.se + b.se * b.se);
    double z = se > 0.0 ? std::fabs(a.mean - b.mean) / se : 1e300;
    bool means_ok = gap12.size() > 700 && z < 4.0;
    char buf[128];
    std::snprintf(buf, sizeof buf, "line T_1 = %zu (want 4), gap means %.2f vs %.2f, |z| = %.2f",
                  lr.times.empty() ? size_t{0} : lr.times[0], a.mean, b.mean, z);
    report(6, line_ok && means_ok, buf);
}

// --------------------------------------------------------------------------
// 7. T_1 tail in the canonical regime

void criterion_7() {
    start_criterion();
    ExperimentConfig cfg;
    cfg.seed = 1007;
    ResultSet rs = run_t1_tail(cfg);
    bool p1 = false, p2 = false, p3 = false;
    std::string d1 = find_verdict(rs, "hill_t1_range", &p1);
    std::string d2 = find_verdict(rs, "hill_outside_gap", &p2);
    std::string d3 = find_verdict(rs, "decomposition_identity", &p3);
    report(7, p1 && p2 && p3, d1 + " " + d2 + " " + d3);
}

// --------------------------------------------------------------------------
// 8. Green moment doubling verdicts across the kappa boundary

void criterion_8() {
    start_criterion();
    ExperimentConfig cfg;
    cfg.seed = 1008;
    ResultSet canon = run_green_moments(cfg);
    ExperimentConfig one;
    one.seed = 1008;
    one.alpha = {1, 1, 1, 1, 1, 1};
    one.s_grid = {5.0};
    ResultSet balanced = run_green_moments(one);

    bool p1 = false, p2 = false, p3 = false;
    std::string d1 = find_verdict(canon, "doubling_s_1.25", &p1);
    std::string d2 = find_verdict(canon, "doubling_s_2.25", &p2);
    std::string d3 = find_verdict(balanced, "doubling_s_5", &p3);
    report(8, p1 && p2 && p3, d1 + " " + d2 + " " + d3);
}

// --------------------------------------------------------------------------
// 9. stable sampler against its characteristic function; Hill on Pareto

void criterion_9() {
    start_criterion();
    StableParams p{1.75, 1.0, 1.0};
    const long n = 1000000;
    Rng rng = Rng::keyed(1009, rng_tag::analysis);
    std::vector<double> xs(n);
    for (double& x : xs) x = sample_stable(p, rng);
    double worst = 0.0;
    for (double l : {-2.0, -1.0, -0.5, 0.5, 1.0, 2.0}) {
        std::complex<double> acc{0.0, 0.0};
        for (double x : xs) acc += std::complex<double>(std::cos(l * x), std::sin(l * x));
        acc /= static_cast<double>(n);
        worst = std::max(worst, std::abs(acc - stable_char_function(p, l)));
    }

    Rng prng = Rng::keyed(1010, rng_tag::analysis);
    std::vector<double> pareto(n);
    for (double& x : pareto) x = std::pow(prng.u01(), -1.0 / 1.5);
    HillEstimate h = hill_estimator(pareto, 10000);

    bool ok = worst < 5e-3 && h.index >= 1.45 && h.index <= 1.55;
    char buf[96];
    std::snprintf(buf, sizeof buf, "char error %.2e (< 5e-3), Hill %.3f in [1.45, 1.55]", worst,
                  h.index);
    report(9, ok, buf);
}

// --------------------------------------------------------------------------
// 10. fluctuation limit: stable KS and orthogonal sub-dominance

void criterion_10() {
    start_criterion();
    ExperimentConfig cfg;
    cfg.seed = 1011;
    ResultSet rs = run_fluctuations(cfg);
    bool ks = false, orth = false, skew = false;
    std::string d1 = find_verdict(rs, "stable_ks_blocks", &ks);
    std::string d2 = find_verdict(rs, "orth_subdominant", &orth);
    // shown for context; the criterion itself gates on ks and orth only
    std::string d3 = find_verdict(rs, "x_clause_left_skew", &skew);
    report(10, ks && orth, d1 + " " + d2 + " " + d3);
}

// --------------------------------------------------------------------------
// 11. byte-identical reruns, thread independence, CLI exit codes

void criterion_11() {
    start_criterion();
    bool ok = std::system("rm -rf acc11 && mkdir -p acc11") == 0;
    std::string why = ok ? "" : " scratch dir";
    const std::string base =
        "schema = 1\n"
        "alpha = 1.3, 0.05, 0.05, 0.05, 0.05, 0.05\n"
        "seed = 424242\n"
        "t1_samples = 2000\n"
        "n_max = 65536\n";
    { std::ofstream("acc11/t1.cfg") << base << "threads = 1\n"; }
    { std::ofstream("acc11/t8.cfg") << base << "threads = 8\n"; }
    { std::ofstream("acc11/vel.cfg") << "schema = 1\nseed = 7\nvel_steps = 20000\n"
                                        "vel_replicas = 4\n"; }

    auto expect = [&](int got, int a, int b, const char* what) {
        if (got != a && got != b) {
            ok = false;
            why += std::string(" ") + what + " exit " + std::to_string(got);
        }
    };
    expect(run_cli("t1-tail --config acc11/t1.cfg --out acc11/a"), 0, 2, "t1 run A");
    expect(run_cli("t1-tail --config acc11/t1.cfg --out acc11/b"), 0, 2, "t1 run B");
    expect(run_cli("t1-tail --config acc11/t8.cfg --out acc11/c"), 0, 2, "t1 run C");
    expect(run_cli("velocity --config acc11/vel.cfg --out acc11/v1"), 0, 2, "vel run 1");
    expect(run_cli("velocity --config acc11/vel.cfg --out acc11/v2"), 0, 2, "vel run 2");

    auto same = [&](const char* x, const char* y, const char* what) {
        if (slurp(std::string("acc11/") + x) != slurp(std::string("acc11/") + y)) {
            ok = false;
            why += std::string(" ") + what + " differs";
        }
    };
    same("a/t1-tail_points.csv", "b/t1-tail_points.csv", "rerun csv");
    same("a/t1-tail_summary.txt", "b/t1-tail_summary.txt", "rerun summary");
    same("a/t1-tail_points.csv", "c/t1-tail_points.csv", "threads csv");
    same("a/t1-tail_summary.txt", "c/t1-tail_summary.txt", "threads summary");
    same("v1/velocity_points.csv", "v2/velocity_points.csv", "velocity csv");
    same("v1/velocity_summary.txt", "v2/velocity_summary.txt", "velocity summary");

    int missing = run_cli("t1-tail --config acc11/does_not_exist.cfg --out acc11/x");
    if (missing != 1) {
        ok = false;
        why += " missing-config exit " + std::to_string(missing);
    }
    report(11, ok, ok ? "reruns and thread counts byte-identical, exit codes correct"
                      : "problems:" + why);
}

}  // namespace

int main() {
    std::printf("acceptance suite, single process\n");
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11();
    std::printf("ACCEPTANCE: %d/11 criteria passed\n", 11 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
