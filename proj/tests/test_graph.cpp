#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "rwde/dirichlet_calculus.hpp"
#include "rwde/finite_graph.hpp"
#include "rwde/stable.hpp"
#include "rwde/stats.hpp"
#include "test_util.h"

using namespace rwde;
using rwde_test::build_box_graph;
using rwde_test::step_graph;

namespace {

const char* kTriangleText = "0 1 1\n1 0 1\n1 2 1\n2 1 1\n2 0 1\n0 2 1\n";

FiniteGraph triangle() { return read_edge_list(kTriangleText); }

// Complete digraph on n vertices, weights from the rng.
FiniteGraph complete_graph(int n, Rng& rng, double lo = 0.3, double hi = 2.0) {
    FiniteGraph g;
    for (int v = 0; v < n; ++v) g.add_vertex(std::to_string(v));
    for (int t = 0; t < n; ++t)
        for (int h = 0; h < n; ++h)
            if (t != h) g.add_edge(t, h, rng.uniform(lo, hi));
    g.finalize();
    return g;
}

int find_edge(const FiniteGraph& g, int tail, int head) {
    for (size_t i = 0; i < g.n_edges(); ++i)
        if (g.edge(i).tail == tail && g.edge(i).head == head) return static_cast<int>(i);
    return -1;
}

}  // namespace

TEST_CASE("divergence: triangle is balanced, a single edge is not") {
    FiniteGraph tri = triangle();
    for (int v = 0; v < 3; ++v) CHECK(divergence(tri, v) == 0.0);

    FiniteGraph g;
    g.add_vertex("a");
    g.add_vertex("b");
    g.add_edge(0, 1, 2.0);
    g.finalize();
    CHECK(divergence(g, 0) == 2.0);
    CHECK(divergence(g, 1) == -2.0);

    // every edge cancels in the total
    Rng rng = Rng::keyed(11, rng_tag::analysis);
    FiniteGraph k5 = complete_graph(5, rng);
    double total = 0.0;
    for (int v = 0; v < 5; ++v) total += divergence(k5, v);
    CHECK(std::fabs(total) < 1e-12);
}

TEST_CASE("contract: lattice edge becomes a vertex of degree 10") {
    Weights w(3, {1, 1, 1, 1, 1, 1});
    auto bg = build_box_graph(2, w);
    std::vector<int> f = {bg.at({0, 0, 0}), bg.at({1, 0, 0})};
    Contraction c = contract(bg.g, f);
    CHECK(c.graph.out_edges(c.merged_vertex).size() == 10);
    CHECK(c.graph.in_edges(c.merged_vertex).size() == 10);
    CHECK(c.vertex_map[f[0]] == c.merged_vertex);
    CHECK(c.vertex_map[f[1]] == c.merged_vertex);
}

TEST_CASE("contract: collapsing the whole graph leaves one bare vertex") {
    FiniteGraph tri = triangle();
    std::vector<int> all = {0, 1, 2};
    Contraction c = contract(tri, all);
    CHECK(c.graph.n_vertices() == 1);
    CHECK(c.graph.n_edges() == 0);
}

TEST_CASE("contract: boundary weights survive as a multiset") {
    Rng rng = Rng::keyed(23, rng_tag::analysis);
    FiniteGraph k5 = complete_graph(5, rng);
    std::vector<int> f = {0, 1};
    Contraction c = contract(k5, f);

    std::vector<double> before, after;
    for (size_t i = 0; i < k5.n_edges(); ++i) {
        bool t_in = k5.edge(i).tail <= 1, h_in = k5.edge(i).head <= 1;
        if (t_in != h_in) before.push_back(k5.edge(i).alpha);
    }
    for (size_t i = 0; i < c.graph.n_edges(); ++i) {
        const Edge& e = c.graph.edge(i);
        if (e.tail == c.merged_vertex || e.head == c.merged_vertex) after.push_back(e.alpha);
    }
    std::sort(before.begin(), before.end());
    std::sort(after.begin(), after.end());
    REQUIRE(before.size() == after.size());
    for (size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
    CHECK(c.graph.n_edges() == k5.n_edges() - 2);  // the two internal edges vanish
}

TEST_CASE("invariant measure: doubly stochastic rows give the uniform law") {
    FiniteGraph tri = triangle();
    EnvironmentOnGraph env{std::vector<double>(6, 0.5)};
    auto pi = invariant_measure(tri, env);
    for (double p : pi) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("invariant measure of the deterministic 2-cycle") {
    FiniteGraph g;
    g.add_vertex("a");
    g.add_vertex("b");
    g.add_edge(0, 1, 1.0);
    g.add_edge(1, 0, 1.0);
    g.finalize();
    EnvironmentOnGraph env{{1.0, 1.0}};
    auto pi = invariant_measure(g, env);
    CHECK(pi[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(pi[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("invariant measure matches long-run occupation frequencies") {
    Rng rng = Rng::keyed(31, rng_tag::analysis);
    FiniteGraph g = complete_graph(5, rng, 0.5, 2.0);
    Rng env_rng = Rng::keyed(32, rng_tag::environment);
    EnvironmentOnGraph env = sample_environment(g, env_rng);
    auto pi = invariant_measure(g, env);

    const long n = 1000000;
    std::vector<long> occ(5, 0);
    Rng walk_rng = Rng::keyed(33, rng_tag::walk);
    int v = 0;
    for (long i = 0; i < n; ++i) {
        v = step_graph(g, env, v, walk_rng);
        ++occ[v];
    }
    for (int u = 0; u < 5; ++u)
        CHECK(std::fabs(static_cast<double>(occ[u]) / n - pi[u]) < 1e-2);
}

TEST_CASE("reversal of a reversible chain is the identity") {
    // conductance chain: omega(x,y) = c_xy / c_x, reversible by construction
    FiniteGraph tri = triangle();
    std::vector<double> prob(6);
    prob[find_edge(tri, 0, 1)] = 1.0 / 4.0;
    prob[find_edge(tri, 0, 2)] = 3.0 / 4.0;
    prob[find_edge(tri, 1, 0)] = 1.0 / 3.0;
    prob[find_edge(tri, 1, 2)] = 2.0 / 3.0;
    prob[find_edge(tri, 2, 0)] = 3.0 / 5.0;
    prob[find_edge(tri, 2, 1)] = 2.0 / 5.0;
    EnvironmentOnGraph env{prob};

    Reversal rev = reverse_environment(tri, env);
    for (size_t i = 0; i < rev.graph.n_edges(); ++i) {
        int orig = find_edge(tri, rev.graph.edge(i).tail, rev.graph.edge(i).head);
        REQUIRE(orig >= 0);
        CHECK(rev.env.prob[i] == doctest::Approx(env.prob[orig]).epsilon(1e-12));
    }
}

TEST_CASE("double reversal restores the environment") {
    Rng rng = Rng::keyed(41, rng_tag::analysis);
    FiniteGraph k5 = complete_graph(5, rng);
    Rng env_rng = Rng::keyed(42, rng_tag::environment);
    EnvironmentOnGraph env = sample_environment(k5, env_rng);

    Reversal r1 = reverse_environment(k5, env);
    Reversal r2 = reverse_environment(r1.graph, r1.env);
    for (size_t i = 0; i < r2.graph.n_edges(); ++i) {
        size_t orig = r1.edge_map[r2.edge_map[i]];
        CHECK(r2.graph.edge(i).tail == k5.edge(orig).tail);
        CHECK(r2.graph.edge(i).head == k5.edge(orig).head);
        CHECK(std::fabs(r2.env.prob[i] - env.prob[orig]) < 1e-10);
    }
}

TEST_CASE("reversed triangle marginal follows the implied Beta law") {
    FiniteGraph tri = triangle();
    for (int v = 0; v < 3; ++v) REQUIRE(divergence(tri, v) == 0.0);

    const int n = 2000;
    std::vector<double> reversed_prob, reference;
    BetaParams bp = reversed_step_beta_params(tri, 0, 1);
    for (int i = 0; i < n; ++i) {
        Rng er = Rng::keyed(77, rng_tag::environment, std::vector<int64_t>{i});
        EnvironmentOnGraph env = sample_environment(tri, er);
        Reversal rev = reverse_environment(tri, env);
        int re = find_edge(rev.graph, 0, 1);
        REQUIRE(re >= 0);
        reversed_prob.push_back(rev.env.prob[re]);
        Rng ar = Rng::keyed(77, rng_tag::analysis, std::vector<int64_t>{i});
        reference.push_back(ar.beta(bp.a, bp.b));
    }
    Rng ks_rng = Rng::keyed(78, rng_tag::analysis);
    KsResult ks = ks_distance(reversed_prob, reference, 500, ks_rng);
    CHECK(ks.p_value >= 0.01);
}

TEST_CASE("kappa of the lattice pair: all-one box gives 10") {
    Weights w(3, {1, 1, 1, 1, 1, 1});
    auto bg = build_box_graph(2, w);
    std::vector<int> S = {bg.at({0, 0, 0}), bg.at({1, 0, 0})};
    KappaSetResult r = kappa_of_set(bg.g, bg.at({0, 0, 0}), S);
    CHECK(r.value == 10.0);
    CHECK(r.argmin.size() == 2);
}

TEST_CASE("kappa of the lattice pair matches the closed form per direction") {
    // the enumeration and the formula must agree to the last bit
    Weights canonical(3, {1.3, 0.05, 0.05, 0.05, 0.05, 0.05});
    std::vector<Weights> ws = {canonical};
    Rng rng = Rng::keyed(55, rng_tag::analysis);
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<double> a(6);
        for (double& x : a) x = rng.uniform(0.1, 2.0);
        ws.emplace_back(3, a);
    }
    for (const Weights& w : ws) {
        KappaReport kr = kappa_report(w);
        auto bg = build_box_graph(2, w);
        int origin = bg.at({0, 0, 0});
        const int e[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
        for (int j = 0; j < 3; ++j) {
            std::vector<int> S = {origin, bg.at({e[j][0], e[j][1], e[j][2]})};
            KappaSetResult r = kappa_of_set(bg.g, origin, S);
            CHECK(r.value == kr.kappa_j[j]);
        }
    }
    CHECK(kappa_report(canonical).kappa == doctest::Approx(1.75).epsilon(1e-12));
}

TEST_CASE("three-vertex sets cut strictly more than the best pair") {
    Weights w(3, {1.3, 0.05, 0.05, 0.05, 0.05, 0.05});
    KappaReport kr = kappa_report(w);
    auto bg = build_box_graph(2, w);
    int origin = bg.at({0, 0, 0});

    // connected triples {0, v, w} inside the box
    std::set<std::vector<int>> triples;
    auto neighbors = [&](int vid) {
        std::vector<int> out;
        for (int ei : bg.g.out_edges(vid)) {
            int h = bg.g.edge(ei).head;
            if (!bg.g.is_cemetery(h)) out.push_back(h);
        }
        return out;
    };
    for (int v : neighbors(origin)) {
        for (int u : neighbors(origin))
            if (u != v) triples.insert([&] {
                std::vector<int> t = {origin, v, u};
                std::sort(t.begin(), t.end());
                return t;
            }());
        for (int u : neighbors(v))
            if (u != origin) triples.insert([&] {
                std::vector<int> t = {origin, v, u};
                std::sort(t.begin(), t.end());
                return t;
            }());
    }
    double best = 1e300;
    for (const auto& S : triples) best = std::min(best, kappa_of_set(bg.g, origin, S).value);
    CHECK(best > kr.kappa);
    CHECK(best == doctest::Approx(1.95).epsilon(1e-9));  // straight line along the drift axis
}

TEST_CASE("return bound: forced 2-cycle is an equality at 1") {
    FiniteGraph g;
    g.add_vertex("a");
    g.add_vertex("b");
    g.add_edge(0, 1, 1.0);
    g.add_edge(1, 0, 1.0);
    g.finalize();
    EnvironmentOnGraph env{{1.0, 1.0}};
    ReturnBound rb = return_probability_beta_bound(g, env, 0, 1);
    CHECK(rb.lhs == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rb.rhs == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("return bound holds on every triangle draw and rhs is Beta") {
    FiniteGraph tri = triangle();
    BetaParams bp = reversed_step_beta_params(tri, 0, 1);
    const int n = 1000;
    std::vector<double> rhs_sample, reference;
    int violations = 0;
    for (int i = 0; i < n; ++i) {
        Rng er = Rng::keyed(91, rng_tag::environment, std::vector<int64_t>{i});
        EnvironmentOnGraph env = sample_environment(tri, er);
        ReturnBound rb = return_probability_beta_bound(tri, env, 0, 1);
        if (rb.lhs < rb.rhs - 1e-9) ++violations;
        rhs_sample.push_back(rb.rhs);
        Rng ar = Rng::keyed(91, rng_tag::analysis, std::vector<int64_t>{i});
        reference.push_back(ar.beta(bp.a, bp.b));
    }
    CHECK(violations == 0);
    Rng ks_rng = Rng::keyed(92, rng_tag::analysis);
    KsResult ks = ks_distance(rhs_sample, reference, 500, ks_rng);
    CHECK(ks.p_value >= 0.01);
}

TEST_CASE("hitting probabilities agree with Monte Carlo") {
    Rng rng = Rng::keyed(101, rng_tag::analysis);
    FiniteGraph g = complete_graph(6, rng, 0.2, 2.0);
    Rng env_rng = Rng::keyed(102, rng_tag::environment);
    EnvironmentOnGraph env = sample_environment(g, env_rng);

    std::vector<int> absorbing = {4, 5};
    std::vector<double> value = {0.0, 1.0};
    auto h = hitting_probability(g, env, absorbing, value);

    const int n = 20000;
    Rng walk_rng = Rng::keyed(103, rng_tag::walk);
    long hit5 = 0;
    for (int i = 0; i < n; ++i) {
        int v = 0;
        while (v != 4 && v != 5) v = step_graph(g, env, v, walk_rng);
        if (v == 5) ++hit5;
    }
    double p_hat = static_cast<double>(hit5) / n;
    double se = std::sqrt(p_hat * (1.0 - p_hat) / n);
    CHECK(std::fabs(h[0] - p_hat) < 4.0 * se + 1e-9);
}

TEST_CASE("edge list round trip keeps labels, weights and the cemetery") {
    FiniteGraph g;
    g.add_vertex("origin");
    g.add_vertex("right");
    int cem = g.add_cemetery();
    g.add_edge(0, 1, 1.25);
    g.add_edge(0, 1, 0.5);  // parallel edge
    g.add_edge(1, 0, 0.75);
    g.add_edge(1, cem, 2.0);
    g.finalize();

    std::string text = write_edge_list(g);
    FiniteGraph g2 = read_edge_list(text);
    CHECK(g2.n_vertices() == g.n_vertices());
    CHECK(g2.n_edges() == g.n_edges());
    REQUIRE(g2.cemetery().has_value());
    CHECK(write_edge_list(g2) == text);

    FiniteGraph g3 = read_edge_list("# comment line\na b 1.5\nb a 0.5\n");
    CHECK(g3.n_edges() == 2);
    CHECK(g3.vertex_by_label("a") >= 0);
}

TEST_CASE("joint moments on a single vertex match the Gamma identities") {
    FiniteGraph g;
    g.add_vertex("x");
    g.add_vertex("s");
    g.add_vertex("t");
    g.add_edge(0, 1, 1.0);
    g.add_edge(0, 2, 1.0);
    g.finalize();
    CHECK(joint_moment(g, std::vector<double>{1.0, 0.0}) ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK(joint_moment(g, std::vector<double>{0.0, 0.0}) == 1.0);

    FiniteGraph g3;
    g3.add_vertex("x");
    g3.add_vertex("s");
    g3.add_vertex("t");
    g3.add_vertex("u");
    g3.add_edge(0, 1, 2.0);
    g3.add_edge(0, 2, 1.0);
    g3.add_edge(0, 3, 1.0);
    g3.finalize();
    CHECK(joint_moment(g3, std::vector<double>{2.0, 0.0, 0.0}) ==
          doctest::Approx(0.3).epsilon(1e-12));

    // alpha + xi hitting zero flags the moment as infinite
    CHECK(std::isinf(joint_moment(g, std::vector<double>{-1.0, 0.0})));
}

TEST_CASE("joint moment agrees with Monte Carlo on a mixed fixture") {
    FiniteGraph g;
    g.add_vertex("x");
    g.add_vertex("y");
    g.add_vertex("s");
    g.add_edge(0, 1, 1.1);
    g.add_edge(0, 2, 0.7);
    g.add_edge(0, 1, 0.4);  // parallel
    g.add_edge(1, 0, 2.0);
    g.add_edge(1, 2, 0.9);
    g.finalize();
    std::vector<double> xi = {0.8, 0.0, 1.0, -0.3, 0.5};
    double exact = joint_moment(g, xi);

    const int n = 100000;
    std::vector<double> vals(n);
    for (int i = 0; i < n; ++i) {
        Rng er = Rng::keyed(111, rng_tag::environment, std::vector<int64_t>{i});
        EnvironmentOnGraph env = sample_environment(g, er);
        double v = 1.0;
        for (size_t e = 0; e < g.n_edges(); ++e)
            if (xi[e] != 0.0) v *= std::pow(env.prob[e], xi[e]);
        vals[i] = v;
    }
    MeanSE m = mean_se(vals);
    CHECK(std::fabs(m.mean - exact) < 4.0 * m.se);
}

TEST_CASE("measure change weight: identity tilt and the hand-computed value") {
    FiniteGraph g;
    g.add_vertex("x");
    g.add_vertex("s");
    g.add_vertex("t");
    g.add_edge(0, 1, 1.0);
    g.add_edge(0, 2, 1.0);
    g.finalize();

    EnvironmentOnGraph env{{0.5, 0.5}};
    CHECK(measure_change_weight(g, env, std::vector<double>{0.0, 0.0}) == 1.0);
    // Z(2,1)/Z(1,1) * omega_1^{-1} with Z(2,1) = 1/2, Z(1,1) = 1
    CHECK(measure_change_weight(g, env, std::vector<double>{1.0, 0.0}) ==
          doctest::Approx(1.0).epsilon(1e-12));
    EnvironmentOnGraph skewed{{0.25, 0.75}};
    CHECK(measure_change_weight(g, skewed, std::vector<double>{1.0, 0.0}) ==
          doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("measure change weight undoes the tilt in expectation") {
    // draw under alpha + xi, reweight, recover plain-alpha expectations
    FiniteGraph g;
    g.add_vertex("x");
    g.add_vertex("s");
    g.add_vertex("t");
    g.add_vertex("u");
    g.add_edge(0, 1, 0.6);
    g.add_edge(0, 2, 1.2);
    g.add_edge(0, 3, 2.2);
    g.finalize();
    std::vector<double> xi = {0.5, -0.2, 1.0};

    FiniteGraph tilted;
    tilted.add_vertex("x");
    tilted.add_vertex("s");
    tilted.add_vertex("t");
    tilted.add_vertex("u");
    for (size_t e = 0; e < g.n_edges(); ++e)
        tilted.add_edge(g.edge(e).tail, g.edge(e).head, g.edge(e).alpha + xi[e]);
    tilted.finalize();

    const int n = 100000;
    std::vector<double> w_only(n), w_times_f(n);
    for (int i = 0; i < n; ++i) {
        Rng er = Rng::keyed(121, rng_tag::environment, std::vector<int64_t>{i});
        EnvironmentOnGraph env = sample_environment(tilted, er);
        double w = measure_change_weight(g, env, xi);
        w_only[i] = w;
        w_times_f[i] = w * env.prob[0];
    }
    MeanSE mw = mean_se(w_only);
    CHECK(std::fabs(mw.mean - 1.0) < 4.0 * mw.se);
    MeanSE mf = mean_se(w_times_f);
    double exact = 0.6 / 4.0;  // E[omega_e0] under plain alpha
    CHECK(std::fabs(mf.mean - exact) < 4.0 * mf.se);
}

TEST_CASE("reducible chains are rejected with the offending class named") {
    FiniteGraph g;
    g.add_vertex("a");
    g.add_vertex("b");
    g.add_vertex("c");
    g.add_edge(0, 1, 1.0);
    g.add_edge(1, 0, 1.0);
    g.add_edge(2, 0, 1.0);  // c feeds in but nothing returns
    g.finalize();
    EnvironmentOnGraph env{{1.0, 1.0, 1.0}};
    CHECK_THROWS_AS(invariant_measure(g, env), std::invalid_argument);
}
