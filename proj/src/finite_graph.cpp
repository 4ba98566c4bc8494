#include "rwde/finite_graph.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "rwde/stats.hpp"

namespace rwde {

int FiniteGraph::add_vertex(std::string label) {
    labels_.push_back(std::move(label));
    finalized_ = false;
    return static_cast<int>(labels_.size()) - 1;
}

int FiniteGraph::add_cemetery() {
    if (cemetery_) throw std::logic_error("FiniteGraph: cemetery already present");
    int v = add_vertex("@");
    cemetery_ = v;
    return v;
}

void FiniteGraph::add_edge(int tail, int head, double alpha) {
    edges_.push_back(Edge{tail, head, alpha});
    finalized_ = false;
}

void FiniteGraph::finalize() {
    const int n = n_vertices();
    out_.assign(n, {});
    in_.assign(n, {});
    for (size_t i = 0; i < edges_.size(); ++i) {
        const Edge& e = edges_[i];
        if (e.tail < 0 || e.tail >= n || e.head < 0 || e.head >= n)
            throw std::invalid_argument("FiniteGraph: edge endpoint out of range");
        if (is_cemetery(e.tail))
            throw std::invalid_argument("FiniteGraph: cemetery must not have outgoing edges");
        if (!(e.alpha > 0.0) || !std::isfinite(e.alpha))
            throw std::invalid_argument("FiniteGraph: edge weights must be positive and finite");
        out_[e.tail].push_back(static_cast<int>(i));
        in_[e.head].push_back(static_cast<int>(i));
    }
    finalized_ = true;
}

int FiniteGraph::vertex_by_label(const std::string& name) const {
    for (int v = 0; v < n_vertices(); ++v)
        if (labels_[v] == name) return v;
    return -1;
}

double FiniteGraph::out_weight(int v) const {
    require_finalized();
    std::vector<double> a;
    for (int ei : out_[v]) a.push_back(edges_[ei].alpha);
    return sorted_sum(std::move(a));
}

double FiniteGraph::in_weight(int v) const {
    require_finalized();
    std::vector<double> a;
    for (int ei : in_[v]) a.push_back(edges_[ei].alpha);
    return sorted_sum(std::move(a));
}

EnvironmentOnGraph sample_environment(const FiniteGraph& g, Rng& rng) {
    EnvironmentOnGraph env;
    env.prob.assign(g.n_edges(), 0.0);
    std::vector<double> shape, probs;
    for (int v = 0; v < g.n_vertices(); ++v) {
        const auto& oe = g.out_edges(v);
        if (oe.empty()) continue;
        shape.clear();
        for (int ei : oe) shape.push_back(g.edge(ei).alpha);
        probs.assign(shape.size(), 0.0);
        sample_dirichlet(shape, probs, rng);
        for (size_t k = 0; k < oe.size(); ++k) env.prob[oe[k]] = probs[k];
    }
    return env;
}

double divergence(const FiniteGraph& g, int x) {
    return g.out_weight(x) - g.in_weight(x);
}

namespace {

// Undirected connectivity of `f` inside g, ignoring edge direction.
bool connected_in_graph(const FiniteGraph& g, std::span<const int> f) {
    if (f.empty()) return false;
    std::vector<char> in_f(g.n_vertices(), 0), seen(g.n_vertices(), 0);
    for (int v : f) in_f[v] = 1;
    std::vector<int> stack{f[0]};
    seen[f[0]] = 1;
    size_t reached = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        auto visit = [&](int u) {
            if (in_f[u] && !seen[u]) {
                seen[u] = 1;
                ++reached;
                stack.push_back(u);
            }
        };
        for (int ei : g.out_edges(v)) visit(g.edge(ei).head);
        for (int ei : g.in_edges(v)) visit(g.edge(ei).tail);
    }
    return reached == f.size();
}

}  // namespace

Contraction contract(const FiniteGraph& g, std::span<const int> f) {
    if (f.empty()) throw std::invalid_argument("contract: empty vertex set");
    std::vector<char> in_f(g.n_vertices(), 0);
    for (int v : f) {
        if (v < 0 || v >= g.n_vertices()) throw std::invalid_argument("contract: vertex out of range");
        if (g.is_cemetery(v)) throw std::invalid_argument("contract: cemetery cannot be contracted");
        in_f[v] = 1;
    }
    if (!connected_in_graph(g, f))
        throw std::invalid_argument("contract: vertex set is not connected");

    std::string merged_label;
    for (int v = 0; v < g.n_vertices(); ++v) {
        if (!in_f[v]) continue;
        if (!merged_label.empty()) merged_label += "+";
        merged_label += g.label(v);
    }

    Contraction c;
    c.vertex_map.assign(g.n_vertices(), -1);
    int merged = -1;
    for (int v = 0; v < g.n_vertices(); ++v) {
        if (in_f[v]) {
            if (merged < 0) merged = c.graph.add_vertex(merged_label);
            c.vertex_map[v] = merged;
        } else if (g.is_cemetery(v)) {
            c.vertex_map[v] = c.graph.add_cemetery();
        } else {
            c.vertex_map[v] = c.graph.add_vertex(g.label(v));
        }
    }
    c.merged_vertex = merged;
    for (const Edge& e : g.edges()) {
        int t = c.vertex_map[e.tail], h = c.vertex_map[e.head];
        if (t == merged && h == merged) continue;  // interior edge vanishes
        c.graph.add_edge(t, h, e.alpha);
    }
    c.graph.finalize();
    return c;
}

namespace {

// Strongly connected components over edges with positive probability
// (Kosaraju, iterative).  Returns component id per vertex.
std::vector<int> scc_ids(const FiniteGraph& g, const EnvironmentOnGraph& env, int& n_comp) {
    const int n = g.n_vertices();
    std::vector<int> order;
    order.reserve(n);
    std::vector<char> seen(n, 0);
    for (int s = 0; s < n; ++s) {
        if (seen[s]) continue;
        // iterative DFS with explicit edge cursor
        std::vector<std::pair<int, size_t>> stack{{s, 0}};
        seen[s] = 1;
        while (!stack.empty()) {
            auto& [v, cur] = stack.back();
            const auto& oe = g.out_edges(v);
            bool advanced = false;
            while (cur < oe.size()) {
                int ei = oe[cur++];
                if (env.prob[ei] <= 0.0) continue;
                int u = g.edge(ei).head;
                if (!seen[u]) {
                    seen[u] = 1;
                    stack.emplace_back(u, 0);
                    advanced = true;
                    break;
                }
            }
            if (!advanced && cur >= oe.size()) {
                order.push_back(v);
                stack.pop_back();
            }
        }
    }
    std::vector<int> comp(n, -1);
    n_comp = 0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (comp[*it] >= 0) continue;
        std::vector<int> stack{*it};
        comp[*it] = n_comp;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int ei : g.in_edges(v)) {
                if (env.prob[ei] <= 0.0) continue;
                int u = g.edge(ei).tail;
                if (comp[u] < 0) {
                    comp[u] = n_comp;
                    stack.push_back(u);
                }
            }
        }
        ++n_comp;
    }
    return comp;
}

void check_stochastic(const FiniteGraph& g, const EnvironmentOnGraph& env) {
    if (env.prob.size() != g.n_edges())
        throw std::invalid_argument("environment does not match graph edge count");
    for (int v = 0; v < g.n_vertices(); ++v) {
        const auto& oe = g.out_edges(v);
        if (oe.empty()) continue;
        double s = 0.0;
        for (int ei : oe) {
            if (!(env.prob[ei] >= 0.0))
                throw std::invalid_argument("environment has a negative transition probability");
            s += env.prob[ei];
        }
        if (std::fabs(s - 1.0) > 1e-9)
            throw std::invalid_argument("environment row at vertex '" + g.label(v) +
                                        "' does not sum to 1");
    }
}

}  // namespace

std::vector<double> invariant_measure(const FiniteGraph& g, const EnvironmentOnGraph& env) {
    if (g.cemetery())
        throw std::invalid_argument("invariant_measure: chain with a cemetery is not conservative");
    check_stochastic(g, env);
    const int n = g.n_vertices();
    if (n == 0) throw std::invalid_argument("invariant_measure: empty graph");

    int n_comp = 0;
    std::vector<int> comp = scc_ids(g, env, n_comp);
    if (n_comp != 1) {
        std::string members;
        for (int v = 0; v < n; ++v)
            if (comp[v] == 0) members += (members.empty() ? "" : ", ") + g.label(v);
        throw std::invalid_argument(
            "invariant_measure: chain is reducible; class {" + members +
            "} does not communicate with the rest of the graph");
    }

    auto residual = [&](const std::vector<double>& pi) {
        std::vector<double> flow(n, 0.0);
        for (size_t i = 0; i < g.n_edges(); ++i)
            flow[g.edge(i).head] += pi[g.edge(i).tail] * env.prob[i];
        double r = 0.0;
        for (int v = 0; v < n; ++v) r = std::max(r, std::fabs(flow[v] - pi[v]));
        return r;
    };

    std::vector<double> pi(n, 0.0);
    if (n <= 2000) {
        // (P^T - I) pi = 0 with the last balance equation swapped for sum = 1.
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
        for (size_t i = 0; i < g.n_edges(); ++i)
            A(g.edge(i).head, g.edge(i).tail) += env.prob[i];
        for (int v = 0; v < n; ++v) A(v, v) -= 1.0;
        for (int v = 0; v < n; ++v) A(n - 1, v) = 1.0;
        Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
        b(n - 1) = 1.0;
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
        Eigen::VectorXd x = lu.solve(b);
        for (int pass = 0; pass < 4; ++pass) {
            Eigen::VectorXd r = A * x - b;
            x -= lu.solve(r);
        }
        for (int v = 0; v < n; ++v) pi[v] = x(v);
    } else {
        pi.assign(n, 1.0 / n);
        std::vector<double> next(n, 0.0);
        for (long iter = 0; iter < 2000000; ++iter) {
            std::fill(next.begin(), next.end(), 0.0);
            for (size_t i = 0; i < g.n_edges(); ++i)
                next[g.edge(i).head] += pi[g.edge(i).tail] * env.prob[i];
            double diff = 0.0, tot = 0.0;
            for (int v = 0; v < n; ++v) {
                diff = std::max(diff, std::fabs(next[v] - pi[v]));
                tot += next[v];
            }
            for (int v = 0; v < n; ++v) pi[v] = next[v] / tot;
            if (diff < 1e-14 && iter > 16) break;
        }
    }

    double total = 0.0;
    for (double p : pi) total += p;
    for (double& p : pi) p /= total;
    for (int v = 0; v < n; ++v)
        if (!(pi[v] > 0.0))
            throw std::runtime_error("invariant_measure: nonpositive stationary mass at '" +
                                     g.label(v) + "'");
    if (residual(pi) > 1e-12)
        throw std::runtime_error("invariant_measure: stationarity residual above 1e-12");
    return pi;
}

Reversal reverse_environment(const FiniteGraph& g, const EnvironmentOnGraph& env) {
    Reversal r;
    r.pi = invariant_measure(g, env);
    for (int v = 0; v < g.n_vertices(); ++v) r.graph.add_vertex(g.label(v));
    r.env.prob.assign(g.n_edges(), 0.0);
    r.edge_map.resize(g.n_edges());
    for (size_t i = 0; i < g.n_edges(); ++i) {
        const Edge& e = g.edge(i);
        r.graph.add_edge(e.head, e.tail, e.alpha);
        r.env.prob[i] = r.pi[e.tail] * env.prob[i] / r.pi[e.head];
        r.edge_map[i] = i;
    }
    r.graph.finalize();
    // Stationarity makes every reversed row sum to 1 up to roundoff; verify,
    // then renormalise so downstream simplex checks see exact rows.
    for (int v = 0; v < r.graph.n_vertices(); ++v) {
        const auto& oe = r.graph.out_edges(v);
        if (oe.empty()) continue;
        double s = 0.0;
        for (int ei : oe) s += r.env.prob[ei];
        if (std::fabs(s - 1.0) > 1e-12)
            throw std::runtime_error("reverse_environment: reversed row at '" + r.graph.label(v) +
                                     "' sums to " + std::to_string(s));
        for (int ei : oe) r.env.prob[ei] /= s;
    }
    return r;
}

namespace {

struct CutEnumerator {
    const FiniteGraph& g;
    std::vector<std::vector<int>> und_adj;  // undirected neighbours, cemetery removed
    std::vector<char> in_k;
    std::vector<int> k;
    std::vector<char> in_s;
    size_t s_needed = 0, s_have = 0;
    size_t max_size = 0, budget = 0, visited = 0;
    double best = 0.0;
    std::vector<int> best_set;
    bool found = false;

    CutEnumerator(const FiniteGraph& graph) : g(graph) {
        und_adj.assign(g.n_vertices(), {});
        for (const Edge& e : g.edges()) {
            if (!g.is_cemetery(e.head)) und_adj[e.tail].push_back(e.head);
            if (!g.is_cemetery(e.tail)) und_adj[e.head].push_back(e.tail);
        }
        for (auto& nb : und_adj) {
            std::sort(nb.begin(), nb.end());
            nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
        }
        in_k.assign(g.n_vertices(), 0);
        in_s.assign(g.n_vertices(), 0);
    }

    double cut_weight() const {
        std::vector<double> a;
        for (int v : k)
            for (int ei : g.out_edges(v))
                if (!in_k[g.edge(ei).head]) a.push_back(g.edge(ei).alpha);
        return sorted_sum(std::move(a));
    }

    void consider() {
        if (++visited > budget) throw BudgetExceeded(budget);
        if (k.size() < 2 || s_have < s_needed) return;
        double w = cut_weight();
        if (!found || w < best) {
            best = w;
            best_set = k;
            std::sort(best_set.begin(), best_set.end());
            found = true;
        }
    }

    void push(int v) {
        in_k[v] = 1;
        k.push_back(v);
        if (in_s[v]) ++s_have;
    }
    void pop() {
        int v = k.back();
        if (in_s[v]) --s_have;
        in_k[v] = 0;
        k.pop_back();
    }

    // Enumerates every connected superset of the current set exactly once.
    // Each neighbour chosen at a level is forbidden for the later branches
    // of the same level, which kills duplicate orderings.
    void grow(std::vector<char>& forbidden) {
        consider();
        if (k.size() >= max_size) return;
        std::vector<int> frontier;
        for (int v : k)
            for (int u : und_adj[v])
                if (!in_k[u] && !forbidden[u]) {
                    frontier.push_back(u);
                    forbidden[u] = 1;  // dedupe the frontier itself
                }
        for (int u : frontier) forbidden[u] = 0;
        std::sort(frontier.begin(), frontier.end());
        frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());
        std::vector<int> taken;
        for (int u : frontier) {
            push(u);
            grow(forbidden);
            pop();
            forbidden[u] = 1;
            taken.push_back(u);
        }
        for (int u : taken) forbidden[u] = 0;
    }
};

}  // namespace

KappaSetResult kappa_of_set(const FiniteGraph& g, int root, std::span<const int> S,
                            const KappaSetOptions& opt) {
    if (root < 0 || root >= g.n_vertices() || g.is_cemetery(root))
        throw std::invalid_argument("kappa_of_set: invalid root");
    CutEnumerator en(g);
    en.in_s[root] = 1;
    for (int v : S) {
        if (v < 0 || v >= g.n_vertices() || g.is_cemetery(v))
            throw std::invalid_argument("kappa_of_set: invalid vertex in S");
        en.in_s[v] = 1;
    }
    size_t base = 0;
    for (char c : en.in_s) base += c;
    en.s_needed = base;
    en.max_size = opt.max_set_size ? opt.max_set_size : base + 3;
    if (en.max_size < std::max<size_t>(base, 2))
        throw std::invalid_argument("kappa_of_set: max_set_size below the required base set");
    en.budget = opt.budget;

    en.push(root);
    std::vector<char> forbidden(g.n_vertices(), 0);
    forbidden[root] = 1;
    en.grow(forbidden);

    if (!en.found)
        throw std::runtime_error(
            "kappa_of_set: no connected set within the size cap contains the required vertices");
    KappaSetResult res;
    res.value = en.best;
    res.argmin = en.best_set;
    res.candidates = en.visited;
    return res;
}

std::vector<double> hitting_probability(const FiniteGraph& g, const EnvironmentOnGraph& env,
                                        std::span<const int> absorbing,
                                        std::span<const double> value) {
    check_stochastic(g, env);
    if (absorbing.size() != value.size())
        throw std::invalid_argument("hitting_probability: absorbing/value size mismatch");
    const int n = g.n_vertices();
    std::vector<double> fixed(n, 0.0);
    std::vector<char> is_fixed(n, 0);
    if (auto c = g.cemetery()) {
        is_fixed[*c] = 1;
        fixed[*c] = 0.0;
    }
    for (size_t i = 0; i < absorbing.size(); ++i) {
        is_fixed[absorbing[i]] = 1;
        fixed[absorbing[i]] = value[i];
    }
    std::vector<int> unknown, col(n, -1);
    for (int v = 0; v < n; ++v)
        if (!is_fixed[v]) {
            col[v] = static_cast<int>(unknown.size());
            unknown.push_back(v);
        }
    const int m = static_cast<int>(unknown.size());
    std::vector<double> h = fixed;
    if (m == 0) return h;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
    for (int r = 0; r < m; ++r) {
        int v = unknown[r];
        A(r, r) = 1.0;
        for (int ei : g.out_edges(v)) {
            const Edge& e = g.edge(ei);
            double p = env.prob[ei];
            if (is_fixed[e.head])
                b(r) += p * fixed[e.head];
            else
                A(r, col[e.head]) -= p;
        }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    Eigen::VectorXd x = lu.solve(b);
    Eigen::VectorXd resv = A * x - b;
    x -= lu.solve(resv);
    for (int r = 0; r < m; ++r) h[unknown[r]] = x(r);
    return h;
}

ReturnBound return_probability_beta_bound(const FiniteGraph& g, const EnvironmentOnGraph& env,
                                          int x, int y) {
    if (x == y) throw std::invalid_argument("return_probability_beta_bound: x == y");
    ReturnBound out;
    // h(z) = P_z(hit y before x); from x the first step decides the race.
    std::vector<int> abs{x, y};
    std::vector<double> val{0.0, 1.0};
    std::vector<double> h = hitting_probability(g, env, abs, val);
    double lhs = 0.0;
    for (int ei : g.out_edges(x)) {
        const Edge& e = g.edge(ei);
        lhs += env.prob[ei] * (e.head == y ? 1.0 : h[e.head]);
    }
    out.lhs = lhs;
    Reversal rev = reverse_environment(g, env);
    double rhs = 0.0;
    for (int ei : rev.graph.out_edges(x))
        if (rev.graph.edge(ei).head == y) rhs += rev.env.prob[ei];
    out.rhs = rhs;
    return out;
}

BetaParams reversed_step_beta_params(const FiniteGraph& g, int x, int y) {
    BetaParams bp;
    std::vector<double> a;
    for (int ei : g.in_edges(x))
        if (g.edge(ei).tail == y) a.push_back(g.edge(ei).alpha);
    bp.a = sorted_sum(std::move(a));
    bp.b = g.in_weight(x) - bp.a;
    if (!(bp.a > 0.0) || !(bp.b > 0.0))
        throw std::invalid_argument("reversed_step_beta_params: needs an edge y->x and more weight into x");
    return bp;
}

FiniteGraph read_edge_list(const std::string& text) {
    FiniteGraph g;
    std::map<std::string, int> id;
    auto vertex = [&](const std::string& lbl) {
        auto it = id.find(lbl);
        if (it != id.end()) return it->second;
        int v = (lbl == "@") ? g.add_cemetery() : g.add_vertex(lbl);
        id.emplace(lbl, v);
        return v;
    };
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        std::istringstream ls(line);
        std::string t, h;
        double w;
        if (!(ls >> t)) continue;  // blank
        if (!(ls >> h >> w))
            throw std::invalid_argument("edge list line " + std::to_string(lineno) +
                                        ": expected 'tail head weight'");
        g.add_edge(vertex(t), vertex(h), w);
    }
    g.finalize();
    return g;
}

std::string write_edge_list(const FiniteGraph& g) {
    std::string out;
    char buf[64];
    for (const Edge& e : g.edges()) {
        std::snprintf(buf, sizeof buf, "%.17g", e.alpha);
        out += g.label(e.tail) + " " + g.label(e.head) + " " + buf + "\n";
    }
    return out;
}

}  // namespace rwde
