#pragma once

// Finite directed multigraphs carrying Dirichlet weights, plus the exact
// linear-algebra side of the toolkit: stationary measures, time reversal,
// absorption probabilities and the minimal-cut exponent kappa(S).
//
// Vertices are dense ids 0..n-1 with optional string labels.  Parallel edges
// are first-class (contraction creates them and the moment calculus needs
// their multiplicity), so edges live in a flat array and adjacency is by
// edge index.  An optional cemetery vertex absorbs the walk; it has no
// outgoing edges and is excluded from cut enumeration.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rwde/rng.hpp"

namespace rwde {

struct Edge {
    int tail = 0;
    int head = 0;
    double alpha = 0.0;
};

class FiniteGraph {
  public:
    FiniteGraph() = default;

    int add_vertex(std::string label);
    // Adds a vertex labelled "@" and marks it as the cemetery.
    int add_cemetery();
    void add_edge(int tail, int head, double alpha);

    // Recomputes adjacency; call after the last add_*.  Throws if an edge
    // leaves the cemetery or a weight is not positive.
    void finalize();

    int n_vertices() const { return static_cast<int>(labels_.size()); }
    size_t n_edges() const { return edges_.size(); }
    const std::vector<Edge>& edges() const { return edges_; }
    const Edge& edge(size_t i) const { return edges_[i]; }
    const std::string& label(int v) const { return labels_[v]; }
    std::optional<int> cemetery() const { return cemetery_; }
    bool is_cemetery(int v) const { return cemetery_ && *cemetery_ == v; }
    int vertex_by_label(const std::string& name) const;  // -1 if absent

    const std::vector<int>& out_edges(int v) const { return out_[v]; }
    const std::vector<int>& in_edges(int v) const { return in_[v]; }

    double out_weight(int v) const;
    double in_weight(int v) const;

  private:
    std::vector<std::string> labels_;
    std::vector<Edge> edges_;
    std::vector<std::vector<int>> out_, in_;
    std::optional<int> cemetery_;
    bool finalized_ = false;
    void require_finalized() const {
        if (!finalized_) throw std::logic_error("FiniteGraph: finalize() not called");
    }
};

// Transition probabilities aligned with the graph's edge array.  For each
// non-cemetery vertex the probabilities over its out-edges form a simplex.
struct EnvironmentOnGraph {
    std::vector<double> prob;  // one entry per edge
};

// Independent Dirichlet draw at every vertex with out-degree > 0, using the
// edge weights as shape parameters.  Deterministic in (graph, rng state).
EnvironmentOnGraph sample_environment(const FiniteGraph& g, Rng& rng);

// Net weight flow at x: sum of outgoing alphas minus sum of incoming alphas.
double divergence(const FiniteGraph& g, int x);

struct Contraction {
    FiniteGraph graph;
    int merged_vertex = 0;
    std::vector<int> vertex_map;  // old id -> new id
};

// Glue the vertices of f (undirected-connected, no cemetery) into a single
// vertex.  Internal edges disappear; all other edges keep their weight and
// multiplicity.
Contraction contract(const FiniteGraph& g, std::span<const int> f);

// Stationary probability vector of the quenched chain.  Requires no
// cemetery and an irreducible chain; on a reducible chain the error message
// names a non-communicating class.  Dense solve up to 2000 vertices
// (residual checked against 1e-12), power iteration beyond that.
std::vector<double> invariant_measure(const FiniteGraph& g, const EnvironmentOnGraph& env);

struct Reversal {
    FiniteGraph graph;               // same vertex ids, every edge reversed
    EnvironmentOnGraph env;          // reversed-chain transition probabilities
    std::vector<double> pi;          // stationary measure used for the reversal
    std::vector<size_t> edge_map;    // reversed edge i corresponds to original edge_map[i]
};

// Time reversal: hat-omega(y,x) = pi(x) omega(x,y) / pi(y) on the reversed
// graph, with the reversed edge inheriting the original weight.  Row sums
// are checked against 1 within 1e-12 and then renormalised exactly.
Reversal reverse_environment(const FiniteGraph& g, const EnvironmentOnGraph& env);

struct KappaSetOptions {
    size_t max_set_size = 0;     // 0: default |S| + 3
    size_t budget = 1000000;     // enumeration cap, exceeding it throws BudgetExceeded
};

struct KappaSetResult {
    double value = 0.0;
    std::vector<int> argmin;     // a minimising vertex set
    size_t candidates = 0;       // connected sets examined
};

class BudgetExceeded : public std::runtime_error {
  public:
    explicit BudgetExceeded(size_t budget)
        : std::runtime_error("kappa_of_set: enumeration budget of " +
                             std::to_string(budget) + " candidate sets exceeded") {}
};

// kappa(S) = min over connected vertex sets K containing S (and strictly
// containing {root}) of the total weight on edges leaving K.  Enumeration is
// exhaustive over connected supersets up to max_set_size vertices; sets are
// never silently skipped -- exceeding the budget throws.  The cemetery may
// carry boundary edges but can never belong to K.
KappaSetResult kappa_of_set(const FiniteGraph& g, int root, std::span<const int> S,
                            const KappaSetOptions& opt = {});

// P_z(hit target before absorption elsewhere), exact dense solve.  `value`
// gives the boundary condition on the absorbing set; the cemetery (if any)
// is absorbing with value 0.
std::vector<double> hitting_probability(const FiniteGraph& g, const EnvironmentOnGraph& env,
                                        std::span<const int> absorbing,
                                        std::span<const double> value);

struct ReturnBound {
    double lhs = 0.0;  // P_x(hit y strictly before returning to x)
    double rhs = 0.0;  // first-step probability x -> y of the reversed chain
};

// The time-reversal lower bound on escape probabilities: starting from x the
// walk reaches y before returning to x at least as often as the reversed
// chain jumps x -> y in one step.  lhs by exact absorption solve, rhs read
// off reverse_environment.  Under a null-divergence weight vector the rhs is
// Beta(alpha(y,x), alpha_x - alpha(y,x))-distributed.
ReturnBound return_probability_beta_bound(const FiniteGraph& g, const EnvironmentOnGraph& env,
                                          int x, int y);

struct BetaParams {
    double a = 0.0, b = 0.0;
};

// Parameters of the Beta law of the reversed first-step probability x -> y.
BetaParams reversed_step_beta_params(const FiniteGraph& g, int x, int y);

// Edge-list text format: one "tail head weight" triple per line, '#'
// comments; the label "@" denotes the cemetery.
FiniteGraph read_edge_list(const std::string& text);
std::string write_edge_list(const FiniteGraph& g);

}  // namespace rwde
