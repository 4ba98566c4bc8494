#pragma once

// Closed-form moment identities for products of independent Dirichlet rows.
// Everything reduces to the normalising constant
//   Z(theta) = prod_e Gamma(theta_e) / prod_x Gamma(theta(x)),
// theta(x) = total weight leaving x, taken over vertices with out-degree > 0.

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "rwde/finite_graph.hpp"
#include "rwde/stats.hpp"

namespace rwde {

// One real exponent per edge, aligned with FiniteGraph::edges().
using EdgeExponents = std::vector<double>;

inline double log_normalizer(const FiniteGraph& g, std::span<const double> theta) {
    if (theta.size() != g.n_edges())
        throw std::invalid_argument("log_normalizer: exponent vector does not match edge count");
    double lz = 0.0;
    for (size_t i = 0; i < g.n_edges(); ++i) {
        if (!(theta[i] > 0.0)) throw std::domain_error("log_normalizer: nonpositive shape");
        lz += std::lgamma(theta[i]);
    }
    for (int v = 0; v < g.n_vertices(); ++v) {
        const auto& oe = g.out_edges(v);
        if (oe.empty()) continue;
        std::vector<double> row;
        for (int ei : oe) row.push_back(theta[ei]);
        lz -= std::lgamma(sorted_sum(std::move(row)));
    }
    return lz;
}

// E[ prod_e omega_e^{xi_e} ] = Z(alpha + xi) / Z(alpha).  Returns +infinity
// when some alpha_e + xi_e <= 0 (the moment diverges there).
inline double joint_moment(const FiniteGraph& g, std::span<const double> xi) {
    if (xi.size() != g.n_edges())
        throw std::invalid_argument("joint_moment: exponent vector does not match edge count");
    std::vector<double> shifted(g.n_edges());
    for (size_t i = 0; i < g.n_edges(); ++i) {
        shifted[i] = g.edge(i).alpha + xi[i];
        if (!(shifted[i] > 0.0)) return std::numeric_limits<double>::infinity();
    }
    std::vector<double> base(g.n_edges());
    for (size_t i = 0; i < g.n_edges(); ++i) base[i] = g.edge(i).alpha;
    return std::exp(log_normalizer(g, shifted) - log_normalizer(g, base));
}

// Radon-Nikodym weight of the plain edge law against its exponent tilt,
//   dP(alpha)/dP(alpha+xi) = Z(alpha+xi)/Z(alpha) * prod_e omega_e^{-xi_e},
// evaluated at the environment omega.  Averaging it (or it times any test
// function) under the tilted law recovers plain-law expectations; in
// particular its tilted mean is exactly 1.  +infinity when omega_e = 0 meets
// xi_e > 0 (the factor blows up there); requires alpha_e + xi_e > 0 so the
// tilted law exists.
inline double measure_change_weight(const FiniteGraph& g, const EnvironmentOnGraph& env,
                                    std::span<const double> xi) {
    if (xi.size() != g.n_edges() || env.prob.size() != g.n_edges())
        throw std::invalid_argument("measure_change_weight: size mismatch");
    std::vector<double> base(g.n_edges()), shifted(g.n_edges());
    for (size_t i = 0; i < g.n_edges(); ++i) {
        base[i] = g.edge(i).alpha;
        shifted[i] = base[i] + xi[i];
        if (!(shifted[i] > 0.0))
            throw std::domain_error("measure_change_weight: alpha + xi must stay positive");
    }
    double lw = log_normalizer(g, shifted) - log_normalizer(g, base);
    for (size_t i = 0; i < g.n_edges(); ++i) {
        if (xi[i] == 0.0) continue;
        if (env.prob[i] <= 0.0) {
            if (xi[i] > 0.0) return std::numeric_limits<double>::infinity();
            throw std::domain_error("measure_change_weight: omega_e = 0 with xi_e < 0");
        }
        lw -= xi[i] * std::log(env.prob[i]);
    }
    return std::exp(lw);
}

}  // namespace rwde
