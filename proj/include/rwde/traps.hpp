#pragma once

// Edge traps: nearest-neighbour pairs whose mutual transition mass exceeds
// 3/2.  This module locates them, splits a walk's time budget into inside
// and outside parts (an exact integer identity), collapses in-trap
// oscillations into the forgotten walk, and estimates strength and holding
// time tails for a single trap edge by direct two-vertex Monte Carlo.

#include <cstdint>
#include <span>
#include <vector>

#include "rwde/lattice_env.hpp"
#include "rwde/stats.hpp"
#include "rwde/walk.hpp"
#include "rwde/weights.hpp"

namespace rwde {

// omega(x,y) + omega(y,x) > kTrapThreshold makes {x,y} a trap.  Any vertex
// belongs to at most one trap: two traps sharing x would both need more
// than 1/2 of x's outgoing mass.
inline constexpr double kTrapThreshold = 1.5;

struct TrapSite {
    LatticePoint x, y;     // y = x + e_dir
    int dir = 0;           // positive axis index
    double sum = 0.0;      // omega(x,y) + omega(y,x)
    double strength = 0.0; // s = 1 / (u + v), u = 1-omega(x,y), v = 1-omega(y,x)
    double p_round = 0.0;  // omega(x,y) * omega(y,x), the round-trip mass
};

// Tests the edge (p, p + e_dir).  Complements u, v are assembled from the
// off-edge row entries so strong traps do not lose precision to 1 - p.
TrapSite probe_trap_edge(const LatticeEnvironment& env, const LatticePoint& p, int dir);

bool is_trap(const TrapSite& site);

// All trap edges with both endpoints inside the box, each counted once via
// its positive direction.
std::vector<TrapSite> find_traps(const LatticeEnvironment& env, const Box& box);

struct PerTrapStats {
    TrapSite site;
    long n_exits = 0;                   // completed visits before the cutoff
    long total_crossings = 0;           // in-trap steps over completed visits
    std::vector<long> visit_crossings;  // one entry per completed visit
    bool touched_open = false;          // the straddling visit sits in this trap
};

struct T1Decomposition {
    long t1 = 0;
    long outside_steps = 0;   // steps taken from vertices in no trap
    long trap_steps = 0;      // sum over traps of exits + crossings, plus the open tail
    long open_visit_len = 0;  // crossings of the visit cut by the horizon, no exit counted
    std::vector<PerTrapStats> traps;
    bool identity_ok = false;  // t1 == outside_steps + trap_steps, exactly
};

// Attributes every step before t1 to the trap containing its starting
// vertex, or to the outside.  A completed visit of run length r contributes
// r - 1 crossings and one exit step; the visit cut by t1 contributes its
// crossings only.
T1Decomposition decompose_T1(const LatticeEnvironment& env, const WalkTrace& trace, size_t t1);

struct ForgottenWalk {
    std::vector<size_t> kept_times;
    std::vector<LatticePoint> path;
    bool trailing_open = false;  // trace ended inside the trap; that visit is dropped
};

// Collapses every completed visit of the trap {fx, fy} down to its entry
// and final vertex; outside positions are kept as they are.
ForgottenWalk forget(const WalkTrace& trace, const LatticePoint& fx, const LatticePoint& fy,
                     size_t upto);

struct TrapConfig {
    int j = 0;  // axis of the trap edge
    // completed visits keyed by (entry vertex, exit-from vertex); x is the
    // vertex of the pair the walk hits first
    long n_xx = 0, n_xy = 0, n_yx = 0, n_yy = 0;

    long n_total() const { return n_xx + n_xy + n_yx + n_yy; }
    bool operator==(const TrapConfig&) const = default;
};

TrapConfig trap_config_from_trace(const WalkTrace& trace, const LatticePoint& fx,
                                  const LatticePoint& fy, int dir, size_t upto);
TrapConfig trap_config_from_forgotten(const ForgottenWalk& fw, const LatticePoint& fx,
                                      const LatticePoint& fy, int dir);

// Native two-vertex draw for one candidate trap edge along `axis`: u and v
// are built from their own gamma sums, never as 1 - p.
struct TwoVertexDraw {
    double u = 0.0, v = 0.0;            // escape masses at x and y
    double omega_xy = 0.0, omega_yx = 0.0;
};

TwoVertexDraw sample_trap_edge(const Weights& w, int axis, Rng& rng);

struct TailCurve {
    std::vector<double> x;       // thresholds
    std::vector<double> p_hat;   // tail probability estimates
    std::vector<double> se;      // standard errors
    std::vector<long> hits;      // raw counts (unweighted runs)
    SlopeFit fit;                // log p against log x on well-hit bins
    double expected_exponent = 0.0;
};

// P(s >= A) over the unconditioned two-vertex law; the reference exponent
// is kappa_j of the weight vector.
TailCurve trap_strength_tail(const Weights& w, int axis, std::span<const double> A_grid,
                             long n, uint64_t seed, long min_hits = 50);

// Importance-weighted conditional tails given a visit configuration.  The
// environment is drawn from the two-vertex law restricted to traps and
// reweighted by the likelihood of the configuration, so the estimates are
// exact conditional probabilities up to Monte Carlo error.
struct ConditionalTail {
    TailCurve strength;           // P(s >= A | config)
    std::vector<double> w_env;    // envelope widths 5(N + 2 alpha_0)/(2A)
    double weight_mean = 0.0;     // average importance weight (diagnostic)
    double weight_ess = 0.0;      // effective sample size of the weights
};

ConditionalTail conditional_strength_tail(const Weights& w, int axis, const TrapConfig& config,
                                          std::span<const double> A_grid, long n, uint64_t seed);

// P(total in-trap time >= x, s >= eps * x | config), the joint tail whose
// decay matches the strength exponent.
TailCurve trap_time_tail_given_config(const Weights& w, int axis, const TrapConfig& config,
                                      std::span<const double> x_grid, double eps, long n,
                                      uint64_t seed);

struct EnvelopeCheck {
    bool feasible = false;
    double d_hat = 0.0;    // witness constant when feasible
    double lo = 0.0, hi = 0.0;  // intersection of per-threshold bands
};

// Tests whether one constant D places the whole conditional strength curve
// inside D * A^{-kappa_j} * exp(-/+ w(A)) bands, with 4 standard errors of
// slack per point.
EnvelopeCheck envelope_check(const ConditionalTail& tail, double kappa_j);

struct GeometricMomentRow {
    double p = 0.0, beta = 0.0;
    double value = 0.0;  // MC estimate of E[N^beta] * p^beta, N geometric on {1,2,...}
    double se = 0.0;
};

// Checks that E[N^beta] scales like p^(-beta): the normalized moment stays
// bounded over the whole p grid (exactly 1 at beta = 1, and 2 - p at beta = 2).
std::vector<GeometricMomentRow> geometric_moment_check(std::span<const double> p_grid,
                                                       std::span<const double> beta_grid,
                                                       long n_samples, uint64_t seed);

}  // namespace rwde
