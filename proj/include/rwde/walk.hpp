#pragma once

// Quenched walk simulation on a lazy lattice environment plus the renewal
// decomposition of ballistic trajectories: drift-direction record times at
// which the past and future of the walk separate into disjoint slabs.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rwde/lattice_env.hpp"

namespace rwde {

struct WalkTrace {
    int d = 0;
    uint64_t master_seed = 0;
    uint64_t replica = 0;
    std::vector<LatticePoint> positions;  // X_0 .. X_N

    size_t steps() const { return positions.empty() ? 0 : positions.size() - 1; }
};

// One quenched step from p; returns the direction taken.  Inverse-CDF over
// the 2d-row with the last direction absorbing any float residue.
int walk_step(const LatticeEnvironment& env, const LatticePoint& p, Rng& rng,
              LatticePoint* next);

WalkTrace start_walk(const LatticeEnvironment& env, const LatticePoint& start,
                     uint64_t replica = 0);

// Appends `extra` steps.  Extending a trace and simulating the longer walk
// in one go draw the same stream, so the two agree bit for bit as long as
// nothing else touches this rng.
void extend_walk(const LatticeEnvironment& env, WalkTrace& trace, size_t extra, Rng& rng);

WalkTrace simulate_walk(const LatticeEnvironment& env, const LatticePoint& start,
                        size_t n_steps, Rng& rng, uint64_t replica = 0);

// Same, but stops as soon as the walk lands on a point where stop() is true
// (the stopping point is kept in the trace).  n_steps still caps the length.
WalkTrace simulate_walk(const LatticeEnvironment& env, const LatticePoint& start,
                        size_t n_steps, Rng& rng,
                        const std::function<bool(const LatticePoint&)>& stop,
                        uint64_t replica = 0);

double dot_level(const LatticePoint& p, std::span<const double> u);
double l2_norm(const LatticePoint& p, int d);

std::optional<size_t> first_hit(const WalkTrace& trace, const LatticePoint& target);
// First t >= 1 with X_t == X_0.
std::optional<size_t> first_return(const WalkTrace& trace);

struct HittingTimes {
    std::optional<size_t> entry;     // first t >= 0 with X_t in V
    std::optional<size_t> strict;    // first t >= 1 with X_t in V
    std::optional<size_t> re_entry;  // first t >= 1 in V after time spent outside
};

// All three hitting times of the vertex set V along one trace.  When the walk
// starts outside V the three coincide; starting inside, re_entry is the first
// time the set is hit again after leaving it.
HittingTimes hitting_times(const WalkTrace& trace, std::span<const LatticePoint> V);

struct RenewalOptions {
    double a = 0.0;                 // slab width, must exceed 2*sqrt(d)
    std::vector<double> u_hat;      // unit direction, |u| = 1 within 1e-12
    size_t confirm_window = 384;    // future steps required to trust "no dip"
};

struct RenewalRecord {
    std::vector<size_t> times;            // promoted renewal times, increasing
    std::vector<LatticePoint> points;     // X at those times
    bool censored = false;                // a candidate was blocked only by the horizon
    std::optional<size_t> tail_candidate; // that candidate's time, when censored
    size_t horizon = 0;                   // N, the number of observed steps
    double a = 0.0;
    std::vector<double> u_hat;
};

// Scans the trace once.  A candidate is the first passage above (running
// max at the last failure) + a; it is promoted when the observed future
// never drops below its level and is at least confirm_window steps long.
// A candidate failing only the window test ends the scan as censored.
RenewalRecord detect_renewals(const WalkTrace& trace, const RenewalOptions& opt);

struct FirstRenewalSegment {
    double t1 = 0.0;        // first renewal time
    double max_norm = 0.0;  // max Euclidean displacement before it
};

struct ConditionTReport {
    std::vector<double> c_grid;
    std::vector<double> log_mean;    // log E[exp(c * max_norm)], sample version
    std::vector<double> half_ratio;  // half-sample estimate over full-sample
    std::vector<char> stable;        // ratio within [0.8, 1.25]
    double largest_stable_c = 0.0;   // largest grid prefix that stays stable
};

// Monte Carlo probe of exponential integrability of the pre-renewal
// displacement: for each c in the grid, the sample estimate of
// E[exp(c max|X|)] and a half-versus-full stability check.  Estimates are
// formed in log space.
ConditionTReport condition_T_statistic(std::span<const FirstRenewalSegment> segs,
                                       std::span<const double> c_grid);

}  // namespace rwde
