#include "rwde/traps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace rwde {

TrapSite probe_trap_edge(const LatticeEnvironment& env, const LatticePoint& p, int dir) {
    const int d = env.dim();
    if (dir < 0 || dir >= d) throw std::invalid_argument("probe_trap_edge: need a positive axis");
    TrapSite s;
    s.x = p;
    s.y = neighbor(p, dir, d);
    s.dir = dir;
    std::vector<double> row_x = env.env_at(s.x);
    std::vector<double> row_y = env.env_at(s.y);
    const int back = dir + d;
    // escape masses as sums of the off-edge entries, not 1 - p
    std::vector<double> ux, vy;
    for (int k = 0; k < 2 * d; ++k) {
        if (k != dir) ux.push_back(row_x[k]);
        if (k != back) vy.push_back(row_y[k]);
    }
    const double u = sorted_sum(std::move(ux));
    const double v = sorted_sum(std::move(vy));
    s.sum = row_x[dir] + row_y[back];
    s.strength = 1.0 / (u + v);
    s.p_round = row_x[dir] * row_y[back];
    return s;
}

bool is_trap(const TrapSite& site) { return site.sum > kTrapThreshold; }

std::vector<TrapSite> find_traps(const LatticeEnvironment& env, const Box& box) {
    std::vector<TrapSite> out;
    box.for_each([&](const LatticePoint& p) {
        for (int j = 0; j < env.dim(); ++j) {
            LatticePoint q = neighbor(p, j, env.dim());
            if (!box.contains(q)) continue;
            TrapSite s = probe_trap_edge(env, p, j);
            if (is_trap(s)) out.push_back(s);
        }
    });
    return out;
}

namespace {

// Lazy vertex -> trap lookup.  A vertex can sit in at most one trap, so the
// first hit among its 2d incident edges settles it.
struct TrapIndex {
    const LatticeEnvironment& env;
    std::vector<TrapSite> sites;
    std::unordered_map<LatticePoint, int, LatticePointHash> canon;   // site.x -> id
    std::unordered_map<LatticePoint, int, LatticePointHash> vertex;  // vertex -> id or -1

    explicit TrapIndex(const LatticeEnvironment& e) : env(e) {}

    int site_id(const TrapSite& s) {
        auto [it, fresh] = canon.try_emplace(s.x, static_cast<int>(sites.size()));
        if (fresh) sites.push_back(s);
        // two traps cannot share the canonical vertex either, so on a repeat
        // the stored site is the same edge
        return it->second;
    }

    int trap_at(const LatticePoint& p) {
        if (auto it = vertex.find(p); it != vertex.end()) return it->second;
        int id = -1;
        for (int j = 0; j < env.dim() && id < 0; ++j) {
            TrapSite s = probe_trap_edge(env, p, j);
            if (is_trap(s)) id = site_id(s);
        }
        for (int j = 0; j < env.dim() && id < 0; ++j) {
            TrapSite s = probe_trap_edge(env, neighbor(p, j + env.dim(), env.dim()), j);
            if (is_trap(s)) id = site_id(s);
        }
        vertex.emplace(p, id);
        return id;
    }
};

}  // namespace

T1Decomposition decompose_T1(const LatticeEnvironment& env, const WalkTrace& trace, size_t t1) {
    if (t1 >= trace.positions.size())
        throw std::invalid_argument("decompose_T1: t1 beyond the trace");
    T1Decomposition dec;
    dec.t1 = static_cast<long>(t1);
    TrapIndex idx(env);
    std::vector<int> tid(t1 + 1);
    for (size_t t = 0; t <= t1; ++t) tid[t] = idx.trap_at(trace.positions[t]);

    std::vector<PerTrapStats> stats;
    std::unordered_map<int, size_t> slot;  // trap id -> stats position
    auto stats_for = [&](int id) -> PerTrapStats& {
        auto [it, fresh] = slot.try_emplace(id, stats.size());
        if (fresh) {
            stats.emplace_back();
            stats.back().site = idx.sites[id];
        }
        return stats[it->second];
    };

    size_t t = 0;
    while (t <= t1) {
        if (tid[t] < 0) {
            if (t < t1) ++dec.outside_steps;
            ++t;
            continue;
        }
        size_t s = t;
        while (t + 1 <= t1 && tid[t + 1] == tid[s]) ++t;
        // run of the same trap over positions [s, t]
        PerTrapStats& ps = stats_for(tid[s]);
        if (t < t1) {
            long crossings = static_cast<long>(t - s);
            ps.n_exits += 1;
            ps.total_crossings += crossings;
            ps.visit_crossings.push_back(crossings);
        } else {
            ps.touched_open = true;
            dec.open_visit_len = static_cast<long>(t1 - s);
        }
        ++t;
    }
    long trap_steps = dec.open_visit_len;
    for (const PerTrapStats& ps : stats) trap_steps += ps.n_exits + ps.total_crossings;
    dec.trap_steps = trap_steps;
    dec.traps = std::move(stats);
    dec.identity_ok = (dec.t1 == dec.outside_steps + dec.trap_steps);
    return dec;
}

ForgottenWalk forget(const WalkTrace& trace, const LatticePoint& fx, const LatticePoint& fy,
                     size_t upto) {
    if (upto >= trace.positions.size())
        throw std::invalid_argument("forget: cutoff beyond the trace");
    ForgottenWalk fw;
    auto in_f = [&](size_t t) {
        return trace.positions[t] == fx || trace.positions[t] == fy;
    };
    size_t t = 0;
    while (t <= upto) {
        if (!in_f(t)) {
            fw.kept_times.push_back(t);
            ++t;
            continue;
        }
        size_t s = t;
        while (t + 1 <= upto && in_f(t + 1)) ++t;
        if (t == upto && in_f(upto)) {
            // the final visit never exits inside the window; drop it
            fw.trailing_open = true;
            break;
        }
        fw.kept_times.push_back(s);
        if (t != s) fw.kept_times.push_back(t);
        ++t;
    }
    fw.path.reserve(fw.kept_times.size());
    for (size_t kt : fw.kept_times) fw.path.push_back(trace.positions[kt]);
    return fw;
}

namespace {

void count_visit(TrapConfig& cfg, bool enter_x, bool exit_x) {
    if (enter_x && exit_x)
        ++cfg.n_xx;
    else if (enter_x && !exit_x)
        ++cfg.n_xy;
    else if (!enter_x && exit_x)
        ++cfg.n_yx;
    else
        ++cfg.n_yy;
}

}  // namespace

TrapConfig trap_config_from_trace(const WalkTrace& trace, const LatticePoint& fx,
                                  const LatticePoint& fy, int dir, size_t upto) {
    TrapConfig cfg;
    cfg.j = dir;
    auto in_f = [&](size_t t) {
        return trace.positions[t] == fx || trace.positions[t] == fy;
    };
    LatticePoint first;  // the vertex of the pair the walk reaches first
    bool seen = false;
    size_t t = 0;
    while (t <= upto) {
        if (!in_f(t)) {
            ++t;
            continue;
        }
        size_t s = t;
        while (t + 1 <= upto && in_f(t + 1)) ++t;
        if (t == upto && in_f(upto)) break;  // open visit, not a completed one
        if (!seen) {
            first = trace.positions[s];
            seen = true;
        }
        count_visit(cfg, trace.positions[s] == first, trace.positions[t] == first);
        ++t;
    }
    return cfg;
}

TrapConfig trap_config_from_forgotten(const ForgottenWalk& fw, const LatticePoint& fx,
                                      const LatticePoint& fy, int dir) {
    TrapConfig cfg;
    cfg.j = dir;
    auto in_f = [&](size_t i) { return fw.path[i] == fx || fw.path[i] == fy; };
    LatticePoint first;
    bool seen = false;
    size_t i = 0;
    while (i < fw.path.size()) {
        if (!in_f(i)) {
            ++i;
            continue;
        }
        size_t s = i;
        while (i + 1 < fw.path.size() && in_f(i + 1)) ++i;
        if (i > s + 1)
            throw std::logic_error("trap_config_from_forgotten: run longer than two kept points");
        if (!seen) {
            first = fw.path[s];
            seen = true;
        }
        count_visit(cfg, fw.path[s] == first, fw.path[i] == first);
        ++i;
    }
    return cfg;
}

TwoVertexDraw sample_trap_edge(const Weights& w, int axis, Rng& rng) {
    if (axis < 0 || axis >= w.d) throw std::invalid_argument("sample_trap_edge: bad axis");
    const double a_fwd = w.alpha[axis];
    const double a_back = w.alpha[axis + w.d];
    const double total = w.total();
    TwoVertexDraw t;
    // each escape mass from its own gamma sum; no 1 - p anywhere
    double g_edge = rng.gamma(a_fwd);
    double g_rest = rng.gamma(total - a_fwd);
    t.omega_xy = g_edge / (g_edge + g_rest);
    t.u = g_rest / (g_edge + g_rest);
    double h_edge = rng.gamma(a_back);
    double h_rest = rng.gamma(total - a_back);
    t.omega_yx = h_edge / (h_edge + h_rest);
    t.v = h_rest / (h_edge + h_rest);
    return t;
}

namespace {

// Shared tail-accumulation: thresholds ascending, one bucket per threshold,
// suffix sums turn buckets into "at least" counts.
struct TailAccum {
    std::vector<double> thr;
    std::vector<double> wsum;       // weighted hits per bucket
    std::vector<double> wsq;        // squared weights per bucket (for errors)
    std::vector<long> raw;          // unweighted hits per bucket

    explicit TailAccum(std::span<const double> grid)
        : thr(grid.begin(), grid.end()), wsum(grid.size(), 0.0), wsq(grid.size(), 0.0),
          raw(grid.size(), 0) {
        if (!std::is_sorted(thr.begin(), thr.end()))
            throw std::invalid_argument("tail grid must be ascending");
        if (thr.empty()) throw std::invalid_argument("tail grid is empty");
    }

    void add(double value, double weight) {
        auto it = std::upper_bound(thr.begin(), thr.end(), value);
        if (it == thr.begin()) return;  // below every threshold
        size_t i = static_cast<size_t>(it - thr.begin()) - 1;
        wsum[i] += weight;
        wsq[i] += weight * weight;
        raw[i] += 1;
    }
};

TailCurve finish_curve(const TailAccum& acc, double total_w, double total_wsq, long n,
                       double expected_exponent, long min_hits, bool weighted) {
    TailCurve c;
    c.expected_exponent = expected_exponent;
    const size_t m = acc.thr.size();
    c.x = acc.thr;
    c.p_hat.resize(m);
    c.se.resize(m);
    c.hits.resize(m);
    double wtail = 0.0, wsqtail = 0.0;
    long rawtail = 0;
    for (size_t i = m; i-- > 0;) {
        wtail += acc.wsum[i];
        wsqtail += acc.wsq[i];
        rawtail += acc.raw[i];
        c.hits[i] = rawtail;
        if (weighted) {
            double p = (total_w > 0.0) ? wtail / total_w : 0.0;
            c.p_hat[i] = p;
            // ratio-estimator error: var of w*(1{hit} - p) over (sum w)^2
            double var = wsqtail * (1.0 - p) * (1.0 - p) + (total_wsq - wsqtail) * p * p;
            c.se[i] = (total_w > 0.0) ? std::sqrt(var) / total_w : 0.0;
        } else {
            double p = static_cast<double>(rawtail) / static_cast<double>(n);
            c.p_hat[i] = p;
            c.se[i] = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
        }
    }
    // slope of log p over log x where the tail is actually populated
    std::vector<double> lx, ly, lw;
    for (size_t i = 0; i < m; ++i) {
        if (c.hits[i] < min_hits || c.p_hat[i] <= 0.0) continue;
        lx.push_back(std::log(c.x[i]));
        ly.push_back(std::log(c.p_hat[i]));
        double rel = c.se[i] / c.p_hat[i];
        lw.push_back(1.0 / std::max(rel * rel, 1e-12));
    }
    if (lx.size() >= 2) c.fit = fit_slope(lx, ly, lw);
    return c;
}

}  // namespace

TailCurve trap_strength_tail(const Weights& w, int axis, std::span<const double> A_grid,
                             long n, uint64_t seed, long min_hits) {
    w.validate();
    if (n <= 0) throw std::invalid_argument("trap_strength_tail: need n > 0");
    Rng rng = Rng::keyed(seed, rng_tag::analysis);
    TailAccum acc(A_grid);
    for (long i = 0; i < n; ++i) {
        TwoVertexDraw t = sample_trap_edge(w, axis, rng);
        acc.add(1.0 / (t.u + t.v), 1.0);
    }
    return finish_curve(acc, 0.0, 0.0, n, kappa_report(w).kappa_j[axis], min_hits,
                        /*weighted=*/false);
}

namespace {

// Likelihood of a visit configuration under the drawn environment, relative
// to the trap-conditioned proposal.  Every factor is at most 1.
double config_weight(const TrapConfig& cfg, const TwoVertexDraw& t) {
    const double p = t.omega_xy * t.omega_yx;
    const double q = 1.0 - p;  // = u + v - u v, no cancellation risk for traps
    double w = 1.0;
    for (long i = 0; i < cfg.n_xx; ++i) w *= t.u / q;
    for (long i = 0; i < cfg.n_xy; ++i) w *= t.omega_xy * t.v / q;
    for (long i = 0; i < cfg.n_yy; ++i) w *= t.v / q;
    for (long i = 0; i < cfg.n_yx; ++i) w *= t.omega_yx * t.u / q;
    return w;
}

TwoVertexDraw sample_conditioned_on_trap(const Weights& w, int axis, Rng& rng) {
    while (true) {
        TwoVertexDraw t = sample_trap_edge(w, axis, rng);
        // sum > 3/2 in terms of the escape masses: u + v < 1/2
        if (t.u + t.v < 2.0 - kTrapThreshold) return t;
    }
}

}  // namespace

ConditionalTail conditional_strength_tail(const Weights& w, int axis, const TrapConfig& config,
                                          std::span<const double> A_grid, long n, uint64_t seed) {
    w.validate();
    if (n <= 0) throw std::invalid_argument("conditional_strength_tail: need n > 0");
    Rng rng = Rng::keyed(seed, rng_tag::analysis);
    TailAccum acc(A_grid);
    double total_w = 0.0, total_wsq = 0.0;
    for (long i = 0; i < n; ++i) {
        TwoVertexDraw t = sample_conditioned_on_trap(w, axis, rng);
        double wt = config_weight(config, t);
        total_w += wt;
        total_wsq += wt * wt;
        acc.add(1.0 / (t.u + t.v), wt);
    }
    ConditionalTail out;
    out.strength = finish_curve(acc, total_w, total_wsq, n, kappa_report(w).kappa_j[axis],
                                /*min_hits=*/30, /*weighted=*/true);
    out.weight_mean = total_w / static_cast<double>(n);
    out.weight_ess = (total_wsq > 0.0) ? total_w * total_w / total_wsq : 0.0;
    const double alpha0 = w.total();
    for (double A : out.strength.x)
        out.w_env.push_back(5.0 * (static_cast<double>(config.n_total()) + 2.0 * alpha0) /
                            (2.0 * A));
    return out;
}

TailCurve trap_time_tail_given_config(const Weights& w, int axis, const TrapConfig& config,
                                      std::span<const double> x_grid, double eps, long n,
                                      uint64_t seed) {
    w.validate();
    if (config.n_total() <= 0)
        throw std::invalid_argument("trap_time_tail_given_config: empty configuration");
    if (!(eps > 0.0)) throw std::invalid_argument("trap_time_tail_given_config: eps must be > 0");
    Rng rng = Rng::keyed(seed, rng_tag::analysis);
    TailAccum acc(x_grid);
    double total_w = 0.0, total_wsq = 0.0;
    for (long i = 0; i < n; ++i) {
        TwoVertexDraw t = sample_conditioned_on_trap(w, axis, rng);
        double wt = config_weight(config, t);
        total_w += wt;
        total_wsq += wt * wt;
        const double p = t.omega_xy * t.omega_yx;
        const double s = 1.0 / (t.u + t.v);
        // each crossing pair is a geometric round trip; cross-entry visits
        // add the odd crossing
        long cross = 0;
        for (long v = 0; v < config.n_xx + config.n_yy; ++v)
            cross += 2 * (rng.geometric(1.0 - p) - 1);
        for (long v = 0; v < config.n_xy + config.n_yx; ++v)
            cross += 2 * (rng.geometric(1.0 - p) - 1) + 1;
        // joint event {cross >= x and s >= eps x} holds exactly for the
        // thresholds x <= min(cross, s/eps), so one capped add covers it
        acc.add(std::min(static_cast<double>(cross), s / eps), wt);
    }
    return finish_curve(acc, total_w, total_wsq, n, kappa_report(w).kappa_j[axis],
                        /*min_hits=*/30, /*weighted=*/true);
}

EnvelopeCheck envelope_check(const ConditionalTail& tail, double kappa_j) {
    EnvelopeCheck ec;
    const TailCurve& c = tail.strength;
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < c.x.size(); ++i) {
        double slack = 4.0 * c.se[i];
        double amp = std::pow(c.x[i], kappa_j);
        double point_lo = std::max(c.p_hat[i] - slack, 0.0) * amp * std::exp(-tail.w_env[i]);
        double point_hi = (c.p_hat[i] + slack) * amp * std::exp(tail.w_env[i]);
        lo = std::max(lo, point_lo);
        hi = std::min(hi, point_hi);
    }
    ec.lo = lo;
    ec.hi = hi;
    ec.feasible = (lo <= hi) && (hi > 0.0);
    if (ec.feasible) {
        double l = (lo > 0.0) ? lo : hi * 0.5;
        ec.d_hat = std::sqrt(l * hi);
        if (!(ec.d_hat > 0.0)) ec.d_hat = hi * 0.5;
    }
    return ec;
}

std::vector<GeometricMomentRow> geometric_moment_check(std::span<const double> p_grid,
                                                       std::span<const double> beta_grid,
                                                       long n_samples, uint64_t seed) {
    for (double p : p_grid)
        if (!(p > 0.0) || !(p < 1.0))
            throw std::invalid_argument("geometric_moment_check: p must lie in (0,1)");
    for (double b : beta_grid)
        if (!(b > 0.0)) throw std::invalid_argument("geometric_moment_check: beta must be > 0");
    if (n_samples <= 0) throw std::invalid_argument("geometric_moment_check: need samples");

    std::vector<GeometricMomentRow> table;
    for (size_t pi = 0; pi < p_grid.size(); ++pi) {
        const double p = p_grid[pi];
        const int64_t key[1] = {static_cast<int64_t>(pi)};
        Rng rng = Rng::keyed(seed, rng_tag::analysis, std::span<const int64_t>(key, 1));
        std::vector<long> draws(static_cast<size_t>(n_samples));
        for (long& n : draws) n = rng.geometric(p);
        for (double beta : beta_grid) {
            const double scale = std::pow(p, beta);
            double sum = 0.0, sumsq = 0.0;
            for (long n : draws) {
                double v = std::pow(static_cast<double>(n), beta) * scale;
                sum += v;
                sumsq += v * v;
            }
            GeometricMomentRow row;
            row.p = p;
            row.beta = beta;
            row.value = sum / static_cast<double>(n_samples);
            double var = sumsq / static_cast<double>(n_samples) - row.value * row.value;
            row.se = std::sqrt(std::max(var, 0.0) / static_cast<double>(n_samples));
            table.push_back(row);
        }
    }
    return table;
}

}  // namespace rwde
