#include "rwde/walk.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rwde {

int walk_step(const LatticeEnvironment& env, const LatticePoint& p, Rng& rng,
              LatticePoint* next) {
    const int d = env.dim();
    double row[2 * kMaxDim];
    env.transition_probs(p, std::span<double>(row, 2 * d));
    const double u = rng.u01();
    double acc = 0.0;
    int dir = 2 * d - 1;  // catchall for float residue at the top
    for (int k = 0; k < 2 * d; ++k) {
        acc += row[k];
        if (u < acc) {
            dir = k;
            break;
        }
    }
    if (next) *next = neighbor(p, dir, d);
    return dir;
}

WalkTrace start_walk(const LatticeEnvironment& env, const LatticePoint& start,
                     uint64_t replica) {
    WalkTrace t;
    t.d = env.dim();
    t.master_seed = env.master_seed();
    t.replica = replica;
    t.positions.push_back(start);
    return t;
}

void extend_walk(const LatticeEnvironment& env, WalkTrace& trace, size_t extra, Rng& rng) {
    trace.positions.reserve(trace.positions.size() + extra);
    LatticePoint p = trace.positions.back();
    for (size_t i = 0; i < extra; ++i) {
        LatticePoint q;
        walk_step(env, p, rng, &q);
        trace.positions.push_back(q);
        p = q;
    }
}

WalkTrace simulate_walk(const LatticeEnvironment& env, const LatticePoint& start,
                        size_t n_steps, Rng& rng, uint64_t replica) {
    WalkTrace t = start_walk(env, start, replica);
    extend_walk(env, t, n_steps, rng);
    return t;
}

WalkTrace simulate_walk(const LatticeEnvironment& env, const LatticePoint& start,
                        size_t n_steps, Rng& rng,
                        const std::function<bool(const LatticePoint&)>& stop,
                        uint64_t replica) {
    WalkTrace t = start_walk(env, start, replica);
    if (stop && stop(start)) return t;
    LatticePoint p = start;
    for (size_t i = 0; i < n_steps; ++i) {
        LatticePoint q;
        walk_step(env, p, rng, &q);
        t.positions.push_back(q);
        p = q;
        if (stop && stop(q)) break;
    }
    return t;
}

double dot_level(const LatticePoint& p, std::span<const double> u) {
    double s = 0.0;
    for (size_t i = 0; i < u.size(); ++i) s += u[i] * p.c[i];
    return s;
}

double l2_norm(const LatticePoint& p, int d) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += static_cast<double>(p.c[i]) * p.c[i];
    return std::sqrt(s);
}

std::optional<size_t> first_hit(const WalkTrace& trace, const LatticePoint& target) {
    for (size_t t = 0; t < trace.positions.size(); ++t)
        if (trace.positions[t] == target) return t;
    return std::nullopt;
}

std::optional<size_t> first_return(const WalkTrace& trace) {
    for (size_t t = 1; t < trace.positions.size(); ++t)
        if (trace.positions[t] == trace.positions[0]) return t;
    return std::nullopt;
}

HittingTimes hitting_times(const WalkTrace& trace, std::span<const LatticePoint> V) {
    auto in_V = [&](const LatticePoint& p) {
        for (const LatticePoint& v : V)
            if (p == v) return true;
        return false;
    };
    HittingTimes h;
    bool left = trace.positions.empty() ? false : !in_V(trace.positions[0]);
    for (size_t t = 0; t < trace.positions.size(); ++t) {
        const bool inside = in_V(trace.positions[t]);
        if (inside) {
            if (!h.entry) h.entry = t;
            if (t >= 1 && !h.strict) h.strict = t;
            if (t >= 1 && left && !h.re_entry) h.re_entry = t;
        } else {
            left = true;
        }
        if (h.entry && h.strict && h.re_entry) break;
    }
    return h;
}

RenewalRecord detect_renewals(const WalkTrace& trace, const RenewalOptions& opt) {
    const int d = trace.d;
    if (opt.u_hat.size() != static_cast<size_t>(d))
        throw std::invalid_argument("detect_renewals: direction dimension mismatch");
    double norm = 0.0;
    for (double x : opt.u_hat) norm += x * x;
    if (std::fabs(std::sqrt(norm) - 1.0) > 1e-12)
        throw std::invalid_argument("detect_renewals: direction is not a unit vector");
    if (!(opt.a > 2.0 * std::sqrt(static_cast<double>(d))))
        throw std::domain_error("detect_renewals: slab width must exceed 2*sqrt(d)");
    if (trace.positions.empty()) throw std::invalid_argument("detect_renewals: empty trace");

    const size_t n = trace.positions.size();
    std::vector<double> level(n);
    for (size_t t = 0; t < n; ++t) level[t] = dot_level(trace.positions[t], opt.u_hat);
    std::vector<double> suffmin(n);
    suffmin[n - 1] = level[n - 1];
    for (size_t t = n - 1; t-- > 0;) suffmin[t] = std::min(level[t], suffmin[t + 1]);

    RenewalRecord rec;
    rec.horizon = n - 1;
    rec.a = opt.a;
    rec.u_hat = opt.u_hat;

    double thr = level[0] + opt.a;
    size_t t = 0;
    while (t < n) {
        // first passage above the frozen threshold; candidates sit at strict
        // running maxima, so the threshold only moves at failures/promotions
        while (t < n && level[t] < thr) ++t;
        if (t >= n) break;
        const size_t cand = t;
        const bool dips = (cand + 1 < n) && suffmin[cand + 1] < level[cand];
        if (!dips) {
            if ((n - 1) - cand >= opt.confirm_window) {
                rec.times.push_back(cand);
                rec.points.push_back(trace.positions[cand]);
                thr = level[cand] + opt.a;
                ++t;
                continue;
            }
            rec.censored = true;
            rec.tail_candidate = cand;
            break;
        }
        // walk to the first dip, keeping the max over the excursion; the
        // next candidate needs that max plus a full slab
        double m = level[cand];
        size_t s = cand + 1;
        while (level[s] >= level[cand]) {
            m = std::max(m, level[s]);
            ++s;
        }
        thr = m + opt.a;
        t = s + 1;
    }
    return rec;
}

ConditionTReport condition_T_statistic(std::span<const FirstRenewalSegment> segs,
                                       std::span<const double> c_grid) {
    if (segs.empty()) throw std::invalid_argument("condition_T_statistic: no segments");
    ConditionTReport rep;
    rep.c_grid.assign(c_grid.begin(), c_grid.end());
    const size_t n = segs.size(), h = n / 2;
    auto log_mean_exp = [&](double c, size_t upto) {
        double mx = -1e300;
        for (size_t i = 0; i < upto; ++i) mx = std::max(mx, c * segs[i].max_norm);
        double s = 0.0;
        for (size_t i = 0; i < upto; ++i) s += std::exp(c * segs[i].max_norm - mx);
        return mx + std::log(s / upto);
    };
    bool prefix_ok = true;
    for (double c : c_grid) {
        double full = log_mean_exp(c, n);
        double half = (h > 0) ? log_mean_exp(c, h) : full;
        double ratio = std::exp(half - full);
        bool st = std::isfinite(ratio) && ratio >= 0.8 && ratio <= 1.25;
        rep.log_mean.push_back(full);
        rep.half_ratio.push_back(ratio);
        rep.stable.push_back(st ? 1 : 0);
        if (st && prefix_ok)
            rep.largest_stable_c = c;
        else
            prefix_ok = false;
    }
    return rep;
}

}  // namespace rwde
