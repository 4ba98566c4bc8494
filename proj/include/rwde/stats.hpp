#pragma once

// Small shared statistics helpers: deterministic summation, moments,
// binomial intervals, quantiles and a weighted log-log slope fit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace rwde {

// Sum after sorting ascending.  Used wherever two code paths must agree
// bit-for-bit on a sum of the same multiset of weights (e.g. the kappa
// formula vs. the cut enumeration); plain left-to-right accumulation of
// differently ordered operands can differ in the last ulp.
inline double sorted_sum(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc;
}

struct MeanSE {
    double mean = 0.0;
    double se = 0.0;
    size_t n = 0;
};

inline MeanSE mean_se(std::span<const double> xs) {
    MeanSE r;
    r.n = xs.size();
    if (r.n == 0) return r;
    double s = 0.0;
    for (double x : xs) s += x;
    r.mean = s / static_cast<double>(r.n);
    if (r.n < 2) return r;
    double ss = 0.0;
    for (double x : xs) {
        double d = x - r.mean;
        ss += d * d;
    }
    r.se = std::sqrt(ss / (static_cast<double>(r.n) * static_cast<double>(r.n - 1)));
    return r;
}

// Wilson score interval for a binomial proportion, z = normal quantile
// (z = 1.96 for 95%).  Well behaved at zero counts, which matters for the
// far tail bins.
struct Interval {
    double lo = 0.0, hi = 0.0;
};

inline Interval wilson_interval(uint64_t hits, uint64_t n, double z = 1.96) {
    if (n == 0) return {0.0, 1.0};
    double nn = static_cast<double>(n);
    double p = static_cast<double>(hits) / nn;
    double z2 = z * z;
    double denom = 1.0 + z2 / nn;
    double centre = p + z2 / (2.0 * nn);
    double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
    return {(centre - half) / denom, (centre + half) / denom};
}

// Empirical quantile (linear interpolation between order statistics).
inline double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) throw std::invalid_argument("quantile: empty sample");
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile: q outside [0,1]");
    std::sort(xs.begin(), xs.end());
    double pos = q * static_cast<double>(xs.size() - 1);
    size_t lo = static_cast<size_t>(pos);
    if (lo + 1 >= xs.size()) return xs.back();
    double frac = pos - static_cast<double>(lo);
    return xs[lo] * (1.0 - frac) + xs[lo + 1] * frac;
}

// Weighted least squares line y = a + b x; returns slope b and its
// standard error.
struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    size_t points = 0;
};

inline SlopeFit fit_slope(std::span<const double> x, std::span<const double> y,
                          std::span<const double> w) {
    if (x.size() != y.size() || x.size() != w.size() || x.size() < 2)
        throw std::invalid_argument("fit_slope: need >= 2 points of equal length");
    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        swx += w[i] * x[i];
        swy += w[i] * y[i];
        swxx += w[i] * x[i] * x[i];
        swxy += w[i] * x[i] * y[i];
    }
    double det = sw * swxx - swx * swx;
    if (det <= 0.0) throw std::domain_error("fit_slope: degenerate design");
    SlopeFit f;
    f.points = x.size();
    f.slope = (sw * swxy - swx * swy) / det;
    f.intercept = (swxx * swy - swx * swxy) / det;
    f.slope_se = std::sqrt(sw / det);
    return f;
}

}  // namespace rwde
