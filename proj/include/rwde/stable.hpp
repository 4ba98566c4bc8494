#pragma once

// Totally skewed stable laws (the limit family for heavy-tailed renewal
// sums), a tail-index estimator and a permutation Kolmogorov-Smirnov test.

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "rwde/rng.hpp"
#include "rwde/stats.hpp"

namespace rwde {

// Totally right-skewed stable law with index kappa, scale c and rate s:
// characteristic function exp(-s c^kappa |l|^kappa (1 - i sgn(l) tan(pi kappa/2))).
// kappa = 1 needs the log correction and is not supported.
struct StableParams {
    double kappa = 0.0;
    double c = 1.0;
    double s = 1.0;
};

std::complex<double> stable_char_function(const StableParams& p, double lambda);

// One draw; Chambers-Mallows-Stuck with skewness +1, scaled by c s^{1/kappa}.
double sample_stable(const StableParams& p, Rng& rng);

struct HillEstimate {
    double index = 0.0;         // tail exponent estimate
    double se = 0.0;            // index / sqrt(k)
    double loglog_slope = 0.0;  // rank-frequency regression on the same k points
    size_t k = 0;
};

// Hill estimator on the k largest order statistics of a positive sample.
HillEstimate hill_estimator(std::span<const double> sample, size_t k);

struct HillCurvePoint {
    size_t k = 0;
    double index = 0.0;
    double se = 0.0;
};

struct HillPlateau {
    std::vector<HillCurvePoint> curve;
    double index = 0.0;  // value at the flattest spot of the curve
    size_t k = 0;
    double se = 0.0;
    double swing = 0.0;  // neighbour movement at that spot
    bool found = false;  // swing consistent with sampling noise, not drift
};

// Scans k geometrically between lo_frac and hi_frac of the sample size and
// picks the point whose neighbourhood moves least.  `found` stays false when
// even the flattest spot moves by more than a few standard errors, which is
// the signature of a light tail (the curve drifts with k instead of
// plateauing).
HillPlateau hill_plateau(std::span<const double> sample, double lo_frac = 0.001,
                         double hi_frac = 0.05, size_t n_grid = 15);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov distance with a label-permutation p-value.
// The pooled sort happens once; each shuffle is linear.
KsResult ks_distance(std::span<const double> a, std::span<const double> b, int n_perm, Rng& rng);

}  // namespace rwde
