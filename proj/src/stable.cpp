#include "rwde/stable.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace rwde {

namespace {

void check_params(const StableParams& p) {
    if (!(p.kappa > 0.0) || !(p.kappa < 2.0))
        throw std::domain_error("stable law: index must lie in (0, 2)");
    if (p.kappa == 1.0)
        throw std::domain_error("stable law: index 1 (the Cauchy-with-drift case) is not supported");
    if (!(p.c > 0.0) || !(p.s > 0.0))
        throw std::domain_error("stable law: scale and rate must be positive");
}

}  // namespace

std::complex<double> stable_char_function(const StableParams& p, double lambda) {
    check_params(p);
    const double k = p.kappa;
    const double mag = p.s * std::pow(p.c, k) * std::pow(std::fabs(lambda), k);
    const double sgn = (lambda > 0.0) - (lambda < 0.0);
    const std::complex<double> expo =
        -mag * std::complex<double>(1.0, -sgn * std::tan(std::numbers::pi * k / 2.0));
    return std::exp(expo);
}

double sample_stable(const StableParams& p, Rng& rng) {
    check_params(p);
    const double a = p.kappa;
    const double half_pi = std::numbers::pi / 2.0;
    // Chambers-Mallows-Stuck for skewness +1
    const double tb = std::tan(std::numbers::pi * a / 2.0);
    const double B = std::atan(tb) / a;
    const double S = std::pow(1.0 + tb * tb, 1.0 / (2.0 * a));
    const double V = rng.uniform(-half_pi, half_pi);
    const double W = -std::log(rng.u01());  // Exp(1)
    const double num = std::sin(a * (V + B));
    const double den = std::pow(std::cos(V), 1.0 / a);
    const double tail = std::pow(std::cos(V - a * (V + B)) / W, (1.0 - a) / a);
    const double z = S * (num / den) * tail;
    return p.c * std::pow(p.s, 1.0 / a) * z;
}

HillEstimate hill_estimator(std::span<const double> sample, size_t k) {
    if (k < 2 || k + 1 > sample.size())
        throw std::invalid_argument("hill_estimator: need 2 <= k < n");
    std::vector<double> x(sample.begin(), sample.end());
    std::sort(x.begin(), x.end(), std::greater<double>());
    const double pivot = x[k];  // (k+1)-th largest
    if (!(pivot > 0.0))
        throw std::domain_error("hill_estimator: the top k+1 order statistics must be positive");
    double mean_log = 0.0;
    for (size_t i = 0; i < k; ++i) mean_log += std::log(x[i] / pivot);
    mean_log /= static_cast<double>(k);
    HillEstimate h;
    h.k = k;
    h.index = 1.0 / mean_log;
    h.se = h.index / std::sqrt(static_cast<double>(k));
    // same tail, read as a rank-frequency line: log(i/n) vs log x_(i)
    std::vector<double> lx, ly, lw;
    const double n = static_cast<double>(sample.size());
    for (size_t i = 0; i < k; ++i) {
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(static_cast<double>(i + 1) / n));
        lw.push_back(1.0);
    }
    h.loglog_slope = -fit_slope(lx, ly, lw).slope;
    return h;
}

HillPlateau hill_plateau(std::span<const double> sample, double lo_frac, double hi_frac,
                         size_t n_grid) {
    if (sample.size() < 100) throw std::invalid_argument("hill_plateau: sample too small");
    size_t lo = std::max<size_t>(10, static_cast<size_t>(lo_frac * sample.size()));
    size_t hi = std::max(lo + 1, static_cast<size_t>(hi_frac * sample.size()));
    hi = std::min(hi, sample.size() - 2);
    HillPlateau out;
    double ratio = std::pow(static_cast<double>(hi) / lo, 1.0 / static_cast<double>(n_grid - 1));
    size_t prev = 0;
    for (size_t g = 0; g < n_grid; ++g) {
        size_t k = static_cast<size_t>(std::llround(lo * std::pow(ratio, g)));
        k = std::min(std::max(k, lo), hi);
        if (k == prev) continue;
        prev = k;
        HillEstimate h = hill_estimator(sample, k);
        out.curve.push_back({k, h.index, h.se});
    }
    // flattest interior point: smallest swing against both neighbours
    size_t best = 0;
    double best_swing = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < out.curve.size(); ++i) {
        double swing = 0.0;
        if (i > 0) swing = std::max(swing, std::fabs(out.curve[i].index - out.curve[i - 1].index));
        if (i + 1 < out.curve.size())
            swing = std::max(swing, std::fabs(out.curve[i].index - out.curve[i + 1].index));
        if (swing < best_swing) {
            best_swing = swing;
            best = i;
        }
    }
    out.index = out.curve[best].index;
    out.k = out.curve[best].k;
    out.se = out.curve[best].se;
    out.swing = best_swing;
    // a genuine plateau moves at the noise level of nested Hill estimates.
    // Neighbouring k share most of their order statistics, so the local
    // swing alone is blind to slow drift; the scan endpoints overlap little
    // and expose it.  The drift test runs on log(index): sd(log estimate)
    // is ~ 1/sqrt(k) independent of the index itself, so the test keeps its
    // power when a light tail inflates the estimates (large index means
    // large absolute se, which would swallow any absolute drift).
    bool locally_flat = out.curve.size() >= 3 && best_swing <= 2.5 * out.curve[best].se;
    const HillCurvePoint& head = out.curve.front();
    const HillCurvePoint& last = out.curve.back();
    // a plateau over a narrow k range certifies nothing
    bool wide = last.k >= 8 * head.k;
    bool sane = std::isfinite(head.index) && std::isfinite(last.index) &&
                head.index > 0.0 && last.index > 0.0;
    double log_drift = sane ? std::fabs(std::log(head.index / last.index)) : 1e300;
    double null_sd = std::sqrt(1.0 / static_cast<double>(head.k) +
                               1.0 / static_cast<double>(last.k));
    out.found = locally_flat && wide && sane && log_drift <= 3.0 * null_sd;
    return out;
}

KsResult ks_distance(std::span<const double> a, std::span<const double> b, int n_perm, Rng& rng) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_distance: empty sample");
    const size_t n = a.size() + b.size();
    std::vector<std::pair<double, char>> pooled;
    pooled.reserve(n);
    for (double x : a) pooled.emplace_back(x, 0);
    for (double x : b) pooled.emplace_back(x, 1);
    std::sort(pooled.begin(), pooled.end(),
              [](const auto& l, const auto& r) { return l.first < r.first; });
    std::vector<double> values(n);
    std::vector<char> labels(n);
    for (size_t i = 0; i < n; ++i) {
        values[i] = pooled[i].first;
        labels[i] = pooled[i].second;
    }
    const double step_a = 1.0 / static_cast<double>(a.size());
    const double step_b = 1.0 / static_cast<double>(b.size());
    auto d_for = [&](const std::vector<char>& lab) {
        double ca = 0.0, cb = 0.0, d = 0.0;
        size_t i = 0;
        while (i < n) {
            size_t j = i;  // advance over ties before reading the gap
            while (j < n && values[j] == values[i]) {
                if (lab[j] == 0)
                    ca += step_a;
                else
                    cb += step_b;
                ++j;
            }
            d = std::max(d, std::fabs(ca - cb));
            i = j;
        }
        return d;
    };
    KsResult r;
    r.statistic = d_for(labels);
    if (n_perm <= 0) {
        r.p_value = 1.0;
        return r;
    }
    int as_large = 0;
    std::vector<char> lab = labels;
    for (int p = 0; p < n_perm; ++p) {
        for (size_t i = n - 1; i > 0; --i) {
            size_t j = static_cast<size_t>(rng.u01() * (i + 1));
            if (j > i) j = i;
            std::swap(lab[i], lab[j]);
        }
        if (d_for(lab) >= r.statistic) ++as_large;
    }
    r.p_value = (1.0 + as_large) / (1.0 + n_perm);
    return r;
}

}  // namespace rwde
