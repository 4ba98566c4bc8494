#pragma once

// Dirichlet weight vectors on Z^d and the trap exponents derived from them.
//
// Directions are indexed 0..2d-1: j in [0,d) is +e_j, j+d is -e_j.  The
// exponent kappa_j is the total weight leaving the two endpoints of an edge
// in direction j; the smallest of them governs which moments of the quenched
// Green function (and of the renewal times) are finite.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "rwde/stats.hpp"

namespace rwde {

struct Weights {
    int d = 0;
    std::vector<double> alpha;  // size 2d, ordering +e_0..+e_{d-1}, -e_0..-e_{d-1}

    Weights() = default;
    Weights(int dim, std::vector<double> a) : d(dim), alpha(std::move(a)) { validate(); }

    void validate() const {
        if (d < 1) throw std::invalid_argument("Weights: dimension must be >= 1");
        if (alpha.size() != static_cast<size_t>(2 * d))
            throw std::invalid_argument("Weights: need exactly 2d entries");
        for (double a : alpha)
            if (!(a > 0.0) || !std::isfinite(a))
                throw std::invalid_argument("Weights: entries must be finite and > 0");
    }

    double total() const {
        double s = 0.0;
        for (double a : alpha) s += a;
        return s;
    }
};

struct KappaReport {
    std::vector<double> kappa_j;   // per direction pair, size d
    double kappa = 0.0;            // min_j kappa_j
    int argmin_j = 0;
    std::vector<double> d_alpha;   // drift of the weights: alpha_j - alpha_{j+d}
    double sum_alpha = 0.0;
    double ballisticity_l1 = 0.0;  // sum_j |d_alpha_j|; > 1 is the known
                                   // sufficient criterion for condition (T)
    bool ballisticity_criterion = false;
};

// kappa_j = 2*sum(alpha) - (alpha_j + alpha_{j+d}), evaluated as the sorted
// sum of the 2(2d-1) weights on edges leaving the pair {0, e_j} so that it
// is bit-identical to what the cut enumeration over finite graphs computes
// for the same pair.
inline KappaReport kappa_report(const Weights& w) {
    w.validate();
    KappaReport r;
    r.kappa_j.resize(w.d);
    r.d_alpha.resize(w.d);
    r.sum_alpha = w.total();
    std::vector<double> cut;
    for (int j = 0; j < w.d; ++j) {
        cut.clear();
        for (int i = 0; i < 2 * w.d; ++i) {
            if (i != j) cut.push_back(w.alpha[i]);          // edges out of 0, minus the one into e_j
            if (i != j + w.d) cut.push_back(w.alpha[i]);    // edges out of e_j, minus the one back
        }
        r.kappa_j[j] = sorted_sum(cut);
        r.d_alpha[j] = w.alpha[j] - w.alpha[j + w.d];
        r.ballisticity_l1 += std::abs(r.d_alpha[j]);
    }
    r.argmin_j = 0;
    for (int j = 1; j < w.d; ++j)
        if (r.kappa_j[j] < r.kappa_j[r.argmin_j]) r.argmin_j = j;
    r.kappa = r.kappa_j[r.argmin_j];
    r.ballisticity_criterion = r.ballisticity_l1 > 1.0;
    return r;
}

}  // namespace rwde
