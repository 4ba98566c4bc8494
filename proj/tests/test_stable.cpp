#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "rwde/stable.hpp"

using namespace rwde;

namespace {

std::vector<double> stable_sample(const StableParams& p, int n, uint64_t seed, int64_t slot) {
    Rng rng = Rng::keyed(seed, rng_tag::analysis, std::vector<int64_t>{slot});
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = sample_stable(p, rng);
    return out;
}

}  // namespace

TEST_CASE("characteristic function basics") {
    StableParams p{1.75, 1.0, 1.0};
    CHECK(stable_char_function(p, 0.0) == std::complex<double>(1.0, 0.0));
    for (double l : {0.3, 1.0, 2.7}) {
        auto plus = stable_char_function(p, l);
        auto minus = stable_char_function(p, -l);
        CHECK(plus.real() == doctest::Approx(minus.real()).epsilon(1e-14));
        CHECK(plus.imag() == doctest::Approx(-minus.imag()).epsilon(1e-14));
        CHECK(std::abs(plus) < 1.0);
    }
}

TEST_CASE("characteristic function at the reference point") {
    // kappa 7/4: tan(7 pi/8) = -(sqrt 2 - 1), so the exponent at l = 1 is
    // -(1 + i (sqrt 2 - 1))
    StableParams p{1.75, 1.0, 1.0};
    double t = std::sqrt(2.0) - 1.0;
    auto got = stable_char_function(p, 1.0);
    CHECK(got.real() == doctest::Approx(std::exp(-1.0) * std::cos(t)).epsilon(1e-12));
    CHECK(got.imag() == doctest::Approx(-std::exp(-1.0) * std::sin(t)).epsilon(1e-12));
}

TEST_CASE("sampler matches its own characteristic function") {
    StableParams p{1.75, 1.0, 1.0};
    auto xs = stable_sample(p, 100000, 7001, 0);
    for (double l : {-2.0, -1.0, -0.5, 0.5, 1.0, 2.0}) {
        std::complex<double> acc{0.0, 0.0};
        for (double x : xs) acc += std::complex<double>(std::cos(l * x), std::sin(l * x));
        acc /= static_cast<double>(xs.size());
        CHECK(std::abs(acc - stable_char_function(p, l)) < 0.02);
    }
}

TEST_CASE("sums rescale into the same law") {
    StableParams p{1.75, 1.0, 1.0};
    const int n = 20000;
    auto a = stable_sample(p, n, 7002, 0);
    auto b = stable_sample(p, n, 7002, 1);
    auto fresh = stable_sample(p, n, 7002, 2);
    std::vector<double> scaled(n);
    double shrink = std::pow(2.0, -1.0 / p.kappa);
    for (int i = 0; i < n; ++i) scaled[i] = (a[i] + b[i]) * shrink;
    Rng rng = Rng::keyed(7002, rng_tag::analysis, std::vector<int64_t>{3});
    KsResult ks = ks_distance(scaled, fresh, 500, rng);
    CHECK(ks.p_value >= 0.01);
}

TEST_CASE("Hill estimator recovers an exact Pareto index") {
    Rng rng = Rng::keyed(7003, rng_tag::analysis);
    std::vector<double> xs(100000);
    for (double& x : xs) x = std::pow(rng.u01(), -1.0 / 1.5);
    HillEstimate h = hill_estimator(xs, 1000);
    CHECK(h.k == 1000);
    CHECK(std::fabs(h.index - 1.5) < 0.15);
    CHECK(h.se == doctest::Approx(h.index / std::sqrt(1000.0)));
    CHECK(std::fabs(h.loglog_slope - 1.5) < 0.25);  // reported as a positive exponent
}

TEST_CASE("Hill estimate is scale invariant bit for bit") {
    Rng rng = Rng::keyed(7004, rng_tag::analysis);
    std::vector<double> xs(20000);
    for (double& x : xs) x = std::pow(rng.u01(), -1.0 / 1.75);
    std::vector<double> doubled(xs), quartered(xs);
    for (double& x : doubled) x *= 2.0;
    for (double& x : quartered) x *= 0.25;
    HillEstimate base = hill_estimator(xs, 400);
    CHECK(hill_estimator(doubled, 400).index == base.index);
    CHECK(hill_estimator(quartered, 400).index == base.index);
}

TEST_CASE("Hill estimator rejects bad inputs") {
    std::vector<double> xs = {1.0, 2.0, 3.0, 4.0, 5.0};
    CHECK_THROWS_AS(hill_estimator(xs, 1), std::invalid_argument);
    CHECK_THROWS_AS(hill_estimator(xs, 5), std::invalid_argument);
    std::vector<double> neg = {-3.0, -2.0, -1.0, 1.0, 2.0};
    CHECK_THROWS_AS(hill_estimator(neg, 4), std::domain_error);
}

TEST_CASE("plateau scan flags a light tail") {
    Rng rng = Rng::keyed(7005, rng_tag::analysis);
    std::vector<double> xs(100000);
    for (double& x : xs) x = -std::log(rng.u01());
    HillPlateau hp = hill_plateau(xs);
    CHECK(!hp.found);
    CHECK(!hp.curve.empty());
}

TEST_CASE("plateau scan locks onto a genuine heavy tail") {
    StableParams p{1.75, 1.0, 1.0};
    auto xs = stable_sample(p, 100000, 7006, 0);
    for (double& x : xs) x = std::fabs(x);
    HillPlateau hp = hill_plateau(xs);
    CHECK(hp.found);
    CHECK(std::fabs(hp.index - 1.75) < 0.2);
}

TEST_CASE("KS distance: degenerate and separated cases") {
    Rng rng = Rng::keyed(7007, rng_tag::analysis);
    std::vector<double> a(10000), b(10000);
    for (double& x : a) x = rng.u01();
    KsResult same = ks_distance(a, a, 200, rng);
    CHECK(same.statistic == 0.0);
    CHECK(same.p_value == doctest::Approx(1.0));

    for (double& x : b) x = rng.u01() + 0.5;
    KsResult apart = ks_distance(a, b, 200, rng);
    CHECK(std::fabs(apart.statistic - 0.5) < 0.02);
    CHECK(apart.p_value < 0.01);
}

TEST_CASE("permutation p-value holds its level under the null") {
    int rejections = 0;
    for (int rep = 0; rep < 100; ++rep) {
        Rng gen = Rng::keyed(7008, rng_tag::analysis, std::vector<int64_t>{rep});
        std::vector<double> a(1000), b(1000);
        for (double& x : a) x = gen.normal();
        for (double& x : b) x = gen.normal();
        Rng perm = Rng::keyed(7009, rng_tag::analysis, std::vector<int64_t>{rep});
        if (ks_distance(a, b, 200, perm).p_value < 0.01) ++rejections;
    }
    CHECK(rejections <= 5);
}
