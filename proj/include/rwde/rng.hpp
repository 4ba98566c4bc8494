#pragma once

// Seeded random number streams for the simulator.
//
// Every stream is keyed: the generator state is derived by hashing a master
// seed together with a role tag and an arbitrary list of integers (vertex
// coordinates, replica index, ...).  Two streams with the same key produce
// the same sequence no matter when or on which thread they are created,
// which is what makes lazy environments and replica-parallel runs
// reproducible.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace rwde {

// Finalizer from the splitmix64 generator (public domain, Vigna/Steele).
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Fold one word into a running hash.  Cheap, and good enough to decorrelate
// neighbouring lattice sites (each output bit depends on all input bits
// after two rounds).
inline uint64_t mix_in(uint64_t h, uint64_t w) {
    return mix64(h ^ (w + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)));
}

// xoroshiro128++ (Blackman/Vigna, public domain).  Small state so we can
// afford one logical stream per lattice site; passes BigCrush.
class Rng {
  public:
    Rng() : Rng(0x853c49e6748fea9bull, 1) {}
    Rng(uint64_t s0, uint64_t s1) : s0_{s0, s1} {
        // the all-zero state is the one fixed point of the recurrence
        if (s0_[0] == 0 && s0_[1] == 0) s0_[0] = 0x9e3779b97f4a7c15ull;
    }

    static Rng keyed(uint64_t master_seed, uint64_t tag,
                     std::span<const int64_t> words = {}) {
        uint64_t h0 = mix_in(mix64(master_seed), tag);
        uint64_t h1 = mix_in(h0, ~tag);
        for (int64_t w : words) {
            h0 = mix_in(h0, static_cast<uint64_t>(w));
            h1 = mix_in(h1, mix64(static_cast<uint64_t>(w)));
        }
        return Rng(h0, h1);
    }

    uint64_t next() {
        uint64_t a = s0_[0], b = s0_[1];
        uint64_t r = rotl(a + b, 17) + a;
        b ^= a;
        s0_[0] = rotl(a, 49) ^ b ^ (b << 21);
        s0_[1] = rotl(b, 28);
        return r;
    }

    // Uniform on the open interval (0,1); never returns 0 or 1, so logs are
    // always safe.
    double u01() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    // Standard normal via Box-Muller (cosine branch only; no cached spare,
    // so the stream position does not depend on call history).
    double normal() {
        double u = u01(), v = u01();
        return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586477 * v);
    }

    // Gamma(shape, 1) by Marsaglia-Tsang squeeze.  Shapes below 1 (we need
    // them as small as 0.05) go through the boost Gamma(shape+1) * U^{1/shape}.
    double gamma(double shape) {
        if (!(shape > 0.0)) throw std::domain_error("gamma: shape must be > 0");
        if (shape < 1.0) {
            double g = gamma(shape + 1.0);
            return g * std::pow(u01(), 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / (3.0 * std::sqrt(d));
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = u01();
            const double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
            if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double beta(double a, double b) {
        double x = gamma(a), y = gamma(b);
        return x / (x + y);
    }

    // Geometric on {1,2,...} with success probability p (mean 1/p).
    uint64_t geometric(double p) {
        if (!(p > 0.0) || p > 1.0) throw std::domain_error("geometric: p must be in (0,1]");
        if (p >= 1.0) return 1;
        double g = std::ceil(std::log(u01()) / std::log1p(-p));
        if (g < 1.0) return 1;
        return static_cast<uint64_t>(g);
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::array<uint64_t, 2> s0_;
};

// Role tags for deriving independent sub-streams from one master seed.
// Environments and walks must never share a stream (the schedule of
// environment queries depends on the walk, so sharing would leak one into
// the other).
namespace rng_tag {
constexpr uint64_t environment = 0x656e7669726f6e00ull;
constexpr uint64_t walk = 0x77616c6b00000000ull;
constexpr uint64_t analysis = 0x616e616c79736973ull;
}  // namespace rng_tag

// Dirichlet draw by gamma normalisation.  Zero draws (possible underflow at
// tiny shapes) are clamped to the smallest normal double so every component
// of the output is strictly positive.  After the divide, the last component
// is rebuilt as the rounded residual 1 - (left-to-right sum of the others):
// that sum plus the residual lands within half an ulp of 1, so the plain
// left-to-right accumulation of the row is exactly 1.0, which downstream
// inverse-CDF stepping and simplex invariants rely on.  If the prefix itself
// rounds to >= 1 (possible when the true last component is below one ulp),
// the largest component is shaved by single ulps until a positive residual
// exists.
inline void sample_dirichlet(std::span<const double> shape, std::span<double> out, Rng& rng) {
    if (shape.size() != out.size() || shape.empty())
        throw std::invalid_argument("sample_dirichlet: size mismatch");
    double sum = 0.0;
    for (size_t i = 0; i < shape.size(); ++i) {
        double g = rng.gamma(shape[i]);
        if (g < 2.2250738585072014e-308) g = 2.2250738585072014e-308;
        out[i] = g;
        sum += g;
    }
    for (size_t i = 0; i < out.size(); ++i) out[i] /= sum;
    if (out.size() == 1) {
        out[0] = 1.0;
        return;
    }
    const size_t last = out.size() - 1;
    for (int guard = 0; guard < 128; ++guard) {
        double prefix = 0.0;
        size_t argmax = 0;
        for (size_t i = 0; i < last; ++i) {
            prefix += out[i];
            if (out[i] > out[argmax]) argmax = i;
        }
        double residual = 1.0 - prefix;
        if (residual > 0.0) {
            out[last] = residual;
            return;
        }
        out[argmax] = std::nextafter(out[argmax], 0.0);
    }
    throw std::logic_error("sample_dirichlet: row repair did not converge");
}

inline std::vector<double> sample_dirichlet(std::span<const double> shape, Rng& rng) {
    std::vector<double> out(shape.size());
    sample_dirichlet(shape, out, rng);
    return out;
}

}  // namespace rwde
