#pragma once

// Lazy i.i.d. Dirichlet environment on Z^d.  Each vertex row is generated
// from an RNG stream keyed by (master seed, coordinates), so the value at a
// point never depends on visit order, thread schedule or cache pressure;
// the LRU cache is purely a speed knob.

#include <array>
#include <cstdint>
#include <list>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rwde/rng.hpp"
#include "rwde/weights.hpp"

namespace rwde {

inline constexpr int kMaxDim = 8;

struct LatticePoint {
    std::array<int32_t, kMaxDim> c{};  // zero-padded beyond the active dimension

    static LatticePoint zero() { return {}; }
    int32_t operator[](int i) const { return c[i]; }
    int32_t& operator[](int i) { return c[i]; }
    bool operator==(const LatticePoint& o) const { return c == o.c; }
};

struct LatticePointHash {
    size_t operator()(const LatticePoint& p) const {
        uint64_t h = 0x9e3779b97f4a7c15ull;
        for (int i = 0; i < kMaxDim; i += 2) {
            uint64_t w = (static_cast<uint64_t>(static_cast<uint32_t>(p.c[i])) << 32) |
                         static_cast<uint32_t>(p.c[i + 1]);
            h = mix_in(h, w);
        }
        return static_cast<size_t>(h);
    }
};

// Directions 0..d-1 step +e_j, directions d..2d-1 step -e_{j-d}.
inline LatticePoint neighbor(const LatticePoint& p, int dir, int d) {
    LatticePoint q = p;
    if (dir < d)
        q.c[dir] += 1;
    else
        q.c[dir - d] -= 1;
    return q;
}

inline int opposite_direction(int dir, int d) { return dir < d ? dir + d : dir - d; }

// [0, ell] x [-ell, ell]^{d-1}, the slab-aligned window used for trap scans.
struct Box {
    int ell = 0;
    int d = 1;

    bool contains(const LatticePoint& p) const {
        if (p.c[0] < 0 || p.c[0] > ell) return false;
        for (int i = 1; i < d; ++i)
            if (p.c[i] < -ell || p.c[i] > ell) return false;
        return true;
    }
    template <typename F>
    void for_each(F&& fn) const {
        LatticePoint p{};
        p.c[0] = 0;
        for (int i = 1; i < d; ++i) p.c[i] = -ell;
        while (true) {
            fn(p);
            int i = 0;
            for (; i < d; ++i) {
                int hi = ell, lo = (i == 0) ? 0 : -ell;
                if (p.c[i] < hi) {
                    p.c[i] += 1;
                    break;
                }
                p.c[i] = lo;
            }
            if (i == d) return;
        }
    }
};

// ceil((1 + kappa) / c_T * ln x); the side length at which a box is large
// enough to capture the dominant trap.  Defined for x > 1.
int box_length(double x, double kappa, double c_T);

class LatticeEnvironment {
  public:
    LatticeEnvironment(Weights w, uint64_t master_seed, size_t cache_capacity = size_t{1} << 16);

    int dim() const { return weights_.d; }
    const Weights& weights() const { return weights_; }
    uint64_t master_seed() const { return master_seed_; }

    // Transition row at p, one probability per direction, in direction order.
    // out must have 2d slots.
    void transition_probs(const LatticePoint& p, std::span<double> out) const;
    std::vector<double> env_at(const LatticePoint& p) const;

    // The environment is a pure function of (seed, weights), so a snapshot
    // is exactly that pair; vertex rows are never serialized.
    std::string export_snapshot() const;
    static LatticeEnvironment import_snapshot(const std::string& text);

    size_t cache_size() const;

  private:
    Weights weights_;
    uint64_t master_seed_;
    size_t capacity_;

    using Row = std::vector<double>;
    using LruList = std::list<std::pair<LatticePoint, Row>>;
    mutable std::mutex mu_;
    mutable LruList lru_;
    mutable std::unordered_map<LatticePoint, LruList::iterator, LatticePointHash> index_;

    Row generate_row(const LatticePoint& p) const;
};

}  // namespace rwde
