#include "rwde/lattice_env.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace rwde {

int box_length(double x, double kappa, double c_T) {
    if (!(x > 1.0)) throw std::domain_error("box_length: needs x > 1");
    if (!(kappa > 0.0) || !(c_T > 0.0))
        throw std::domain_error("box_length: kappa and c_T must be positive");
    return static_cast<int>(std::ceil((1.0 + kappa) / c_T * std::log(x)));
}

LatticeEnvironment::LatticeEnvironment(Weights w, uint64_t master_seed, size_t cache_capacity)
    : weights_(std::move(w)), master_seed_(master_seed), capacity_(cache_capacity) {
    weights_.validate();
    if (weights_.d > kMaxDim)
        throw std::invalid_argument("LatticeEnvironment: dimension above compiled maximum");
    if (capacity_ == 0) capacity_ = 1;
}

LatticeEnvironment::Row LatticeEnvironment::generate_row(const LatticePoint& p) const {
    std::array<int64_t, kMaxDim> words{};
    for (int i = 0; i < weights_.d; ++i) words[i] = p.c[i];
    Rng r = Rng::keyed(master_seed_, rng_tag::environment,
                       std::span<const int64_t>(words.data(), weights_.d));
    Row row(weights_.alpha.size(), 0.0);
    sample_dirichlet(weights_.alpha, row, r);
    return row;
}

void LatticeEnvironment::transition_probs(const LatticePoint& p, std::span<double> out) const {
    if (out.size() != weights_.alpha.size())
        throw std::invalid_argument("transition_probs: output span has wrong size");
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = index_.find(p);
        if (it != index_.end()) {
            lru_.splice(lru_.begin(), lru_, it->second);
            const Row& row = it->second->second;
            std::copy(row.begin(), row.end(), out.begin());
            return;
        }
    }
    Row row = generate_row(p);
    std::copy(row.begin(), row.end(), out.begin());
    std::lock_guard<std::mutex> lock(mu_);
    if (index_.find(p) == index_.end()) {
        lru_.emplace_front(p, std::move(row));
        index_.emplace(p, lru_.begin());
        if (index_.size() > capacity_) {
            index_.erase(lru_.back().first);
            lru_.pop_back();
        }
    }
}

std::vector<double> LatticeEnvironment::env_at(const LatticePoint& p) const {
    std::vector<double> out(weights_.alpha.size(), 0.0);
    transition_probs(p, out);
    return out;
}

size_t LatticeEnvironment::cache_size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return index_.size();
}

std::string LatticeEnvironment::export_snapshot() const {
    std::string out = "schema = 1\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "d = %d\n", weights_.d);
    out += buf;
    std::snprintf(buf, sizeof buf, "seed = %llu\n",
                  static_cast<unsigned long long>(master_seed_));
    out += buf;
    out += "alpha =";
    for (double a : weights_.alpha) {
        std::snprintf(buf, sizeof buf, " %.17g", a);
        out += buf;
    }
    out += '\n';
    return out;
}

LatticeEnvironment LatticeEnvironment::import_snapshot(const std::string& text) {
    int d = 0;
    bool have_seed = false, have_schema = false;
    uint64_t seed = 0;
    std::vector<double> alpha;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::istringstream key_s(line.substr(0, eq)), val_s(line.substr(eq + 1));
        std::string key;
        key_s >> key;
        if (key == "schema") {
            int v = 0;
            val_s >> v;
            if (v != 1) throw std::invalid_argument("snapshot: unsupported schema");
            have_schema = true;
        } else if (key == "d") {
            val_s >> d;
        } else if (key == "seed") {
            unsigned long long v = 0;
            val_s >> v;
            seed = v;
            have_seed = true;
        } else if (key == "alpha") {
            double a;
            while (val_s >> a) alpha.push_back(a);
        }
    }
    if (!have_schema || !have_seed || d < 1)
        throw std::invalid_argument("snapshot: missing schema, seed, or d");
    Weights w{d, std::move(alpha)};
    return LatticeEnvironment(std::move(w), seed);
}

}  // namespace rwde
