// SPDX-License-Identifier: MIT
/**
 * Exact event-driven simulation of single-type and two-type reducible BBM.
 *
 * Lineages are expanded depth first: a particle is followed from birth to
 * its next event (or the horizon) and one child continues in place while the
 * other is pushed on an explicit stack.  Each particle owns a counter-based
 * stream keyed by its genealogical label, so the realisation of a subtree
 * does not depend on the order of traversal or on what was pruned elsewhere.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "phase_atlas.hpp"
#include "rng.hpp"

namespace rbbm {

/// What the snapshot keeps of the horizon population.
enum class Retention {
    All,       // every particle
    Extremal,  // particles within keep_depth of the maximum
    Summary    // counts and maximum only
};

struct EngineConfig {
    Params params;
    double horizon = 0.0;
    std::uint64_t seed = 0;
    bool two_type = true;
    std::optional<double> prune_depth;
    std::uint64_t max_population = 50'000'000; // cap on particle-events
    Retention retain = Retention::All;
    double keep_depth = 8.0;
    /// If set, record sup over all paths of X_u(s) - envelope_speed * s.
    std::optional<double> envelope_speed;
    /// Number of time bins of the pruning reference line.
    int prune_bins = 256;
};

inline void validate(const EngineConfig& c) {
    validate(c.params);
    require(std::isfinite(c.horizon) && c.horizon >= 0.0, "horizon must be >= 0");
    require(!c.prune_depth || *c.prune_depth > 0.0, "pruning depth must be > 0");
    require(c.keep_depth >= 0.0, "keep depth must be >= 0");
    require(c.max_population > 0, "max_population must be positive");
    require(c.prune_bins > 0, "prune_bins must be positive");
}

struct Snapshot {
    double horizon = 0.0;
    std::vector<double> position;
    std::vector<std::uint8_t> type;      // 1 or 2
    std::vector<double> transform_time;  // NaN for type 1
    std::vector<double> transform_pos;   // NaN for type 1

    std::uint64_t count1 = 0;   // type-1 particles alive at the horizon
    std::uint64_t count2 = 0;   // type-2 particles alive at the horizon
    std::uint64_t born = 0;     // type-2 particles emitted by type-1 parents
    std::uint64_t pruned = 0;   // particles discarded with their subtree
    std::uint64_t events = 0;   // particle-events processed
    double max = -std::numeric_limits<double>::infinity();
    double envelope_excess = -std::numeric_limits<double>::infinity();
    bool valid = true;

    std::size_t size() const { return position.size(); }
    std::uint64_t population() const { return count1 + count2; }
};

namespace detail {

struct Pending {
    double s;
    double x;
    double tu;
    double xtu;
    std::uint64_t key;
    std::uint8_t type;
};

class Simulator {
public:
    explicit Simulator(const EngineConfig& c) : cfg_(c) {
        validate(c);
        sig1_ = c.params.sigma();
        beta_ = c.params.beta;
        rate1_ = c.two_type ? beta_ + 1.0 : beta_;
        split1_ = beta_ / rate1_;
        if (c.prune_depth)
            bins_.assign(static_cast<std::size_t>(c.prune_bins),
                         -std::numeric_limits<double>::infinity());
    }

    Snapshot run() {
        snap_.horizon = cfg_.horizon;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        stack_.push_back({0.0, 0.0, nan, nan, cfg_.seed, 1});
        while (!stack_.empty()) {
            Pending p = stack_.back();
            stack_.pop_back();
            if (!follow(p)) {
                snap_.valid = false;
                break;
            }
        }
        if (cfg_.retain == Retention::Extremal) compact(true);
        return std::move(snap_);
    }

private:
    std::size_t bin_of(double s) const {
        const double f = s / cfg_.horizon * double(bins_.size());
        return std::min(bins_.size() - 1, static_cast<std::size_t>(std::max(0.0, f)));
    }

    /// Follow one lineage to the horizon, pushing siblings.  Returns false
    /// when the event cap is hit.
    bool follow(Pending p) {
        const double t = cfg_.horizon;
        const bool prune = cfg_.prune_depth.has_value() && t > 0.0;
        for (;;) {
            if (++snap_.events > cfg_.max_population) return false;
            CounterRng rng(p.key);
            const bool t1 = p.type == 1;
            const double rate = t1 ? rate1_ : 1.0;
            const double sig = t1 ? sig1_ : 1.0;
            const double tau = rng.exponential(rate);
            const double s1 = std::min(t, p.s + tau);
            const double dt = s1 - p.s;
            const double x1 = p.x + sig * std::sqrt(dt) * rng.normal();
            if (cfg_.envelope_speed) envelope(p.s, p.x, s1, x1, sig, rng);
            if (!std::isfinite(x1)) throw RuntimeError("non-finite particle position");
            if (p.s + tau >= t) {
                record(p, x1);
                return true;
            }
            p.s = s1;
            p.x = x1;
            if (prune) {
                double& ref = bins_[bin_of(p.s)];
                if (p.x < ref - *cfg_.prune_depth) {
                    ++snap_.pruned;
                    return true;
                }
                ref = std::max(ref, p.x);
            }
            const std::uint64_t k0 = derive_key(p.key, 0);
            const std::uint64_t k1 = derive_key(p.key, 1);
            if (t1 && rng.uniform() >= split1_) {
                // emission of a type-2 particle; the parent continues
                ++snap_.born;
                stack_.push_back({p.s, p.x, p.s, p.x, k1, 2});
            } else {
                stack_.push_back({p.s, p.x, p.tu, p.xtu, k1, p.type});
            }
            p.key = k0;
        }
    }

    void envelope(double s0, double x0, double s1, double x1, double sig,
                  CounterRng& rng) {
        const double c = *cfg_.envelope_speed;
        const double y0 = x0 - c * s0, y1 = x1 - c * s1;
        const double var = sig * sig * (s1 - s0);
        // maximum of a Brownian bridge between the two end points
        const double d = y1 - y0;
        const double m = 0.5 * (y0 + y1 + std::sqrt(d * d - 2.0 * var * std::log(rng.uniform())));
        snap_.envelope_excess = std::max(snap_.envelope_excess, m);
    }

    void record(const Pending& p, double x) {
        if (p.type == 1) ++snap_.count1; else ++snap_.count2;
        snap_.max = std::max(snap_.max, x);
        if (cfg_.prune_depth) {
            double& ref = bins_.back();
            ref = std::max(ref, x);
        }
        if (cfg_.retain == Retention::Summary) return;
        if (cfg_.retain == Retention::Extremal && x < snap_.max - cfg_.keep_depth) return;
        snap_.position.push_back(x);
        snap_.type.push_back(p.type);
        snap_.transform_time.push_back(p.tu);
        snap_.transform_pos.push_back(p.xtu);
        if (cfg_.retain == Retention::Extremal && snap_.position.size() >= next_compact_)
            compact(false);
    }

    /// Drop retained records that fell more than keep_depth below the max.
    void compact(bool final_pass) {
        const double cut = snap_.max - cfg_.keep_depth;
        std::size_t w = 0;
        for (std::size_t r = 0; r < snap_.position.size(); ++r) {
            if (snap_.position[r] < cut) continue;
            snap_.position[w] = snap_.position[r];
            snap_.type[w] = snap_.type[r];
            snap_.transform_time[w] = snap_.transform_time[r];
            snap_.transform_pos[w] = snap_.transform_pos[r];
            ++w;
        }
        snap_.position.resize(w);
        snap_.type.resize(w);
        snap_.transform_time.resize(w);
        snap_.transform_pos.resize(w);
        if (!final_pass) next_compact_ = std::max<std::size_t>(1024, 2 * w);
    }

    EngineConfig cfg_;
    double sig1_, beta_, rate1_, split1_;
    std::vector<Pending> stack_;
    std::vector<double> bins_;
    std::size_t next_compact_ = 1024;
    Snapshot snap_;
};

} // namespace detail

/// Two-type reducible BBM (or single-type when cfg.two_type is false).
inline Snapshot simulate_two_type(const EngineConfig& cfg) {
    return detail::Simulator(cfg).run();
}

inline Snapshot simulate_single_type(const Params& p, double horizon, std::uint64_t seed,
                                     Retention retain = Retention::All) {
    EngineConfig c;
    c.params = p;
    c.horizon = horizon;
    c.seed = seed;
    c.two_type = false;
    c.retain = retain;
    return simulate_two_type(c);
}

struct SnapshotSummary {
    double max = -std::numeric_limits<double>::infinity();
    std::uint64_t count1 = 0, count2 = 0, born = 0, pruned = 0, population = 0;
    std::uint64_t replications = 0;
    bool valid = true;

    /// Commutative, associative merge.
    SnapshotSummary& merge(const SnapshotSummary& o) {
        max = std::max(max, o.max);
        count1 += o.count1;
        count2 += o.count2;
        born += o.born;
        pruned += o.pruned;
        population += o.population;
        replications += o.replications;
        valid = valid && o.valid;
        return *this;
    }
};

inline SnapshotSummary snapshot_summary(const Snapshot& s) {
    SnapshotSummary r;
    r.max = s.max;
    r.count1 = s.count1;
    r.count2 = s.count2;
    r.born = s.born;
    r.pruned = s.pruned;
    r.population = s.population();
    r.replications = 1;
    r.valid = s.valid;
    return r;
}

/// Seed of replication `index` under `master` (documented counter hash).
inline std::uint64_t replication_seed(std::uint64_t master, std::uint64_t index) {
    return derive_key(fmix64(master), index);
}

} // namespace rbbm
