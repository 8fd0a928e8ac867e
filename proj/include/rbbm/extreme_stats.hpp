// SPDX-License-Identifier: MIT
/**
 * Estimators over ensembles of snapshots: quantiles of the maximum, the
 * l t - s log t regression, membership in the localization windows
 * Omega^R_{t,h} of each approximation family, decoration gaps seen from the
 * maximum and the shape of the Laplace functional Phi_rho(t, x).
 */
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "bbm_engine.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "phase_atlas.hpp"

namespace rbbm {

// ---------------------------------------------------------------------------
// Ensembles

struct Ensemble {
    double horizon = 0.0;
    Params params;                       // parameters at this horizon
    std::optional<ApproxFamily> family;  // provenance, if built from a family
    double keep_depth = 8.0;             // extremal records retained below the max
    std::vector<Snapshot> members;

    /// Centering m(t) of the ensemble: the family's sequence if known,
    /// otherwise the Table-1 entry of the parameter pair.
    double centering_value() const {
        return family ? centering(*family, horizon).value(horizon)
                      : table1_centering(params).value(horizon);
    }
};

inline void validate(const Ensemble& e) {
    require(!e.members.empty(), "ensemble is empty");
    for (const auto& s : e.members)
        require(s.horizon == e.horizon, "ensemble members must share the horizon");
}

struct EnsembleRun {
    Params params;
    double horizon = 0.0;
    std::uint64_t reps = 0;
    std::uint64_t seed = 0;
    bool two_type = true;
    std::optional<double> prune_depth;
    std::uint64_t max_population = 50'000'000;
    double keep_depth = 8.0;
    Retention retain = Retention::Extremal;
    unsigned threads = 1;
};

/// Simulate `reps` independent replications; member i uses
/// replication_seed(seed, i) whatever the thread count.
inline Ensemble simulate_ensemble(const EnsembleRun& r) {
    EngineConfig base;
    base.params = r.params;
    base.horizon = r.horizon;
    base.two_type = r.two_type;
    base.prune_depth = r.prune_depth;
    base.max_population = r.max_population;
    base.keep_depth = r.keep_depth;
    base.retain = r.retain;
    validate(base);
    Ensemble e;
    e.horizon = r.horizon;
    e.params = r.params;
    e.keep_depth = r.keep_depth;
    e.members = parallel_map(r.reps, r.threads, [&](std::uint64_t i) {
        EngineConfig c = base;
        c.seed = replication_seed(r.seed, i);
        return simulate_two_type(c);
    });
    return e;
}

// ---------------------------------------------------------------------------
// Quantiles of the maximum

/// Empirical quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7).
inline double empirical_quantile(std::vector<double> xs, double q) {
    require(!xs.empty(), "quantile of an empty sample");
    require(q > 0.0 && q < 1.0, "quantile level must lie in (0, 1)");
    std::sort(xs.begin(), xs.end());
    const double h = (xs.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (h - lo) * (xs[hi] - xs[lo]);
}

inline std::vector<double> maxima(const Ensemble& e) {
    std::vector<double> m;
    m.reserve(e.members.size());
    for (const auto& s : e.members) m.push_back(s.max);
    return m;
}

inline std::vector<double> max_quantiles(const Ensemble& e, const std::vector<double>& qs) {
    validate(e);
    for (double q : qs) require(q > 0.0 && q < 1.0, "quantile level must lie in (0, 1)");
    const auto m = maxima(e);
    std::vector<double> out;
    for (double q : qs) out.push_back(empirical_quantile(m, q));
    return out;
}

// ---------------------------------------------------------------------------
// Log-correction regression  median ~ l t - s log t + c

struct LogFit {
    double l = 0.0, s = 0.0, c = 0.0;
    double se_l = 0.0, se_s = 0.0, se_c = 0.0; // zero when the fit is exact
    double residual = 0.0;                     // root of the residual sum of squares
    bool l_pinned = false;
};

struct TimePoint {
    double t;
    double value;
};

inline LogFit fit_log_correction(const std::vector<TimePoint>& pts,
                                 std::optional<double> pinned_l = std::nullopt) {
    std::set<double> distinct;
    for (const auto& p : pts) {
        require(std::isfinite(p.t) && p.t > 0.0 && std::isfinite(p.value),
                "fit points need finite t > 0 and finite values");
        distinct.insert(p.t);
    }
    require(distinct.size() >= 3, "log-correction fit needs >= 3 distinct t values");
    const int k = pinned_l ? 2 : 3;
    const auto n = static_cast<Eigen::Index>(pts.size());
    Eigen::MatrixXd X(n, k);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = pts[static_cast<std::size_t>(i)];
        int j = 0;
        if (!pinned_l) X(i, j++) = p.t;
        X(i, j++) = -std::log(p.t);
        X(i, j) = 1.0;
        y(i) = p.value - (pinned_l ? *pinned_l * p.t : 0.0);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < k) throw ValidationError("log-correction fit is rank deficient (t values too close)");
    const Eigen::VectorXd beta = qr.solve(y);
    const Eigen::VectorXd res = y - X * beta;
    LogFit f;
    f.l_pinned = pinned_l.has_value();
    int j = 0;
    f.l = pinned_l ? *pinned_l : beta(j++);
    f.s = beta(j++);
    f.c = beta(j);
    f.residual = res.norm();
    if (n > k) {
        const double s2 = res.squaredNorm() / double(n - k);
        const Eigen::MatrixXd cov = s2 * (X.transpose() * X).inverse();
        j = 0;
        if (!pinned_l) f.se_l = std::sqrt(cov(j, j)), ++j;
        f.se_s = std::sqrt(cov(j, j));
        f.se_c = std::sqrt(cov(j + 1, j + 1));
    }
    return f;
}

// ---------------------------------------------------------------------------
// Localization windows

struct WindowSpec {
    Family family = Family::B13_minus;
    double h = 0.25;
    double R = 2.0;
};

inline void validate(const WindowSpec& w) {
    require(w.h > 0.0, "window h must be > 0");
    require(w.R > 1.0 && !std::isnan(w.R), "window scale R must be > 1");
}

namespace detail {
inline bool in_range(double v, double lo, double hi) { return v >= lo && v <= hi; }
} // namespace detail

/// Is the transform point (s, x) inside Omega^R_{t,h} of the family, with
/// q the parameters in force at horizon t?
inline bool in_window(const WindowSpec& w, const Params& q, double t, double s, double x) {
    validate(w);
    using detail::in_range;
    const double R = w.R, h = w.h;
    const auto d = derived_constants(q);
    auto star = [&]() {
        if (!d.star) throw ValidationError("window needs the starred constants of the parameters");
        return *d.star;
    };
    switch (w.family) {
    case Family::B13_minus: {
        const double hp = std::min(h, 0.5), th = std::pow(t, hp);
        const double delta = x - d.v * s + (d.theta - d.v) * (t - s);
        return in_range(t - s, th / R, R * th) && std::abs(delta) <= R * std::sqrt(t - s);
    }
    case Family::B13_plus: {
        const auto c = star();
        const double delta = x - c.a * s + (c.b - c.a) * (c.p * t - s);
        const bool time_ok = h < 0.5 ? std::abs(s - c.p * t) <= R * std::sqrt(t)
                                     : in_range(t - s, std::sqrt(t) / R, R * std::sqrt(t));
        return time_ok && s <= t && std::abs(delta) <= R * std::sqrt(t - s);
    }
    case Family::B23_plus: {
        const auto c = star();
        const bool time_ok = h < 0.5 ? std::abs(s - c.p * t) <= R * std::sqrt(t)
                                     : in_range(s, std::sqrt(t) / R, R * std::sqrt(t));
        return time_ok && std::abs(x - c.a * s) <= R * std::sqrt(s);
    }
    case Family::B23_minus: {
        const double hp = std::min(h, 0.5), th = std::pow(t, hp);
        return in_range(s, th / R, R * th) &&
               std::abs(x - kSqrt2 * q.sigma2 * s) <= R * std::sqrt(s);
    }
    case Family::P11_f1: {
        const double gap = d.v * s - x;
        if (h < 1.0) {
            const double th = std::pow(t, h), r = std::sqrt(t - s);
            return in_range(t - s, th / R, R * th) && in_range(gap, r / R, R * r);
        }
        return in_range(t - s, t / R, (1.0 - 1.0 / R) * t) &&
               in_range(gap, std::sqrt(t) / R, R * std::sqrt(t));
    }
    case Family::P11_f2: {
        const double gap = kSqrt2 * q.sigma2 * s - x, r = std::sqrt(s);
        const bool time_ok = h < 1.0 ? in_range(s, std::pow(t, h) / R, R * std::pow(t, h))
                                     : in_range(s, t / R, (1.0 - 1.0 / R) * t);
        return time_ok && in_range(gap, r / R, R * r);
    }
    case Family::P11_f3: {
        if (h < 1.0) {
            const auto c = star();
            return std::abs(s - 0.5 * t) <= R * std::pow(t, 0.5 * (1.0 + h)) &&
                   std::abs(x - c.a * s) <= R * std::sqrt(s);
        }
        return in_range(s, t / R, (1.0 - 1.0 / R) * t) &&
               in_range(kSqrt2 * s - x, std::sqrt(t) / R, R * std::sqrt(t));
    }
    }
    return false;
}

struct LocalizationResult {
    double fraction = 0.0;
    std::uint64_t outside = 0;   // replications with an escaping extremal particle
    std::uint64_t reps = 0;
    double level = 0.0;          // m(t) - A
};

/// Fraction of replications holding a type-2 particle above m(t) - A whose
/// transform point lies outside the window.
inline LocalizationResult localization_fraction(const Ensemble& e, const WindowSpec& w,
                                                double A) {
    validate(e);
    validate(w);
    if (e.family && e.family->family != w.family)
        throw ValidationError("window family does not match the ensemble's family");
    const double level = e.centering_value() - A;
    LocalizationResult r;
    r.level = level;
    r.reps = e.members.size();
    for (const auto& s : e.members) {
        require(s.max - e.keep_depth <= level || s.max < level,
                "retained extremal depth does not reach m(t) - A");
        bool out = false;
        for (std::size_t i = 0; i < s.size() && !out; ++i) {
            if (s.type[i] != 2 || s.position[i] < level) continue;
            out = !in_window(w, e.params, e.horizon, s.transform_time[i], s.transform_pos[i]);
        }
        r.outside += out;
    }
    r.fraction = double(r.outside) / double(r.reps);
    return r;
}

// ---------------------------------------------------------------------------
// Decorations seen from the maximum

/// Positions within keep_depth of the maximum, relative to it, in
/// decreasing order (the first entry is 0, the maximum itself).
inline std::vector<double> decoration_points(const Snapshot& s, double keep_depth) {
    std::vector<double> pts;
    for (double x : s.position)
        if (x >= s.max - keep_depth) pts.push_back(x - s.max);
    std::sort(pts.begin(), pts.end(), std::greater<>());
    return pts;
}

struct DecorationStats {
    std::uint64_t attempts = 0;
    std::uint64_t accepted = 0;
    double acceptance = 0.0;
    double mean_points = 0.0;          // mean number of points in [-keep_depth, 0]
    double bin_width = 0.25;
    std::vector<double> gap_histogram; // mean count per accepted sample, per gap bin
    double mean_first_gap = 0.0;       // mean distance between the two largest points
    bool low_confidence = false;       // fewer than 10 accepted samples
};

/// Rejection sampling of the process seen from the maximum, conditioned on
/// M_t >= rho t.
inline DecorationStats decoration_gaps(const Params& p, double horizon, double rho,
                                       std::uint64_t budget, std::uint64_t seed,
                                       double keep_depth = 8.0, unsigned threads = 1) {
    validate(p);
    require(rho >= kSqrt2, "decoration_gaps needs rho >= sqrt2");
    require(budget > 0 && keep_depth > 0.0, "decoration_gaps needs budget > 0, keep_depth > 0");
    EngineConfig base;
    base.params = p;
    base.horizon = horizon;
    base.two_type = false;
    base.retain = Retention::Extremal;
    base.keep_depth = keep_depth;
    DecorationStats out;
    out.attempts = budget;
    const int nb = static_cast<int>(std::ceil(keep_depth / out.bin_width));
    out.gap_histogram.assign(static_cast<std::size_t>(nb), 0.0);
    auto samples = parallel_map(budget, threads, [&](std::uint64_t i) {
        EngineConfig c = base;
        c.seed = replication_seed(seed, i);
        const Snapshot s = simulate_two_type(c);
        if (!s.valid) throw RuntimeError("decoration sample exceeded the population cap");
        return s.max >= rho * horizon ? decoration_points(s, keep_depth) : std::vector<double>{};
    });
    double first_gap_sum = 0.0;
    std::uint64_t first_gap_n = 0;
    for (const auto& pts : samples) {
        if (pts.empty()) continue;
        ++out.accepted;
        out.mean_points += double(pts.size());
        for (std::size_t k = 1; k < pts.size(); ++k) {
            const double g = pts[k - 1] - pts[k];
            const auto b = std::min<std::size_t>(static_cast<std::size_t>(g / out.bin_width),
                                                 out.gap_histogram.size() - 1);
            out.gap_histogram[b] += 1.0;
        }
        if (pts.size() > 1) {
            first_gap_sum += pts[0] - pts[1];
            ++first_gap_n;
        }
    }
    out.acceptance = double(out.accepted) / double(out.attempts);
    if (out.accepted > 0) {
        out.mean_points /= double(out.accepted);
        for (double& v : out.gap_histogram) v /= double(out.accepted);
    }
    if (first_gap_n > 0) out.mean_first_gap = first_gap_sum / double(first_gap_n);
    out.low_confidence = out.accepted < 10;
    return out;
}

// ---------------------------------------------------------------------------
// Laplace functional with the step test function phi(y) = 1{y >= -A}

struct LaplaceRow {
    double x;
    double phi_hat;  // estimate of Phi_rho(t, x)
    double se;
    double shape;    // x-dependent factor of the large-t asymptotics
    double ratio;    // phi_hat / shape
};

/// x-dependent factor of Phi_rho(t, x): (-x) e^{sqrt2 x - x^2/2t} at the
/// critical rho and e^{rho x - x^2/2t} above it.
inline double laplace_shape_factor(double rho, double t, double x) {
    const double g = std::exp(rho * x - x * x / (2.0 * t));
    return rho > kSqrt2 ? g : -x * g;
}

/// Sum of phi(x + X_u(t) - rho t) is the number of particles at or above
/// rho t - x - A, so a single ensemble serves the whole x grid.
inline std::vector<LaplaceRow> laplace_shape(const Params& p, double t, double rho,
                                             const std::vector<double>& xs, double A,
                                             std::uint64_t reps, std::uint64_t seed,
                                             unsigned threads = 1) {
    validate(p);
    require(rho >= kSqrt2, "laplace_shape needs rho >= sqrt2");
    require(reps > 1, "laplace_shape needs at least two replications");
    require(!std::isnan(A), "A must not be NaN");
    std::vector<LaplaceRow> rows;
    if (A == -kInf) { // phi identically zero
        for (double x : xs) rows.push_back({x, 0.0, 0.0, laplace_shape_factor(rho, t, x), 0.0});
        return rows;
    }
    std::vector<double> levels;
    for (double x : xs) levels.push_back(rho * t - x - A);
    // per replication: the number of particles above each level
    auto counts = parallel_map(reps, threads, [&](std::uint64_t i) {
        const Snapshot s = simulate_single_type(p, t, replication_seed(seed, i));
        if (!s.valid) throw RuntimeError("laplace sample exceeded the population cap");
        std::vector<std::uint32_t> c(levels.size(), 0);
        for (double x : s.position)
            for (std::size_t k = 0; k < levels.size(); ++k) c[k] += x >= levels[k];
        return c;
    });
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double n = double(reps);
        double mean = 0.0, ss = 0.0;
        for (const auto& c : counts) mean += -std::expm1(-double(c[k]));
        mean /= n;
        for (const auto& c : counts) {
            const double d = -std::expm1(-double(c[k])) - mean;
            ss += d * d;
        }
        const double var = ss / (n - 1.0);
        const double shape = laplace_shape_factor(rho, t, xs[k]);
        rows.push_back({xs[k], mean, std::sqrt(var / n), shape, mean / shape});
    }
    return rows;
}

/// max/min of the ratio column (infinite if some ratio is not positive).
inline double ratio_spread(const std::vector<LaplaceRow>& rows) {
    double lo = kInf, hi = 0.0;
    for (const auto& r : rows) {
        if (!(r.ratio > 0.0)) return kInf;
        lo = std::min(lo, r.ratio);
        hi = std::max(hi, r.ratio);
    }
    return hi / lo;
}

} // namespace rbbm
