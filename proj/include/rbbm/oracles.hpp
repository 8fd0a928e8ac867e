// SPDX-License-Identifier: MIT
/**
 * Independent oracles: brute-force solution of the speed optimisation
 * problem, the Brownian-bridge line-avoidance probability with a Monte Carlo
 * companion, expected transform counts, and the window L-function.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "errors.hpp"
#include "phase_atlas.hpp"
#include "rng.hpp"

namespace rbbm {

// ---------------------------------------------------------------------------
// Speed optimisation  max{ p a + (1-p) b } subject to
//   (beta - a^2/(2 sigma2)) p >= 0,
//   (beta - a^2/(2 sigma2)) p + (1 - b^2/2)(1-p) >= 0.

struct SpeedSolution {
    double p = 0.0, a = 0.0, b = 0.0;
    double value = -std::numeric_limits<double>::infinity();
    double slack1 = 0.0, slack2 = 0.0;
    double grid_step = 0.0; // final step in the a/b coordinates
};

inline double speed_slack1(const Params& q, double p, double a) {
    return (q.beta - a * a / (2.0 * q.sigma2)) * p;
}

inline double speed_slack2(const Params& q, double p, double a, double b) {
    return speed_slack1(q, p, a) + (1.0 - b * b / 2.0) * (1.0 - p);
}

/// Largest b in [0, b_hi] satisfying the second constraint at (p, a); the
/// objective increases in b, so this is the exact inner maximiser.
inline double speed_best_b(const Params& q, double p, double a, double b_hi) {
    if (p >= 1.0) return b_hi;
    const double c1 = speed_slack1(q, p, a);
    return std::min(b_hi, std::sqrt(2.0 * (1.0 + c1 / (1.0 - p))));
}

/// Exhaustive search of the (p, a) grid on [p_lo,p_hi] x [a_lo,a_hi].
inline SpeedSolution speed_grid_pass(const Params& q, int n, double p_lo, double p_hi,
                                     double a_lo, double a_hi, double b_hi) {
    SpeedSolution best;
    const double dp = (p_hi - p_lo) / (n - 1);
    const double da = (a_hi - a_lo) / (n - 1);
    for (int i = 0; i < n; ++i) {
        const double p = p_lo + i * dp;
        for (int j = 0; j < n; ++j) {
            const double a = a_lo + j * da;
            if (speed_slack1(q, p, a) < 0.0) continue;
            const double b = speed_best_b(q, p, a, b_hi);
            const double val = p * a + (1.0 - p) * b;
            if (val > best.value) best = {p, a, b, val, 0.0, 0.0, 0.0};
        }
    }
    best.grid_step = std::max(dp, da);
    return best;
}

/// Brute-force maximiser: a coarse n x n pass over (p, a) in [0,1] x [0,hi]
/// (b eliminated through its exact inner maximiser), then three rounds of
/// 10x zoom around the incumbent.
inline SpeedSolution solve_speed_optimization(const Params& q, int n = 100) {
    validate(q);
    require(n >= 100, "grid resolution must be >= 100");
    const auto d = derived_constants(q);
    const double hi = 3.0 * std::max(d.v, kSqrt2);
    double wp = 1.0, wa = hi;
    SpeedSolution best = speed_grid_pass(q, n, 0.0, 1.0, 0.0, hi, hi);
    if (!std::isfinite(best.value))
        throw RuntimeError("speed oracle found no feasible point");
    for (int round = 0; round < 3; ++round) {
        const double hp = 5.0 * wp / (n - 1), ha = 5.0 * wa / (n - 1);
        wp = 2.0 * hp;
        wa = 2.0 * ha;
        const SpeedSolution z = speed_grid_pass(
            q, n, std::max(0.0, best.p - hp), std::min(1.0, best.p + hp),
            std::max(0.0, best.a - ha), std::min(hi, best.a + ha), hi);
        if (z.value >= best.value) best = z;
        else best.grid_step = z.grid_step;
    }
    best.slack1 = speed_slack1(q, best.p, best.a);
    best.slack2 = speed_slack2(q, best.p, best.a, best.b);
    return best;
}

// ---------------------------------------------------------------------------
// Brownian bridge below a line

/// P(bridge from 0 to 0 on [0,t] stays below s/t x1 + (t-s)/t x2).
inline double bridge_prob(double x1, double x2, double t) {
    require(x1 >= 0.0 && x2 >= 0.0 && t > 0.0, "bridge_prob needs x1, x2 >= 0, t > 0");
    return -std::expm1(-2.0 * x1 * x2 / t);
}

struct BridgeMc {
    double raw;       // discretely monitored staying probability
    double raw_se;
    double corrected; // same paths, barrier lowered by the continuity correction
    double corrected_se;
};

/// Monte Carlo companion: `paths` bridges sampled on m equal steps.  The
/// discretely monitored estimate is biased upwards by O(sqrt(t/m)); the
/// corrected estimate lowers the barrier by beta1 sqrt(t/m) with
/// beta1 = -zeta(1/2)/sqrt(2 pi) (Broadie-Glasserman-Kou continuity
/// correction), which removes the leading bias term.
inline BridgeMc bridge_prob_mc(double x1, double x2, double t, std::uint64_t paths,
                               int m, std::uint64_t seed) {
    require(x1 >= 0.0 && x2 >= 0.0 && t > 0.0, "bridge_prob_mc needs x1, x2 >= 0, t > 0");
    require(paths > 1 && m >= 1, "bridge_prob_mc needs paths > 1 and m >= 1");
    constexpr double beta1 = 0.5825971579390106;
    const double dt = t / m;
    const double shift = beta1 * std::sqrt(dt);
    std::uint64_t ok_raw = 0, ok_cor = 0;
    for (std::uint64_t i = 0; i < paths; ++i) {
        CounterRng rng(derive_key(seed, i));
        double z = 0.0; // bridge value
        bool raw = true, cor = true;
        for (int k = 1; k < m; ++k) {
            const double s = k * dt, rem = t - s + dt;
            // next point of a bridge pinned at 0 at time t
            const double mean = z * (t - s) / rem;
            const double var = dt * (t - s) / rem;
            z = mean + std::sqrt(var) * rng.normal();
            const double line = s / t * x1 + (t - s) / t * x2;
            if (z > line) raw = false;
            if (z > line - shift) cor = false;
            if (!raw && !cor) break;
        }
        ok_raw += raw;
        ok_cor += cor;
    }
    const double n = double(paths);
    const double pr = ok_raw / n, pc = ok_cor / n;
    return {pr, std::sqrt(pr * (1 - pr) / (n - 1)), pc, std::sqrt(pc * (1 - pc) / (n - 1))};
}

// ---------------------------------------------------------------------------
// Many-to-one expected count of type-2 births by time T

inline double expected_transform_count(double beta, double T) {
    require(beta > 0.0 && T >= 0.0, "expected_transform_count needs beta > 0, T >= 0");
    return std::expm1(beta * T) / beta;
}

// ---------------------------------------------------------------------------
// Window L-function

/// Which limit of L applies: case i is the B_{II,III} family approached from
/// C_III (u = xi sqrt t), case ii the (1,1) family f3 (u = xi t^{(1+h)/2}).
enum class LCase { BoundaryII_III, Point11 };

inline LCase l_case(const ApproxFamily& f) {
    if (f.family == Family::B23_plus) return LCase::BoundaryII_III;
    if (f.family == Family::P11_f3 && f.h < 1.0) return LCase::Point11;
    throw ValidationError("L-function is defined for B23_plus and P11_f3 (h < 1)");
}

/// L(u,t) = (beta_t - a_t^2/(2 sigma_t^2)) s - sqrt2 y - y^2 / (2(t-s)),
/// with s = p_t t + u and y = (sqrt2 - a_t) s + (v*_t - sqrt2) t.
inline double L_function(double u, double t, const ApproxFamily& f) {
    l_case(f);
    const Params q = make_approximation(f, t);
    const auto c = star_constants(q);
    using LD = long double;
    const LD s = LD(c.p) * t + u;
    require(s > 0 && s < t, "L_function: s = p_t t + u must lie in (0, t)");
    const LD r2 = std::sqrt(2.0L);
    const LD y = (r2 - c.a) * s + (LD(c.v) - r2) * t;
    const LD L = (LD(q.beta) - LD(c.a) * c.a / (2.0L * q.sigma2)) * s - r2 * y -
                 y * y / (2.0L * (LD(t) - s));
    return double(L);
}

/// Algebraic rearrangement of the same quantity, used as a second route:
/// L = -(sqrt2-a)^2 u^2 / (2(1-p) t) - r(u,t) with
/// r = (2 Delta + A u) A u^2 + (Delta + A u)^2 u^2 / ((1-p) t - u),
/// Delta = b/sqrt2 - 1 and A = (sqrt2 - a) / (sqrt2 (1-p) t).
inline double L_function_expanded(double u, double t, const ApproxFamily& f) {
    l_case(f);
    const Params q = make_approximation(f, t);
    const auto c = star_constants(q);
    using LD = long double;
    const LD r2 = std::sqrt(2.0L);
    const LD g = r2 - c.a, omp = 1.0L - c.p;
    const LD delta = LD(c.b) / r2 - 1.0L;
    const LD A = g / (r2 * omp * t);
    const LD U = u;
    const LD r = (2.0L * delta + A * U) * A * U * U +
                 (delta + A * U) * (delta + A * U) * U * U / (omp * t - U);
    return double(-g * g * U * U / (2.0L * omp * t) - r);
}

inline double L_scale(double xi, double t, const ApproxFamily& f) {
    return l_case(f) == LCase::BoundaryII_III ? xi * std::sqrt(t)
                                              : xi * std::pow(t, 0.5 * (1.0 + f.h));
}

inline double L_limit(double xi, const ApproxFamily& f) {
    const double oms = 1.0 - f.target.sigma2;
    return l_case(f) == LCase::BoundaryII_III ? -oms * oms * xi * xi
                                              : -(kSqrt2 + 1.0) * xi * xi;
}

struct LCheckRow {
    double t, xi, L, limit, residual;
};

/// L evaluated at its natural scale along a grid of horizons, against the limit.
inline std::vector<LCheckRow> L_limit_check(double xi, const std::vector<double>& ts,
                                            const ApproxFamily& f) {
    std::vector<LCheckRow> rows;
    for (double t : ts) {
        const double L = L_function(L_scale(xi, t, f), t, f);
        const double lim = L_limit(xi, f);
        rows.push_back({t, xi, L, lim, L - lim});
    }
    return rows;
}

} // namespace rbbm
