// SPDX-License-Identifier: MIT
/**
 * Explicit finite-difference solver for the coupled F-KPP system
 *
 *   d_s u = (sigma2/2) u'' - beta u (1 - u) - u (1 - v),
 *   d_s v = (1/2) v''      - v (1 - v),
 *
 * with u(0) = f, v(0) = g.  For initial data equal to 1 on the left and 0 on
 * the right the stable state 0 invades to the left; the solver works in the
 * reflected coordinate y = -x so that fronts travel to the right, and it
 * tracks the fronts of 1 - u and 1 - v at level 1/2.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "phase_atlas.hpp"

namespace rbbm {

/// Initial profile in the original x coordinate: 1 on (-inf, -A], 0 on
/// [A, inf), linear in between (A = 0 gives a sharp step with value 1/2 at 0).
struct StepData {
    double A = 2.0;

    double operator()(double x) const {
        if (A == 0.0) return x < 0.0 ? 1.0 : (x > 0.0 ? 0.0 : 0.5);
        return std::clamp(0.5 - x / (2.0 * A), 0.0, 1.0);
    }
};

struct PdeConfig {
    Params params;
    double y_lo = -20.0;   // domain in the reflected coordinate y = -x
    double y_hi = 200.0;
    double dx = 0.05;
    double dt = 0.001;
    double horizon = 60.0;
    std::function<double(double)> f = StepData{};  // u(0, x), original orientation
    std::function<double(double)> g = StepData{};  // v(0, x), original orientation
    double record_every = 0.1;                     // time between front samples
};

inline double pde_max_speed(const Params& p) {
    const auto d = derived_constants(p);
    double v = std::max(d.v, kSqrt2);
    if (d.star) v = std::max(v, d.star->v);
    return v;
}

inline void validate(const PdeConfig& c) {
    validate(c.params);
    require(c.dx > 0.0 && c.dt > 0.0 && c.horizon >= 0.0, "dx, dt must be > 0 and horizon >= 0");
    require(c.y_lo < c.y_hi, "empty domain");
    require(c.dt <= 0.4 * c.dx * c.dx / std::max(c.params.sigma2, 1.0) * (1.0 + 1e-12),
            "dt violates the explicit stability bound 0.4 dx^2 / max(sigma2, 1)");
    require(c.y_hi >= 1.2 * pde_max_speed(c.params) * c.horizon + 20.0,
            "domain too short for the front to stay inside: need y_hi >= 1.2 v_max T + 20");
    require(c.record_every > 0.0, "record_every must be > 0");
    require(bool(c.f) && bool(c.g), "initial data must be set");
}

/// Default configuration: dt at the stability bound, domain sized for T.
inline PdeConfig make_pde_config(const Params& p, double horizon, double dx = 0.05) {
    PdeConfig c;
    c.params = p;
    c.horizon = horizon;
    c.dx = dx;
    c.dt = 0.4 * dx * dx / std::max(p.sigma2, 1.0);
    c.y_lo = -20.0;
    c.y_hi = std::ceil(1.2 * pde_max_speed(p) * horizon + 20.0 + 5.0);
    return c;
}

struct PdeState {
    double s = 0.0;
    double y0 = 0.0;  // coordinate of node 0 (reflected)
    double dx = 0.0;
    std::vector<double> u, v;

    double y(std::size_t i) const { return y0 + double(i) * dx; }
};

enum class Field { U, V };

/// Rightmost down-crossing of `level` by the sequence w, linearly
/// interpolated; w_i >= level > w_{i+1} defines the crossing segment.
inline double front_position(const std::vector<double>& w, double y0, double dx, double level) {
    for (std::size_t i = w.size(); i-- > 1;) {
        const double a = w[i - 1], b = w[i];
        if (a >= level && b < level) return y0 + (double(i - 1) + (a - level) / (a - b)) * dx;
    }
    throw RuntimeError("front_position: no crossing of the level in the domain");
}

/// Front of 1 - field at the given level.
inline double front_position(const PdeState& st, Field f, double level = 0.5) {
    const auto& src = f == Field::U ? st.u : st.v;
    std::vector<double> w(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) w[i] = 1.0 - src[i];
    return front_position(w, st.y0, st.dx, level);
}

struct FrontSample {
    double s;
    double front_u, front_v;  // fronts of 1-u and 1-v (NaN if absent)
    double mass_u, mass_v;    // integrals of 1-u and 1-v over the domain
};

struct PdeResult {
    std::vector<FrontSample> series;
    PdeState final_state;
};

namespace detail {

inline void clamp_or_throw(std::vector<double>& w, const char* name) {
    for (double& x : w) {
        if (!std::isfinite(x)) throw RuntimeError(std::string("non-finite value in ") + name);
        if (x < 0.0) {
            if (x < -1e-12) throw RuntimeError(std::string("negative overshoot in ") + name);
            x = 0.0;
        } else if (x > 1.0) {
            if (x > 1.0 + 1e-12) throw RuntimeError(std::string("overshoot above 1 in ") + name);
            x = 1.0;
        }
    }
}

inline double total_variation(const std::vector<double>& w) {
    double tv = 0.0;
    for (std::size_t i = 1; i < w.size(); ++i) tv += std::abs(w[i] - w[i - 1]);
    return tv;
}

inline double safe_front(const PdeState& st, Field f) {
    try {
        return front_position(st, f);
    } catch (const RuntimeError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

/// One explicit step of (sigma2/2) w'' + reaction(w) with Neumann ends.
template <class Reaction>
void step(const std::vector<double>& w, std::vector<double>& out, double diff, double dt,
          double dx, Reaction&& reaction) {
    const std::size_t n = w.size();
    const double k = diff * dt / (dx * dx);
    for (std::size_t i = 0; i < n; ++i) {
        const double l = w[i == 0 ? 1 : i - 1];
        const double r = w[i + 1 == n ? n - 2 : i + 1];
        out[i] = w[i] + k * (l - 2.0 * w[i] + r) + dt * reaction(i, w[i]);
    }
}

} // namespace detail

/// Solve the coupled system; with v_only the u field is left untouched
/// (the v equation is autonomous, so its evolution is identical).
inline PdeResult solve_coupled(const PdeConfig& c, bool v_only = false) {
    validate(c);
    const auto n = static_cast<std::size_t>(std::floor((c.y_hi - c.y_lo) / c.dx)) + 1;
    require(n >= 3, "domain needs at least three nodes");
    PdeState st;
    st.y0 = c.y_lo;
    st.dx = c.dx;
    st.u.resize(n);
    st.v.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = -st.y(i);
        st.u[i] = c.f(x);
        st.v[i] = c.g(x);
    }
    detail::clamp_or_throw(st.u, "u");
    detail::clamp_or_throw(st.v, "v");
    const double tv_cap_u = 10.0 * (detail::total_variation(st.u) + 1.0);
    const double tv_cap_v = 10.0 * (detail::total_variation(st.v) + 1.0);

    const double beta = c.params.beta, du = 0.5 * c.params.sigma2;
    const auto steps = static_cast<long>(std::llround(c.horizon / c.dt));
    const long every = std::max(1L, static_cast<long>(std::llround(c.record_every / c.dt)));
    std::vector<double> nu(n), nv(n);
    PdeResult res;
    auto sample = [&] {
        double mu = 0.0, mv = 0.0;
        for (std::size_t i = 0; i < n; ++i) mu += 1.0 - st.u[i], mv += 1.0 - st.v[i];
        res.series.push_back({st.s, v_only ? std::numeric_limits<double>::quiet_NaN()
                                           : detail::safe_front(st, Field::U),
                              detail::safe_front(st, Field::V), mu * c.dx, mv * c.dx});
    };
    sample();
    for (long k = 1; k <= steps; ++k) {
        const auto& v = st.v;
        detail::step(v, nv, 0.5, c.dt, c.dx, [](std::size_t, double w) { return -w * (1.0 - w); });
        if (!v_only)
            detail::step(st.u, nu, du, c.dt, c.dx, [&](std::size_t i, double w) {
                return -beta * w * (1.0 - w) - w * (1.0 - v[i]);
            });
        detail::clamp_or_throw(nv, "v");
        st.v.swap(nv);
        if (!v_only) {
            detail::clamp_or_throw(nu, "u");
            st.u.swap(nu);
        }
        st.s = double(k) * c.dt;
        if (k % every == 0) {
            if (detail::total_variation(st.v) > tv_cap_v ||
                (!v_only && detail::total_variation(st.u) > tv_cap_u))
                throw RuntimeError("explicit scheme unstable: total variation grew");
            sample();
        }
    }
    res.final_state = std::move(st);
    return res;
}

/// Least-squares slope of front position against time on [s1, s2].
inline double front_speed(const std::vector<FrontSample>& series, double s1, double s2,
                          Field f = Field::U) {
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& r : series) {
        if (r.s < s1 - 1e-12 || r.s > s2 + 1e-12) continue;
        const double y = f == Field::U ? r.front_u : r.front_v;
        if (!std::isfinite(y)) throw RuntimeError("front missing inside the speed window");
        n += 1;
        sx += r.s;
        sy += y;
        sxx += r.s * r.s;
        sxy += r.s * y;
    }
    require(n >= 10, "speed window must contain at least 10 samples");
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct RefinementCheck {
    double speed_coarse, speed_fine, relative_change;
};

/// Re-run with dx/2 and dt/4 and compare measured speeds.
inline RefinementCheck refinement_check(const PdeConfig& c, double s1, double s2,
                                        Field f = Field::U) {
    PdeConfig fine = c;
    fine.dx = c.dx / 2.0;
    fine.dt = c.dt / 4.0;
    const double a = front_speed(solve_coupled(c).series, s1, s2, f);
    const double b = front_speed(solve_coupled(fine).series, s1, s2, f);
    return {a, b, std::abs(b - a) / std::abs(a)};
}

struct WaveResidual {
    double speed;        // c used in the ODE
    double l2;           // sqrt(sum r_i^2 dx) of the u equation near the front
    double l2_v;         // same for the v equation (reported, not budgeted)
    double budget;       // 10 dx^2
};

/// Discrete residual of the traveling-wave ODEs for the final profile,
/// written in the reflected frame (w(z) = u(cs - z)):
///   (sigma2/2) U'' + c U' - beta U(1-U) - U(1-V) = 0,
///   (1/2) V'' + c V' - V(1-V) = 0,
/// with one speed c for both components (the u-front speed fitted on
/// [s1, s2]), and the sum restricted to
/// |y - front| <= half_width.
inline WaveResidual wave_residual(const PdeResult& r, const Params& p, double s1, double s2,
                                  double half_width = 10.0) {
    const PdeState& st = r.final_state;
    const double c = front_speed(r.series, s1, s2, Field::U);
    const double yf = front_position(st, Field::U);
    const double dx = st.dx;
    double su = 0.0, sv = 0.0;
    for (std::size_t i = 1; i + 1 < st.u.size(); ++i) {
        if (std::abs(st.y(i) - yf) > half_width) continue;
        const double U = st.u[i], V = st.v[i];
        const double U2 = (st.u[i + 1] - 2 * U + st.u[i - 1]) / (dx * dx);
        const double U1 = (st.u[i + 1] - st.u[i - 1]) / (2 * dx);
        const double V2 = (st.v[i + 1] - 2 * V + st.v[i - 1]) / (dx * dx);
        const double V1 = (st.v[i + 1] - st.v[i - 1]) / (2 * dx);
        const double ru = 0.5 * p.sigma2 * U2 + c * U1 - p.beta * U * (1 - U) - U * (1 - V);
        const double rv = 0.5 * V2 + c * V1 - V * (1 - V);
        su += ru * ru * dx;
        sv += rv * rv * dx;
    }
    return {c, std::sqrt(su), std::sqrt(sv), 10.0 * dx * dx};
}

} // namespace rbbm
