// SPDX-License-Identifier: MIT
/**
 * Functionals of single-type BBM: the additive and derivative martingales
 * and the Gibbs-weighted sums whose limits are governed by the Gaussian and
 * Rayleigh (meander) laws.
 *
 * Profiles G are piecewise-linear tables; their integrals against the two
 * limit laws are evaluated in closed form segment by segment, with adaptive
 * quadrature kept as an independent route.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "bbm_engine.hpp"
#include "errors.hpp"
#include "phase_atlas.hpp"
#include "quadrature.hpp"

namespace rbbm {

// ---------------------------------------------------------------------------
// Martingales

inline void require_single_type(const Snapshot& s) {
    require(s.count2 == 0, "functional needs a single-type snapshot");
}

/// W_t(lambda) = sum exp(lambda X_u(t) - (beta + lambda^2 sigma2 / 2) t).
inline double additive_W(const Snapshot& s, const Params& p, double lambda) {
    require_single_type(s);
    const double drift = (p.beta + 0.5 * lambda * lambda * p.sigma2) * s.horizon;
    double w = 0.0;
    for (double x : s.position) w += std::exp(lambda * x - drift);
    return w;
}

/// Z_t = sum (v t - X_u(t)) exp(theta X_u(t) - 2 beta t).
inline double derivative_Z(const Snapshot& s, const Params& p) {
    require_single_type(s);
    const auto d = derived_constants(p);
    const double t = s.horizon;
    double z = 0.0;
    for (double x : s.position) z += (d.v * t - x) * std::exp(d.theta * x - 2.0 * p.beta * t);
    return z;
}

// ---------------------------------------------------------------------------
// Piecewise-linear profiles

/// G as a list of breakpoints (z_i, g_i) with nondecreasing z; G = 0 outside
/// [z_0, z_n].  A repeated abscissa encodes a jump.
class PiecewiseLinear {
public:
    struct Knot {
        double z, g;
    };

    PiecewiseLinear() = default;
    explicit PiecewiseLinear(std::vector<Knot> knots) : knots_(std::move(knots)) {
        require(knots_.size() >= 2, "profile needs at least two knots");
        for (std::size_t i = 0; i < knots_.size(); ++i) {
            require(std::isfinite(knots_[i].z) && std::isfinite(knots_[i].g),
                    "profile knots must be finite");
            if (i > 0) require(knots_[i].z >= knots_[i - 1].z, "profile abscissae must be nondecreasing");
        }
    }

    /// Indicator of [a, b].
    static PiecewiseLinear indicator(double a, double b, double height = 1.0) {
        require(a < b, "indicator needs a < b");
        return PiecewiseLinear({{a, 0.0}, {a, height}, {b, height}, {b, 0.0}});
    }

    double operator()(double z) const {
        if (z < knots_.front().z || z > knots_.back().z) return 0.0;
        double best = -kInf;
        bool found = false;
        for (std::size_t i = 0; i + 1 < knots_.size(); ++i) {
            const Knot& a = knots_[i];
            const Knot& b = knots_[i + 1];
            if (z < a.z || z > b.z) continue;
            const double v = b.z > a.z ? a.g + (b.g - a.g) * (z - a.z) / (b.z - a.z)
                                       : std::max(a.g, b.g);
            best = found ? std::max(best, v) : v;
            found = true;
        }
        return found ? best : 0.0;
    }

    double sup_abs() const {
        double m = 0.0;
        for (const auto& k : knots_) m = std::max(m, std::abs(k.g));
        return m;
    }

    PiecewiseLinear scaled(double c) const {
        auto k = knots_;
        for (auto& x : k) x.g *= c;
        return PiecewiseLinear(std::move(k));
    }

    const std::vector<Knot>& knots() const { return knots_; }

private:
    std::vector<Knot> knots_;
};

struct GibbsFunctionalSpec {
    PiecewiseLinear G;
    double r = 0.0;       // shift r_t
    double h = 1.0;       // scale h_t (nonzero)
    double lambda = 0.0;  // tilt lambda_t, unused by the critical functional

    /// F_t(z) = G((z - r_t) / h_t).
    double F(double z) const { return G((z - r) / h); }
};

inline void validate(const GibbsFunctionalSpec& s) {
    require(s.h != 0.0 && std::isfinite(s.h), "h_t must be finite and nonzero");
    require(std::isfinite(s.r) && std::isfinite(s.lambda), "r_t and lambda_t must be finite");
}

/// lambda_t = sqrt2 (1 - 1/alpha_t).
inline double lambda_from_alpha(double alpha) {
    require(alpha > 0.0, "alpha_t must be > 0");
    return kSqrt2 * (1.0 - 1.0 / alpha);
}

namespace detail {

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }
inline double norm_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }

/// Linear pieces of F_t in the z variable: F = c0 + c1 z on [lo, hi].
struct Piece {
    double lo, hi, c0, c1;
};

inline std::vector<Piece> pieces(const GibbsFunctionalSpec& s) {
    std::vector<Piece> out;
    const auto& k = s.G.knots();
    for (std::size_t i = 0; i + 1 < k.size(); ++i) {
        if (k[i + 1].z <= k[i].z) continue;
        // z = r + h w for w in [w_a, w_b]
        const double za = s.r + s.h * k[i].z, zb = s.r + s.h * k[i + 1].z;
        const double slope_w = (k[i + 1].g - k[i].g) / (k[i + 1].z - k[i].z);
        const double c1 = slope_w / s.h;
        const double c0 = k[i].g - c1 * za;
        out.push_back({std::min(za, zb), std::max(za, zb), c0, c1});
    }
    return out;
}

} // namespace detail

/// <F_t, mu_Gau> = (2 pi)^{-1/2} int F_t(z) e^{-z^2/2} dz, exact per segment.
inline double gaussian_pairing(const GibbsFunctionalSpec& s) {
    validate(s);
    using namespace detail;
    double v = 0.0;
    for (const auto& p : pieces(s))
        v += p.c0 * (norm_cdf(p.hi) - norm_cdf(p.lo)) + p.c1 * (norm_pdf(p.lo) - norm_pdf(p.hi));
    return v;
}

/// <F_t, mu_Mea> = int_0^inf F_t(z) z e^{-z^2/2} dz, exact per segment.
inline double meander_pairing(const GibbsFunctionalSpec& s) {
    validate(s);
    using namespace detail;
    double v = 0.0;
    for (auto p : pieces(s)) {
        p.lo = std::max(p.lo, 0.0);
        if (p.hi <= p.lo) continue;
        const double ea = std::exp(-0.5 * p.lo * p.lo), eb = std::exp(-0.5 * p.hi * p.hi);
        const double m1 = ea - eb;
        const double m2 = p.lo * ea - p.hi * eb +
                          std::sqrt(2.0 * kPi) * (norm_cdf(p.hi) - norm_cdf(p.lo));
        v += p.c0 * m1 + p.c1 * m2;
    }
    return v;
}

/// Quadrature routes to the same pairings, integrating piece by piece.
inline double gaussian_pairing_quadrature(const GibbsFunctionalSpec& s, double tol = 1e-10) {
    validate(s);
    double v = 0.0;
    for (const auto& p : detail::pieces(s))
        v += quad([&](double z) { return (p.c0 + p.c1 * z) * detail::norm_pdf(z); }, p.lo, p.hi, tol);
    return v;
}

inline double meander_pairing_quadrature(const GibbsFunctionalSpec& s, double tol = 1e-10) {
    validate(s);
    double v = 0.0;
    for (const auto& p : detail::pieces(s)) {
        const double lo = std::max(p.lo, 0.0);
        if (p.hi <= lo) continue;
        v += quad([&](double z) { return (p.c0 + p.c1 * z) * z * std::exp(-0.5 * z * z); }, lo,
                  p.hi, tol);
    }
    return v;
}

/// W^{F_t}_t(lambda_t) = sum F_t((lambda_t t - X)/sqrt t) e^{lambda_t X - (lambda_t^2/2 + 1) t}
/// for standard BBM.
inline double gibbs_gaussian_functional(const Snapshot& snap, const GibbsFunctionalSpec& s,
                                        double t) {
    require_single_type(snap);
    validate(s);
    require(t > 0.0, "Gibbs functional needs t > 0");
    const double rt = std::sqrt(t), lam = s.lambda;
    const double drift = (0.5 * lam * lam + 1.0) * t;
    double w = 0.0;
    for (double x : snap.position) {
        const double f = s.F((lam * t - x) / rt);
        if (f != 0.0) w += f * std::exp(lam * x - drift);
    }
    return w;
}

/// W^{F_t}_t(sqrt2) = sum F_t((sqrt2 t - X)/sqrt t) e^{-sqrt2 (sqrt2 t - X)}.
inline double gibbs_mea_functional(const Snapshot& snap, const GibbsFunctionalSpec& s,
                                   double t) {
    require_single_type(snap);
    validate(s);
    require(t > 0.0, "Gibbs functional needs t > 0");
    const double rt = std::sqrt(t);
    double w = 0.0;
    for (double x : snap.position) {
        const double gap = kSqrt2 * t - x;
        const double f = s.F(gap / rt);
        if (f != 0.0) w += f * std::exp(-kSqrt2 * gap);
    }
    return w;
}

} // namespace rbbm
