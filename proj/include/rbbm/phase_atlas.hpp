// SPDX-License-Identifier: MIT
/**
 * Phase atlas of the two-type reducible branching Brownian motion.
 *
 * Type-1 particles diffuse with variance sigma2 per unit time, split at rate
 * beta and emit type-2 particles at rate 1; type-2 particles are standard
 * BBM.  This header holds the purely analytic layer: region classification,
 * the derived speeds, the horizon-dependent approximation families, their
 * centering sequences and the limit constants that have closed forms.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "errors.hpp"
#include "quadrature.hpp"

namespace rbbm {

inline constexpr double kSqrt2 = std::numbers::sqrt2;
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kBoundaryTol = 1e-12;

struct Params {
    double beta = 1.0;
    double sigma2 = 1.0;

    double sigma() const { return std::sqrt(sigma2); }
    bool valid() const {
        return std::isfinite(beta) && std::isfinite(sigma2) && beta > 0.0 &&
               sigma2 > 0.0;
    }
};

inline void validate(const Params& p) {
    require(p.valid(), "parameters must be finite and positive (beta=" +
                           std::to_string(p.beta) +
                           ", sigma2=" + std::to_string(p.sigma2) + ")");
}

// ---------------------------------------------------------------------------
// Regions

enum class Region { C_I, C_II, C_III, B_I_II, B_I_III, B_II_III, POINT_1_1 };

inline std::string_view to_string(Region r) {
    switch (r) {
    case Region::C_I: return "C_I";
    case Region::C_II: return "C_II";
    case Region::C_III: return "C_III";
    case Region::B_I_II: return "B_I_II";
    case Region::B_I_III: return "B_I_III";
    case Region::B_II_III: return "B_II_III";
    case Region::POINT_1_1: return "POINT_1_1";
    }
    return "?";
}

/// Classify (beta, sigma2).  Curves are matched in the sigma2 coordinate
/// with absolute tolerance tol; everything else uses strict comparisons.
inline Region classify(const Params& p, double tol = kBoundaryTol) {
    validate(p);
    const double b = p.beta, s = p.sigma2;
    if (std::abs(b - 1.0) <= tol && std::abs(s - 1.0) <= tol)
        return Region::POINT_1_1;
    if (b <= 1.0) {
        const double curve = 1.0 / b;
        if (std::abs(s - curve) <= tol) return Region::B_I_II;
        return s > curve ? Region::C_I : Region::C_II;
    }
    const double upper = b / (2.0 * b - 1.0); // 1/beta + 1/sigma2 = 2
    const double lower = 2.0 - b;             // beta + sigma2 = 2
    if (std::abs(s - upper) <= tol) return Region::B_I_III;
    if (std::abs(s - lower) <= tol) return Region::B_II_III;
    if (s > upper) return Region::C_I;
    if (s < lower) return Region::C_II;
    return Region::C_III;
}

// ---------------------------------------------------------------------------
// Derived constants

struct StarConstants {
    double b, a, p, v;
};

struct DerivedConstants {
    double v;     // type-1 speed sqrt(2 beta sigma2)
    double theta; // tilt sqrt(2 beta / sigma2)
    std::optional<StarConstants> star; // defined for beta > 1, sigma2 < 1
};

inline bool star_defined(const Params& p) {
    return p.beta > 1.0 && p.sigma2 < 1.0;
}

inline StarConstants star_constants(const Params& p) {
    validate(p);
    require(star_defined(p),
            "starred constants need beta > 1 and sigma2 < 1");
    const double bm1 = p.beta - 1.0, oms = 1.0 - p.sigma2;
    StarConstants c{};
    c.b = std::sqrt(2.0 * bm1 / oms);
    c.a = p.sigma2 * c.b;
    c.p = (p.sigma2 + p.beta - 2.0) / (2.0 * bm1 * oms);
    c.v = (p.beta - p.sigma2) / std::sqrt(2.0 * bm1 * oms);
    return c;
}

inline DerivedConstants derived_constants(const Params& p) {
    validate(p);
    DerivedConstants d{};
    d.v = std::sqrt(2.0 * p.beta * p.sigma2);
    d.theta = std::sqrt(2.0 * p.beta / p.sigma2);
    if (star_defined(p)) d.star = star_constants(p);
    return d;
}

/// Residuals of the two identities satisfied by the maximisers:
///   (beta - a^2/(2 sigma2)) p + (1 - b^2/2)(1-p)  and  b v - beta - sigma2 b^2/2.
struct IdentityResiduals {
    double constraint;
    double tangency;
};

inline IdentityResiduals identity_residuals(const Params& p) {
    const auto c = star_constants(p);
    return {(p.beta - c.a * c.a / (2.0 * p.sigma2)) * c.p +
                (1.0 - c.b * c.b / 2.0) * (1.0 - c.p),
            c.b * c.v - p.beta - p.sigma2 * c.b * c.b / 2.0};
}

/// Overall asymptotic speed of the maximum: v in C_I, sqrt2 in C_II, v* in C_III.
inline double front_speed(const Params& p) {
    const auto d = derived_constants(p);
    switch (classify(p)) {
    case Region::C_III: return d.star->v;
    case Region::C_I:
    case Region::B_I_III:
    case Region::POINT_1_1: return d.v;
    default: return kSqrt2;
    }
}

// ---------------------------------------------------------------------------
// Approximation families

enum class Family { B13_plus, B13_minus, B23_plus, B23_minus, P11_f1, P11_f2, P11_f3 };

inline std::string_view to_string(Family f) {
    switch (f) {
    case Family::B13_plus: return "B13_plus";
    case Family::B13_minus: return "B13_minus";
    case Family::B23_plus: return "B23_plus";
    case Family::B23_minus: return "B23_minus";
    case Family::P11_f1: return "P11_f1";
    case Family::P11_f2: return "P11_f2";
    case Family::P11_f3: return "P11_f3";
    }
    return "?";
}

inline Family family_from_string(std::string_view s) {
    for (Family f : {Family::B13_plus, Family::B13_minus, Family::B23_plus,
                     Family::B23_minus, Family::P11_f1, Family::P11_f2,
                     Family::P11_f3})
        if (to_string(f) == s) return f;
    throw ValidationError("unknown family '" + std::string(s) + "'");
}

/// h = infinity is the unperturbed target; t^{-inf} is defined as 0.
inline constexpr double kHInf = std::numeric_limits<double>::infinity();

struct ApproxFamily {
    Params target;
    Family family = Family::B23_plus;
    double h = kHInf;
};

inline bool is_point_family(Family f) {
    return f == Family::P11_f1 || f == Family::P11_f2 || f == Family::P11_f3;
}

/// Boundary the family approaches.
inline Region target_region(Family f) {
    switch (f) {
    case Family::B13_plus:
    case Family::B13_minus: return Region::B_I_III;
    case Family::B23_plus:
    case Family::B23_minus: return Region::B_II_III;
    default: return Region::POINT_1_1;
    }
}

/// Open region the perturbed parameters must lie in for finite h.
inline Region approach_region(Family f) {
    switch (f) {
    case Family::B13_minus:
    case Family::P11_f1: return Region::C_I;
    case Family::B23_minus:
    case Family::P11_f2: return Region::C_II;
    default: return Region::C_III;
    }
}

/// Saturation threshold of h: beyond it the centering no longer changes.
inline double saturation(Family f) { return is_point_family(f) ? 1.0 : 0.5; }

inline void validate(const ApproxFamily& f) {
    validate(f.target);
    require(f.h > 0.0 && !std::isnan(f.h), "h must lie in (0, inf]");
    require(classify(f.target) == target_region(f.family),
            std::string("target (") + std::to_string(f.target.beta) + ", " +
                std::to_string(f.target.sigma2) + ") is not on " +
                std::string(to_string(target_region(f.family))) +
                " as required by " + std::string(to_string(f.family)));
}

/// t^{-h}, with t^{-inf} = 0.
inline double perturbation(double h, double t) {
    return std::isinf(h) ? 0.0 : std::pow(t, -h);
}

/// Largest violation of the family's defining equations by q at horizon t;
/// zero up to rounding for every output of make_approximation.
inline double defining_residual(const ApproxFamily& f, const Params& q, double t) {
    const double e = perturbation(f.h, t);
    const double inv = 1.0 / q.beta + 1.0 / q.sigma2, sum = q.beta + q.sigma2;
    const double diag = std::abs(q.beta - q.sigma2);
    switch (f.family) {
    case Family::B13_plus: return std::abs(inv - (2.0 + e));
    case Family::B13_minus: return std::abs(inv - (2.0 - e));
    case Family::B23_plus: return std::abs(sum - (2.0 + e));
    case Family::B23_minus: return std::abs(sum - (2.0 - e));
    case Family::P11_f1: return std::max(std::abs(inv - (2.0 - e)), diag);
    case Family::P11_f2: return std::max(std::abs(sum - (2.0 - e)), diag);
    case Family::P11_f3:
        return std::max(std::abs(sum - (2.0 + e)), std::abs(inv - (2.0 + e)));
    }
    return 0.0;
}

/// Horizon-t parameters (beta_t, sigma2_t) of an approximation family.
inline Params make_approximation(const ApproxFamily& f, double t) {
    validate(f);
    require(t > 1.0, "make_approximation needs t > 1");
    const double e = perturbation(f.h, t);
    if (e == 0.0) return f.target;
    Params q = f.target;
    switch (f.family) {
    case Family::B13_plus:
    case Family::B13_minus: {
        const double rhs = (f.family == Family::B13_plus ? 2.0 + e : 2.0 - e) -
                           1.0 / f.target.beta;
        require(rhs > 0.0, "B13 family infeasible at this t");
        q.sigma2 = 1.0 / rhs;
        break;
    }
    case Family::B23_plus: q.beta = f.target.beta + e; break;
    case Family::B23_minus: q.beta = f.target.beta - e; break;
    case Family::P11_f1:
        require(e < 2.0, "P11_f1 infeasible at this t");
        q.beta = q.sigma2 = 2.0 / (2.0 - e);
        break;
    case Family::P11_f2:
        require(e < 2.0, "P11_f2 infeasible at this t");
        q.beta = q.sigma2 = 1.0 - e / 2.0;
        break;
    case Family::P11_f3: {
        // roots of x^2 - (2+e)x + 1; the small root is taken as 1/large for
        // accuracy when e is tiny.
        const double s = 2.0 + e;
        q.beta = 0.5 * (s + std::sqrt(e * (4.0 + e)));
        q.sigma2 = 1.0 / q.beta;
        break;
    }
    }
    require(q.valid(), "approximation produced invalid parameters");
    const Region got = classify(q);
    require(got == approach_region(f.family),
            "approximation at t=" + std::to_string(t) + " lies in " +
                std::string(to_string(got)) + ", expected " +
                std::string(to_string(approach_region(f.family))));
    return q;
}

// ---------------------------------------------------------------------------
// Centering sequences  m(t) = l t - s log t

struct Centering {
    double leading = 0.0;
    double log_coeff = 0.0;
    double value(double t) const { return leading * t - log_coeff * std::log(t); }
};

/// Table-1 centering of a parameter pair according to its region.
inline Centering table1_centering(const Params& p) {
    const auto d = derived_constants(p);
    switch (classify(p)) {
    case Region::C_I: return {d.v, 3.0 / (2.0 * d.theta)};
    case Region::C_II:
    case Region::B_I_II: return {kSqrt2, 3.0 / (2.0 * kSqrt2)};
    case Region::C_III: return {d.star->v, 0.0};
    case Region::B_II_III: return {kSqrt2, 1.0 / (2.0 * kSqrt2)};
    case Region::B_I_III:
    case Region::POINT_1_1: return {d.v, 1.0 / (2.0 * d.theta)};
    }
    return {};
}

/// Centering of the family at horizon t, evaluated at the perturbed params.
inline Centering centering(const ApproxFamily& f, double t) {
    const Params q = make_approximation(f, t);
    const double hp = std::min(f.h, saturation(f.family));
    const auto d = derived_constants(q);
    // On a boundary itself (h = inf) the starred speed is still well defined
    // for the B13/B23/P11_f3 targets except at (1,1); there v* = v = sqrt2.
    auto vstar = [&]() {
        if (star_defined(q)) return d.star->v;
        return f.family == Family::B23_plus ? kSqrt2 : d.v;
    };
    switch (f.family) {
    case Family::B13_plus: return {vstar(), hp / d.theta};
    case Family::B13_minus: return {d.v, (3.0 - 4.0 * hp) / (2.0 * d.theta)};
    case Family::B23_plus: return {vstar(), hp / kSqrt2};
    case Family::B23_minus: return {kSqrt2, (3.0 - 4.0 * hp) / (2.0 * kSqrt2)};
    case Family::P11_f1: return {d.v, (3.0 - 2.0 * hp) / (2.0 * kSqrt2)};
    case Family::P11_f2: return {kSqrt2, (3.0 - 2.0 * hp) / (2.0 * kSqrt2)};
    case Family::P11_f3: return {vstar(), hp / (2.0 * kSqrt2)};
    }
    return {};
}

// ---------------------------------------------------------------------------
// Limit constants (without the decoration prefactors C_star, C(rho), gamma)

/// Closed-form / quadrature constant multiplying the limiting intensity of
/// the family.  Parameters are those of the target.  At the critical h the
/// value is obtained by adaptive quadrature.
inline double c_constant(const ApproxFamily& f, double tol = 1e-10) {
    validate(f);
    const Params& p = f.target;
    const double h = f.h;
    const double sig = p.sigma(), s2 = p.sigma2;
    const auto d = derived_constants(p);
    const double gap = d.theta - d.v;
    const double oms = 1.0 - s2;
    switch (f.family) {
    case Family::B13_minus:
        if (h < 0.5) return 2.0 * gap / (p.beta * p.beta * sig * sig * sig);
        if (h > 0.5) return 2.0 / (sig * gap);
        return 2.0 * quad([&](double l) {
                   return gap * l / (s2 * sig) *
                          std::exp(-p.beta * l - gap * gap * l * l / (2.0 * s2));
               }, 0.0, kInf, tol);
    case Family::B13_plus:
        if (h < 0.5) return std::sqrt(2.0 * kPi) / oms * d.v / gap;
        if (h > 0.5) return 2.0 / (sig * gap);
        return quad([&](double x) {
                   return (std::sqrt(2.0 * p.beta) / oms + 2.0 * gap * x / (s2 * sig)) *
                          std::exp(-gap * gap * x * x / (2.0 * s2));
               }, 0.0, kInf, tol);
    case Family::B23_plus:
        if (h < 0.5) return std::sqrt(kPi / 2.0) / (oms * oms);
        if (h > 0.5) return 1.0 / (kSqrt2 * oms);
        return quad([&](double x) {
                   return (1.0 / (kSqrt2 * oms) + kSqrt2 * oms * x) *
                          std::exp(-oms * oms * x * x);
               }, -1.0 / (2.0 * oms * oms), kInf, tol);
    case Family::B23_minus:
        if (h < 0.5) return kSqrt2 * oms;
        if (h > 0.5) return 1.0 / (kSqrt2 * oms);
        return kSqrt2 * quad([&](double x) {
                   return oms * x * std::exp(-x - oms * oms * x * x);
               }, 0.0, kInf, tol);
    case Family::P11_f1:
    case Family::P11_f2:
        if (h == 1.0) return 1.0 - std::exp(-1.0);
        return 1.0;
    case Family::P11_f3:
        if (h < 1.0) return std::sqrt(kPi / kSqrt2);
        if (h > 1.0) return 1.0;
        // xi = sin^2(phi) removes the square-root end-point behaviour of
        // sqrt(2 xi (1 - xi)) = sin(2 phi)/sqrt2; d xi = sin(2 phi) d phi.
        return quad([&](double phi) {
                   const double k = std::sin(2.0 * phi) / kSqrt2;
                   return std::sin(2.0 * phi) * std::sqrt(2.0 / kPi) * quad([&](double z) {
                              return z * z * std::exp(k * z - 0.5 * z * z);
                          }, 0.0, kInf, tol);
               }, 0.0, kPi / 2.0, tol);
    }
    return 0.0;
}

} // namespace rbbm
